#include "svdkd/sampler.hpp"

#include <array>
#include <string>

#include "svdkd/diagnostics.hpp"
#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

using ModalityPools = std::array<std::vector<std::size_t>, kModalityCount>;

// Draws K rows for one identity: round-robin over owned modalities, without
// replacement until every pool is spent, then refilled.
void draw_group(const ModalityPools& pools, std::size_t count, Rng& rng,
                std::vector<std::size_t>& out) {
  ModalityPools queues = pools;
  for (auto& q : queues) rng.shuffle(q);
  std::array<std::size_t, kModalityCount> cursor{};

  std::size_t taken = 0;
  std::size_t slot = 0;
  while (taken < count) {
    bool any_left = false;
    for (std::size_t m = 0; m < kModalityCount; ++m) {
      if (cursor[m] < queues[m].size()) any_left = true;
    }
    if (!any_left) {
      for (std::size_t m = 0; m < kModalityCount; ++m) {
        queues[m] = pools[m];
        rng.shuffle(queues[m]);
        cursor[m] = 0;
      }
    }
    const std::size_t m = slot % kModalityCount;
    ++slot;
    if (cursor[m] >= queues[m].size()) continue;
    out.push_back(queues[m][cursor[m]++]);
    ++taken;
  }
}

}  // namespace

Batch sample_batch(const EmbeddingSet& set, std::size_t identities, std::size_t per_identity,
                   Rng& rng) {
  if (identities < 1) throw ArgumentError("sample_batch: P must be at least 1");
  if (per_identity < 2) throw ArgumentError("sample_batch: K must be at least 2");
  if (set.identity_count() < identities) {
    throw SamplingError("sample_batch: need " + std::to_string(identities) +
                        " identities but the set has " + std::to_string(set.identity_count()));
  }

  std::vector<ModalityPools> by_identity(set.identity_count());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& m = set.meta()[i];
    by_identity[static_cast<std::size_t>(m.identity_id)][index_of(m.modality)].push_back(i);
  }

  std::vector<std::size_t> order(set.identity_count());
  for (std::size_t c = 0; c < order.size(); ++c) order[c] = c;
  rng.shuffle(order);

  Batch batch;
  batch.identities = identities;
  batch.per_identity = per_identity;
  batch.indices.reserve(identities * per_identity);
  for (std::size_t g = 0; g < identities; ++g) {
    const auto& pools = by_identity[order[g]];
    std::size_t owned = 0;
    for (const auto& p : pools) owned += p.empty() ? 0 : 1;
    if (owned == 1) {
      warn("identity " + std::to_string(order[g]) +
           " has a single modality; its batch group has no cross-modal pairs");
    }
    draw_group(pools, per_identity, rng, batch.indices);
  }
  return batch;
}

}  // namespace svdkd
