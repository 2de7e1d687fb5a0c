#pragma once

#include <cstddef>
#include <vector>

#include "svdkd/embedding_set.hpp"
#include "svdkd/random.hpp"

namespace svdkd {

// P identity groups of K row indices each, stored group-major.
struct Batch {
  std::vector<std::size_t> indices;
  std::size_t identities = 0;        // P
  std::size_t per_identity = 0;      // K

  std::size_t size() const { return indices.size(); }
};

// Identity-balanced PK sampling with modality coverage.
//
// P distinct identities are drawn uniformly. Inside each identity the K
// samples are taken round-robin over the modalities it owns (in modality
// order), each modality served from its own shuffled pool, so an identity
// with two or more modalities always yields at least two in its group, and
// an identity owning two samples of each of the four modalities yields
// exactly two per modality when K = 8. Samples are drawn without replacement
// until the identity is exhausted; pools are then reshuffled and reused.
// Identities with a single modality are allowed and reported via warn().
//
// Throws SamplingError when the set has fewer than P identities and
// ArgumentError when P < 1 or K < 2.
Batch sample_batch(const EmbeddingSet& set, std::size_t identities, std::size_t per_identity,
                   Rng& rng);

}  // namespace svdkd
