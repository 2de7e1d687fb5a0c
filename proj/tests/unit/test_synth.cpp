#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>

#include "../support/oracles.hpp"
#include "svdkd/errors.hpp"
#include "svdkd/losses.hpp"
#include "svdkd/spectral.hpp"
#include "svdkd/synth.hpp"

using namespace svdkd;

TEST_CASE("cell counts and ordering") {
  SynthConfig cfg;
  cfg.n_identities = 5;
  cfg.samples_per_modality = 3;
  cfg.d = 16;
  cfg.latent_rank = 16;
  cfg.d_in = 8;
  const EmbeddingSet set = generate_dataset(cfg);
  CHECK(set.size() == 5 * 4 * 3);
  CHECK(set.source_tag() == "synthetic");
  CHECK(set.input_dim() == 8);
  std::map<std::pair<std::int64_t, Modality>, int> cells;
  for (std::size_t i = 0; i < set.size(); ++i) {
    CHECK(set.meta()[i].sample_id == static_cast<std::int64_t>(i));
    cells[{set.meta()[i].identity_id, set.meta()[i].modality}]++;
  }
  CHECK(cells.size() == 20);
  for (const auto& [cell, count] : cells) CHECK(count == 3);
}

TEST_CASE("same seed gives a bit-identical set") {
  SynthConfig cfg;
  cfg.n_identities = 20;
  CHECK(generate_dataset(cfg) == generate_dataset(cfg));
  SynthConfig other = cfg;
  other.seed = 1;
  CHECK_FALSE(generate_dataset(cfg) == generate_dataset(other));
}

TEST_CASE("noiseless collapse") {
  SynthConfig cfg;
  cfg.n_identities = 6;
  cfg.d = 24;
  cfg.latent_rank = 24;
  cfg.noise_sigma = 0.0;
  cfg.modality_gap = 0.0;
  const EmbeddingSet set = generate_dataset(cfg);
  for (std::size_t i = 1; i < set.size(); ++i) {
    if (set.meta()[i].identity_id != set.meta()[i - 1].identity_id) continue;
    CHECK(set.features().row(static_cast<Eigen::Index>(i)) ==
          set.features().row(static_cast<Eigen::Index>(i - 1)));
  }
  // Positives sit at distance 0, so each anchor's term collapses to the bare
  // hinge max(margin - d_nearest_negative, 0).
  Labels labels;
  for (const auto& m : set.meta()) labels.push_back(m.identity_id);
  double expected = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    double nearest = INFINITY;
    for (std::size_t j = 0; j < set.size(); ++j)
      if (labels[i] != labels[j])
        nearest = std::min(nearest, (set.features().row(static_cast<Eigen::Index>(i)) -
                                     set.features().row(static_cast<Eigen::Index>(j)))
                                        .squaredNorm());
    expected += std::max(0.0, 0.3 - nearest);
  }
  expected /= static_cast<double>(set.size());
  const double value = triplet_loss(set.features(), labels, 0.3).value;
  CHECK(value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(value == doctest::Approx(oracle::triplet_exhaustive(set.features(), labels, 0.3)).epsilon(1e-12));
}

TEST_CASE("default spectrum is long-tailed and follows the power law") {
  SynthConfig cfg;  // gamma 1.2, d 256, 256 identities x 4 x 2 = 2048 rows
  const EmbeddingSet set = generate_dataset(cfg);
  REQUIRE(set.size() == 2048);
  const SpectrumReport rep = spectrum_report(thin_svd(set.features()));
  CHECK(rep.effective_rank_90 <= 64);

  const auto expected = oracle::power_law_cumulative(cfg.latent_rank, cfg.spectrum_decay);
  double worst = 0.0;
  for (std::size_t k = 0; k < expected.size(); ++k)
    worst = std::max(worst, std::abs(rep.cumulative(static_cast<Eigen::Index>(k)) - expected[k]));
  CHECK(worst < 0.05);

  std::size_t analytic_rank = 0;
  while (expected[analytic_rank] < 0.9) ++analytic_rank;
  CHECK(rep.effective_rank_90 == analytic_rank + 1);

  std::vector<double> imp(rep.importance.data(), rep.importance.data() + rep.importance.size());
  std::sort(imp.begin(), imp.end(), std::greater<>());
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  const double top = std::accumulate(imp.begin(), imp.begin() + static_cast<long>(imp.size() / 10), 0.0);
  CHECK(top / total >= 0.5);
}

TEST_CASE("noiseless rows are nearest to their own prototype") {
  SynthConfig cfg;
  cfg.n_identities = 20;
  cfg.noise_sigma = 0.0;
  const EmbeddingSet set = generate_dataset(cfg);
  // Prototype estimate: mean over the identity's rows, which cancels nothing
  // but the fixed modality offsets average out identically for every id.
  Matrix protos = Matrix::Zero(20, static_cast<Eigen::Index>(cfg.d));
  for (std::size_t i = 0; i < set.size(); ++i)
    protos.row(set.meta()[i].identity_id) += set.features().row(static_cast<Eigen::Index>(i)) / 8.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    Eigen::Index best = 0;
    (protos.rowwise() - set.features().row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm().minCoeff(&best);
    CHECK(best == set.meta()[i].identity_id);
  }
}

TEST_CASE("held-out split") {
  SynthConfig cfg;
  cfg.n_identities = 10;
  cfg.d = 16;
  cfg.latent_rank = 16;
  const SynthSplit split = generate_split(cfg, 3);
  CHECK(split.train.identity_count() == 7);
  CHECK(split.heldout.identity_count() == 3);
  CHECK(split.train.size() + split.heldout.size() == generate_dataset(cfg).size());
  CHECK(split.heldout.raw_inputs().has_value());
  CHECK_THROWS_AS(generate_split(cfg, 0), ArgumentError);
  CHECK_THROWS_AS(generate_split(cfg, 10), ArgumentError);
}

TEST_CASE("config validation") {
  SynthConfig cfg;
  cfg.latent_rank = cfg.d + 1;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = SynthConfig{};
  cfg.spectrum_decay = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = SynthConfig{};
  cfg.noise_sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}
