#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "../support/gradient_suite.hpp"
#include "../support/oracles.hpp"
#include "svdkd/diagnostics.hpp"
#include "svdkd/errors.hpp"
#include "svdkd/losses.hpp"

using namespace svdkd;

namespace {

const TaskLossConfig kCfg;

ProjectionBasis full_orthogonal_basis(Rng& rng, Eigen::Index d) {
  return ProjectionBasis{oracle::random_orthogonal(rng, d)};
}

}  // namespace

TEST_CASE("id loss") {
  SUBCASE("uniform logits") {
    const Labels labels = {0, 3, 1, 2, 2};
    CHECK(id_loss(Matrix::Zero(5, 4), labels).value == doctest::Approx(std::log(4.0)).epsilon(1e-14));
  }
  SUBCASE("peaked row against a log-sum-exp oracle") {
    Matrix z(1, 3);
    z << 10, 0, 0;
    const double expected = oracle::log_sum_exp({10, 0, 0}) - 10.0;
    CHECK(std::abs(id_loss(z, Labels{0}).value - expected) < 1e-12);
  }
  SUBCASE("label out of range") {
    CHECK_THROWS_AS(id_loss(Matrix::Zero(1, 3), Labels{3}), ArgumentError);
  }
}

TEST_CASE("triplet loss") {
  SUBCASE("inactive hinge") {
    // Anchor 0 sees d(a,p) = 1 and d(a,n) = 4, so its term is max(1 - 4 + 0.3, 0) = 0.
    // Only anchor 1 (d(a,p) = 1, d(a,n) = 1) is active, contributing the margin.
    Matrix f(4, 1);
    f << 0, 1, 2, 2.5;
    const Labels labels = {0, 0, 1, 1};
    const LossResult r = triplet_loss(f, labels, 0.3);
    CHECK(r.value == doctest::Approx(0.3 / 4.0).epsilon(1e-14));
    CHECK(r.value == doctest::Approx(oracle::triplet_exhaustive(f, labels, 0.3)).epsilon(1e-14));
  }
  SUBCASE("identical features give the margin") {
    const Labels labels = {0, 0, 1, 1};
    CHECK(triplet_loss(Matrix::Ones(4, 3), labels, 0.3).value == doctest::Approx(0.3));
  }
  SUBCASE("random batches against exhaustive mining") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix f = oracle::random_matrix(rng, 8, 4);
      const Labels labels = {0, 1, 2, 3, 0, 1, 2, 3};
      CHECK(std::abs(triplet_loss(f, labels, 0.3).value -
                     oracle::triplet_exhaustive(f, labels, 0.3)) < 1e-12);
    }
  }
  SUBCASE("mining failures") {
    CHECK_THROWS_AS(triplet_loss(Matrix::Ones(3, 2), Labels{0, 1, 1}, 0.3), MiningError);
    CHECK_THROWS_AS(triplet_loss(Matrix::Ones(2, 2), Labels{0, 0}, 0.3), MiningError);
  }
}

TEST_CASE("sdm pair loss") {
  SUBCASE("single matched pair") {
    Matrix q(1, 2), g(1, 2);
    q << 1, 0;
    g << 0, 1;
    const double v = sdm_pair_loss(q, g, Labels{4}, Labels{4}, kCfg).value;
    CHECK(std::abs(v) < 2e-8);
    CHECK(v <= 0.0);
  }
  SUBCASE("p equal to q") {
    // Each query is orthogonal to its non-match and equal to its match, with
    // two identical matches per query so q = (1/2, 1/2, 0...) is reached as
    // the softmax saturates.
    Matrix q(2, 2), g(4, 2);
    q << 1, 0, 0, 1;
    g << 1, 0, 1, 0, 0, 1, 0, 1;
    const double v = sdm_pair_loss(q, g, Labels{0, 1}, Labels{0, 0, 1, 1}, kCfg).value;
    CHECK(std::abs(v) < 1e-6);
  }
  SUBCASE("random batches against direct summation") {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix q = oracle::random_matrix(rng, 6, 5);
      const Matrix g = oracle::random_matrix(rng, 6, 5);
      const Labels lq = {0, 1, 2, 0, 1, 2};
      const Labels lg = {2, 2, 1, 0, 1, 0};
      const double expected = oracle::sdm_direct(q, g, lq, lg, kCfg.tau, kCfg.epsilon);
      CHECK(std::abs(sdm_pair_loss(q, g, lq, lg, kCfg).value - expected) <
            1e-10 * std::max(1.0, std::abs(expected)));
    }
  }
  SUBCASE("query without a match") {
    CHECK_THROWS_AS(sdm_pair_loss(Matrix::Ones(1, 2), Matrix::Ones(1, 2), Labels{0}, Labels{1}, kCfg),
                    ArgumentError);
  }
}

TEST_CASE("sdm total pair accounting") {
  Rng rng(9);
  const Matrix f = oracle::random_matrix(rng, 8, 6);
  const Labels labels = {0, 0, 0, 0, 1, 1, 1, 1};

  SUBCASE("four modalities give twelve terms matching twelve pair calls") {
    std::vector<Modality> mods;
    for (int i = 0; i < 8; ++i) mods.push_back(kAllModalities[i % 4]);
    const SdmTotalResult r = sdm_total(f, labels, mods, kCfg);
    CHECK(r.directional_terms == 12);
    CHECK_FALSE(r.degenerate);

    double expected = 0.0;
    for (auto [a, b] : modality_pairs()) {
      Matrix fa(2, 6), fb(2, 6);
      Labels la, lb;
      for (int i = 0; i < 8; ++i) {
        if (mods[i] == a) {
          fa.row(static_cast<Eigen::Index>(la.size())) = f.row(i);
          la.push_back(labels[i]);
        }
        if (mods[i] == b) {
          fb.row(static_cast<Eigen::Index>(lb.size())) = f.row(i);
          lb.push_back(labels[i]);
        }
      }
      expected += oracle::sdm_direct(fa, fb, la, lb, kCfg.tau, kCfg.epsilon);
      expected += oracle::sdm_direct(fb, fa, lb, la, kCfg.tau, kCfg.epsilon);
    }
    CHECK(std::abs(r.loss.value - expected) < 1e-10 * std::max(1.0, expected));
  }
  SUBCASE("two modalities give two terms") {
    std::vector<Modality> mods;
    for (int i = 0; i < 8; ++i) mods.push_back(i % 2 ? Modality::kIr : Modality::kRgb);
    CHECK(sdm_total(f, labels, mods, kCfg).directional_terms == 2);
  }
  SUBCASE("single modality is degenerate") {
    std::vector<Modality> mods(8, Modality::kSketch);
    int warnings = 0;
    auto previous = set_warning_handler([&](std::string_view) { ++warnings; });
    const SdmTotalResult r = sdm_total(f, labels, mods, kCfg);
    set_warning_handler(previous);
    CHECK(r.directional_terms == 0);
    CHECK(r.degenerate);
    CHECK(r.loss.value == 0.0);
    CHECK(r.loss.grad_features.cwiseAbs().maxCoeff() == 0.0);
    CHECK(warnings == 1);
  }
  SUBCASE("pairs without shared identities contribute nothing") {
    // rgb holds identity 0 only, ir identity 1 only.
    const Labels l = {0, 0, 0, 0, 1, 1, 1, 1};
    std::vector<Modality> mods = {Modality::kRgb, Modality::kRgb, Modality::kSketch, Modality::kSketch,
                                  Modality::kIr,  Modality::kIr,  Modality::kSketch, Modality::kSketch};
    // rgb-sketch and ir-sketch share identities; rgb-ir does not.
    CHECK(sdm_total(f, l, mods, kCfg).directional_terms == 4);
  }
}

TEST_CASE("task loss") {
  Rng rng(12);
  const Matrix f = oracle::random_matrix(rng, 8, 5);
  const Matrix z = oracle::random_matrix(rng, 8, 4);
  const Labels labels = {0, 0, 1, 1, 2, 2, 3, 3};
  std::vector<Modality> mods;
  for (int i = 0; i < 8; ++i) mods.push_back(kAllModalities[(i + i / 2) % 4]);

  const TaskLossResult t = task_loss(f, z, labels, mods, kCfg);
  const double a = id_loss(z, labels).value;
  const double b = triplet_loss(f, labels, kCfg.margin).value;
  const double c = sdm_total(f, labels, mods, kCfg).loss.value;
  CHECK(t.id == a);
  CHECK(t.triplet == b);
  CHECK(t.sdm == c);
  CHECK(t.loss.value == a + b + c);

  SUBCASE("degenerate composition") {
    std::vector<Modality> one(8, Modality::kRgb);
    auto previous = set_warning_handler([](std::string_view) {});
    const TaskLossResult d = task_loss(Matrix::Ones(8, 5), Matrix::Zero(8, 4), labels, one, kCfg);
    set_warning_handler(previous);
    CHECK(d.loss.value == doctest::Approx(std::log(4.0) + 0.3).epsilon(1e-14));
  }
}

TEST_CASE("cosine loss") {
  Rng rng(13);
  const Matrix t = oracle::random_matrix(rng, 6, 7);
  CHECK(std::abs(cosine_loss(t, t).value) < 1e-15);
  CHECK(cosine_loss(t, -t).value == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(std::abs(cosine_loss(t, 3.0 * t).value) < 1e-15);
  const Matrix s = oracle::random_matrix(rng, 6, 7);
  CHECK(std::abs(cosine_loss(t, s).value - oracle::cosine_direct(t, s)) < 1e-14);

  Matrix scaled = s;
  for (Eigen::Index i = 0; i < scaled.rows(); ++i) scaled.row(i) *= 0.1 + 10.0 * rng.uniform();
  CHECK(std::abs(cosine_loss(t, scaled).value - cosine_loss(t, s).value) < 1e-10);

  Matrix zero_row = s;
  zero_row.row(2).setZero();
  CHECK_THROWS_AS(cosine_loss(t, zero_row), DataError);
}

TEST_CASE("pcm loss") {
  Rng rng(14);
  SUBCASE("full orthogonal basis reduces to the cosine loss") {
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix t = oracle::random_matrix(rng, 5, 8);
      const Matrix s = oracle::random_matrix(rng, 5, 8);
      const ProjectionBasis b = full_orthogonal_basis(rng, 8);
      CHECK(std::abs(pcm_loss(t, s, b).value - cosine_loss(t, s).value) < 1e-10);
    }
  }
  SUBCASE("explicit projection oracle") {
    const Matrix t = oracle::random_matrix(rng, 6, 4);
    const Matrix s = oracle::random_matrix(rng, 6, 4);
    const ProjectionBasis b = top_k_basis(thin_svd(t), 2);
    CHECK(std::abs(pcm_loss(t, s, b).value - oracle::pcm_direct(t, s, b.vk)) < 1e-13);
    CHECK(std::abs(pcm_loss(t, t, b).value) < 1e-15);
  }
  SUBCASE("basis column sign flips") {
    const Matrix t = oracle::random_matrix(rng, 6, 10);
    const Matrix s = oracle::random_matrix(rng, 6, 10);
    ProjectionBasis b = top_k_basis(thin_svd(t), 4);
    const double before = pcm_loss(t, s, b).value;
    b.vk.col(1) *= -1.0;
    b.vk.col(3) *= -1.0;
    CHECK(std::abs(pcm_loss(t, s, b).value - before) < 1e-12);
  }
}

TEST_CASE("fr loss") {
  Rng rng(15);
  const Matrix t = oracle::random_matrix(rng, 6, 4);
  CHECK(std::abs(fr_loss(t, t).value) < 1e-12);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix q = oracle::random_orthogonal(rng, 6);
    CHECK(std::abs(fr_loss(t, q * t).value) < 1e-10);
  }
  const Matrix s = oracle::random_matrix(rng, 6, 4);
  CHECK(std::abs(fr_loss(t, s).value - oracle::fr_direct(t, s)) < 1e-13);
  const double v = fr_loss(t, s).value;
  CHECK(v >= 0.0);
  CHECK(v <= 2.0);
}

TEST_CASE("distill loss blend") {
  const auto unit = [](double v) { return LossResult{v, Matrix::Ones(2, 2), std::nullopt}; };
  LossResult task = unit(1.0);
  task.grad_aux = Matrix::Ones(2, 3);
  const LossWeights e;
  CHECK(distill_loss(task, unit(1), unit(1), unit(1), e).value == doctest::Approx(1.0).epsilon(1e-15));

  const LossWeights b{0.01, 0.99, 0.0, 0.0};
  const LossResult rb = distill_loss(unit(2.0), unit(3.0), unit(5.0), unit(7.0), b);
  CHECK(rb.value == 0.01 * 2.0 + 0.99 * 3.0);

  const LossWeights c{0.0, 0.99, 0.0, 0.01};
  CHECK_THROWS_AS(LossWeights({0.0, 0.99, 0.0, 0.0}).validate(), ArgumentError);
  CHECK_THROWS_AS(LossWeights({-0.1, 0.6, 0.25, 0.25}).validate(), ArgumentError);
  CHECK_NOTHROW(c.validate());
  const LossResult rc = distill_loss(unit(0.0), unit(0.4), unit(0.0), unit(0.0),
                                     LossWeights{0.0, 0.99, 0.005, 0.005});
  CHECK(rc.value == 0.99 * 0.4);

  const LossResult full = distill_loss(task, unit(1), unit(1), unit(1), e);
  REQUIRE(full.grad_aux.has_value());
  CHECK(full.grad_aux->isApprox(0.01 * Matrix::Ones(2, 3)));
}

TEST_CASE("gradients match central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto checks = oracle::check_gradients(oracle::make_gradient_batch(seed));
    for (const auto& c : checks) {
      INFO(c.name, " seed ", seed);
      CHECK(c.max_error < 1e-4);
    }
  }
}

TEST_CASE("loss ranges") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix t = oracle::random_matrix(rng, 8, 6);
    const Matrix s = oracle::random_matrix(rng, 8, 6);
    const double c = cosine_loss(t, s).value;
    CHECK(c >= 0.0);
    CHECK(c <= 2.0);
    const Labels lq = {0, 1, 2, 3, 0, 1, 2, 3};
    CHECK(sdm_pair_loss(t, s, lq, lq, kCfg).value >= -1e-6);
    CHECK(id_loss(s.leftCols(4), lq).value >= 0.0);
  }
}
