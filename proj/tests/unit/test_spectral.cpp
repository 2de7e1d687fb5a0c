#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "../support/oracles.hpp"
#include "svdkd/diagnostics.hpp"
#include "svdkd/errors.hpp"
#include "svdkd/spectral.hpp"
#include "svdkd/synth.hpp"

using namespace svdkd;

TEST_CASE("diagonal matrix") {
  Matrix f(2, 2);
  f << 3, 0, 0, 2;
  const SvdFactors svd = thin_svd(f);
  CHECK(svd.singular_values(0) == doctest::Approx(3.0));
  CHECK(svd.singular_values(1) == doctest::Approx(2.0));
  CHECK(svd.v.cwiseAbs().isApprox(Matrix::Identity(2, 2), 1e-12));

  const SpectrumReport rep = spectrum_report(svd);
  CHECK(rep.weights(0) == doctest::Approx(9.0 / 13.0).epsilon(1e-14));
  CHECK(rep.weights(1) == doctest::Approx(4.0 / 13.0).epsilon(1e-14));
  CHECK(rep.importance(0) == doctest::Approx(9.0 / 13.0).epsilon(1e-14));
  CHECK(rep.importance(1) == doctest::Approx(4.0 / 13.0).epsilon(1e-14));
  CHECK(rep.effective_rank_90 == 2);

  const ProjectionBasis b1 = top_k_basis(svd, 1);
  CHECK(b1.k() == 1);
  CHECK(std::abs(b1.vk(0, 0)) == doctest::Approx(1.0));
  CHECK(b1.vk(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("zero matrix") {
  const Matrix f = Matrix::Zero(4, 3);
  const SvdFactors svd = thin_svd(f);
  CHECK(svd.singular_values.size() == 3);
  CHECK(svd.singular_values.cwiseAbs().maxCoeff() == 0.0);
  CHECK(reconstruction_error(svd, f) == 0.0);
  CHECK_THROWS_AS(spectrum_report(svd), DegenerateSpectrumError);
}

TEST_CASE("singular values match a Jacobi eigen oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::Index n = 3 + static_cast<Eigen::Index>(rng.uniform_index(20));
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform_index(12));
    const Matrix f = oracle::random_matrix(rng, n, d);
    const SvdFactors svd = thin_svd(f);
    CHECK(reconstruction_error(svd, f) < 1e-10);
    const auto eig = oracle::jacobi_eigenvalues(oracle::gram_transpose(f));
    for (Eigen::Index k = 0; k < svd.singular_values.size(); ++k) {
      const double s2 = svd.singular_values(k) * svd.singular_values(k);
      CHECK(std::abs(s2 - eig[static_cast<std::size_t>(k)]) <= 1e-8 * std::max(1.0, eig[0]));
    }
    for (Eigen::Index k = 1; k < svd.singular_values.size(); ++k)
      CHECK(svd.singular_values(k) <= svd.singular_values(k - 1));
    CHECK((svd.v.transpose() * svd.v - Matrix::Identity(svd.v.cols(), svd.v.cols()))
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("reconstruction on large matrices") {
  Rng rng(3);
  for (auto [n, d] : {std::pair{512, 512}, std::pair{300, 40}, std::pair{20, 200}}) {
    const Matrix f = oracle::random_matrix(rng, n, d);
    CHECK(reconstruction_error(thin_svd(f), f) < 1e-10);
  }
}

TEST_CASE("weights and cumulative normalization") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix f = oracle::random_matrix(rng, 30, 10, std::pow(10.0, trial % 7 - 3));
    const SpectrumReport rep = spectrum_report(thin_svd(f));
    CHECK(std::abs(rep.weights.sum() - 1.0) < 1e-12);
    CHECK(std::abs(rep.cumulative(rep.cumulative.size() - 1) - 1.0) < 1e-12);
    for (Eigen::Index k = 1; k < rep.cumulative.size(); ++k)
      CHECK(rep.cumulative(k) >= rep.cumulative(k - 1));
    CHECK(rep.effective_rank_90 <= rep.effective_rank_99);
  }
}

TEST_CASE("top-k basis") {
  Rng rng(8);
  const Matrix f = oracle::random_matrix(rng, 40, 12);
  const SvdFactors svd = thin_svd(f);
  CHECK(top_k_basis(svd, 12).vk == svd.v);
  CHECK_THROWS_AS(top_k_basis(svd, 0), ArgumentError);
  CHECK_THROWS_AS(top_k_basis(svd, 13), ArgumentError);

  SUBCASE("default k on the synthetic teacher") {
    SynthConfig cfg;
    const SvdFactors s = thin_svd(generate_dataset(cfg).features());
    const ProjectionBasis b = top_k_basis(s, 50);
    CHECK(b.dim() == 256);
    CHECK(b.k() == 50);
    CHECK((b.vk.transpose() * b.vk - Matrix::Identity(50, 50)).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("k beyond the numerical rank still yields an orthonormal basis") {
    const Matrix low = oracle::random_matrix(rng, 20, 3) * oracle::random_matrix(rng, 3, 8);
    int warnings = 0;
    auto previous = set_warning_handler([&](std::string_view) { ++warnings; });
    const ProjectionBasis b = top_k_basis(thin_svd(Matrix(low.topRows(2))), 6);
    set_warning_handler(previous);
    CHECK(warnings == 1);
    CHECK((b.vk.transpose() * b.vk - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("centering") {
  Matrix f(3, 2);
  f << 1, 4, 2, 5, 3, 9;
  const Matrix c = center_columns(f);
  CHECK(c.colwise().sum().cwiseAbs().maxCoeff() < 1e-14);
  CHECK(c(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("invalid input") {
  CHECK_THROWS_AS(thin_svd(Matrix(0, 3)), DataError);
  Matrix f = Matrix::Ones(2, 2);
  f(0, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(thin_svd(f), DataError);
}
