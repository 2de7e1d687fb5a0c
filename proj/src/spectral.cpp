#include "svdkd/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/SVD>

#include "svdkd/diagnostics.hpp"
#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

constexpr double kReconstructionBound = 1e-10;

std::size_t first_reaching(const Vector& cumulative, double level) {
  for (Eigen::Index k = 0; k < cumulative.size(); ++k) {
    if (cumulative[k] >= level) return static_cast<std::size_t>(k) + 1;
  }
  return static_cast<std::size_t>(cumulative.size());
}

// Extends an orthonormal d x r basis to d x k (k <= d) with columns spanning
// the orthogonal complement, via Gram-Schmidt against the standard basis.
Matrix complete_basis(const Matrix& v, std::size_t k) {
  const Eigen::Index d = v.rows();
  Matrix out(d, static_cast<Eigen::Index>(k));
  out.leftCols(v.cols()) = v;
  Eigen::Index filled = v.cols();
  for (Eigen::Index e = 0; e < d && filled < out.cols(); ++e) {
    Vector candidate = Vector::Unit(d, e);
    for (int pass = 0; pass < 2; ++pass) {
      candidate -= out.leftCols(filled) * (out.leftCols(filled).transpose() * candidate);
    }
    const double norm = candidate.norm();
    if (norm > 1e-6) out.col(filled++) = candidate / norm;
  }
  return out;
}

}  // namespace

double reconstruction_error(const SvdFactors& factors, const Matrix& features) {
  const Matrix rebuilt =
      factors.u * factors.singular_values.asDiagonal() * factors.v.transpose();
  return (rebuilt - features).norm() / std::max(features.norm(), 1.0);
}

SvdFactors thin_svd(const Matrix& features) {
  if (features.rows() < 1 || features.cols() < 1) {
    throw DataError("thin_svd: matrix must have at least one row and one column");
  }
  if (!features.allFinite()) throw DataError("thin_svd: matrix contains non-finite values");

  Eigen::BDCSVD<Matrix> svd(features, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("thin_svd: decomposition did not converge");
  }
  SvdFactors out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (!out.u.allFinite() || !out.v.allFinite() || !out.singular_values.allFinite()) {
    throw NumericalError("thin_svd: decomposition produced non-finite factors");
  }
  // Eigen returns sorted values; enforce the documented ordering exactly.
  for (Eigen::Index k = 1; k < out.singular_values.size(); ++k) {
    if (out.singular_values[k] > out.singular_values[k - 1]) {
      throw NumericalError("thin_svd: singular values are not sorted");
    }
  }
  const double err = reconstruction_error(out, features);
  if (!(err < kReconstructionBound)) {
    std::ostringstream msg;
    msg << "thin_svd: reconstruction error " << err << " exceeds " << kReconstructionBound;
    throw NumericalError(msg.str());
  }
  return out;
}

SpectrumReport spectrum_report(const SvdFactors& factors) {
  const Vector squared = factors.singular_values.array().square();
  const double total = squared.sum();
  if (!(total > 0.0)) {
    throw DegenerateSpectrumError("spectrum_report: every singular value is zero");
  }
  SpectrumReport report;
  report.weights = squared / total;
  report.cumulative.resize(report.weights.size());
  double running = 0.0;
  for (Eigen::Index k = 0; k < report.weights.size(); ++k) {
    running += report.weights[k];
    report.cumulative[k] = running;
  }
  report.importance = factors.v.cwiseAbs() * report.weights;
  report.effective_rank_90 = first_reaching(report.cumulative, 0.90);
  report.effective_rank_99 = first_reaching(report.cumulative, 0.99);
  return report;
}

ProjectionBasis top_k_basis(const SvdFactors& factors, std::size_t k) {
  const auto d = static_cast<std::size_t>(factors.v.rows());
  if (k == 0) throw ArgumentError("top_k_basis: k must be positive");
  if (k > d) {
    throw ArgumentError("top_k_basis: k = " + std::to_string(k) + " exceeds dimension " +
                        std::to_string(d));
  }
  const auto positive = static_cast<std::size_t>(
      (factors.singular_values.array() > 0.0).count());
  if (k > positive) {
    warn("top_k_basis: k = " + std::to_string(k) + " exceeds the " + std::to_string(positive) +
         " strictly positive singular values");
  }
  const auto available = static_cast<std::size_t>(factors.v.cols());
  if (k <= available) return {factors.v.leftCols(static_cast<Eigen::Index>(k))};
  return {complete_basis(factors.v, k)};
}

Matrix center_columns(const Matrix& features) {
  if (features.rows() == 0) return features;
  const Eigen::RowVectorXd mean = features.colwise().mean();
  return features.rowwise() - mean;
}

}  // namespace svdkd
