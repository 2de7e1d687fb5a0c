#pragma once

#include <cstddef>

#include "svdkd/embedding_set.hpp"

namespace svdkd {

// Thin SVD F = U diag(sigma) V^T with r = min(n, d).
struct SvdFactors {
  Matrix u;              // n x r, orthonormal columns
  Vector singular_values;  // r, nonincreasing, >= 0
  Matrix v;              // d x r, orthonormal columns (right singular vectors)

  std::size_t rank_bound() const { return static_cast<std::size_t>(singular_values.size()); }
};

struct SpectrumReport {
  Vector weights;      // w_k = sigma_k^2 / sum_j sigma_j^2, length r
  Vector cumulative;   // prefix sums of weights, ends at 1
  Vector importance;   // importance_i = sum_k |v_ik| w_k, length d
  std::size_t effective_rank_90 = 0;  // smallest k with cumulative[k-1] >= 0.90
  std::size_t effective_rank_99 = 0;
};

// The first k right singular vectors. Both operands of the principal
// component mapping loss are projected by this one basis.
struct ProjectionBasis {
  Matrix vk;  // d x k

  std::size_t dim() const { return static_cast<std::size_t>(vk.rows()); }
  std::size_t k() const { return static_cast<std::size_t>(vk.cols()); }
};

// Exact thin SVD (divide-and-conquer bidiagonalization). The result is
// checked against ||U S V^T - F||_F / max(||F||_F, 1) < 1e-10 before it is
// returned. DataError on empty or non-finite input, NumericalError when the
// decomposition fails or misses the reconstruction bound.
SvdFactors thin_svd(const Matrix& features);

// Eq. 9-style explained variance and per-dimension importance.
// DegenerateSpectrumError when every singular value is zero.
SpectrumReport spectrum_report(const SvdFactors& factors);

// ArgumentError when k == 0 or k > d. Asking for more components than there
// are strictly positive singular values only warns: the trailing columns are
// still orthonormal.
ProjectionBasis top_k_basis(const SvdFactors& factors, std::size_t k);

// Subtracts the column means. Analysis is uncentered unless asked for.
Matrix center_columns(const Matrix& features);

// Relative Frobenius reconstruction error used by the thin_svd contract.
double reconstruction_error(const SvdFactors& factors, const Matrix& features);

}  // namespace svdkd
