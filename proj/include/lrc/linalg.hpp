#pragma once

#include <cstddef>
#include <vector>

#include "lrc/tensor.hpp"

namespace lrc {

/// Thin SVD, m = u · diag(s) · vt with K = min(rows, cols).
/// s is non-increasing; each column of u has a non-negative first nonzero entry.
struct SvdResult {
  MatrixD u;              // rows x K
  std::vector<double> s;  // K
  MatrixD vt;             // K x cols
};

/// One-sided Jacobi SVD on the R factor of a Householder QR. Throws
/// ErrorCode::numeric on non-finite input.
SvdResult svd(const MatrixD& m);

/// Spectrum only; same algorithm as svd() without accumulating vectors.
std::vector<double> singular_values(const MatrixD& m);

/// First k ≤ rows left singular vectors; past min(rows, cols) the columns
/// are completed to an orthonormal set.
MatrixD leading_left_singular_vectors(const MatrixD& m, std::size_t k);

MatrixD matmul(const MatrixD& a, const MatrixD& b);
/// aᵀ · b
MatrixD matmul_tn(const MatrixD& a, const MatrixD& b);
/// a · bᵀ
MatrixD matmul_nt(const MatrixD& a, const MatrixD& b);

/// Largest |aᵀa − I| entry; 0 for a matrix with orthonormal columns.
double orthonormality_defect(const MatrixD& a);

bool all_finite(const MatrixD& m);

} // namespace lrc
