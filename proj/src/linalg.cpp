#include "lrc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lrc {

namespace {

constexpr int kMaxSweeps = 80;
constexpr double kRotationTol = 1e-15;

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

// Householder QR of a tall matrix (rows >= cols). Returns the n x n upper
// triangular R and, when wanted, the thin m x n Q.
void householder_qr(const MatrixD& a, MatrixD& r_out, MatrixD* q_out) {
  const std::size_t m = a.rows(), n = a.cols();
  MatrixD r = a;
  std::vector<std::vector<double>> reflectors(n);
  std::vector<double> beta(n, 0.0);

  for (std::size_t k = 0; k < n; ++k) {
    double norm2 = 0.0;
    for (std::size_t i = k; i < m; ++i) norm2 += r(i, k) * r(i, k);
    const double norm = std::sqrt(norm2);
    auto& v = reflectors[k];
    v.assign(m - k, 0.0);
    if (norm == 0.0) continue;
    const double alpha = r(k, k) >= 0.0 ? -norm : norm;
    for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
    v[0] -= alpha;
    const double vv = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    if (vv == 0.0) continue;
    beta[k] = 2.0 / vv;
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
      s *= beta[k];
      for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i - k];
    }
  }

  r_out = MatrixD(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) r_out(i, j) = r(i, j);

  if (!q_out) return;
  MatrixD q(m, n);
  for (std::size_t i = 0; i < n; ++i) q(i, i) = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    if (beta[k] == 0.0) continue;
    const auto& v = reflectors[k];
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * q(i, j);
      s *= beta[k];
      for (std::size_t i = k; i < m; ++i) q(i, j) -= s * v[i - k];
    }
  }
  *q_out = std::move(q);
}

// Hestenes one-sided Jacobi on the columns of a square matrix. `cols` holds
// the columns as rows (n x n); `vrows`, when given, accumulates the same
// rotations so that on exit cols = original · V with V's columns in vrows.
void one_sided_jacobi(MatrixD& cols, MatrixD* vrows) {
  const std::size_t n = cols.rows();
  const std::size_t len = cols.cols();
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double* cp = cols.row(p).data();
        double* cq = cols.row(q).data();
        const double alpha = dot(cp, cp, len);
        const double beta = dot(cq, cq, len);
        const double gamma = dot(cp, cq, len);
        if (gamma == 0.0 || std::abs(gamma) <= kRotationTol * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < len; ++i) {
          const double a = cp[i], b = cq[i];
          cp[i] = c * a - s * b;
          cq[i] = s * a + c * b;
        }
        if (vrows) {
          double* vp = vrows->row(p).data();
          double* vq = vrows->row(q).data();
          for (std::size_t i = 0; i < n; ++i) {
            const double a = vp[i], b = vq[i];
            vp[i] = c * a - s * b;
            vq[i] = s * a + c * b;
          }
        }
      }
    }
    if (!rotated) return;
  }
}

void check_finite(const MatrixD& m, const char* what) {
  if (!all_finite(m)) fail(ErrorCode::numeric, std::string(what) + ": non-finite input");
}

SvdResult svd_tall(const MatrixD& a) {
  const std::size_t m = a.rows(), n = a.cols();
  MatrixD r, q;
  householder_qr(a, r, &q);

  MatrixD cols = r.transpose();  // row j = column j of R
  MatrixD vrows = MatrixD::identity(n);
  one_sided_jacobi(cols, &vrows);

  std::vector<double> norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = std::sqrt(dot(cols.row(j).data(), cols.row(j).data(), n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  const double smax = n ? norms[order[0]] : 0.0;
  const double zero_tol = smax * static_cast<double>(std::max(m, n)) * 1e-15;

  // Left vectors of R, column k as row k of ur.
  MatrixD ur(n, n);
  std::vector<bool> filled(n, false);
  SvdResult out{MatrixD(m, n), std::vector<double>(n), MatrixD(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.s[k] = norms[j];
    for (std::size_t i = 0; i < n; ++i) out.vt(k, i) = vrows(j, i);
    if (norms[j] > zero_tol && norms[j] > 0.0) {
      for (std::size_t i = 0; i < n; ++i) ur(k, i) = cols(j, i) / norms[j];
      filled[k] = true;
    }
  }
  // Complete the basis for numerically null directions.
  for (std::size_t k = 0; k < n; ++k) {
    if (filled[k]) continue;
    double best_norm = -1.0;
    std::vector<double> best;
    for (std::size_t e = 0; e < n; ++e) {
      std::vector<double> cand(n, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t o = 0; o < n; ++o) {
          if (!filled[o]) continue;
          const double proj = dot(cand.data(), ur.row(o).data(), n);
          for (std::size_t i = 0; i < n; ++i) cand[i] -= proj * ur(o, i);
        }
      const double nn = std::sqrt(dot(cand.data(), cand.data(), n));
      if (nn > best_norm) {
        best_norm = nn;
        best = std::move(cand);
      }
      if (best_norm > 0.7) break;
    }
    for (std::size_t i = 0; i < n; ++i) ur(k, i) = best[i] / best_norm;
    filled[k] = true;
  }

  // u = Q · ur^T
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < n; ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < n; ++l) s += q(i, l) * ur(k, l);
      out.u(i, k) = s;
    }
  return out;
}

void apply_sign_convention(SvdResult& r) {
  const std::size_t k = r.s.size();
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < r.u.rows(); ++i) {
      const double v = r.u(i, c);
      if (std::abs(v) <= 1e-12) continue;
      if (v < 0.0) {
        for (std::size_t ii = 0; ii < r.u.rows(); ++ii) r.u(ii, c) = -r.u(ii, c);
        for (std::size_t jj = 0; jj < r.vt.cols(); ++jj) r.vt(c, jj) = -r.vt(c, jj);
      }
      break;
    }
  }
}

} // namespace

bool all_finite(const MatrixD& m) {
  for (double v : m.data())
    if (!std::isfinite(v)) return false;
  return true;
}

SvdResult svd(const MatrixD& m) {
  check_finite(m, "svd");
  require(m.rows() >= 1 && m.cols() >= 1, "svd: empty matrix");
  SvdResult out;
  if (m.rows() >= m.cols()) {
    out = svd_tall(m);
  } else {
    SvdResult t = svd_tall(m.transpose());
    out.u = t.vt.transpose();
    out.s = std::move(t.s);
    out.vt = t.u.transpose();
  }
  apply_sign_convention(out);
  return out;
}

std::vector<double> singular_values(const MatrixD& m) {
  check_finite(m, "singular_values");
  require(m.rows() >= 1 && m.cols() >= 1, "singular_values: empty matrix");
  const MatrixD tall = m.rows() >= m.cols() ? m : m.transpose();
  MatrixD r;
  householder_qr(tall, r, nullptr);
  MatrixD cols = r.transpose();
  one_sided_jacobi(cols, nullptr);
  const std::size_t n = cols.rows();
  std::vector<double> s(n);
  for (std::size_t j = 0; j < n; ++j) s[j] = std::sqrt(dot(cols.row(j).data(), cols.row(j).data(), n));
  std::stable_sort(s.begin(), s.end(), std::greater<>());
  return s;
}

MatrixD leading_left_singular_vectors(const MatrixD& m, std::size_t k) {
  require(k >= 1 && k <= m.rows(), "leading_left_singular_vectors: k out of range");
  const SvdResult r = svd(m);
  const std::size_t have = std::min(k, r.u.cols());
  const std::size_t rows = m.rows();
  MatrixD u(rows, k);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < have; ++j) u(i, j) = r.u(i, j);
  // Beyond min(rows, cols) the left space is spanned by the orthogonal
  // complement; fill it from the unit vectors with the largest residual.
  for (std::size_t j = have; j < k; ++j) {
    double best_norm = -1.0;
    std::vector<double> best;
    for (std::size_t e = 0; e < rows; ++e) {
      std::vector<double> cand(rows, 0.0);
      cand[e] = 1.0;
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t o = 0; o < j; ++o) {
          double proj = 0.0;
          for (std::size_t i = 0; i < rows; ++i) proj += cand[i] * u(i, o);
          for (std::size_t i = 0; i < rows; ++i) cand[i] -= proj * u(i, o);
        }
      double nn = 0.0;
      for (double v : cand) nn += v * v;
      nn = std::sqrt(nn);
      if (nn > best_norm) {
        best_norm = nn;
        best = std::move(cand);
      }
    }
    for (std::size_t i = 0; i < rows; ++i) u(i, j) = best[i] / best_norm;
  }
  return u;
}

MatrixD matmul(const MatrixD& a, const MatrixD& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  MatrixD c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

MatrixD matmul_tn(const MatrixD& a, const MatrixD& b) {
  require(a.rows() == b.rows(), "matmul_tn: row counts differ");
  MatrixD c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k)
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aki * b(k, j);
    }
  return c;
}

MatrixD matmul_nt(const MatrixD& a, const MatrixD& b) {
  require(a.cols() == b.cols(), "matmul_nt: column counts differ");
  MatrixD c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = dot(a.row(i).data(), b.row(j).data(), a.cols());
  return c;
}

double orthonormality_defect(const MatrixD& a) {
  const MatrixD g = matmul_tn(a, a);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

} // namespace lrc
