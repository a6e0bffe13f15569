#include "lrc/regularizer.hpp"

#include <cmath>

#include "lrc/linalg.hpp"

namespace lrc {

namespace {

// ‖g − I‖²_F for a square Gram matrix g.
double identity_gap2(const MatrixD& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double v = g(i, j) - (i == j ? 1.0 : 0.0);
      s += v * v;
    }
  return s;
}

MatrixD minus_identity(MatrixD g) {
  for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return g;
}

} // namespace

void OrthoConfig::validate() const {
  require(rho >= 0.0, "rho must be non-negative");
  require(lambda >= 0.0, "lambda must be non-negative");
}

double ortho_penalty(const MatrixD& u, double rho) {
  require(u.cols() >= 1, "ortho_penalty: factor needs at least one column");
  const double gram = identity_gap2(matmul_tn(u, u));
  const double cogram = identity_gap2(matmul_nt(u, u));
  return rho / static_cast<double>(u.cols()) * (gram + cogram);
}

double ortho_penalty(const Matrix& u, double rho) { return ortho_penalty(u.cast<double>(), rho); }

MatrixD ortho_penalty_grad(const MatrixD& u, double rho) {
  require(u.cols() >= 1, "ortho_penalty_grad: factor needs at least one column");
  const MatrixD a = matmul(u, minus_identity(matmul_tn(u, u)));
  const MatrixD b = matmul(minus_identity(matmul_nt(u, u)), u);
  const double scale = 4.0 * rho / static_cast<double>(u.cols());
  MatrixD g(u.rows(), u.cols());
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = scale * (a.data()[i] + b.data()[i]);
  return g;
}

double ortho_residual(const Matrix& u) {
  const MatrixD ud = u.cast<double>();
  return std::sqrt(identity_gap2(matmul_tn(ud, ud)));
}

double total_loss(double ce, std::span<const double> penalties, double lambda) {
  double sum = 0.0;
  for (double p : penalties) sum += p;
  return ce + lambda * sum;
}

} // namespace lrc
