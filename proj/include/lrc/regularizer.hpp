#pragma once

#include <span>

#include "lrc/tensor.hpp"

namespace lrc {

struct OrthoConfig {
  double rho = 0.01;   // regularization strength
  double lambda = 1.0; // weight of the penalty sum in the total loss

  void validate() const;
};

/// (ρ/r)·(‖uᵀu − I_r‖²_F + ‖uuᵀ − I_n‖²_F) for u of shape n x r.
/// For n > r the second term cannot vanish; its floor is (ρ/r)(n − r).
double ortho_penalty(const MatrixD& u, double rho);
double ortho_penalty(const Matrix& u, double rho);

/// (4ρ/r)·(u(uᵀu − I) + (uuᵀ − I)u)
MatrixD ortho_penalty_grad(const MatrixD& u, double rho);

/// ‖uᵀu − I‖_F
double ortho_residual(const Matrix& u);

/// ce + λ·Σ penalties
double total_loss(double ce, std::span<const double> penalties, double lambda);

} // namespace lrc
