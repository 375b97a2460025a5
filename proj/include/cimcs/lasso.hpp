#pragma once

#include <cstddef>
#include <functional>

#include "cimcs/problem.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

/// T₊,η(h) = h−η for h ≥ η, else 0.
/// T±,η(h) = h−η for h ≥ η, h+η for h ≤ −η, else 0.
double soft_threshold(double h, double eta, Chi chi);

struct IstaResult {
  Vector y;
  std::size_t iterations = 0;
  bool converged = false;
};

/// ½‖y − A Y‖² + η‖Y‖₁
double lasso_objective(const Instance& inst, const Vector& y_est, double eta);

/// Proximal-gradient iteration Y ← T_{χ,η/L}(Y + Aᵀ(y − AY)/L) with L = ‖A‖₂²,
/// until ‖ΔY‖∞ < tol. Its fixed points satisfy Y = T_{χ,η}(Y + Aᵀ(y − AY)).
/// On hitting max_iters the last iterate is returned with converged = false.
IstaResult run_ista(const Instance& inst, double eta, Chi chi, std::size_t max_iters = 20000, double tol = 1e-10,
                    const Vector* warm_start = nullptr);

/// Largest eigenvalue of AᵀA by power iteration.
double spectral_norm_sq(const Matrix& a, std::size_t iters = 200);

/// Linear map given by its forward and adjoint actions.
struct LinearOperator {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  std::function<void(const Vector&, Vector&)> apply;
  std::function<void(const Vector&, Vector&)> adjoint;
};

/// Largest eigenvalue of op*∘op by power iteration.
double spectral_norm_sq(const LinearOperator& op, std::size_t iters = 100);

/// Generic proximal-gradient solve of min ½wᵀJw − hᵀw + η‖w‖₁ (sign-restricted for χ=+),
/// given J through its action and a bound lipschitz ≥ ‖J‖₂.
IstaResult ista_quadratic(const std::function<void(const Vector&, Vector&)>& apply_j, const Vector& h, double eta,
                          Chi chi, double lipschitz, std::size_t max_iters, double tol,
                          const Vector* warm_start = nullptr);

struct L1EqOptions {
  std::size_t max_outer = 200;   // Bregman updates
  std::size_t max_inner = 400;   // proximal-gradient steps per update
  double tol = 1e-6;             // ‖y − Bw‖ / max(‖y‖, 1)
  double mu = 0.0;               // ℓ₁ weight inside each update; 0 picks 1e-3·‖Bᵀy‖∞
};

struct L1EqResult {
  Vector w;
  std::size_t outer_iterations = 0;
  double residual = 0.0;
  bool converged = false;
};

/// min ‖w‖₁ + γ′·wᵀPw  subject to  B w = y,
/// by Bregman iterations w ← argmin μ(‖w‖₁ + γ′wᵀPw) + ½‖Bw − y_k‖², y_k ← y_k + (y − Bw).
/// `smooth` applies P (may be empty when γ′ = 0).
L1EqResult solve_l1_equality(const LinearOperator& b, const Vector& y, double gamma_prime,
                             const std::function<void(const Vector&, Vector&)>& smooth, const L1EqOptions& opts = {});

}  // namespace cimcs
