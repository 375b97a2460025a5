#pragma once

#include "cimcs/problem.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

/// Largest admissible condition estimate of the support Gram matrix.
inline constexpr double kMaxGramCondition = 1e12;

/// Minimizes ℋ over r with σ fixed: (A_SᵀA_S) r_S = A_Sᵀy on the support,
/// r = 0 exactly elsewhere.
/// Throws RankDeficiencyError when |S| > M or the Gram condition estimate exceeds 1e12.
/// `gram` may carry a precomputed AᵀA.
Vector solve_signal(const Instance& inst, const Bits& sigma, const Matrix* gram = nullptr);

struct CdpResult {
  Vector r;
  bool rank_deficient = false;  // true when the least-squares fallback was used
};

/// As solve_signal, but a rank-deficient support is solved by column-pivoted
/// least squares on A_S instead of throwing.
CdpResult solve_signal_or_fallback(const Instance& inst, const Bits& sigma, const Matrix* gram = nullptr);

/// ℋ(σ, r) with penalty λ; same evaluation as hamiltonian().
double residual_energy(const Instance& inst, const Vector& r, const Bits& sigma, double lambda);

/// −∂ℋ/∂r_i = σ_i h_i − σ_i r_i for every i (zero where σ_i = 0).
Vector energy_gradient(const Instance& inst, const Vector& r, const Bits& sigma);

}  // namespace cimcs
