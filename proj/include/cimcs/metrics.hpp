#pragma once

#include <span>

#include "cimcs/problem.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

/// √((1/N) Σ (r_i σ_i − x_i ξ_i)²)
double rmse(const Vector& r, const Bits& sigma, const Vector& x_true, const Bits& xi_true);

/// Σξσ / √(Σξ Σσ). Returns 1 when both vectors are all zero and 0 when exactly one is.
double direction_cosine(const Bits& xi_true, const Bits& sigma);

struct KsResult {
  double statistic;  // D⁺ = sup_x (F_b(x) − F_a(x))
  double p_value;    // exp(−2mnD²/(m+n))
};

/// One-sided two-sample Kolmogorov–Smirnov test of "sample_a is stochastically
/// larger than sample_b". Small p means a sits to the right of b.
KsResult ks_one_sided(std::span<const double> sample_a, std::span<const double> sample_b);

/// ℋ = ½‖A(σ∘r)‖² − yᵀA(σ∘r) + λ‖σ‖₀
double hamiltonian(const Instance& inst, const Vector& r, const Bits& sigma, double lambda);

/// σ∘r
Vector masked(const Vector& r, const Bits& sigma);

}  // namespace cimcs
