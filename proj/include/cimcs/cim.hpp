#pragma once

#include <cstddef>
#include <functional>

#include "cimcs/problem.hpp"
#include "cimcs/rng.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

/// Normalized pump rate p(t).
///   Constant    p_final
///   LinearRamp  p_final·min(t/ramp_time, 1)
///   SquareRamp  p_final·min(t/ramp_time, 1)²
struct PumpSchedule {
  enum class Kind { Constant, LinearRamp, SquareRamp };
  Kind kind = Kind::LinearRamp;
  double p_final = 1.5;
  double ramp_time = 5.0;

  double at(double t) const;
};

std::string_view to_string(PumpSchedule::Kind kind);
PumpSchedule::Kind pump_kind_from_string(std::string_view s);

struct CimConfig {
  double as2 = 1e7;  // A_s²; +inf switches the noise off
  double k_tilde = 0.25;
  PumpSchedule pump{};
  double duration = 5.0;  // photon lifetimes
  double dt = 0.01;
  Chi chi = Chi::Signed;

  /// Requires dt ≤ duration and dt·(1+p_final) < 0.5.
  void validate() const;
  double inv_as() const;
};

/// Integration time the support-estimation step uses for a given A_s²:
/// 5 for A_s² ≥ 10⁶, 200 otherwise.
double default_duration(double as2);

struct OpoState {
  Vector c;
  Vector s;
  double t = 0.0;
};

/// h = Aᵀ(y − A(σ∘r)) + σ∘r
Vector local_field_cim(const Instance& inst, const Vector& r, const Bits& sigma);

/// K̃(F_χ(h) − η)
double injection_field(double h, double eta, Chi chi, double k_tilde);
Vector injection_field(const Vector& h, double eta, Chi chi, double k_tilde);

/// One Euler–Maruyama step at pump p_now. Draws two normals per pulse (c then s, pulse by pulse).
/// Throws DivergenceError when any amplitude is non-finite or exceeds 10√p_final.
OpoState wsde_step(const OpoState& state, const Vector& f, double p_now, const CimConfig& cfg, Rng& rng);

/// Observer called with the state after every `every`-th step (and after step 0's initial state).
struct CimObserver {
  std::size_t every = 0;
  std::function<void(const OpoState&)> on_state;
};

/// Integrates from c = s = 0 over cfg.duration with σ = H(c) refreshed every
/// step and returns σ = H(c) at the final time. `gram` may carry a precomputed AᵀA.
Bits run_support_estimation(const Instance& inst, const Vector& r, double eta, const CimConfig& cfg, Rng& rng,
                            const CimObserver* observer = nullptr, const Matrix* gram = nullptr);

}  // namespace cimcs
