#pragma once

#include <cstddef>
#include <vector>

#include "cimcs/problem.hpp"
#include "cimcs/rng.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

/// Temperature T(t), t in sweeps (proposals / N).
///   Zero        0
///   ExpCooling  T0·exp(−t/τ)
///   InvLinear   T0/(1 + t/τ)
///   InvLog      T0/log(e + t/τ)
/// τ is chosen so that T(horizon) = final_temp.
struct CoolingSchedule {
  enum class Kind { Zero, ExpCooling, InvLinear, InvLog };
  Kind kind = Kind::Zero;
  double t0_temp = 0.02;
  double final_temp = 0.00002;
  double horizon = 1e5;

  /// Natural log of τ. InvLog needs the log form since τ underflows there.
  double log_tau() const;
  double tau() const;
  double temperature(double t) const;
  void validate() const;
};

std::string_view to_string(CoolingSchedule::Kind kind);
CoolingSchedule::Kind cooling_kind_from_string(std::string_view s);

/// exp((1/2T)(1−2σ_i)(−r_i² + 2r_i h_i − 2λ)) = exp(−Δℋ/T) for flipping σ_i.
/// temp = 0 gives 1 for a strictly improving flip and 0 otherwise.
double acceptance_ratio(const Instance& inst, const Vector& r, const Bits& sigma, std::size_t i, double lambda,
                        double temp);

/// ℋ(flipped) − ℋ(current) for site i, given its local field.
inline double flip_delta(double r_i, double h_i, std::uint8_t sigma_i, double lambda) {
  const double up = 0.5 * r_i * r_i - r_i * h_i + lambda;
  return sigma_i ? -up : up;
}

struct SaTracePoint {
  double sweep;
  double direction_cosine;
};

struct SaResult {
  Bits sigma;
  std::vector<SaTracePoint> trace;
  std::size_t proposals = 0;
  std::size_t accepted = 0;
  bool stopped_early = false;  // zero temperature reached a single-flip-stable state
};

/// σ starts at 0; horizon·N single-site Metropolis proposals at uniformly random sites.
/// trace_every (sweeps) > 0 records the direction cosine against ξ.
SaResult run_sa(const Instance& inst, const Vector& r, double lambda, const CoolingSchedule& sched, Rng& rng,
                double trace_every = 0.0);

}  // namespace cimcs
