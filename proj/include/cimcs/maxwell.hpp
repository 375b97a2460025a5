#pragma once

#include <cstddef>
#include <vector>

#include "cimcs/problem.hpp"
#include "cimcs/rng.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

struct MaxwellOptions {
  std::size_t max_sweeps = 1000;
  /// Record ℋ after every accepted flip by full re-evaluation instead of the running sum.
  bool exact_energy_trace = false;
};

struct MaxwellResult {
  Bits sigma;
  Vector r;
  std::size_t sweeps = 0;
  std::size_t flips = 0;
  std::size_t rejected = 0;  // flips that would have raised ℋ
  bool converged = false;    // a full sweep ended without a flip
  std::vector<double> energy_trace;  // ℋ at start, then after each accepted flip
};

/// Deterministic zero-noise support update: sequential sweeps in a fresh random
/// order, each site set to σ_i = H(F_χ(h_i) − η) with r_i = σ_i h_i on a flip.
/// A flip that would raise ℋ (λ = η²/2) is rejected. Stops after a sweep with no flip.
MaxwellResult maxwell_sweeps(const Instance& inst, Vector r, Bits sigma, double eta, Chi chi, Rng& rng,
                             const MaxwellOptions& opts = {});

}  // namespace cimcs
