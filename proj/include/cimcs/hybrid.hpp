#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "cimcs/cim.hpp"
#include "cimcs/maxwell.hpp"
#include "cimcs/problem.hpp"
#include "cimcs/rng.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

enum class RInit { Zeros, TruthOracle, FromLasso };
enum class SupportBackend { Sde, DeterministicMaxwell };

std::string_view to_string(RInit v);
RInit r_init_from_string(std::string_view s);
std::string_view to_string(SupportBackend v);
SupportBackend backend_from_string(std::string_view s);

struct HybridConfig {
  double eta_init = 0.05;
  double eta_end = 0.05;
  int outer_iters = 50;
  RInit r_init = RInit::Zeros;
  SupportBackend backend = SupportBackend::Sde;
  CimConfig cim{};
  MaxwellOptions maxwell{};
  std::size_t lasso_max_iters = 20000;

  static double lambda_of_eta(double eta) { return 0.5 * eta * eta; }
  void validate() const;
};

/// max(η_init(1 − t/outer_iters), η_end)
double threshold_at(const HybridConfig& cfg, int t);

struct HybridIteration {
  double eta;
  std::size_t l0;
  double energy;  // ℋ(σ, r) after the signal solve, λ = η²/2 of this iteration
  double rmse;
  bool rank_deficient;
};

struct HybridResult {
  Bits sigma;
  Vector r;
  std::vector<HybridIteration> trace;
  std::size_t rank_deficient_count = 0;
  /// Maxwell backend only: ℋ after every accepted flip and every signal solve, in order.
  std::vector<double> energy_path;
};

/// Alternates σ ← support estimation(r, η) and r ← signal solve(σ), then lowers η.
/// Iteration t = 0 uses η_init. Rank-deficient supports fall back to least squares and are counted.
HybridResult run_hybrid(const Instance& inst, const HybridConfig& cfg, Rng& rng);

}  // namespace cimcs
