#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "cimcs/problem.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

enum class MeModel { CimFinite, CimInfinite, Lasso };
enum class Branch { NearZero, NonZero };
enum class MeInit { NearZero, NonZero };

std::string_view to_string(MeModel m);
MeModel me_model_from_string(std::string_view s);
std::string_view to_string(Branch b);

struct MacroState {
  double r_overlap = 0.0;  // R
  double q_mag = 0.0;      // Q
  double u_susc = 0.0;     // U
  double rmse = 0.0;       // √(a(Q − 2R + ⟨x²⟩))
  double w = 0.0;          // Q − 2R
  Branch branch = Branch::NonZero;
  bool converged = false;
  std::size_t iterations = 0;
};

struct QuadratureSpec {
  int hermite_order = 24;   // s-integral of the finite-A_s density
  int cs_grid = 400;        // uniform c points of the finite-A_s density
  double x_abs_tol = 1e-12; // ⟨·⟩_x adaptive integration
  double x_rel_tol = 1e-10;
  std::size_t x_max_panels = 4000;
  double table_tol = 1e-6;  // interpolation error of the finite-A_s effective output
};

struct FixedPointSpec {
  double damping = 0.5;  // weight of the new iterate
  double tol = 1e-10;    // on ‖Δ(R, Q, U)‖∞
  std::size_t max_iters = 20000;
};

struct MeConfig {
  double alpha = 0.5;
  double a = 0.2;
  double beta = 0.0;
  double eta = 0.05;
  Chi chi = Chi::Signed;
  SourceDistribution dist{};
  double as2 = std::numeric_limits<double>::infinity();
  double p_pump = 1.5;
  double k_tilde = 0.25;
  QuadratureSpec quad{};
  FixedPointSpec fp{};
  MeInit init = MeInit::NearZero;
  std::optional<MacroState> warm;  // overrides `init` when set

  void validate() const;
};

/// V(c,s) = ½(1−p)c² + ½(1+p)s² + ½c²s² + ¼c⁴ + ¼s⁴
double potential(double c, double s, double p);

struct BranchMoments {
  double xi_c = 0.0;
  double xi_s = 0.0;
  double up_prob = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Steady-state amplitude density with field h_m on c < 0 and h_p on c > 0,
/// jointly normalized, with (Ξ_c, Ξ_s) solved self-consistently.
BranchMoments branch_density_moments(double h_p, double h_m, const MeConfig& cfg);

/// (R, Q, U) with the derived RMSE, W and branch label filled in.
MacroState make_state(double r, double q, double u, const MeConfig& cfg);

/// One evaluation of the right-hand sides of the three equations at `state`.
MacroState me_update(MeModel model, const MeConfig& cfg, const MacroState& state);

MacroState solve_me(MeModel model, const MeConfig& cfg);
MacroState solve_me_finite_as(const MeConfig& cfg);
MacroState solve_me_infinite_as(const MeConfig& cfg);
MacroState solve_me_lasso(const MeConfig& cfg);

enum class ScanDirection { Up, Down };

/// Solves at sparseness `a`, warm-started from the previous converged state when given.
using ScanSolver = std::function<MacroState(double a, const std::optional<MacroState>& warm)>;

/// ScanSolver for an ME model; the first point uses NearZero init going up and NonZero going down.
ScanSolver me_scan_solver(MeModel model, MeConfig base, ScanDirection direction);

struct CriticalPoint {
  bool found = false;
  double a_c = 0.0;
  double rmse_at_c = 0.0;  // RMSE on the branch being followed, at the last point before the jump
};

struct ScanOptions {
  double a_lo = 0.01;
  double a_hi = 0.99;
  double step = 0.01;
  double jump_threshold = 0.05;
  double resolution = 1e-3;
};

/// Follows one branch along a, warm-starting every solve, and locates the first
/// RMSE jump larger than jump_threshold; the bracket is bisected to `resolution`.
CriticalPoint critical_point_scan(const ScanSolver& solver, ScanDirection direction, const ScanOptions& opts = {});

enum class Stability { Stable, Neutral, Unstable };
std::string_view to_string(Stability s);

struct PerturbationResult {
  double w_coeff = 0.0;         // slope of the error map at the perfect solution, ζ → 0
  Stability stability = Stability::Neutral;
  bool stable = false;
  double residual = 0.0;        // fixed-point residual of the perfect solution at the largest ζ
  bool zeta_too_large = false;  // residual not small against ζ³, or slopes not settling
};

/// Linear stability of the perfect-reconstruction solution W = −⟨x²⟩ of the
/// infinite-A_s equations at β = 0, with threshold ζ² = 2η/(1 + 1/(1 + aU/α)).
/// Neutral means |w_coeff − 1| ≤ neutral_band.
PerturbationResult perturbation_check(const MeConfig& cfg, double zeta, double neutral_band = 1e-3);

/// a_th = α
double l0_threshold(double alpha);

/// a_th = α max_{z≥0} (1 − (κ/α)B(z)) / (1 + z² − κB(z)), B(z) = (1+z²)Φ(−z) − zφ(z), κ₊ = 1, κ± = 2.
double l1_weak_threshold(double alpha, Chi chi);

/// The objective maximized inside l1_weak_threshold.
double l1_threshold_objective(double z, double alpha, Chi chi);

}  // namespace cimcs
