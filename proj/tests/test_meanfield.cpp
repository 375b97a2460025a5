#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cimcs/errors.hpp"
#include "cimcs/lasso.hpp"
#include "cimcs/meanfield.hpp"

using namespace cimcs;

namespace {

// Independent evaluation of the weak-threshold objective by brute grid.
double brute_l1_threshold(double alpha, double kappa) {
  double best = -1e300;
  const std::size_t pts = 1000000;
  for (std::size_t k = 0; k <= pts; ++k) {
    const double z = 8.0 * static_cast<double>(k) / pts;
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double cdf = 0.5 * std::erfc(z / std::sqrt(2.0));
    const double b = (1.0 + z * z) * cdf - z * phi;
    best = std::max(best, alpha * (1.0 - kappa / alpha * b) / (1.0 + z * z - kappa * b));
  }
  return best;
}

MeConfig gauss_cfg(double alpha, double a, double eta) {
  MeConfig c;
  c.alpha = alpha;
  c.a = a;
  c.eta = eta;
  c.chi = Chi::Signed;
  c.dist = SourceDistribution::gaussian();
  return c;
}

}  // namespace

TEST_CASE("l1 weak threshold matches a brute-force maximization") {
  for (double alpha : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    CAPTURE(alpha);
    CHECK(l1_weak_threshold(alpha, Chi::NonNegative) == doctest::Approx(brute_l1_threshold(alpha, 1.0)).epsilon(1e-6));
    CHECK(l1_weak_threshold(alpha, Chi::Signed) == doctest::Approx(brute_l1_threshold(alpha, 2.0)).epsilon(1e-6));
    CHECK(l0_threshold(alpha) == alpha);
    CHECK(l1_weak_threshold(alpha, Chi::Signed) < l1_weak_threshold(alpha, Chi::NonNegative));
    CHECK(l1_weak_threshold(alpha, Chi::NonNegative) < alpha);
  }
}

TEST_CASE("potential and derived state fields") {
  const double c = 0.7, s = -0.3, p = 1.5;
  const double v = 0.5 * (1 - p) * c * c + 0.5 * (1 + p) * s * s + 0.5 * c * c * s * s + 0.25 * std::pow(c, 4) +
                   0.25 * std::pow(s, 4);
  CHECK(potential(c, s, p) == doctest::Approx(v));
  const MeConfig cfg = gauss_cfg(0.5, 0.2, 0.05);
  const MacroState st = make_state(0.8, 0.7, 2.0, cfg);
  CHECK(st.w == doctest::Approx(0.7 - 1.6));
  CHECK(st.rmse == doctest::Approx(std::sqrt(0.2 * (0.7 - 1.6 + 1.0))));
}

TEST_CASE("solutions are fixed points of the update map") {
  for (MeModel m : {MeModel::CimInfinite, MeModel::Lasso}) {
    MeConfig cfg = gauss_cfg(0.6, 0.2, 0.05);
    cfg.beta = 0.01;
    const MacroState st = solve_me(m, cfg);
    REQUIRE(st.converged);
    const MacroState up = me_update(m, cfg, st);
    CHECK(up.r_overlap == doctest::Approx(st.r_overlap).epsilon(1e-6));
    CHECK(up.q_mag == doctest::Approx(st.q_mag).epsilon(1e-6));
    CHECK(up.u_susc == doctest::Approx(st.u_susc).epsilon(1e-6));
  }
}

TEST_CASE("near-zero branch in the easy regime") {
  const MacroState st = solve_me(MeModel::CimInfinite, gauss_cfg(0.6, 0.1, 0.01));
  CHECK(st.converged);
  CHECK(st.rmse < 0.02);
}

TEST_CASE("LASSO equations predict the empirical ISTA error") {
  MeConfig cfg = gauss_cfg(0.5, 0.1, 0.05);
  cfg.beta = 0.01;
  const MacroState st = solve_me(MeModel::Lasso, cfg);
  REQUIRE(st.converged);
  double mse = 0.0;
  const int trials = 4;
  for (int t = 0; t < trials; ++t) {
    InstanceParams p;
    p.n = 1000;
    p.alpha = 0.5;
    p.a = 0.1;
    p.beta = 0.01;
    p.seed = 100 + static_cast<std::uint64_t>(t);
    const Instance inst = synthesize(p);
    const IstaResult res = run_ista(inst, 0.05, Chi::Signed, 50000, 1e-10);
    mse += (res.y - inst.signal()).squaredNorm() / 1000.0;
  }
  const double emp = std::sqrt(mse / trials);
  CHECK(emp == doctest::Approx(st.rmse).epsilon(0.15));
}

TEST_CASE("perturbation check: perfect solution stable below the L0 threshold, unstable above") {
  const PerturbationResult lo = perturbation_check(gauss_cfg(0.6, 0.3, 0.01), 1e-3);
  CHECK(lo.stable);
  const PerturbationResult hi = perturbation_check(gauss_cfg(0.6, 0.9, 0.01), 1e-3);
  CHECK_FALSE(hi.stable);
}

TEST_CASE("critical point scan locates a synthetic jump") {
  const double jump_at = 0.4372;
  const ScanSolver solver = [&](double a, const std::optional<MacroState>&) {
    MacroState s;
    s.converged = true;
    s.rmse = a < jump_at ? 0.01 * a : 0.5;
    return s;
  };
  ScanOptions o;
  o.resolution = 1e-4;
  const CriticalPoint up = critical_point_scan(solver, ScanDirection::Up, o);
  REQUIRE(up.found);
  CHECK(std::abs(up.a_c - jump_at) <= 1e-4);
  const ScanSolver flat = [](double, const std::optional<MacroState>&) {
    MacroState s;
    s.converged = true;
    s.rmse = 0.01;
    return s;
  };
  CHECK_FALSE(critical_point_scan(flat, ScanDirection::Up, o).found);
}

TEST_CASE("config validation") {
  MeConfig c = gauss_cfg(0.5, 0.2, 0.05);
  c.a = 1.5;
  CHECK_THROWS_AS(c.validate(), ParameterError);
  c = gauss_cfg(0.5, 0.2, -0.1);
  CHECK_THROWS_AS(c.validate(), ParameterError);
}
