#include <doctest.h>

#include <cmath>
#include <limits>

#include <boost/random/normal_distribution.hpp>

#include "cimcs/cim.hpp"
#include "cimcs/errors.hpp"
#include "cimcs/metrics.hpp"

using namespace cimcs;

namespace {

Instance make(std::size_t n, double alpha, double a, std::uint64_t seed, Chi chi = Chi::Signed) {
  InstanceParams p;
  p.n = n;
  p.alpha = alpha;
  p.a = a;
  p.dist = chi == Chi::Signed ? SourceDistribution::gaussian() : SourceDistribution::half_gaussian();
  p.chi = chi;
  p.seed = seed;
  return synthesize(p);
}

// Reference integrator: rebuilds σ and the full local field from scratch every step.
Bits naive_support(const Instance& inst, const Vector& r, double eta, const CimConfig& cfg, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(inst.n());
  OpoState st{Vector::Zero(n), Vector::Zero(n), 0.0};
  Bits sigma(inst.n(), 0);
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  for (std::size_t k = 0; k < steps; ++k) {
    const Vector h = local_field_cim(inst, r, sigma);
    const Vector f = injection_field(h, eta, cfg.chi, cfg.k_tilde);
    st = wsde_step(st, f, cfg.pump.at(static_cast<double>(k) * cfg.dt), cfg, rng);
    for (Eigen::Index i = 0; i < n; ++i) sigma[static_cast<std::size_t>(i)] = heaviside(st.c[i]);
  }
  return sigma;
}

}  // namespace

TEST_CASE("pump schedules") {
  PumpSchedule p{PumpSchedule::Kind::LinearRamp, 1.5, 5.0};
  CHECK(p.at(0.0) == 0.0);
  CHECK(p.at(2.5) == doctest::Approx(0.75));
  CHECK(p.at(7.0) == doctest::Approx(1.5));
  p.kind = PumpSchedule::Kind::SquareRamp;
  CHECK(p.at(2.5) == doctest::Approx(0.375));
  p.kind = PumpSchedule::Kind::Constant;
  CHECK(p.at(0.0) == 1.5);
  CHECK(pump_kind_from_string(to_string(PumpSchedule::Kind::SquareRamp)) == PumpSchedule::Kind::SquareRamp);
}

TEST_CASE("injection field and integration time") {
  CHECK(injection_field(0.3, 0.1, Chi::NonNegative, 0.25) == doctest::Approx(0.05));
  CHECK(injection_field(-0.3, 0.1, Chi::NonNegative, 0.25) == doctest::Approx(-0.1));
  CHECK(injection_field(-0.3, 0.1, Chi::Signed, 0.25) == doctest::Approx(0.05));
  CHECK(default_duration(1e7) == 5.0);
  CHECK(default_duration(250.0) == 200.0);
}

TEST_CASE("wsde_step draws c then s noise pulse by pulse") {
  CimConfig cfg;
  cfg.as2 = 400.0;
  const Vector f = Vector::LinSpaced(5, -0.2, 0.2);
  OpoState st{Vector::LinSpaced(5, -0.5, 0.5), Vector::Constant(5, 0.1), 0.0};
  Rng a(17), b(17);
  const OpoState next = wsde_step(st, f, 1.1, cfg, a);
  boost::random::normal_distribution<double> nd;
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double g1 = nd(b), g2 = nd(b);
    const double c = st.c[i], s = st.s[i], r2 = c * c + s * s;
    const double amp = std::sqrt(cfg.dt) / 20.0 * std::sqrt(r2 + 0.5);
    CHECK(next.c[i] == doctest::Approx(c + cfg.dt * ((0.1 - r2) * c + f[i]) + amp * g1).epsilon(1e-14));
    CHECK(next.s[i] == doctest::Approx(s + cfg.dt * ((-2.1 - r2) * s) + amp * g2).epsilon(1e-14));
  }
  CHECK(next.t == doctest::Approx(cfg.dt));
}

TEST_CASE("vacuum noise variance of one step") {
  CimConfig cfg;
  cfg.as2 = 100.0;
  const Eigen::Index n = 200000;
  OpoState st{Vector::Zero(n), Vector::Zero(n), 0.0};
  Rng rng(4);
  const OpoState next = wsde_step(st, Vector::Zero(n), 0.0, cfg, rng);
  const double expected = cfg.dt * 0.5 / cfg.as2;
  CHECK(next.c.squaredNorm() / n == doctest::Approx(expected).epsilon(0.01));
  CHECK(next.s.squaredNorm() / n == doctest::Approx(expected).epsilon(0.01));
}

TEST_CASE("divergence and configuration errors") {
  CimConfig cfg;
  OpoState st{Vector::Constant(2, 30.0), Vector::Zero(2), 0.0};
  Rng rng(1);
  CHECK_THROWS_AS(wsde_step(st, Vector::Zero(2), 1.5, cfg, rng), DivergenceError);
  cfg.dt = 0.3;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = CimConfig{};
  cfg.duration = 0.001;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("incremental support estimation matches the from-scratch reference") {
  for (auto as2 : {std::numeric_limits<double>::infinity(), 1e4}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Instance inst = make(60, 0.6, 0.2, seed);
      CimConfig cfg;
      cfg.as2 = as2;
      cfg.duration = 5.0;
      Rng a(seed), b(seed);
      const Vector r = inst.signal();
      CHECK(run_support_estimation(inst, r, 0.05, cfg, a) == naive_support(inst, r, 0.05, cfg, b));
    }
  }
}

TEST_CASE("observer sees the initial state and every k-th step") {
  const Instance inst = make(30, 0.6, 0.2, 1);
  CimConfig cfg;
  cfg.duration = 1.0;
  std::vector<double> times;
  CimObserver obs{10, [&](const OpoState& s) { times.push_back(s.t); }};
  Rng rng(2);
  run_support_estimation(inst, inst.signal(), 0.05, cfg, rng, &obs);
  REQUIRE(times.size() == 11);
  CHECK(times.front() == 0.0);
  CHECK(times.back() == doctest::Approx(1.0));
}

TEST_CASE("noise-free machine recovers the support from the true signal") {
  for (Chi chi : {Chi::Signed, Chi::NonNegative}) {
    const Instance inst = make(200, 0.8, 0.1, 3, chi);
    CimConfig cfg;
    cfg.as2 = std::numeric_limits<double>::infinity();
    cfg.chi = chi;
    Rng rng(0);
    const Bits sigma = run_support_estimation(inst, inst.signal(), 0.01, cfg, rng);
    CHECK(direction_cosine(inst.xi_true, sigma) > 0.95);
  }
}
