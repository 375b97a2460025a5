#include <doctest.h>

#include <cmath>
#include <limits>

#include "cimcs/errors.hpp"
#include "cimcs/hybrid.hpp"
#include "cimcs/metrics.hpp"

using namespace cimcs;

namespace {

Instance make(std::size_t n, double alpha, double a, std::uint64_t seed, Chi chi, double beta = 0.0) {
  InstanceParams p;
  p.n = n;
  p.alpha = alpha;
  p.a = a;
  p.dist = chi == Chi::Signed ? SourceDistribution::gaussian() : SourceDistribution::half_gaussian();
  p.chi = chi;
  p.beta = beta;
  p.seed = seed;
  return synthesize(p);
}

}  // namespace

TEST_CASE("linear threshold schedule") {
  HybridConfig cfg;
  cfg.eta_init = 0.6;
  cfg.eta_end = 0.01;
  CHECK(threshold_at(cfg, 0) == doctest::Approx(0.6));
  CHECK(threshold_at(cfg, 25) == doctest::Approx(0.3));
  CHECK(threshold_at(cfg, 49) == doctest::Approx(0.012));
  CHECK(threshold_at(cfg, 50) == doctest::Approx(0.01));
  cfg.eta_init = cfg.eta_end = 0.05;
  CHECK(threshold_at(cfg, 30) == doctest::Approx(0.05));
  CHECK(HybridConfig::lambda_of_eta(0.05) == doctest::Approx(0.00125));
}

TEST_CASE("deterministic backend at fixed threshold: energy path is non-increasing") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const Chi chi = seed % 2 ? Chi::Signed : Chi::NonNegative;
    const Instance inst = make(64, 0.625, 0.2, seed, chi, 0.01);
    HybridConfig cfg;
    cfg.eta_init = cfg.eta_end = 0.1;
    cfg.backend = SupportBackend::DeterministicMaxwell;
    cfg.cim.chi = chi;
    cfg.outer_iters = 10;
    Rng rng(seed);
    const HybridResult res = run_hybrid(inst, cfg, rng);
    REQUIRE(res.energy_path.size() > 1);
    for (std::size_t k = 1; k < res.energy_path.size(); ++k)
      CHECK(res.energy_path[k] <= res.energy_path[k - 1] + 1e-10);
    for (std::size_t k = 1; k < res.trace.size(); ++k) CHECK(res.trace[k].energy <= res.trace[k - 1].energy + 1e-10);
  }
}

TEST_CASE("outputs: r vanishes off support, support fits in M, trace per iteration") {
  const Instance inst = make(100, 0.6, 0.2, 3, Chi::Signed);
  HybridConfig cfg;
  cfg.eta_init = 0.3;
  cfg.eta_end = 0.05;
  cfg.outer_iters = 12;
  Rng rng(3);
  const HybridResult res = run_hybrid(inst, cfg, rng);
  CHECK(res.trace.size() == 12);
  for (std::size_t i = 0; i < inst.n(); ++i)
    if (!res.sigma[i]) CHECK(res.r[static_cast<Eigen::Index>(i)] == 0.0);
  if (res.rank_deficient_count == 0) CHECK(popcount(res.sigma) <= inst.m());
  CHECK(res.trace.front().eta == doctest::Approx(0.3));
}

TEST_CASE("truth-initialized run stays near the truth in an easy regime") {
  const Instance inst = make(300, 0.7, 0.15, 11, Chi::NonNegative);
  HybridConfig cfg;
  cfg.eta_init = cfg.eta_end = 0.05;
  cfg.r_init = RInit::TruthOracle;
  cfg.cim.chi = Chi::NonNegative;
  cfg.outer_iters = 5;
  Rng rng(1);
  const HybridResult res = run_hybrid(inst, cfg, rng);
  CHECK(rmse(res.r, res.sigma, inst.x_true, inst.xi_true) < 0.05);
}

TEST_CASE("same seed, same result") {
  const Instance inst = make(80, 0.6, 0.2, 5, Chi::Signed);
  HybridConfig cfg;
  cfg.eta_init = 0.4;
  cfg.eta_end = 0.05;
  cfg.outer_iters = 6;
  cfg.r_init = RInit::FromLasso;
  Rng a(9), b(9);
  const HybridResult ra = run_hybrid(inst, cfg, a), rb = run_hybrid(inst, cfg, b);
  CHECK(ra.sigma == rb.sigma);
  CHECK(ra.r == rb.r);
}

TEST_CASE("configuration validation") {
  HybridConfig cfg;
  cfg.outer_iters = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = HybridConfig{};
  cfg.eta_end = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  CHECK_THROWS_AS(r_init_from_string("random"), ParameterError);
}
