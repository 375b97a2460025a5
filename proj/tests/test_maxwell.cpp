#include <doctest.h>

#include <cmath>

#include "cimcs/cdp.hpp"
#include "cimcs/maxwell.hpp"
#include "cimcs/metrics.hpp"

using namespace cimcs;

namespace {

Instance make(std::size_t n, double alpha, double a, std::uint64_t seed, Chi chi) {
  InstanceParams p;
  p.n = n;
  p.alpha = alpha;
  p.a = a;
  p.dist = chi == Chi::Signed ? SourceDistribution::gaussian() : SourceDistribution::half_gaussian();
  p.chi = chi;
  p.beta = 0.01;
  p.seed = seed;
  return synthesize(p);
}

}  // namespace

TEST_CASE("accepted flips never raise the energy and the running sum tracks a full re-evaluation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Chi chi = seed % 2 ? Chi::Signed : Chi::NonNegative;
    const Instance inst = make(64, 0.625, 0.2, seed, chi);
    Rng rng(seed);
    Vector r = Vector::Zero(64);
    MaxwellOptions opts;
    opts.exact_energy_trace = true;
    const MaxwellResult res = maxwell_sweeps(inst, r, Bits(64, 0), 0.1, chi, rng, opts);
    CHECK(res.converged);
    for (std::size_t k = 1; k < res.energy_trace.size(); ++k)
      CHECK(res.energy_trace[k] <= res.energy_trace[k - 1] + 1e-12);
    CHECK(res.energy_trace.back() == doctest::Approx(hamiltonian(inst, res.r, res.sigma, 0.005)).epsilon(1e-12));
    CHECK(res.energy_trace.size() == res.flips + 1);
  }
}

TEST_CASE("at convergence every site obeys the rule or its flip would raise the energy") {
  const double eta = 0.08, lambda = 0.5 * eta * eta;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Chi chi = seed % 2 ? Chi::Signed : Chi::NonNegative;
    const Instance inst = make(50, 0.6, 0.25, seed + 100, chi);
    Rng rng(seed);
    const Bits start = inst.xi_true;
    const MaxwellResult res = maxwell_sweeps(inst, solve_signal(inst, start), start, eta, chi, rng);
    REQUIRE(res.converged);
    const double e = hamiltonian(inst, res.r, res.sigma, lambda);
    const Vector v = masked(res.r, res.sigma);
    const Vector resid = inst.y - inst.a_mat * v;
    for (Eigen::Index i = 0; i < 50; ++i) {
      const double h = inst.a_mat.col(i).dot(resid) + v[i];
      const std::uint8_t target = heaviside(f_chi(h, chi) - eta);
      if (target == res.sigma[static_cast<std::size_t>(i)]) continue;
      Bits s2 = res.sigma;
      Vector r2 = res.r;
      s2[static_cast<std::size_t>(i)] = target;
      r2[i] = target ? h : 0.0;
      CHECK(hamiltonian(inst, r2, s2, lambda) > e);
    }
  }
}

TEST_CASE("entries off the final support are zero") {
  const Instance inst = make(40, 0.5, 0.2, 7, Chi::Signed);
  Rng rng(1);
  Vector r = Vector::Ones(40);
  const MaxwellResult res = maxwell_sweeps(inst, r, inst.xi_true, 0.05, Chi::Signed, rng);
  for (std::size_t i = 0; i < 40; ++i)
    if (!res.sigma[i]) CHECK(res.r[static_cast<Eigen::Index>(i)] == 0.0);
}
