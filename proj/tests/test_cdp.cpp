#include <doctest.h>

#include <cmath>

#include "cimcs/cdp.hpp"
#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"
#include "cimcs/metrics.hpp"

using namespace cimcs;

namespace {

Instance make(std::size_t n, double alpha, double a, std::uint64_t seed, double beta = 0.01) {
  InstanceParams p;
  p.n = n;
  p.alpha = alpha;
  p.a = a;
  p.beta = beta;
  p.seed = seed;
  return synthesize(p);
}

}  // namespace

TEST_CASE("solve_signal zeroes the on-support gradient and the off-support entries") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance inst = make(80, 0.6, 0.2, seed);
    Bits sigma = inst.xi_true;
    sigma[seed % 80] ^= 1;
    const Vector r = solve_signal(inst, sigma);
    const Vector g = energy_gradient(inst, r, sigma);
    for (std::size_t i = 0; i < inst.n(); ++i) {
      if (sigma[i]) CHECK(std::abs(g[static_cast<Eigen::Index>(i)]) < 1e-10);
      else CHECK(r[static_cast<Eigen::Index>(i)] == 0.0);
    }
  }
}

TEST_CASE("solve_signal matches the dense normal equations") {
  const Instance inst = make(30, 0.7, 0.3, 4);
  const Bits sigma = inst.xi_true;
  std::vector<Eigen::Index> s;
  for (std::size_t i = 0; i < sigma.size(); ++i)
    if (sigma[i]) s.push_back(static_cast<Eigen::Index>(i));
  Matrix as(inst.m(), s.size());
  for (std::size_t k = 0; k < s.size(); ++k) as.col(static_cast<Eigen::Index>(k)) = inst.a_mat.col(s[k]);
  const Vector rs = (as.transpose() * as).inverse() * (as.transpose() * inst.y);
  const Vector r = solve_signal(inst, sigma);
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(r[s[k]] == doctest::Approx(rs[static_cast<Eigen::Index>(k)]).epsilon(1e-10));
  Matrix g;
  kernels::gram(inst.a_mat, g);
  CHECK((solve_signal(inst, sigma, &g) - r).norm() < 1e-12);
}

TEST_CASE("solve_signal minimizes the energy over r with the support fixed") {
  const Instance inst = make(40, 0.5, 0.2, 9);
  const Bits sigma = inst.xi_true;
  const Vector r = solve_signal(inst, sigma);
  const double e0 = residual_energy(inst, r, sigma, 0.001);
  CHECK(e0 == doctest::Approx(hamiltonian(inst, r, sigma, 0.001)));
  Rng rng(2);
  for (int k = 0; k < 20; ++k) {
    Vector d = Vector::Random(40) * 1e-3;
    CHECK(residual_energy(inst, r + d, sigma, 0.001) >= e0 - 1e-14);
  }
}

TEST_CASE("oversized or singular supports are rank deficient") {
  const Instance inst = make(40, 0.5, 0.2, 1);
  Bits all(40, 1);
  CHECK_THROWS_AS(solve_signal(inst, all), RankDeficiencyError);
  const CdpResult fb = solve_signal_or_fallback(inst, all);
  CHECK(fb.rank_deficient);
  CHECK(fb.r.allFinite());

  // Duplicate column makes the support Gram matrix exactly singular.
  Instance dup = inst;
  dup.a_mat.col(1) = dup.a_mat.col(0);
  Bits two(40, 0);
  two[0] = two[1] = 1;
  CHECK_THROWS_AS(solve_signal(dup, two), RankDeficiencyError);
  CHECK(solve_signal_or_fallback(dup, two).rank_deficient);

  const CdpResult ok = solve_signal_or_fallback(inst, inst.xi_true);
  CHECK_FALSE(ok.rank_deficient);
}

TEST_CASE("empty support gives r = 0") {
  const Instance inst = make(20, 0.5, 0.2, 2);
  CHECK(solve_signal(inst, Bits(20, 0)).isZero());
}
