#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "cimcs/metrics.hpp"

using namespace cimcs;

namespace {

double ecdf(const std::vector<double>& s, double x) {
  return static_cast<double>(std::count_if(s.begin(), s.end(), [x](double v) { return v <= x; })) /
         static_cast<double>(s.size());
}

InstanceParams small(std::uint64_t seed) {
  InstanceParams p;
  p.n = 12;
  p.alpha = 0.5;
  p.a = 0.25;
  p.beta = 0.02;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("rmse and direction cosine against direct formulas") {
  const Vector r = (Vector(4) << 1.0, -2.0, 0.5, 3.0).finished();
  const Vector x = (Vector(4) << 1.5, -2.0, 0.0, 1.0).finished();
  const Bits sigma{1, 1, 0, 1}, xi{1, 0, 1, 1};
  // (1−1.5)², (−2−0)², (0−0)², (3−1)²
  CHECK(rmse(r, sigma, x, xi) == doctest::Approx(std::sqrt((0.25 + 4.0 + 0.0 + 4.0) / 4.0)));
  CHECK(direction_cosine(xi, sigma) == doctest::Approx(2.0 / 3.0));
  CHECK(direction_cosine(Bits{0, 0}, Bits{0, 0}) == 1.0);
  CHECK(direction_cosine(Bits{0, 1}, Bits{0, 0}) == 0.0);
}

TEST_CASE("one-sided KS statistic matches a brute-force ECDF sweep") {
  Rng rng(3);
  boost::random::normal_distribution<double> nd;
  for (int rep = 0; rep < 5; ++rep) {
    std::vector<double> a(40 + rep * 7), b(55 - rep * 3);
    for (auto& v : a) v = nd(rng) + 0.3 * rep;
    for (auto& v : b) v = nd(rng);
    double d = 0.0;
    std::vector<double> pts = a;
    pts.insert(pts.end(), b.begin(), b.end());
    for (double x : pts) d = std::max(d, ecdf(b, x) - ecdf(a, x));
    const KsResult ks = ks_one_sided(a, b);
    CHECK(ks.statistic == doctest::Approx(d).epsilon(1e-15));
    const double m = a.size(), n = b.size();
    CHECK(ks.p_value == doctest::Approx(std::exp(-2.0 * m * n * d * d / (m + n))));
  }
  // Ties across samples.
  const std::vector<double> a{1, 2, 2, 3}, b{0, 1, 2, 2};
  CHECK(ks_one_sided(a, b).statistic == doctest::Approx(0.25));
  // A sample entirely to the right.
  const std::vector<double> hi{5, 6, 7}, lo{1, 2, 3};
  CHECK(ks_one_sided(hi, lo).statistic == doctest::Approx(1.0));
  CHECK(ks_one_sided(lo, hi).statistic == doctest::Approx(0.0));
}

TEST_CASE("hamiltonian equals the explicit quadratic form") {
  const Instance inst = synthesize(small(8));
  Rng rng(1);
  boost::random::normal_distribution<double> nd;
  Vector r(12);
  for (auto& v : r) v = nd(rng);
  const Bits sigma{1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 0, 1};
  const double lambda = 0.003;
  Vector v = Vector::Zero(12);
  for (int i = 0; i < 12; ++i) v[i] = sigma[i] ? r[i] : 0.0;
  const Vector av = inst.a_mat * v;
  const double expected = 0.5 * av.squaredNorm() - inst.y.dot(av) + lambda * 6.0;
  CHECK(hamiltonian(inst, r, sigma, lambda) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(masked(r, sigma) == v);
}
