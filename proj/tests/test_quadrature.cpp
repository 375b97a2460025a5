#include <doctest.h>

#include <cmath>
#include <numbers>

#include "cimcs/quadrature.hpp"

using namespace cimcs::quad;

TEST_CASE("Gauss-Hermite integrates e^{-x^2} x^{2k} exactly up to degree 2n-1") {
  const Rule r = gauss_hermite(12);
  REQUIRE(r.nodes.size() == 12);
  for (int k = 0; k <= 11; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) s += r.weights[i] * std::pow(r.nodes[i], 2 * k);
    // ∫ x^{2k} e^{-x²} dx = Γ(k + 1/2)
    CHECK(s == doctest::Approx(std::tgamma(k + 0.5)).epsilon(1e-11));
  }
}

TEST_CASE("normal cdf, mass and partial moments against brute-force Simpson integration") {
  auto simpson = [](auto f, double lo, double hi) {
    const int n = 200000;
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(lo + h * i);
    return s * h / 3.0;
  };
  for (auto [lo, hi] : {std::pair{-1.0, 2.0}, {0.5, 3.0}, {-4.0, -1.5}, {-12.0, 12.0}}) {
    const PartialMoments pm = normal_partial_moments(lo, hi);
    CHECK(pm.m0 == doctest::Approx(simpson([](double z) { return normal_pdf(z); }, lo, hi)).epsilon(1e-10));
    CHECK(pm.m1 == doctest::Approx(simpson([](double z) { return z * normal_pdf(z); }, lo, hi)).epsilon(1e-9).scale(1e-3));
    CHECK(pm.m2 == doctest::Approx(simpson([](double z) { return z * z * normal_pdf(z); }, lo, hi)).epsilon(1e-9));
    CHECK(normal_mass(lo, hi) == doctest::Approx(pm.m0).epsilon(1e-15));
  }
  const PartialMoments all = normal_partial_moments(-INFINITY, INFINITY);
  CHECK(all.m0 == doctest::Approx(1.0));
  CHECK(all.m1 == doctest::Approx(0.0));
  CHECK(all.m2 == doctest::Approx(1.0));
  // Far tail keeps relative accuracy: Φ(−10) ≈ 7.6198530241605e-24.
  CHECK(normal_cdf(-10.0) == doctest::Approx(7.6198530241605e-24).epsilon(1e-10));
  CHECK(normal_mass(10.0, INFINITY) == doctest::Approx(7.6198530241605e-24).epsilon(1e-10));
}

TEST_CASE("adaptive integration of a vector integrand with a kink") {
  const auto res = integrate(
      [](double x, double* out) {
        out[0] = std::abs(x - 0.3);
        out[1] = std::exp(-x * x);
      },
      2, {-2.0, 0.3, 2.0});
  CHECK(res.converged);
  CHECK(res.value[0] == doctest::Approx(0.5 * (2.3 * 2.3 + 1.7 * 1.7)).epsilon(1e-12));
  CHECK(res.value[1] == doctest::Approx(std::sqrt(std::numbers::pi) * std::erf(2.0)).epsilon(1e-12));
}

TEST_CASE("depressed cubic roots solve the cubic") {
  for (auto [p, q] : {std::pair{-3.0, 1.0}, {-3.0, 2.0}, {1.0, 1.0}, {0.0, -8.0}, {-0.7, 0.01}}) {
    const auto roots = depressed_cubic_roots(p, q);
    REQUIRE(!roots.empty());
    for (double t : roots) CHECK(std::abs(t * t * t + p * t + q) < 1e-12);
    CHECK(std::is_sorted(roots.begin(), roots.end()));
    const double disc = -(4 * p * p * p + 27 * q * q);
    if (disc > 1e-9) CHECK(roots.size() == 3);
  }
  CHECK(depressed_cubic_roots(0.0, -8.0).front() == doctest::Approx(2.0));
}
