#include <doctest.h>

#include <cmath>

#include <omp.h>

#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"
#include "cimcs/rng.hpp"

#include <boost/random/normal_distribution.hpp>

using namespace cimcs;
namespace ks = cimcs::kernels;

namespace {

Matrix random_matrix(Eigen::Index m, Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  boost::random::normal_distribution<double> nd;
  Matrix a(m, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = nd(rng);
  return a;
}

Vector random_vector(Eigen::Index n, std::uint64_t seed) { return random_matrix(n, 1, seed).col(0); }

}  // namespace

TEST_CASE("kernels agree with plain loops") {
  const Matrix a = random_matrix(37, 53, 1);
  const Vector u = random_vector(53, 2), v = random_vector(37, 3), y = random_vector(37, 4);
  Vector out;
  ks::serial::correlate(a, v, out);
  for (Eigen::Index j = 0; j < 53; ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < 37; ++i) s += a(i, j) * v[i];
    CHECK(out[j] == doctest::Approx(s).epsilon(1e-13));
  }
  ks::serial::apply(a, u, out);
  for (Eigen::Index i = 0; i < 37; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < 53; ++j) s += a(i, j) * u[j];
    CHECK(out[i] == doctest::Approx(s).epsilon(1e-13));
  }
  Matrix g;
  ks::serial::gram(a, g);
  for (Eigen::Index p = 0; p < 53; ++p)
    for (Eigen::Index q = 0; q < 53; ++q) {
      double s = 0.0;
      for (Eigen::Index i = 0; i < 37; ++i) s += a(i, p) * a(i, q);
      CHECK(g(p, q) == doctest::Approx(s).epsilon(1e-12).scale(1.0));
    }
  Matrix an = a;
  an.colwise().normalize();
  Vector h;
  ks::serial::local_field(an, y, u, h);
  for (Eigen::Index j = 0; j < 53; ++j) {
    double s = u[j];
    for (Eigen::Index i = 0; i < 37; ++i) {
      double av = 0.0;
      for (Eigen::Index k = 0; k < 53; ++k) av += an(i, k) * u[k];
      s += an(i, j) * (y[i] - av);
    }
    CHECK(h[j] == doctest::Approx(s).epsilon(1e-12).scale(1.0));
  }
}

TEST_CASE("wsde_update is one explicit Euler-Maruyama step") {
  Vector c = random_vector(20, 5), s = random_vector(20, 6);
  const Vector f = random_vector(20, 7), g1 = random_vector(20, 8), g2 = random_vector(20, 9);
  const Vector c0 = c, s0 = s;
  const double p = 1.2, dt = 0.01, ia = 0.03;
  ks::serial::wsde_update(c, s, f, p, dt, ia, g1, g2);
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double r2 = c0[i] * c0[i] + s0[i] * s0[i];
    const double noise = std::sqrt(dt) * ia * std::sqrt(r2 + 0.5);
    CHECK(c[i] == doctest::Approx(c0[i] + dt * ((-1 + p - r2) * c0[i] + f[i]) + noise * g1[i]).epsilon(1e-14));
    CHECK(s[i] == doctest::Approx(s0[i] + dt * ((-1 - p - r2) * s0[i]) + noise * g2[i]).epsilon(1e-14));
  }
}

TEST_CASE("serial and OpenMP kernels are bitwise identical for any thread count") {
  const Matrix a = random_matrix(300, 500, 11);
  Matrix an = a;
  an.colwise().normalize();
  const Vector u = random_vector(500, 12), v = random_vector(300, 13);
  Vector rs, rp;
  Matrix gs, gp;
  ks::serial::correlate(a, v, rs);
  ks::serial::gram(a, gs);
  for (int threads : {1, 2, 3, 8}) {
    CAPTURE(threads);
    omp_set_num_threads(threads);
    ks::parallel::correlate(a, v, rp);
    CHECK(rp == rs);
    Vector as, ap;
    ks::serial::apply(a, u, as);
    ks::parallel::apply(a, u, ap);
    CHECK(as == ap);
    ks::parallel::gram(a, gp);
    CHECK(gp == gs);
    Vector hs, hp;
    ks::serial::local_field(an, v, u, hs);
    ks::parallel::local_field(an, v, u, hp);
    CHECK(hs == hp);
    Vector c1 = u, s1 = u.reverse(), c2 = c1, s2 = s1;
    ks::serial::wsde_update(c1, s1, u, 1.5, 0.01, 0.1, u, u);
    ks::parallel::wsde_update(c2, s2, u, 1.5, 0.01, 0.1, u, u);
    CHECK(c1 == c2);
    CHECK(s1 == s2);
  }
}

TEST_CASE("shape mismatches throw") {
  const Matrix a = random_matrix(4, 5, 1);
  Vector out;
  CHECK_THROWS_AS(ks::serial::correlate(a, Vector::Zero(5), out), DimensionError);
  CHECK_THROWS_AS(ks::parallel::apply(a, Vector::Zero(4), out), DimensionError);
}
