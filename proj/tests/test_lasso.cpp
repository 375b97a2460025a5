#include <doctest.h>

#include <cmath>

#include <Eigen/SVD>

#include "cimcs/lasso.hpp"

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

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(0.3, 0.1, Chi::Signed) == doctest::Approx(0.2));
  CHECK(soft_threshold(-0.3, 0.1, Chi::Signed) == doctest::Approx(-0.2));
  CHECK(soft_threshold(0.05, 0.1, Chi::Signed) == 0.0);
  CHECK(soft_threshold(-0.3, 0.1, Chi::NonNegative) == 0.0);
  CHECK(soft_threshold(0.1, 0.1, Chi::NonNegative) == 0.0);
}

TEST_CASE("ISTA solutions satisfy the optimality conditions") {
  for (Chi chi : {Chi::Signed, Chi::NonNegative}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const Instance inst = make(120, 0.5, 0.15, seed, chi, 0.02);
      const double eta = 0.05;
      const IstaResult res = run_ista(inst, eta, chi, 100000, 1e-13);
      REQUIRE(res.converged);
      const Vector c = inst.a_mat.transpose() * (inst.y - inst.a_mat * res.y);
      for (Eigen::Index i = 0; i < c.size(); ++i) {
        const double yi = res.y[i];
        if (yi != 0.0) {
          CHECK(c[i] == doctest::Approx(eta * (yi > 0 ? 1.0 : -1.0)).epsilon(1e-7));
          if (chi == Chi::NonNegative) CHECK(yi > 0.0);
        } else if (chi == Chi::Signed) {
          CHECK(std::abs(c[i]) <= eta + 1e-8);
        } else {
          CHECK(c[i] <= eta + 1e-8);
        }
      }
    }
  }
}

TEST_CASE("objective decreases from a warm start and ista_quadratic reproduces run_ista") {
  const Instance inst = make(80, 0.6, 0.2, 5, Chi::Signed, 0.01);
  const IstaResult res = run_ista(inst, 0.03, Chi::Signed, 100000, 1e-13);
  const Vector zero = Vector::Zero(80);
  CHECK(lasso_objective(inst, res.y, 0.03) <= lasso_objective(inst, zero, 0.03));
  const Matrix j = inst.a_mat.transpose() * inst.a_mat;
  const Vector h = inst.a_mat.transpose() * inst.y;
  const IstaResult q = ista_quadratic([&](const Vector& w, Vector& out) { out = j * w; }, h, 0.03, Chi::Signed,
                                      spectral_norm_sq(inst.a_mat), 100000, 1e-13);
  CHECK((q.y - res.y).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("spectral norm matches the largest singular value") {
  const Instance inst = make(60, 0.5, 0.2, 2, Chi::Signed);
  const double s = Eigen::JacobiSVD<Matrix>(inst.a_mat).singularValues()[0];
  CHECK(spectral_norm_sq(inst.a_mat, 2000) == doctest::Approx(s * s).epsilon(1e-6));
  LinearOperator op{inst.a_mat.rows(), inst.a_mat.cols(),
                    [&](const Vector& w, Vector& out) { out = inst.a_mat * w; },
                    [&](const Vector& d, Vector& out) { out = inst.a_mat.transpose() * d; }};
  CHECK(spectral_norm_sq(op, 2000) == doctest::Approx(s * s).epsilon(1e-6));
}

TEST_CASE("l1 equality solve meets the constraint and recovers an easy sparse signal") {
  const Instance inst = make(200, 0.5, 0.08, 7, Chi::Signed);
  LinearOperator op{inst.a_mat.rows(), inst.a_mat.cols(),
                    [&](const Vector& w, Vector& out) { out = inst.a_mat * w; },
                    [&](const Vector& d, Vector& out) { out = inst.a_mat.transpose() * d; }};
  L1EqOptions opts;
  opts.tol = 1e-8;
  opts.max_outer = 2000;
  const L1EqResult res = solve_l1_equality(op, inst.y, 0.0, {}, opts);
  CHECK(res.converged);
  CHECK((inst.a_mat * res.w - inst.y).norm() <= 1e-6 * std::max(1.0, inst.y.norm()));
  CHECK((res.w - inst.signal()).lpNorm<Eigen::Infinity>() < 1e-4);
}
