#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cimcs/errors.hpp"
#include "cimcs/problem.hpp"

using namespace cimcs;

namespace {

InstanceParams params(std::size_t n, double alpha, double a, SourceDistribution d, double beta = 0.0,
                      std::uint64_t seed = 1) {
  InstanceParams p;
  p.n = n;
  p.alpha = alpha;
  p.a = a;
  p.beta = beta;
  p.dist = d;
  p.chi = d.natural_chi();
  p.seed = seed;
  return p;
}

// Trapezoid rule on a wide uniform grid.
double numeric_moment(const SourceDistribution& d, int k) {
  // Nonnegative densities jump at 0; integrate from the right limit.
  const double lo = d.is_signed() ? -30.0 : 0.0, hi = 30.0;
  const int n = 600000;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + h * i;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    s += w * std::pow(x, k) * d.pdf(d.is_signed() ? x : std::max(x, 1e-300));
  }
  return s * h;
}

}  // namespace

TEST_CASE("densities integrate to one and match the closed-form second moment") {
  for (auto d : {SourceDistribution::gaussian(), SourceDistribution::half_gaussian(), SourceDistribution::gaussian(2.5),
                 SourceDistribution::gamma(), SourceDistribution::bilateral_gamma(3.0, 0.5)}) {
    CAPTURE(to_string(d.kind));
    CHECK(numeric_moment(d, 0) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(numeric_moment(d, 2) == doctest::Approx(second_moment(d)).epsilon(1e-5));
  }
}

TEST_CASE("sample moments follow the density") {
  Rng rng(5);
  for (auto d : {SourceDistribution::gaussian(), SourceDistribution::half_gaussian(), SourceDistribution::gamma(),
                 SourceDistribution::bilateral_gamma()}) {
    CAPTURE(to_string(d.kind));
    const Vector x = sample_source(d, 200000, rng);
    CHECK(x.squaredNorm() / x.size() == doctest::Approx(second_moment(d)).epsilon(0.02));
    CHECK(x.mean() == doctest::Approx(numeric_moment(d, 1)).epsilon(0.02).scale(1.0));
    if (!d.is_signed()) CHECK(x.minCoeff() >= 0.0);
  }
}

TEST_CASE("synthesize: shapes, unit columns, exact support size, noise-free consistency") {
  const Instance inst = synthesize(params(300, 0.6, 0.2, SourceDistribution::half_gaussian()));
  CHECK(inst.m() == 180);
  CHECK(inst.n() == 300);
  for (Eigen::Index j = 0; j < inst.a_mat.cols(); ++j) CHECK(inst.a_mat.col(j).norm() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(popcount(inst.xi_true) == 60);
  CHECK((inst.y - inst.a_mat * inst.signal()).norm() < 1e-12);
}

TEST_CASE("synthesize is deterministic per seed and differs across seeds") {
  const auto p = params(64, 0.5, 0.25, SourceDistribution::gaussian(), 0.05, 9);
  const Instance a = synthesize(p), b = synthesize(p);
  CHECK(a.a_mat == b.a_mat);
  CHECK(a.y == b.y);
  CHECK(a.xi_true == b.xi_true);
  auto q = p;
  q.seed = 10;
  CHECK(synthesize(q).a_mat != a.a_mat);
}

TEST_CASE("observation noise has the requested standard deviation") {
  const Instance inst = synthesize(params(4000, 0.5, 0.1, SourceDistribution::gaussian(), 0.1, 3));
  const Vector noise = inst.y - inst.a_mat * inst.signal();
  CHECK(std::sqrt(noise.squaredNorm() / noise.size()) == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("parameter validation") {
  auto p = params(100, 0.5, 0.2, SourceDistribution::gaussian());
  p.chi = Chi::NonNegative;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = params(100, 1.5, 0.2, SourceDistribution::gaussian());
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = params(100, 0.5, -0.1, SourceDistribution::gaussian());
  CHECK_THROWS_AS(p.validate(), ParameterError);
  CHECK_THROWS_AS(SourceDistribution::gamma(-1.0).validate(), ParameterError);
  CHECK_THROWS_AS(distribution_kind_from_string("cauchy"), ParameterError);
}

TEST_CASE("instance files round-trip exactly") {
  const Instance inst = synthesize(params(40, 0.5, 0.3, SourceDistribution::bilateral_gamma(), 0.01, 4));
  const auto dir = std::filesystem::temp_directory_path() / "cimcs_test_instance";
  save_instance(inst, dir);
  const Instance back = load_instance(dir);
  CHECK(back.a_mat == inst.a_mat);
  CHECK(back.y == inst.y);
  CHECK(back.x_true == inst.x_true);
  CHECK(back.xi_true == inst.xi_true);
  CHECK(back.params.alpha == inst.params.alpha);
  CHECK(back.params.chi == inst.params.chi);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_matrix(dir / "missing.mat"), IoError);
}
