#include "cimcs/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cimcs/errors.hpp"

namespace cimcs::quad {

Rule gauss_hermite(std::size_t order) {
  if (order == 0) throw ParameterError("Gauss-Hermite order must be >= 1");
  const auto n = static_cast<Eigen::Index>(order);
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 1; i < n; ++i) jac(i, i - 1) = jac(i - 1, i) = std::sqrt(static_cast<double>(i) / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  Rule rule;
  const double mu0 = std::sqrt(std::numbers::pi);
  for (Eigen::Index i = 0; i < n; ++i) {
    rule.nodes.push_back(es.eigenvalues()[i]);
    const double v0 = es.eigenvectors()(0, i);
    rule.weights.push_back(mu0 * v0 * v0);
  }
  return rule;
}

double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::numbers::sqrt2); }

double normal_mass(double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  // Work in the tail that keeps both terms small.
  if (lo >= 0.0) return 0.5 * (std::erfc(lo / std::numbers::sqrt2) - std::erfc(hi / std::numbers::sqrt2));
  if (hi <= 0.0) return 0.5 * (std::erfc(-hi / std::numbers::sqrt2) - std::erfc(-lo / std::numbers::sqrt2));
  return 1.0 - 0.5 * std::erfc(-lo / std::numbers::sqrt2) - 0.5 * std::erfc(hi / std::numbers::sqrt2);
}

PartialMoments normal_partial_moments(double lo, double hi) {
  if (!(hi > lo)) return {0.0, 0.0, 0.0};
  const double pl = std::isinf(lo) ? 0.0 : normal_pdf(lo);
  const double pu = std::isinf(hi) ? 0.0 : normal_pdf(hi);
  const double tl = std::isinf(lo) ? 0.0 : lo * pl;
  const double tu = std::isinf(hi) ? 0.0 : hi * pu;
  const double m0 = normal_mass(lo, hi);
  return {m0, pl - pu, m0 + tl - tu};
}

namespace {

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;
using G7 = boost::math::quadrature::gauss<double, 7>;

struct Panel {
  double lo, hi;
  std::vector<double> value;
  double error;
};

Panel eval_panel(const std::function<void(double, double*)>& f, std::size_t dim, double lo, double hi,
                 std::vector<double>& buf) {
  const auto& xk = GK::abscissa();
  const auto& wk = GK::weights();
  const auto& wg = G7::weights();
  const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
  Panel p{lo, hi, std::vector<double>(dim, 0.0), 0.0};
  std::vector<double> gauss(dim, 0.0);
  buf.resize(dim);
  for (std::size_t k = 0; k < xk.size(); ++k) {
    const int sides = k == 0 ? 1 : 2;
    for (int sgn = 0; sgn < sides; ++sgn) {
      const double x = sgn == 0 ? c + h * xk[k] : c - h * xk[k];
      f(x, buf.data());
      for (std::size_t d = 0; d < dim; ++d) {
        p.value[d] += wk[k] * buf[d];
        // The 7-point Gauss nodes are the even-indexed Kronrod nodes.
        if (k % 2 == 0) gauss[d] += wg[k / 2] * buf[d];
      }
    }
  }
  for (std::size_t d = 0; d < dim; ++d) {
    p.value[d] *= h;
    gauss[d] *= h;
    p.error = std::max(p.error, std::abs(p.value[d] - gauss[d]));
  }
  return p;
}

}  // namespace

AdaptiveResult integrate(const std::function<void(double, double*)>& f, std::size_t dim, std::vector<double> breakpoints,
                         const AdaptiveOptions& opts) {
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());
  AdaptiveResult res;
  res.value.assign(dim, 0.0);
  if (breakpoints.size() < 2) {
    res.converged = true;
    return res;
  }
  std::vector<double> buf;
  std::vector<Panel> panels;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
    panels.push_back(eval_panel(f, dim, breakpoints[i], breakpoints[i + 1], buf));

  auto totals = [&] {
    std::fill(res.value.begin(), res.value.end(), 0.0);
    res.error = 0.0;
    for (const auto& p : panels) {
      for (std::size_t d = 0; d < dim; ++d) res.value[d] += p.value[d];
      res.error += p.error;
    }
  };
  totals();
  while (true) {
    double scale = 0.0;
    for (double v : res.value) scale = std::max(scale, std::abs(v));
    if (res.error <= std::max(opts.abs_tol, opts.rel_tol * scale)) {
      res.converged = true;
      break;
    }
    if (panels.size() >= opts.max_panels) break;
    auto worst = std::max_element(panels.begin(), panels.end(),
                                  [](const Panel& a, const Panel& b) { return a.error < b.error; });
    const double lo = worst->lo, hi = worst->hi, mid = 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    *worst = eval_panel(f, dim, lo, mid, buf);
    panels.push_back(eval_panel(f, dim, mid, hi, buf));
    totals();
  }
  res.panels = panels.size();
  return res;
}

std::vector<double> depressed_cubic_roots(double p, double q) {
  std::vector<double> roots;
  const double disc = -(4.0 * p * p * p + 27.0 * q * q);
  if (p == 0.0) {
    roots.push_back(std::cbrt(-q));
  } else if (disc > 0.0) {
    // Three real roots, trigonometric form.
    const double m = 2.0 * std::sqrt(-p / 3.0);
    const double arg = std::clamp(3.0 * q / (p * m), -1.0, 1.0);
    const double th = std::acos(arg) / 3.0;
    for (int k = 0; k < 3; ++k) roots.push_back(m * std::cos(th - 2.0 * std::numbers::pi * k / 3.0));
  } else {
    const double s = std::sqrt(q * q / 4.0 + p * p * p / 27.0);
    roots.push_back(std::cbrt(-q / 2.0 + s) + std::cbrt(-q / 2.0 - s));
  }
  // Newton polish.
  for (double& t : roots) {
    for (int it = 0; it < 3; ++it) {
      const double d = 3.0 * t * t + p;
      if (d == 0.0) break;
      t -= (t * t * t + p * t + q) / d;
    }
  }
  std::sort(roots.begin(), roots.end());
  return roots;
}

}  // namespace cimcs::quad
