#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace cimcs::quad {

/// Nodes and weights of an interpolatory rule.
struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss–Hermite rule for ∫ e^{−x²} f(x) dx, from the Golub–Welsch eigenproblem.
Rule gauss_hermite(std::size_t order);

double normal_pdf(double t);
/// Φ(t), accurate in both tails.
double normal_cdf(double t);
/// Φ(hi) − Φ(lo) without cancellation in the tails; lo ≤ hi, infinities allowed.
double normal_mass(double lo, double hi);

/// ∫_lo^hi z^k φ(z) dz for k = 0, 1, 2.
struct PartialMoments {
  double m0;
  double m1;
  double m2;
};
PartialMoments normal_partial_moments(double lo, double hi);

struct AdaptiveOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  std::size_t max_panels = 4000;
};

struct AdaptiveResult {
  std::vector<double> value;
  double error = 0.0;
  std::size_t panels = 0;
  bool converged = false;
};

/// Globally adaptive 15-point Gauss–Kronrod integration of a vector-valued
/// integrand f(x, out[dim]) over [breakpoints.front(), breakpoints.back()],
/// with the initial panels split at every breakpoint. Error is the largest
/// component's |Kronrod − Gauss| summed over panels.
AdaptiveResult integrate(const std::function<void(double, double*)>& f, std::size_t dim, std::vector<double> breakpoints,
                         const AdaptiveOptions& opts = {});

/// Real roots of t³ + p t + q = 0, ascending.
std::vector<double> depressed_cubic_roots(double p, double q);

}  // namespace cimcs::quad
