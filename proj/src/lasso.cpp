#include "cimcs/lasso.hpp"

#include <algorithm>
#include <cmath>

#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"

namespace cimcs {

double soft_threshold(double h, double eta, Chi chi) {
  if (h >= eta) return h - eta;
  if (chi == Chi::Signed && h <= -eta) return h + eta;
  return 0.0;
}

double lasso_objective(const Instance& inst, const Vector& y_est, double eta) {
  Vector u;
  kernels::apply(inst.a_mat, y_est, u);
  return 0.5 * (inst.y - u).squaredNorm() + eta * y_est.lpNorm<1>();
}

namespace {

double power_iteration(const std::function<void(const Vector&, Vector&)>& op, Eigen::Index n, std::size_t iters) {
  if (n == 0) return 0.0;
  // Deterministic start with no special alignment to any axis.
  Vector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = 1.0 + 0.5 * std::sin(1.0 + static_cast<double>(i));
  x.normalize();
  Vector y;
  double est = 0.0;
  for (std::size_t k = 0; k < iters; ++k) {
    op(x, y);
    const double nrm = y.norm();
    if (nrm == 0.0) return 0.0;
    const double next = x.dot(y);
    x = y / nrm;
    if (k > 5 && std::abs(next - est) <= 1e-10 * std::abs(next)) {
      est = next;
      break;
    }
    est = next;
  }
  return est;
}

}  // namespace

double spectral_norm_sq(const Matrix& a, std::size_t iters) {
  return power_iteration(
      [&](const Vector& x, Vector& out) {
        Vector u;
        kernels::apply(a, x, u);
        kernels::correlate(a, u, out);
      },
      a.cols(), iters);
}

double spectral_norm_sq(const LinearOperator& op, std::size_t iters) {
  return power_iteration(
      [&](const Vector& x, Vector& out) {
        Vector u;
        op.apply(x, u);
        op.adjoint(u, out);
      },
      op.cols, iters);
}

IstaResult ista_quadratic(const std::function<void(const Vector&, Vector&)>& apply_j, const Vector& h, double eta,
                          Chi chi, double lipschitz, std::size_t max_iters, double tol, const Vector* warm_start) {
  if (!(eta >= 0.0)) throw ParameterError("eta must be >= 0");
  if (!(lipschitz > 0.0)) throw ParameterError("Lipschitz bound must be > 0");
  const Eigen::Index n = h.size();
  IstaResult out;
  out.y = warm_start ? *warm_start : Vector::Zero(n);
  if (out.y.size() != n) throw DimensionError("warm start length mismatch");
  const double step = 1.0 / lipschitz;
  Vector jy, next(n);
  for (std::size_t it = 0; it < max_iters; ++it) {
    apply_j(out.y, jy);
    double change = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      next[i] = soft_threshold(out.y[i] - step * (jy[i] - h[i]), step * eta, chi);
      change = std::max(change, std::abs(next[i] - out.y[i]));
    }
    out.y.swap(next);
    out.iterations = it + 1;
    if (change < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

IstaResult run_ista(const Instance& inst, double eta, Chi chi, std::size_t max_iters, double tol,
                    const Vector* warm_start) {
  const Matrix& a = inst.a_mat;
  Vector h;
  kernels::correlate(a, inst.y, h);
  // A slightly inflated bound keeps the step safely below 2/L despite the power-iteration estimate.
  const double lip = std::max(spectral_norm_sq(a) * 1.01, 1e-12);
  Vector u;
  return ista_quadratic(
      [&](const Vector& x, Vector& out) {
        kernels::apply(a, x, u);
        kernels::correlate(a, u, out);
      },
      h, eta, chi, lip, max_iters, tol, warm_start);
}

L1EqResult solve_l1_equality(const LinearOperator& b, const Vector& y, double gamma_prime,
                             const std::function<void(const Vector&, Vector&)>& smooth, const L1EqOptions& opts) {
  if (y.size() != b.rows) throw DimensionError("solve_l1_equality: y length does not match operator rows");
  if (gamma_prime < 0.0) throw ParameterError("gamma_prime must be >= 0");
  if (gamma_prime > 0.0 && !smooth) throw ParameterError("gamma_prime > 0 needs a smoothness operator");
  L1EqResult out;
  out.w = Vector::Zero(b.cols);
  const double ynorm = std::max(y.norm(), 1.0);
  if (y.norm() == 0.0) {
    out.converged = true;
    return out;
  }
  Vector bty;
  b.adjoint(y, bty);
  const double mu = opts.mu > 0.0 ? opts.mu : 1e-3 * bty.lpNorm<Eigen::Infinity>();
  const bool use_smooth = gamma_prime > 0.0;

  Vector t1, t2;
  auto apply_j = [&](const Vector& x, Vector& out_v) {
    b.apply(x, t1);
    b.adjoint(t1, out_v);
    if (use_smooth) {
      smooth(x, t2);
      out_v += (2.0 * mu * gamma_prime) * t2;
    }
  };
  const double lip = 1.01 * power_iteration(apply_j, b.cols, 100);

  Vector yk = y, h, resid;
  for (std::size_t k = 0; k < opts.max_outer; ++k) {
    b.adjoint(yk, h);
    IstaResult inner = ista_quadratic(apply_j, h, mu, Chi::Signed, lip, opts.max_inner, 1e-12, &out.w);
    out.w = std::move(inner.y);
    b.apply(out.w, resid);
    resid = y - resid;
    out.outer_iterations = k + 1;
    out.residual = resid.norm() / ynorm;
    if (out.residual <= opts.tol) {
      out.converged = true;
      break;
    }
    yk += resid;
  }
  return out;
}

}  // namespace cimcs
