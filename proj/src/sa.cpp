#include "cimcs/sa.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <boost/random/uniform_01.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"
#include "cimcs/metrics.hpp"

namespace cimcs {

namespace {

// log(e^x + e^y)
double logaddexp(double x, double y) {
  const double m = std::max(x, y);
  return m + std::log1p(std::exp(-std::abs(x - y)));
}

}  // namespace

void CoolingSchedule::validate() const {
  if (kind == Kind::Zero) {
    if (!(horizon >= 0.0)) throw ParameterError("horizon must be >= 0");
    return;
  }
  if (!(t0_temp > final_temp) || !(final_temp > 0.0)) throw ParameterError("need t0_temp > final_temp > 0");
  if (!(horizon > 0.0)) throw ParameterError("horizon must be > 0");
}

double CoolingSchedule::log_tau() const {
  const double ratio = t0_temp / final_temp;
  const double lh = std::log(horizon);
  switch (kind) {
    case Kind::Zero:
      return std::numeric_limits<double>::infinity();
    case Kind::ExpCooling:
      return lh - std::log(std::log(ratio));
    case Kind::InvLinear:
      return lh - std::log(ratio - 1.0);
    case Kind::InvLog: {
      // e + H/τ = e^R  ⇒  log τ = log H − log(e^R − e) = log H − (R + log1p(−e^{1−R})).
      return lh - (ratio + std::log1p(-std::exp(1.0 - ratio)));
    }
  }
  return 0.0;
}

double CoolingSchedule::tau() const { return std::exp(log_tau()); }

double CoolingSchedule::temperature(double t) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::ExpCooling:
      return t0_temp * std::exp(-t / tau());
    case Kind::InvLinear:
      return t0_temp / (1.0 + t / tau());
    case Kind::InvLog:
      if (t <= 0.0) return t0_temp;
      return t0_temp / logaddexp(1.0, std::log(t) - log_tau());
  }
  return 0.0;
}

std::string_view to_string(CoolingSchedule::Kind kind) {
  switch (kind) {
    case CoolingSchedule::Kind::Zero:
      return "zero";
    case CoolingSchedule::Kind::ExpCooling:
      return "exp";
    case CoolingSchedule::Kind::InvLinear:
      return "invlinear";
    case CoolingSchedule::Kind::InvLog:
      return "invlog";
  }
  return "?";
}

CoolingSchedule::Kind cooling_kind_from_string(std::string_view s) {
  if (s == "zero") return CoolingSchedule::Kind::Zero;
  if (s == "exp") return CoolingSchedule::Kind::ExpCooling;
  if (s == "invlinear") return CoolingSchedule::Kind::InvLinear;
  if (s == "invlog") return CoolingSchedule::Kind::InvLog;
  throw ParameterError("unknown cooling schedule '" + std::string(s) + "'");
}

double acceptance_ratio(const Instance& inst, const Vector& r, const Bits& sigma, std::size_t i, double lambda,
                        double temp) {
  if (i >= inst.n()) throw DimensionError("acceptance_ratio: index out of range");
  const auto ii = static_cast<Eigen::Index>(i);
  const Vector v = masked(r, sigma);
  Vector u;
  kernels::apply(inst.a_mat, v, u);
  const double h = inst.a_mat.col(ii).dot(inst.y - u) + v[ii];
  const double delta = flip_delta(r[ii], h, sigma[i], lambda);
  if (temp <= 0.0) return delta < 0.0 ? 1.0 : 0.0;
  return std::exp(-delta / temp);
}

SaResult run_sa(const Instance& inst, const Vector& r, double lambda, const CoolingSchedule& sched, Rng& rng,
                double trace_every) {
  sched.validate();
  const std::size_t n = inst.n();
  if (static_cast<std::size_t>(r.size()) != n) throw DimensionError("run_sa: r length does not match N");
  SaResult out;
  out.sigma.assign(n, 0);
  if (n == 0) return out;

  // h = b − G v + v with v = σ∘r; an accepted flip costs one Gram column.
  Matrix gram;
  kernels::gram(inst.a_mat, gram);
  Vector h;
  kernels::correlate(inst.a_mat, inst.y, h);
  Vector v = Vector::Zero(static_cast<Eigen::Index>(n));

  const double nd = static_cast<double>(n);
  const auto total = static_cast<std::size_t>(std::llround(sched.horizon * nd));
  const bool zero = sched.kind == CoolingSchedule::Kind::Zero;
  boost::random::uniform_int_distribution<std::size_t> site(0, n - 1);
  boost::random::uniform_01<double> uni;
  double next_trace = 0.0;

  auto record = [&](double sweep) { out.trace.push_back({sweep, direction_cosine(inst.xi_true, out.sigma)}); };
  auto stable = [&] {
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      if (flip_delta(r[jj], h[jj], out.sigma[j], lambda) < 0.0) return false;
    }
    return true;
  };

  for (std::size_t k = 0; k < total; ++k) {
    const double sweep = static_cast<double>(k) / nd;
    if (trace_every > 0.0 && sweep >= next_trace) {
      record(sweep);
      next_trace += trace_every;
    }
    // At zero temperature, once no single flip lowers ℋ every later proposal is rejected.
    if (zero && k % n == 0 && stable()) {
      out.stopped_early = true;
      break;
    }
    const std::size_t i = site(rng);
    const auto ii = static_cast<Eigen::Index>(i);
    const double delta = flip_delta(r[ii], h[ii], out.sigma[i], lambda);
    bool accept;
    if (zero) {
      accept = delta < 0.0;
    } else {
      const double temp = sched.temperature(sweep);
      accept = std::exp(-delta / temp) > uni(rng);
    }
    ++out.proposals;
    if (!accept) continue;
    ++out.accepted;
    out.sigma[i] ^= 1;
    const double nv = out.sigma[i] ? r[ii] : 0.0;
    const double dv = nv - v[ii];
    v[ii] = nv;
    if (dv != 0.0) {
      // Gram columns have G_ii ≈ 1; the self term is added back so h_i excludes itself exactly.
      h -= dv * gram.col(ii);
      h[ii] += dv * gram(ii, ii);
    }
  }
  if (trace_every > 0.0) record(static_cast<double>(out.proposals) / nd);
  return out;
}

}  // namespace cimcs
