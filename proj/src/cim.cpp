#include "cimcs/cim.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "cimcs/errors.hpp"
#include "cimcs/kernels.hpp"
#include "cimcs/metrics.hpp"

namespace cimcs {

double PumpSchedule::at(double t) const {
  if (kind == Kind::Constant || ramp_time <= 0.0) return p_final;
  const double u = std::min(std::max(t / ramp_time, 0.0), 1.0);
  return kind == Kind::LinearRamp ? p_final * u : p_final * u * u;
}

std::string_view to_string(PumpSchedule::Kind kind) {
  switch (kind) {
    case PumpSchedule::Kind::Constant:
      return "constant";
    case PumpSchedule::Kind::LinearRamp:
      return "linear";
    case PumpSchedule::Kind::SquareRamp:
      return "square";
  }
  return "?";
}

PumpSchedule::Kind pump_kind_from_string(std::string_view s) {
  if (s == "constant") return PumpSchedule::Kind::Constant;
  if (s == "linear") return PumpSchedule::Kind::LinearRamp;
  if (s == "square") return PumpSchedule::Kind::SquareRamp;
  throw ParameterError("unknown pump schedule '" + std::string(s) + "'");
}

void CimConfig::validate() const {
  if (!(as2 > 0.0)) throw ParameterError("as2 must be > 0");
  if (!(k_tilde > 0.0)) throw ParameterError("k_tilde must be > 0");
  if (!(dt > 0.0)) throw ParameterError("dt must be > 0");
  if (!(duration >= dt)) throw ParameterError("duration must be >= dt");
  if (!(dt * (1.0 + pump.p_final) < 0.5)) throw ParameterError("dt too large for the pump level");
  if (!(pump.p_final >= 0.0)) throw ParameterError("p_final must be >= 0");
}

double CimConfig::inv_as() const { return std::isinf(as2) ? 0.0 : 1.0 / std::sqrt(as2); }

double default_duration(double as2) { return as2 >= 1e6 ? 5.0 : 200.0; }

Vector local_field_cim(const Instance& inst, const Vector& r, const Bits& sigma) {
  if (static_cast<std::size_t>(r.size()) != inst.n() || sigma.size() != inst.n())
    throw DimensionError("local_field_cim: r/sigma length does not match N");
  Vector h;
  kernels::local_field(inst.a_mat, inst.y, masked(r, sigma), h);
  return h;
}

double injection_field(double h, double eta, Chi chi, double k_tilde) { return k_tilde * (f_chi(h, chi) - eta); }

Vector injection_field(const Vector& h, double eta, Chi chi, double k_tilde) {
  Vector f(h.size());
  for (Eigen::Index i = 0; i < h.size(); ++i) f[i] = injection_field(h[i], eta, chi, k_tilde);
  return f;
}

namespace {

void draw_noise(Rng& rng, Eigen::Index n, bool on, Vector& g1, Vector& g2) {
  g1.resize(n);
  g2.resize(n);
  if (!on) {
    g1.setZero();
    g2.setZero();
    return;
  }
  boost::random::normal_distribution<double> normal;
  for (Eigen::Index i = 0; i < n; ++i) {
    g1[i] = normal(rng);
    g2[i] = normal(rng);
  }
}

void guard(const OpoState& st, const CimConfig& cfg) {
  const double bound = 10.0 * std::sqrt(std::max(cfg.pump.p_final, 1e-12));
  for (Eigen::Index i = 0; i < st.c.size(); ++i) {
    const double c = st.c[i], s = st.s[i];
    if (!std::isfinite(c) || !std::isfinite(s) || std::abs(c) > bound || std::abs(s) > bound)
      throw DivergenceError("OPO amplitude diverged at pulse " + std::to_string(i) + ", t=" + std::to_string(st.t) +
                                "; reduce dt",
                            st.t, static_cast<std::size_t>(i));
  }
}

}  // namespace

OpoState wsde_step(const OpoState& state, const Vector& f, double p_now, const CimConfig& cfg, Rng& rng) {
  if (state.c.size() != state.s.size() || f.size() != state.c.size())
    throw DimensionError("wsde_step: c, s and f lengths differ");
  if (!(cfg.dt > 0.0)) throw ParameterError("dt must be > 0");
  OpoState next = state;
  Vector g1, g2;
  const double inv_as = cfg.inv_as();
  draw_noise(rng, state.c.size(), inv_as > 0.0, g1, g2);
  kernels::wsde_update(next.c, next.s, f, p_now, cfg.dt, inv_as, g1, g2);
  next.t = state.t + cfg.dt;
  guard(next, cfg);
  return next;
}

Bits run_support_estimation(const Instance& inst, const Vector& r, double eta, const CimConfig& cfg, Rng& rng,
                            const CimObserver* observer, const Matrix* gram_in) {
  cfg.validate();
  const Eigen::Index n = static_cast<Eigen::Index>(inst.n());
  if (r.size() != n) throw DimensionError("run_support_estimation: r length does not match N");
  if (!r.allFinite()) throw ParameterError("run_support_estimation: r must be finite");

  // h = b − g + v with b = Aᵀy, g = G v, v = σ∘r; g follows σ flips through Gram columns.
  Matrix gram_own;
  if (!gram_in) kernels::gram(inst.a_mat, gram_own);
  const Matrix& gram = gram_in ? *gram_in : gram_own;
  if (gram.rows() != n || gram.cols() != n) throw DimensionError("run_support_estimation: Gram matrix size");
  Vector b;
  kernels::correlate(inst.a_mat, inst.y, b);

  OpoState st{Vector::Zero(n), Vector::Zero(n), 0.0};
  Bits sigma(static_cast<std::size_t>(n), 0);
  Vector v = Vector::Zero(n);
  Vector g = Vector::Zero(n);
  Vector h(n), f(n), g1, g2;
  const double inv_as = cfg.inv_as();
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  constexpr std::size_t kRebuildEvery = 256;  // bounds rounding drift in g
  std::vector<Eigen::Index> flipped;

  if (observer && observer->every > 0 && observer->on_state) observer->on_state(st);
  for (std::size_t k = 0; k < steps; ++k) {
    h = b - g + v;
    for (Eigen::Index i = 0; i < n; ++i) f[i] = injection_field(h[i], eta, cfg.chi, cfg.k_tilde);
    draw_noise(rng, n, inv_as > 0.0, g1, g2);
    kernels::wsde_update(st.c, st.s, f, cfg.pump.at(st.t), cfg.dt, inv_as, g1, g2);
    st.t = static_cast<double>(k + 1) * cfg.dt;
    guard(st, cfg);

    flipped.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::uint8_t bit = heaviside(st.c[i]);
      if (bit != sigma[static_cast<std::size_t>(i)]) {
        sigma[static_cast<std::size_t>(i)] = bit;
        flipped.push_back(i);
      }
    }
    if ((k + 1) % kRebuildEvery == 0) {
      v = masked(r, sigma);
      g.noalias() = gram * v;
    } else {
      for (Eigen::Index j : flipped) {
        const double nv = sigma[static_cast<std::size_t>(j)] ? r[j] : 0.0;
        const double dv = nv - v[j];
        v[j] = nv;
        if (dv != 0.0) g += dv * gram.col(j);
      }
    }
    if (observer && observer->every > 0 && observer->on_state && (k + 1) % observer->every == 0)
      observer->on_state(st);
  }
  return sigma;
}

}  // namespace cimcs
