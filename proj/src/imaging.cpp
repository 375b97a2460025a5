#include "cimcs/imaging.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <tuple>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>
#include <fftw3.h>

#include "cimcs/cim.hpp"
#include "cimcs/errors.hpp"

namespace cimcs::imaging {

bool is_power_of_two(Eigen::Index n) { return n > 0 && std::has_single_bit(static_cast<std::uint64_t>(n)); }

int haar_levels(Eigen::Index rows, Eigen::Index cols) {
  if (!is_power_of_two(rows) || !is_power_of_two(cols))
    throw DimensionError("image size must be a power of two in both directions, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  return static_cast<int>(std::countr_zero(static_cast<std::uint64_t>(std::min(rows, cols))));
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

void haar_step(double* x, Eigen::Index n, Eigen::Index stride, std::vector<double>& tmp) {
  const Eigen::Index h = n / 2;
  tmp.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < h; ++k) {
    const double a = x[2 * k * stride], b = x[(2 * k + 1) * stride];
    tmp[static_cast<std::size_t>(k)] = (a + b) * kInvSqrt2;
    tmp[static_cast<std::size_t>(h + k)] = (a - b) * kInvSqrt2;
  }
  for (Eigen::Index k = 0; k < n; ++k) x[k * stride] = tmp[static_cast<std::size_t>(k)];
}

void ihaar_step(double* x, Eigen::Index n, Eigen::Index stride, std::vector<double>& tmp) {
  const Eigen::Index h = n / 2;
  tmp.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < h; ++k) {
    const double a = x[k * stride], d = x[(h + k) * stride];
    tmp[static_cast<std::size_t>(2 * k)] = (a + d) * kInvSqrt2;
    tmp[static_cast<std::size_t>(2 * k + 1)] = (a - d) * kInvSqrt2;
  }
  for (Eigen::Index k = 0; k < n; ++k) x[k * stride] = tmp[static_cast<std::size_t>(k)];
}

}  // namespace

Image haar2d(const Image& x) {
  const int levels = haar_levels(x.rows(), x.cols());
  Image w = x;
  std::vector<double> tmp;
  Eigen::Index rr = x.rows(), cc = x.cols();
  for (int l = 0; l < levels; ++l) {
    // Eigen storage is column-major: element (i, j) at data[i + j·rows].
    for (Eigen::Index i = 0; i < rr; ++i) haar_step(w.data() + i, cc, w.rows(), tmp);
    for (Eigen::Index j = 0; j < cc; ++j) haar_step(w.data() + j * w.rows(), rr, 1, tmp);
    rr /= 2;
    cc /= 2;
  }
  return w;
}

Image ihaar2d(const Image& w) {
  const int levels = haar_levels(w.rows(), w.cols());
  Image x = w;
  std::vector<double> tmp;
  for (int l = levels - 1; l >= 0; --l) {
    const Eigen::Index rr = w.rows() >> l, cc = w.cols() >> l;
    for (Eigen::Index j = 0; j < cc; ++j) ihaar_step(x.data() + j * x.rows(), rr, 1, tmp);
    for (Eigen::Index i = 0; i < rr; ++i) ihaar_step(x.data() + i, cc, x.rows(), tmp);
  }
  return x;
}

Vector flatten(const Image& m) {
  Vector v(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
  return v;
}

Image unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (v.size() != rows * cols) throw DimensionError("unflatten: length does not match rows*cols");
  Image m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = v[i * cols + j];
  return m;
}

double HaarFactor::at(Eigen::Index p) const {
  if (p < offset || p >= offset + width) return 0.0;
  const double amp = 1.0 / std::sqrt(static_cast<double>(width));
  if (!wavelet) return amp;
  return p - offset < width / 2 ? amp : -amp;
}

HaarBasis haar_basis(Eigen::Index i, Eigen::Index j, Eigen::Index rows, Eigen::Index cols) {
  const int levels = haar_levels(rows, cols);
  if (i < 0 || i >= rows || j < 0 || j >= cols) throw DimensionError("haar_basis: index out of range");
  int l = 1;
  for (; l < levels; ++l)
    if (i >= (rows >> l) || j >= (cols >> l)) break;
  HaarBasis b;
  b.level = l;
  const Eigen::Index w = Eigen::Index{1} << l;
  const Eigen::Index hr = rows >> l, hc = cols >> l;
  b.row = i < hr ? HaarFactor{false, i * w, w} : HaarFactor{true, (i - hr) * w, w};
  b.col = j < hc ? HaarFactor{false, j * w, w} : HaarFactor{true, (j - hc) * w, w};
  return b;
}

Vector second_difference(const Vector& x) {
  const Eigen::Index n = x.size();
  Vector out(n);
  if (n == 1) {
    out[0] = 0.0;
    return out;
  }
  for (Eigen::Index p = 0; p < n; ++p) {
    const double lo = x[p == 0 ? 0 : p - 1];
    const double hi = x[p == n - 1 ? n - 1 : p + 1];
    out[p] = lo - 2.0 * x[p] + hi;
  }
  return out;
}

namespace {

// Δ applied along columns (vertical, row index varies) or rows (horizontal).
Image diff_vertical(const Image& x) {
  Image out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) out.col(j) = second_difference(x.col(j));
  return out;
}

Image diff_horizontal(const Image& x) {
  Image out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = second_difference(x.row(i).transpose()).transpose();
  return out;
}

double factor_diff_norm_sq(const HaarFactor& f, Eigen::Index n) {
  Vector v(n);
  for (Eigen::Index p = 0; p < n; ++p) v[p] = f.at(p);
  return second_difference(v).squaredNorm();
}

}  // namespace

void KSpaceProblem::validate() const {
  haar_levels(rows, cols);
  if (mask.size() != static_cast<std::size_t>(rows * cols)) throw DimensionError("mask size does not match image");
  if (sampled() == 0) throw ParameterError("mask samples no k-space point");
  if (!(gamma >= 0.0)) throw ParameterError("gamma must be >= 0");
}

Bits random_mask(Eigen::Index rows, Eigen::Index cols, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ParameterError("sampling fraction must lie in (0, 1]");
  const auto n = static_cast<std::size_t>(rows * cols);
  const auto k = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  Bits mask(n, 0);
  mask[0] = 1;
  std::vector<std::size_t> rest(n - 1);
  std::iota(rest.begin(), rest.end(), std::size_t{1});
  for (std::size_t t = 0; t + 1 < k; ++t) {
    boost::random::uniform_int_distribution<std::size_t> pick(t, rest.size() - 1);
    std::swap(rest[t], rest[pick(rng)]);
    mask[rest[t]] = 1;
  }
  return mask;
}

Image synth_phantom(Eigen::Index rows, Eigen::Index cols, double sparsity, Rng& rng) {
  haar_levels(rows, cols);
  if (!(sparsity > 0.0 && sparsity <= 1.0)) throw ParameterError("phantom sparsity must lie in (0, 1]");
  boost::random::uniform_real_distribution<double> u01(0.0, 1.0);
  Image img = Image::Zero(rows, cols);
  constexpr int kBlobs = 12;
  const double scale = static_cast<double>(std::min(rows, cols));
  for (int b = 0; b < kBlobs; ++b) {
    const double ci = u01(rng) * static_cast<double>(rows), cj = u01(rng) * static_cast<double>(cols);
    const double width = scale * (1.0 / 16.0 + u01(rng) * (1.0 / 4.0 - 1.0 / 16.0));
    const double amp = 0.3 + 0.7 * u01(rng);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) {
        const double di = static_cast<double>(i) - ci, dj = static_cast<double>(j) - cj;
        img(i, j) += amp * std::exp(-(di * di + dj * dj) / (2.0 * width * width));
      }
  }
  Image w = haar2d(img);
  const auto n = static_cast<std::size_t>(w.size());
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const double* d = w.data();
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) > std::abs(d[b]); });
  Image kept = Image::Zero(rows, cols);
  for (std::size_t t = 0; t < keep && t < n; ++t) kept.data()[idx[t]] = d[idx[t]];
  return ihaar2d(kept);
}

// ---------------------------------------------------------------------------
// FFT

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

struct Fourier2d::Impl {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  double scale = 1.0;
};

Fourier2d::Fourier2d(Eigen::Index rows, Eigen::Index cols) : impl_(std::make_unique<Impl>()), rows_(rows), cols_(cols) {
  const auto n = static_cast<std::size_t>(rows * cols);
  std::vector<std::complex<double>> a(n), b(n);
  std::lock_guard<std::mutex> lock(planner_mutex());
  auto* pa = reinterpret_cast<fftw_complex*>(a.data());
  auto* pb = reinterpret_cast<fftw_complex*>(b.data());
  impl_->fwd = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), pa, pb, FFTW_FORWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  impl_->bwd = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), pa, pb, FFTW_BACKWARD,
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!impl_->fwd || !impl_->bwd) throw Error("FFTW planning failed");
  impl_->scale = 1.0 / std::sqrt(static_cast<double>(n));
}

Fourier2d::~Fourier2d() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
}

void Fourier2d::forward(const Image& x, std::vector<double>& re, std::vector<double>& im) const {
  if (x.rows() != rows_ || x.cols() != cols_) throw DimensionError("Fourier2d::forward: image size");
  const auto n = static_cast<std::size_t>(rows_ * cols_);
  std::vector<std::complex<double>> in(n), out(n);
  for (Eigen::Index i = 0; i < rows_; ++i)
    for (Eigen::Index j = 0; j < cols_; ++j) in[static_cast<std::size_t>(i * cols_ + j)] = x(i, j);
  fftw_execute_dft(impl_->fwd, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
  re.resize(n);
  im.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    re[k] = out[k].real() * impl_->scale;
    im[k] = out[k].imag() * impl_->scale;
  }
}

void Fourier2d::inverse_real(const std::vector<double>& re, const std::vector<double>& im, Image& x) const {
  const auto n = static_cast<std::size_t>(rows_ * cols_);
  if (re.size() != n || im.size() != n) throw DimensionError("Fourier2d::inverse_real: plane size");
  std::vector<std::complex<double>> in(n), out(n);
  for (std::size_t k = 0; k < n; ++k) in[k] = {re[k], im[k]};
  fftw_execute_dft(impl_->bwd, reinterpret_cast<fftw_complex*>(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
  x.resize(rows_, cols_);
  for (Eigen::Index i = 0; i < rows_; ++i)
    for (Eigen::Index j = 0; j < cols_; ++j) x(i, j) = out[static_cast<std::size_t>(i * cols_ + j)].real() * impl_->scale;
}

Vector observe(const KSpaceProblem& prob, const Image& image, double noise_std, Rng* rng) {
  prob.validate();
  if (noise_std > 0.0 && !rng) throw ParameterError("observe: noise requested without an RNG");
  Fourier2d fft(prob.rows, prob.cols);
  std::vector<double> re, im;
  fft.forward(image, re, im);
  const std::size_t m = prob.sampled();
  Vector y(static_cast<Eigen::Index>(2 * m));
  std::size_t t = 0;
  for (std::size_t k = 0; k < prob.mask.size(); ++k) {
    if (!prob.mask[k]) continue;
    y[static_cast<Eigen::Index>(t)] = re[k];
    y[static_cast<Eigen::Index>(m + t)] = im[k];
    ++t;
  }
  if (noise_std > 0.0) {
    boost::random::normal_distribution<double> normal(0.0, noise_std);
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += normal(*rng);
  }
  return y;
}

namespace {

void scatter(const KSpaceProblem& prob, const Vector& y, std::vector<double>& re, std::vector<double>& im) {
  const std::size_t m = prob.sampled();
  if (static_cast<std::size_t>(y.size()) != 2 * m) throw DimensionError("k-space vector length must be 2x sampled");
  re.assign(prob.mask.size(), 0.0);
  im.assign(prob.mask.size(), 0.0);
  std::size_t t = 0;
  for (std::size_t k = 0; k < prob.mask.size(); ++k) {
    if (!prob.mask[k]) continue;
    re[k] = y[static_cast<Eigen::Index>(t)];
    im[k] = y[static_cast<Eigen::Index>(m + t)];
    ++t;
  }
}

}  // namespace

Image zero_fill(const KSpaceProblem& prob, const Vector& y) {
  prob.validate();
  Fourier2d fft(prob.rows, prob.cols);
  std::vector<double> re, im;
  scatter(prob, y, re, im);
  Image x;
  fft.inverse_real(re, im, x);
  return x;
}

// ---------------------------------------------------------------------------
// Effective operators

EffectiveOperators::EffectiveOperators(const KSpaceProblem& prob, const Vector& y)
    : prob_(prob), rows_(prob.rows), cols_(prob.cols), rows_s_(prob.sampled()) {
  prob.validate();
  if (static_cast<std::size_t>(y.size()) != 2 * rows_s_) throw DimensionError("observation length must be 2x sampled");
  fft_ = std::make_shared<Fourier2d>(rows_, cols_);
  for (std::size_t k = 0; k < prob.mask.size(); ++k)
    if (prob.mask[k]) sampled_.push_back(k);

  // BᵀB diagonal: |Fψ|² is translation invariant, so one FFT per (level, row kind, col kind) group.
  const Eigen::Index n = rows_ * cols_;
  diag_.resize(n);
  std::map<std::tuple<int, bool, bool>, double> group;
  std::vector<double> re, im;
  for (Eigen::Index i = 0; i < rows_; ++i)
    for (Eigen::Index j = 0; j < cols_; ++j) {
      const HaarBasis b = haar_basis(i, j, rows_, cols_);
      const auto key = std::make_tuple(b.level, b.row.wavelet, b.col.wavelet);
      auto it = group.find(key);
      if (it == group.end()) {
        HaarFactor r0 = b.row, c0 = b.col;
        r0.offset = 0;
        c0.offset = 0;
        Image phi(rows_, cols_);
        for (Eigen::Index p = 0; p < rows_; ++p)
          for (Eigen::Index q = 0; q < cols_; ++q) phi(p, q) = r0.at(p) * c0.at(q);
        fft_->forward(phi, re, im);
        double s = 0.0;
        for (std::size_t k : sampled_) s += re[k] * re[k] + im[k] * im[k];
        it = group.emplace(key, s).first;
      }
      double v = it->second;
      if (prob.gamma > 0.0) v += prob.gamma * (factor_diff_norm_sq(b.row, rows_) + factor_diff_norm_sq(b.col, cols_));
      diag_[i * cols_ + j] = v;
    }
  d_.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(diag_[k] > 0.0))
      throw RankDeficiencyError("J-tilde diagonal vanishes at coefficient " + std::to_string(k) + "; cannot normalize",
                                static_cast<std::size_t>(k));
    d_[k] = 1.0 / std::sqrt(diag_[k]);
  }
  Vector bty;
  apply_bt(y, bty);
  hz_ = d_.cwiseProduct(bty);
}

void EffectiveOperators::apply_b(const Vector& w, Vector& out) const {
  if (w.size() != n()) throw DimensionError("apply_b: coefficient length");
  const Image x = ihaar2d(unflatten(w, rows_, cols_));
  std::vector<double> re, im;
  fft_->forward(x, re, im);
  out.resize(m());
  for (std::size_t t = 0; t < rows_s_; ++t) {
    out[static_cast<Eigen::Index>(t)] = re[sampled_[t]];
    out[static_cast<Eigen::Index>(rows_s_ + t)] = im[sampled_[t]];
  }
}

void EffectiveOperators::apply_bt(const Vector& d, Vector& out) const {
  std::vector<double> re, im;
  scatter(prob_, d, re, im);
  Image x;
  fft_->inverse_real(re, im, x);
  out = flatten(haar2d(x));
}

void EffectiveOperators::apply_smooth(const Vector& w, Vector& out) const {
  if (w.size() != n()) throw DimensionError("apply_smooth: coefficient length");
  const Image x = ihaar2d(unflatten(w, rows_, cols_));
  const Image s = diff_vertical(diff_vertical(x)) + diff_horizontal(diff_horizontal(x));
  out = flatten(haar2d(s));
}

void EffectiveOperators::apply_j_tilde(const Vector& w, Vector& out) const {
  if (w.size() != n()) throw DimensionError("apply_j_tilde: coefficient length");
  const Image x = ihaar2d(unflatten(w, rows_, cols_));
  std::vector<double> re, im;
  fft_->forward(x, re, im);
  std::size_t t = 0;
  for (std::size_t k = 0; k < re.size(); ++k) {
    if (t < sampled_.size() && sampled_[t] == k) {
      ++t;
      continue;
    }
    re[k] = 0.0;
    im[k] = 0.0;
  }
  Image back;
  fft_->inverse_real(re, im, back);
  if (prob_.gamma > 0.0) back += prob_.gamma * (diff_vertical(diff_vertical(x)) + diff_horizontal(diff_horizontal(x)));
  out = flatten(haar2d(back));
}

void EffectiveOperators::apply_j(const Vector& v, Vector& out) const {
  apply_j_tilde(d_.cwiseProduct(v), out);
  out.array() *= d_.array();
}

LinearOperator EffectiveOperators::b_operator() const {
  LinearOperator op;
  op.rows = m();
  op.cols = n();
  op.apply = [this](const Vector& w, Vector& out) { apply_b(w, out); };
  op.adjoint = [this](const Vector& d, Vector& out) { apply_bt(d, out); };
  return op;
}

double imaging_energy(const EffectiveOperators& ops, const Vector& r, const Bits& sigma, double lambda) {
  if (r.size() != ops.n() || sigma.size() != static_cast<std::size_t>(ops.n()))
    throw DimensionError("imaging_energy: length");
  Vector v = r;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!sigma[static_cast<std::size_t>(i)]) v[i] = 0.0;
  Vector jv;
  ops.apply_j(v, jv);
  return 0.5 * v.dot(jv) - ops.zeeman().dot(v) + lambda * static_cast<double>(popcount(sigma));
}

CgResult cg_restricted(const EffectiveOperators& ops, const Bits& sigma, const Vector& h, double tol,
                       std::size_t max_iters, const Vector* warm) {
  const Eigen::Index n = ops.n();
  if (h.size() != n || sigma.size() != static_cast<std::size_t>(n)) throw DimensionError("cg_restricted: length");
  auto restrict_to = [&](Vector& v) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (!sigma[static_cast<std::size_t>(i)]) v[i] = 0.0;
  };
  CgResult out;
  Vector b = h;
  restrict_to(b);
  const double bnorm = b.norm();
  out.x = warm ? *warm : Vector::Zero(n);
  restrict_to(out.x);
  if (bnorm == 0.0) {
    out.x.setZero();
    out.converged = true;
    return out;
  }
  Vector ap;
  ops.apply_j(out.x, ap);
  restrict_to(ap);
  Vector res = b - ap;
  Vector p = res;
  double rr = res.squaredNorm();
  for (; out.iterations < max_iters; ++out.iterations) {
    if (std::sqrt(rr) <= tol * bnorm) break;
    ops.apply_j(p, ap);
    restrict_to(ap);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;
    const double step = rr / pap;
    out.x += step * p;
    res -= step * ap;
    const double rr_next = res.squaredNorm();
    p = res + (rr_next / rr) * p;
    rr = rr_next;
  }
  out.rel_residual = std::sqrt(rr) / bnorm;
  out.converged = out.rel_residual <= tol;
  return out;
}

MaxwellResult maxwell_sweeps_operator(const EffectiveOperators& ops, Vector r, Bits sigma, double eta, Chi chi,
                                      Rng& rng, const MaxwellOptions& opts) {
  const Eigen::Index n = ops.n();
  if (r.size() != n || sigma.size() != static_cast<std::size_t>(n))
    throw DimensionError("maxwell_sweeps_operator: r/sigma length");
  if (!(eta >= 0.0)) throw ParameterError("eta must be >= 0");
  const double lambda = 0.5 * eta * eta;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!sigma[static_cast<std::size_t>(i)]) r[i] = 0.0;
  Vector v = r;
  Vector g;  // J v
  ops.apply_j(v, g);
  const Vector& hz = ops.zeeman();

  MaxwellResult out;
  double energy = 0.5 * v.dot(g) - hz.dot(v) + lambda * static_cast<double>(popcount(sigma));
  out.energy_trace.push_back(energy);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Vector unit = Vector::Zero(n), col;
  while (out.sweeps < opts.max_sweeps) {
    for (std::size_t k = order.size(); k > 1; --k) {
      boost::random::uniform_int_distribution<std::size_t> pick(0, k - 1);
      std::swap(order[k - 1], order[pick(rng)]);
    }
    ++out.sweeps;
    bool any = false;
    for (Eigen::Index i : order) {
      const auto iu = static_cast<std::size_t>(i);
      const double vi = v[i];
      // J_ii = 1 after normalization.
      const double h = hz[i] - g[i] + vi;
      const std::uint8_t target = heaviside(f_chi(h, chi) - eta);
      if (target == sigma[iu]) continue;
      const double nv = target ? h : 0.0;
      const double delta = (0.5 * nv * nv - nv * h + lambda * target) - (0.5 * vi * vi - vi * h + lambda * sigma[iu]);
      if (delta > 0.0) {
        ++out.rejected;
        continue;
      }
      sigma[iu] = target;
      r[i] = nv;
      v[i] = nv;
      unit[i] = 1.0;
      ops.apply_j(unit, col);
      unit[i] = 0.0;
      g += (nv - vi) * col;
      energy += delta;
      ++out.flips;
      any = true;
      if (opts.exact_energy_trace) energy = imaging_energy(ops, r, sigma, lambda);
      out.energy_trace.push_back(energy);
    }
    if (!any) {
      out.converged = true;
      break;
    }
  }
  out.sigma = std::move(sigma);
  out.r = std::move(r);
  return out;
}

namespace {

double j_lipschitz(const EffectiveOperators& ops) {
  Vector x = Vector::Ones(ops.n()).normalized(), y;
  double lam = 0.0;
  for (int it = 0; it < 100; ++it) {
    ops.apply_j(x, y);
    const double next = y.norm();
    if (next == 0.0) return 1.0;
    x = y / next;
    if (std::abs(next - lam) <= 1e-6 * next) {
      lam = next;
      break;
    }
    lam = next;
  }
  return 1.01 * lam;
}

Vector lasso_coefficients(const EffectiveOperators& ops, double eta, Chi chi, std::size_t max_iters, double tol) {
  auto apply = [&ops](const Vector& v, Vector& out) { ops.apply_j(v, out); };
  return ista_quadratic(apply, ops.zeeman(), eta, chi, j_lipschitz(ops), max_iters, tol).y;
}

Image to_image(const EffectiveOperators& ops, const Vector& r, const Bits* sigma) {
  Vector w = ops.d_diag().cwiseProduct(r);
  if (sigma)
    for (Eigen::Index i = 0; i < w.size(); ++i)
      if (!(*sigma)[static_cast<std::size_t>(i)]) w[i] = 0.0;
  return ihaar2d(unflatten(w, ops.problem().rows, ops.problem().cols));
}

// W-SDE support estimation with the local field h = h_z − J v + v rebuilt after any flip.
Bits sde_support(const EffectiveOperators& ops, const Vector& r, double eta, const CimConfig& cfg, Rng& rng) {
  cfg.validate();
  const Eigen::Index n = ops.n();
  OpoState st{Vector::Zero(n), Vector::Zero(n), 0.0};
  Bits sigma(static_cast<std::size_t>(n), 0);
  Vector v = Vector::Zero(n), g = Vector::Zero(n), f(n);
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
  for (std::size_t k = 0; k < steps; ++k) {
    for (Eigen::Index i = 0; i < n; ++i)
      f[i] = injection_field(ops.zeeman()[i] - g[i] + v[i], eta, cfg.chi, cfg.k_tilde);
    st = wsde_step(st, f, cfg.pump.at(st.t), cfg, rng);
    st.t = static_cast<double>(k + 1) * cfg.dt;
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::uint8_t bit = heaviside(st.c[i]);
      if (bit != sigma[static_cast<std::size_t>(i)]) {
        sigma[static_cast<std::size_t>(i)] = bit;
        v[i] = bit ? r[i] : 0.0;
        changed = true;
      }
    }
    if (changed) ops.apply_j(v, g);
  }
  return sigma;
}

}  // namespace

ImagingL0Result reconstruct_l0(const EffectiveOperators& ops, const HybridConfig& cfg, Rng& rng, const Image* truth) {
  cfg.validate();
  const Eigen::Index n = ops.n();
  const Chi chi = cfg.cim.chi;
  Vector r = Vector::Zero(n);
  switch (cfg.r_init) {
    case RInit::Zeros:
      break;
    case RInit::TruthOracle:
      if (!truth) throw ParameterError("reconstruct_l0: truth oracle init needs the true image");
      r = flatten(haar2d(*truth)).cwiseQuotient(ops.d_diag());
      break;
    case RInit::FromLasso:
      r = lasso_coefficients(ops, cfg.eta_init, chi, cfg.lasso_max_iters, 1e-9);
      break;
  }
  Bits sigma(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) sigma[static_cast<std::size_t>(i)] = r[i] != 0.0;

  ImagingL0Result out;
  Bits prev_sigma;
  Vector prev_r;
  constexpr double kCgTol = 1e-8;
  for (int t = 0; t < cfg.outer_iters; ++t) {
    const double eta = threshold_at(cfg, t);
    const double lambda = HybridConfig::lambda_of_eta(eta);
    if (cfg.backend == SupportBackend::Sde) {
      sigma = sde_support(ops, r, eta, cfg.cim, rng);
    } else {
      MaxwellResult mr = maxwell_sweeps_operator(ops, r, sigma, eta, chi, rng, cfg.maxwell);
      out.energy_path.insert(out.energy_path.end(), mr.energy_trace.begin(), mr.energy_trace.end());
      sigma = std::move(mr.sigma);
      r = std::move(mr.r);
    }
    bool failed = false;
    if (sigma == prev_sigma) {
      r = prev_r;
      // Fixed η and an unchanged support: every later iteration repeats this one.
      if (t > 0 && eta == threshold_at(cfg, t - 1)) {
        out.trace.push_back(out.trace.back());
        break;
      }
    } else {
      const CgResult cg = cg_restricted(ops, sigma, ops.zeeman(), kCgTol, 4 * static_cast<std::size_t>(n) + 100, &r);
      failed = !cg.converged;
      if (failed) ++out.cg_failures;
      r = cg.x;
      prev_sigma = sigma;
      prev_r = r;
    }
    const double energy = imaging_energy(ops, r, sigma, lambda);
    if (cfg.backend == SupportBackend::DeterministicMaxwell) out.energy_path.push_back(energy);
    const double err = truth ? image_rmse(to_image(ops, r, &sigma), *truth) : std::nan("");
    out.trace.push_back({eta, popcount(sigma), energy, err, failed});
  }
  out.image = to_image(ops, r, &sigma);
  out.sigma = std::move(sigma);
  out.r = std::move(r);
  return out;
}

Image reconstruct_lasso(const EffectiveOperators& ops, double eta, std::size_t max_iters, double tol) {
  // Original-scale coefficients: ½wᵀJ̃w − (Bᵀy)ᵀw + η‖w‖₁.
  auto apply = [&ops](const Vector& w, Vector& out) { ops.apply_j_tilde(w, out); };
  const Vector bty = ops.zeeman().cwiseQuotient(ops.d_diag());
  double lam = 0.0;
  Vector x = Vector::Ones(ops.n()).normalized(), y;
  for (int it = 0; it < 100; ++it) {
    ops.apply_j_tilde(x, y);
    const double next = y.norm();
    x = y / next;
    const bool done = std::abs(next - lam) <= 1e-6 * next;
    lam = next;
    if (done) break;
  }
  const Vector w = ista_quadratic(apply, bty, eta, Chi::Signed, 1.01 * lam, max_iters, tol).y;
  return ihaar2d(unflatten(w, ops.problem().rows, ops.problem().cols));
}

Image reconstruct_l1eq(const EffectiveOperators& ops, const Vector& y, const L1EqOptions& opts) {
  const double gamma = ops.problem().gamma;
  std::function<void(const Vector&, Vector&)> smooth;
  if (gamma > 0.0) smooth = [&ops](const Vector& w, Vector& out) { ops.apply_smooth(w, out); };
  const L1EqResult res = solve_l1_equality(ops.b_operator(), y, gamma, smooth, opts);
  return ihaar2d(unflatten(res.w, ops.problem().rows, ops.problem().cols));
}

double image_rmse(const Image& a, const Image& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("image_rmse: size mismatch");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

// ---------------------------------------------------------------------------
// PGM I/O

namespace {

void write_u64(std::ofstream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>(v >> (8 * k));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::ifstream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw IoError("truncated image sidecar");
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(b[k]) << (8 * k);
  return v;
}

std::filesystem::path sidecar_path(const std::filesystem::path& p) { return std::filesystem::path(p.string() + ".f64"); }

std::vector<long> read_pgm_raw(const std::filesystem::path& path, Eigen::Index& rows, Eigen::Index& cols, long& maxval) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::string tok;
  std::vector<std::string> toks;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    while (ls >> tok) toks.push_back(tok);
  }
  if (toks.size() < 4 || toks[0] != "P2") throw IoError(path.string() + " is not an ASCII PGM (P2)");
  cols = std::stol(toks[1]);
  rows = std::stol(toks[2]);
  maxval = std::stol(toks[3]);
  if (rows <= 0 || cols <= 0 || maxval <= 0) throw IoError("bad PGM header in " + path.string());
  if (toks.size() != static_cast<std::size_t>(4 + rows * cols)) throw IoError("PGM pixel count mismatch in " + path.string());
  std::vector<long> px;
  px.reserve(static_cast<std::size_t>(rows * cols));
  for (std::size_t k = 4; k < toks.size(); ++k) px.push_back(std::stol(toks[k]));
  return px;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, const Image& img, bool sidecar) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  const double lo = img.minCoeff(), hi = img.maxCoeff();
  const double span = hi > lo ? hi - lo : 1.0;
  os << "P2\n" << img.cols() << ' ' << img.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < img.rows(); ++i) {
    for (Eigen::Index j = 0; j < img.cols(); ++j) {
      const long v = std::lround(255.0 * (img(i, j) - lo) / span);
      os << std::clamp(v, 0L, 255L) << (j + 1 == img.cols() ? '\n' : ' ');
    }
  }
  if (!os) throw IoError("write failed for " + path.string());
  if (!sidecar) return;
  std::ofstream bs(sidecar_path(path), std::ios::binary);
  if (!bs) throw IoError("cannot write " + sidecar_path(path).string());
  write_u64(bs, static_cast<std::uint64_t>(img.rows()));
  write_u64(bs, static_cast<std::uint64_t>(img.cols()));
  for (Eigen::Index i = 0; i < img.rows(); ++i)
    for (Eigen::Index j = 0; j < img.cols(); ++j) write_u64(bs, std::bit_cast<std::uint64_t>(img(i, j)));
  if (!bs) throw IoError("write failed for " + sidecar_path(path).string());
}

Image read_image(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  if (std::filesystem::exists(side)) {
    std::ifstream bs(side, std::ios::binary);
    const auto rows = static_cast<Eigen::Index>(read_u64(bs));
    const auto cols = static_cast<Eigen::Index>(read_u64(bs));
    if (rows <= 0 || cols <= 0 || rows * cols > (Eigen::Index{1} << 28)) throw IoError("bad sidecar header " + side.string());
    Image img(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) img(i, j) = std::bit_cast<double>(read_u64(bs));
    return img;
  }
  Eigen::Index rows, cols;
  long maxval;
  const auto px = read_pgm_raw(path, rows, cols, maxval);
  Image img(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      img(i, j) = static_cast<double>(px[static_cast<std::size_t>(i * cols + j)]) / static_cast<double>(maxval);
  return img;
}

void write_mask(const std::filesystem::path& path, const Bits& mask, Eigen::Index rows, Eigen::Index cols) {
  if (mask.size() != static_cast<std::size_t>(rows * cols)) throw DimensionError("write_mask: size");
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "P2\n" << cols << ' ' << rows << "\n1\n";
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      os << static_cast<int>(mask[static_cast<std::size_t>(i * cols + j)]) << (j + 1 == cols ? '\n' : ' ');
  if (!os) throw IoError("write failed for " + path.string());
}

Bits read_mask(const std::filesystem::path& path, Eigen::Index& rows, Eigen::Index& cols) {
  long maxval;
  const auto px = read_pgm_raw(path, rows, cols, maxval);
  Bits mask(px.size());
  for (std::size_t k = 0; k < px.size(); ++k) mask[k] = px[k] > 0 ? 1 : 0;
  return mask;
}

}  // namespace cimcs::imaging
