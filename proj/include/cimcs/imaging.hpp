#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <vector>

#include "cimcs/hybrid.hpp"
#include "cimcs/lasso.hpp"
#include "cimcs/rng.hpp"
#include "cimcs/types.hpp"

namespace cimcs::imaging {

/// Images are rows×cols matrices; coefficient vectors use the same pyramid layout flattened row-major.
using Image = Matrix;

bool is_power_of_two(Eigen::Index n);

/// Number of pyramid levels: log2(min(rows, cols)).
int haar_levels(Eigen::Index rows, Eigen::Index cols);

/// Orthonormal separable 2-D Haar pyramid (rows then columns at each level).
Image haar2d(const Image& x);
Image ihaar2d(const Image& w);

Vector flatten(const Image& m);
Image unflatten(const Vector& v, Eigen::Index rows, Eigen::Index cols);

/// One-dimensional factor of a pyramid basis function: scaling or wavelet, support
/// [offset, offset + width), amplitude 1/√width.
struct HaarFactor {
  bool wavelet = false;
  Eigen::Index offset = 0;
  Eigen::Index width = 1;
  double at(Eigen::Index p) const;
};

/// Image-domain basis function of pyramid coefficient (i, j): row factor ⊗ column factor.
struct HaarBasis {
  int level = 0;
  HaarFactor row, col;
};
HaarBasis haar_basis(Eigen::Index i, Eigen::Index j, Eigen::Index rows, Eigen::Index cols);

/// Second difference with reflective ends x(−1)=x(0), x(n)=x(n−1); a symmetric operator.
Vector second_difference(const Vector& x);

struct KSpaceProblem {
  Eigen::Index rows = 64;
  Eigen::Index cols = 64;
  Bits mask;           // row-major over k-space, 1 = sampled
  double gamma = 1e-4;
  double phantom_haar_sparsity = 0.134;
  std::uint64_t seed = 0;

  std::size_t sampled() const { return popcount(mask); }
  void validate() const;
};

/// Exactly round(fraction·rows·cols) sampled points; DC is always sampled.
Bits random_mask(Eigen::Index rows, Eigen::Index cols, double fraction, Rng& rng);

/// Sum of random Gaussian blobs, Haar-thresholded to keep round(sparsity·N) coefficients.
Image synth_phantom(Eigen::Index rows, Eigen::Index cols, double sparsity, Rng& rng);

/// Unitary 2-D DFT of real images through FFTW.
class Fourier2d {
 public:
  Fourier2d(Eigen::Index rows, Eigen::Index cols);
  ~Fourier2d();
  Fourier2d(const Fourier2d&) = delete;
  Fourier2d& operator=(const Fourier2d&) = delete;

  /// k = F x, stored as separate real and imaginary planes (row-major, rows·cols each).
  void forward(const Image& x, std::vector<double>& re, std::vector<double>& im) const;
  /// Re(Fᴴ k)
  void inverse_real(const std::vector<double>& re, const std::vector<double>& im, Image& x) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Eigen::Index rows_, cols_;
};

/// Realified sampled k-space: [Re k_S ; Im k_S] in mask order.
Vector observe(const KSpaceProblem& prob, const Image& image, double noise_std = 0.0, Rng* rng = nullptr);

/// Re(Fᴴ Sᵀ y)
Image zero_fill(const KSpaceProblem& prob, const Vector& y);

/// Matrix-free operators in the Haar coefficient domain:
///   B w = [Re; Im](S F Ψᵀ w),  J̃ = BᵀB + γΨ(Δ_vᵀΔ_v + Δ_hᵀΔ_h)Ψᵀ,
///   D = diag(J̃)^{−1/2},  J = D J̃ D,  h_z = D Bᵀ y.
class EffectiveOperators {
 public:
  EffectiveOperators(const KSpaceProblem& prob, const Vector& y);

  Eigen::Index n() const { return rows_ * cols_; }
  Eigen::Index m() const { return 2 * static_cast<Eigen::Index>(rows_s_); }
  void apply_b(const Vector& w, Vector& out) const;
  void apply_bt(const Vector& d, Vector& out) const;
  void apply_smooth(const Vector& w, Vector& out) const;  // Ψ(Δ_vᵀΔ_v + Δ_hᵀΔ_h)Ψᵀ
  void apply_j_tilde(const Vector& w, Vector& out) const;
  void apply_j(const Vector& v, Vector& out) const;

  const Vector& j_tilde_diag() const { return diag_; }
  const Vector& d_diag() const { return d_; }
  const Vector& zeeman() const { return hz_; }
  const KSpaceProblem& problem() const { return prob_; }
  LinearOperator b_operator() const;

 private:
  KSpaceProblem prob_;
  Eigen::Index rows_, cols_;
  std::size_t rows_s_;
  std::vector<std::size_t> sampled_;
  std::shared_ptr<Fourier2d> fft_;
  Vector diag_, d_, hz_;
};

/// ℋ = ½v′ᵀJv′ − h_zᵀv′ + λ‖σ‖₀ with v′ = σ∘r′.
double imaging_energy(const EffectiveOperators& ops, const Vector& r, const Bits& sigma, double lambda);

struct CgResult {
  Vector x;
  std::size_t iterations = 0;
  double rel_residual = 0.0;
  bool converged = false;
};

/// Conjugate gradient for J_SS x_S = h_S on the support S of σ; off-support entries are 0.
CgResult cg_restricted(const EffectiveOperators& ops, const Bits& sigma, const Vector& h, double tol = 1e-8,
                       std::size_t max_iters = 2000, const Vector* warm = nullptr);

/// Maxwell sweeps with J applied matrix-free (one application of J per accepted flip).
MaxwellResult maxwell_sweeps_operator(const EffectiveOperators& ops, Vector r, Bits sigma, double eta, Chi chi,
                                      Rng& rng, const MaxwellOptions& opts = {});

struct ImagingL0Result {
  Image image;
  Bits sigma;
  Vector r;  // normalized coefficients r′
  std::vector<HybridIteration> trace;
  std::size_t cg_failures = 0;
  std::vector<double> energy_path;  // Maxwell backend only
};

/// Alternating support / CG signal estimation on J, h_z; returns ihaar2d(D·(σ∘r′)).
/// `truth` (may be null) only feeds the per-iteration RMSE trace.
ImagingL0Result reconstruct_l0(const EffectiveOperators& ops, const HybridConfig& cfg, Rng& rng,
                               const Image* truth = nullptr);

/// min ½v′ᵀJv′ − h_zᵀv′ + η‖v′‖₁, mapped back through D and Ψᵀ.
Image reconstruct_lasso(const EffectiveOperators& ops, double eta, std::size_t max_iters = 5000, double tol = 1e-9);

/// min ‖w‖₁ + γ·wᵀΨ(Δ_vᵀΔ_v + Δ_hᵀΔ_h)Ψᵀw subject to Bw = y.
Image reconstruct_l1eq(const EffectiveOperators& ops, const Vector& y, const L1EqOptions& opts = {});

double image_rmse(const Image& a, const Image& b);

/// ASCII PGM (P2) scaled to 0..255 over [lo, hi], plus a raw float64 sidecar ("<path>.f64").
void write_pgm(const std::filesystem::path& path, const Image& img, bool sidecar = true);
/// Reads the float64 sidecar when present, otherwise the 8-bit PGM scaled to [0, 1].
Image read_image(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Bits& mask, Eigen::Index rows, Eigen::Index cols);
Bits read_mask(const std::filesystem::path& path, Eigen::Index& rows, Eigen::Index& cols);

}  // namespace cimcs::imaging
