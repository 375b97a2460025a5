#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>

#include "cimcs/rng.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

/// Source-value density g(x).
///   GaussianSigned       e^{-x²/2σ²}/√(2πσ²)
///   HalfGaussianNonneg   2H(x)e^{-x²/2σ²}/√(2πσ²)
///   GammaNonneg          x^{k-1}e^{-x/θ}/(Γ(k)θ^k)
///   BilateralGammaSigned |x|^{k-1}e^{-|x|/θ}/(2Γ(k)θ^k)
struct SourceDistribution {
  enum class Kind { GaussianSigned, HalfGaussianNonneg, GammaNonneg, BilateralGammaSigned };

  Kind kind = Kind::GaussianSigned;
  double sigma2 = 1.0;  // Gaussian kinds
  double k = 2.0;       // Gamma kinds
  double theta = 0.4;   // Gamma kinds

  static SourceDistribution gaussian(double sigma2 = 1.0) { return {Kind::GaussianSigned, sigma2, 2.0, 0.4}; }
  static SourceDistribution half_gaussian(double sigma2 = 1.0) {
    return {Kind::HalfGaussianNonneg, sigma2, 2.0, 0.4};
  }
  static SourceDistribution gamma(double k = 2.0, double theta = 0.4) { return {Kind::GammaNonneg, 1.0, k, theta}; }
  static SourceDistribution bilateral_gamma(double k = 2.0, double theta = 0.4) {
    return {Kind::BilateralGammaSigned, 1.0, k, theta};
  }

  bool is_gaussian() const { return kind == Kind::GaussianSigned || kind == Kind::HalfGaussianNonneg; }
  bool is_signed() const { return kind == Kind::GaussianSigned || kind == Kind::BilateralGammaSigned; }
  /// The χ this density implies.
  Chi natural_chi() const { return is_signed() ? Chi::Signed : Chi::NonNegative; }

  /// Throws ParameterError for σ² ≤ 0, k ≤ 0 or θ ≤ 0.
  void validate() const;
  /// Density value g(x).
  double pdf(double x) const;
};

std::string_view to_string(SourceDistribution::Kind kind);
SourceDistribution::Kind distribution_kind_from_string(std::string_view s);

/// ⟨x²⟩_x in closed form: σ² for Gaussian kinds, k(k+1)θ² for Gamma kinds.
double second_moment(const SourceDistribution& dist);

/// i.i.d. draws from g(x).
Vector sample_source(const SourceDistribution& dist, std::size_t count, Rng& rng);

struct InstanceParams {
  std::size_t n = 100;  // signal dimension N
  double alpha = 0.5;   // compression rate M/N
  double a = 0.2;       // sparseness
  double beta = 0.0;    // observation-noise standard deviation
  SourceDistribution dist{};
  Chi chi = Chi::Signed;
  std::uint64_t seed = 0;

  std::size_t m() const;
  std::size_t support_size() const;
  /// Throws ParameterError when the combination is not admissible.
  void validate() const;
};

/// One observation model draw: y = A(ξ∘x) + n with exactly unit-norm columns.
struct Instance {
  Matrix a_mat;  // M×N
  Vector y;      // M
  Vector x_true; // N, drawn independently of the support
  Bits xi_true;  // N
  InstanceParams params;

  std::size_t n() const { return static_cast<std::size_t>(a_mat.cols()); }
  std::size_t m() const { return static_cast<std::size_t>(a_mat.rows()); }
  /// x∘ξ
  Vector signal() const;
};

/// Draws A (Gaussian, scaled 1/√M, then column-normalized), ξ, x and the noise,
/// in that order, from a generator seeded with params.seed.
Instance synthesize(const InstanceParams& params);

/// Builds an instance from explicit data (used by tests and the imaging path).
/// Columns of `a_mat` must already be unit norm.
Instance make_instance(Matrix a_mat, Vector y, Vector x_true, Bits xi_true, InstanceParams params);

// Flat-file instance format ------------------------------------------------

/// Binary real64 matrix: 8-byte magic "CIML0CS1", u32 rows, u32 cols, then
/// rows*cols little-endian doubles in row-major order. Vectors use cols = 1.
void write_matrix(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, const Vector& v);
Vector read_vector(const std::filesystem::path& path);

/// Writes a.mat, y.vec, x.vec, xi.bits and params.json into `dir` (created if missing).
void save_instance(const Instance& inst, const std::filesystem::path& dir);
Instance load_instance(const std::filesystem::path& dir);

}  // namespace cimcs
