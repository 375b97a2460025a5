#include "cimcs/problem.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <json.hpp>

#include "cimcs/errors.hpp"

namespace cimcs {

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'I', 'M', 'L', '0', 'C', 'S', '1'};

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &v, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&v, bytes.data(), sizeof(T));
    return v;
  }
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated binary file");
  return to_little(v);
}

}  // namespace

std::string_view to_string(SourceDistribution::Kind kind) {
  switch (kind) {
    case SourceDistribution::Kind::GaussianSigned:
      return "gaussian";
    case SourceDistribution::Kind::HalfGaussianNonneg:
      return "half_gaussian";
    case SourceDistribution::Kind::GammaNonneg:
      return "gamma";
    case SourceDistribution::Kind::BilateralGammaSigned:
      return "bilateral_gamma";
  }
  return "?";
}

SourceDistribution::Kind distribution_kind_from_string(std::string_view s) {
  using K = SourceDistribution::Kind;
  if (s == "gaussian") return K::GaussianSigned;
  if (s == "half_gaussian") return K::HalfGaussianNonneg;
  if (s == "gamma") return K::GammaNonneg;
  if (s == "bilateral_gamma") return K::BilateralGammaSigned;
  throw ParameterError("unknown distribution '" + std::string(s) + "'");
}

void SourceDistribution::validate() const {
  if (is_gaussian()) {
    if (!(sigma2 > 0.0)) throw ParameterError("distribution variance sigma2 must be > 0");
  } else {
    if (!(k > 0.0)) throw ParameterError("gamma shape k must be > 0");
    if (!(theta > 0.0)) throw ParameterError("gamma scale theta must be > 0");
  }
}

double SourceDistribution::pdf(double x) const {
  using std::numbers::pi;
  switch (kind) {
    case Kind::GaussianSigned:
      return std::exp(-x * x / (2 * sigma2)) / std::sqrt(2 * pi * sigma2);
    case Kind::HalfGaussianNonneg:
      return x < 0 ? 0.0 : 2 * std::exp(-x * x / (2 * sigma2)) / std::sqrt(2 * pi * sigma2);
    case Kind::GammaNonneg:
      if (x < 0) return 0.0;
      if (x == 0) return k < 1 ? INFINITY : (k == 1 ? 1 / theta : 0.0);
      return std::exp((k - 1) * std::log(x) - x / theta - std::lgamma(k) - k * std::log(theta));
    case Kind::BilateralGammaSigned: {
      const double ax = std::abs(x);
      if (ax == 0) return k < 1 ? INFINITY : (k == 1 ? 0.5 / theta : 0.0);
      return 0.5 * std::exp((k - 1) * std::log(ax) - ax / theta - std::lgamma(k) - k * std::log(theta));
    }
  }
  return 0.0;
}

double second_moment(const SourceDistribution& dist) {
  return dist.is_gaussian() ? dist.sigma2 : dist.k * (dist.k + 1) * dist.theta * dist.theta;
}

Vector sample_source(const SourceDistribution& dist, std::size_t count, Rng& rng) {
  dist.validate();
  Vector out(static_cast<Eigen::Index>(count));
  using K = SourceDistribution::Kind;
  switch (dist.kind) {
    case K::GaussianSigned:
    case K::HalfGaussianNonneg: {
      boost::random::normal_distribution<double> normal(0.0, std::sqrt(dist.sigma2));
      for (auto& v : out) {
        v = normal(rng);
        if (dist.kind == K::HalfGaussianNonneg) v = std::abs(v);
      }
      break;
    }
    case K::GammaNonneg:
    case K::BilateralGammaSigned: {
      boost::random::gamma_distribution<double> gam(dist.k, dist.theta);
      boost::random::uniform_01<double> uni;
      for (auto& v : out) {
        v = gam(rng);
        if (dist.kind == K::BilateralGammaSigned && uni(rng) < 0.5) v = -v;
      }
      break;
    }
  }
  return out;
}

std::size_t InstanceParams::m() const {
  const double v = std::round(alpha * static_cast<double>(n));
  return v < 0 ? 0 : static_cast<std::size_t>(v);
}

std::size_t InstanceParams::support_size() const {
  const double v = std::round(a * static_cast<double>(n));
  return v < 0 ? 0 : static_cast<std::size_t>(v);
}

void InstanceParams::validate() const {
  if (n == 0) throw ParameterError("n must be positive");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("alpha must lie in (0, 1]");
  if (!(a >= 0.0 && a <= 1.0)) throw ParameterError("a must lie in [0, 1]");
  if (!(beta >= 0.0)) throw ParameterError("beta must be >= 0");
  if (m() < 1) throw ParameterError("round(alpha*n) must be >= 1");
  dist.validate();
  if (dist.natural_chi() != chi) {
    throw ParameterError("chi '" + std::string(to_string(chi)) + "' is inconsistent with distribution '" +
                         std::string(to_string(dist.kind)) + "'");
  }
}

Vector Instance::signal() const {
  Vector s = x_true;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (!xi_true[static_cast<std::size_t>(i)]) s[i] = 0.0;
  return s;
}

Instance synthesize(const InstanceParams& params) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(params.n);
  const auto m = static_cast<Eigen::Index>(params.m());
  Rng rng = make_rng(params.seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);

  Matrix a(m, n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < m; ++i) a(i, j) = scale * normal(rng);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double norm = a.col(j).norm();
    if (norm == 0.0) throw ParameterError("degenerate zero column drawn");
    a.col(j) /= norm;
  }

  // Partial Fisher-Yates: the first K slots of the permutation are the support.
  std::vector<std::size_t> idx(params.n);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const std::size_t k = params.support_size();
  for (std::size_t i = 0; i < k; ++i) {
    boost::random::uniform_int_distribution<std::size_t> pick(i, params.n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  Bits xi(params.n, 0);
  for (std::size_t i = 0; i < k; ++i) xi[idx[i]] = 1;

  Vector x = sample_source(params.dist, params.n, rng);

  Vector signal = x;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!xi[static_cast<std::size_t>(i)]) signal[i] = 0.0;
  Vector y = a * signal;
  if (params.beta > 0.0)
    for (auto& v : y) v += params.beta * normal(rng);

  return Instance{std::move(a), std::move(y), std::move(x), std::move(xi), params};
}

Instance make_instance(Matrix a_mat, Vector y, Vector x_true, Bits xi_true, InstanceParams params) {
  if (y.size() != a_mat.rows()) throw DimensionError("y length does not match rows of A");
  if (x_true.size() != a_mat.cols() || xi_true.size() != static_cast<std::size_t>(a_mat.cols()))
    throw DimensionError("x/xi length does not match columns of A");
  return Instance{std::move(a_mat), std::move(y), std::move(x_true), std::move(xi_true), params};
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, static_cast<std::uint32_t>(m.rows()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put<double>(os, m(i, j));
  if (!os) throw IoError("write failed for " + path.string());
}

Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw IoError(path.string() + ": bad magic (expected CIML0CS1)");
  const auto rows = get<std::uint32_t>(is);
  const auto cols = get<std::uint32_t>(is);
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = get<double>(is);
  return m;
}

void write_vector(const std::filesystem::path& path, const Vector& v) { write_matrix(path, Matrix(v)); }

Vector read_vector(const std::filesystem::path& path) {
  Matrix m = read_matrix(path);
  if (m.cols() != 1) throw IoError(path.string() + ": expected a single column");
  return m.col(0);
}

void save_instance(const Instance& inst, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "a.mat", inst.a_mat);
  write_vector(dir / "y.vec", inst.y);
  write_vector(dir / "x.vec", inst.x_true);
  {
    std::ofstream os(dir / "xi.bits");
    if (!os) throw IoError("cannot write xi.bits");
    for (auto b : inst.xi_true) os << (b ? '1' : '0') << '\n';
  }
  const auto& p = inst.params;
  nlohmann::ordered_json j;
  j["n"] = p.n;
  j["alpha"] = p.alpha;
  j["a"] = p.a;
  j["beta"] = p.beta;
  j["dist"] = to_string(p.dist.kind);
  j["sigma2"] = p.dist.sigma2;
  j["k"] = p.dist.k;
  j["theta"] = p.dist.theta;
  j["chi"] = to_string(p.chi);
  j["seed"] = p.seed;
  std::ofstream os(dir / "params.json");
  if (!os) throw IoError("cannot write params.json");
  os << j.dump(2) << '\n';
}

Instance load_instance(const std::filesystem::path& dir) {
  InstanceParams p;
  {
    std::ifstream is(dir / "params.json");
    if (!is) throw IoError("missing params.json in " + dir.string());
    nlohmann::json j;
    try {
      is >> j;
      p.n = j.at("n").get<std::size_t>();
      p.alpha = j.at("alpha").get<double>();
      p.a = j.at("a").get<double>();
      p.beta = j.at("beta").get<double>();
      p.dist.kind = distribution_kind_from_string(j.at("dist").get<std::string>());
      p.dist.sigma2 = j.at("sigma2").get<double>();
      p.dist.k = j.at("k").get<double>();
      p.dist.theta = j.at("theta").get<double>();
      p.chi = chi_from_string(j.at("chi").get<std::string>());
      p.seed = j.at("seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("params.json: ") + e.what());
    }
  }
  Matrix a = read_matrix(dir / "a.mat");
  Vector y = read_vector(dir / "y.vec");
  Vector x = read_vector(dir / "x.vec");
  Bits xi;
  {
    std::ifstream is(dir / "xi.bits");
    if (!is) throw IoError("missing xi.bits");
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (line != "0" && line != "1") throw IoError("xi.bits: expected 0 or 1 per line");
      xi.push_back(line == "1" ? 1 : 0);
    }
  }
  return make_instance(std::move(a), std::move(y), std::move(x), std::move(xi), p);
}

}  // namespace cimcs
