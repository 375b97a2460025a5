#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cimcs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Binary support vector (σ or ξ); one byte per entry, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

/// Sign structure of the source signal: selects F₊(h)=h or F±(h)=|h|.
enum class Chi { NonNegative, Signed };

inline double f_chi(double h, Chi chi) { return chi == Chi::Signed ? (h < 0 ? -h : h) : h; }

/// Heaviside step with H(0)=0.
inline std::uint8_t heaviside(double x) { return x > 0.0 ? 1 : 0; }

inline std::size_t popcount(const Bits& b) {
  std::size_t n = 0;
  for (auto v : b) n += v;
  return n;
}

std::string_view to_string(Chi chi);
Chi chi_from_string(std::string_view s);

}  // namespace cimcs
