#include "cimcs/rng.hpp"

#include <stdexcept>
#include <string>

#include "cimcs/errors.hpp"
#include "cimcs/types.hpp"

namespace cimcs {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t s = splitmix64(base);
  for (auto p : parts) s = splitmix64(s ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

std::string_view to_string(Chi chi) { return chi == Chi::Signed ? "signed" : "nonnegative"; }

Chi chi_from_string(std::string_view s) {
  if (s == "signed" || s == "+-" || s == "pm") return Chi::Signed;
  if (s == "nonnegative" || s == "+" || s == "plus") return Chi::NonNegative;
  throw ParameterError("unknown chi '" + std::string(s) + "'");
}

}  // namespace cimcs
