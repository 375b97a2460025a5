#include <doctest.h>

#include <set>

#include "cimcs/rng.hpp"

using namespace cimcs;

TEST_CASE("splitmix64 matches the published reference stream") {
  // First three outputs of the reference generator seeded with 0.
  std::uint64_t state = 0;
  const std::uint64_t expected[] = {0xe220a8397b1dcdafULL, 0x6e789e6aa1b965f4ULL, 0x06c45d188009454fULL};
  for (auto e : expected) {
    CHECK(splitmix64(state) == e);
    state += 0x9e3779b97f4a7c15ULL;
  }
}

TEST_CASE("derive_seed is stable and separates its inputs") {
  CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0ULL, 1ULL})
    for (std::uint64_t p = 0; p < 20; ++p)
      for (std::uint64_t t = 0; t < 20; ++t) seen.insert(derive_seed(base, {p, t}));
  CHECK(seen.size() == 800);
  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
}

TEST_CASE("make_rng reproduces the mt19937_64 stream") {
  Rng a = make_rng(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  // 10000th output of the default-seeded generator, fixed by the C++ standard.
  std::mt19937_64 d;
  d.discard(9999);
  CHECK(d() == 9981545732273789042ULL);
}
