#include <doctest.h>

#include <cmath>
#include <vector>

#include "tem/rng.hpp"
#include "tem/scheme.hpp"

using namespace tem;

// Philox4x32-10 known-answer vectors from the Random123 distribution
TEST_CASE("rng: philox known answers") {
  using C = Philox4x32::Counter;
  using K = Philox4x32::Key;
  CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::block(C{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, K{0xffffffff, 0xffffffff}) ==
        C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::block(C{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, K{0xa4093822, 0x299f31d0}) ==
        C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("rng: streams are reproducible and distinct") {
  RandomStream a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  for (int i = 0; i < 100; ++i) {
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
    CHECK(x != d.normal());
  }
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
}

TEST_CASE("rng: uniform in (0,1) and normal moments") {
  RandomStream r(11, 0);
  std::vector<double> z(200000);
  for (auto& v : z) v = r.normal();
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
  const MeanSe m = mean_se(z);
  CHECK(std::abs(m.mean) < 4.0 * m.se);
  std::vector<double> sq(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) sq[i] = z[i] * z[i];
  const MeanSe v = mean_se(sq);
  CHECK(std::abs(v.mean - 1.0) < 4.0 * v.se);
}
