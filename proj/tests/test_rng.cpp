#include <catch2/catch_amalgamated.hpp>

#include "spinscale/rng.hpp"

#include <cmath>
#include <vector>

using namespace spinscale;

TEST_CASE("Philox known-answer vectors", "[rng]") {
  // Published reference vectors for the 10-round 4x32 configuration.
  {
    const Philox4x32::Block out = Philox4x32::encrypt({0, 0, 0, 0}, {0, 0});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    const Philox4x32::Block out = Philox4x32::encrypt(
        {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
        {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    const Philox4x32::Block out = Philox4x32::encrypt(
        {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
        {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("streams are deterministic and distinct", "[rng]") {
  RngStream a(1234, 7);
  RngStream b(1234, 7);
  RngStream c(1234, 8);
  bool any_diff = false;
  for (int i = 0; i < 256; ++i) {
    const auto va = a.next_u64();
    REQUIRE(va == b.next_u64());
    if (va != c.next_u64()) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("uniform variates stay inside the open interval", "[rng]") {
  RngStream r(99, 0);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("gaussian variates have standard moments", "[rng]") {
  RngStream r(2024, 3);
  const int n = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    s1 += g;
    s2 += g * g;
    s4 += g * g * g * g;
  }
  s1 /= n;
  s2 /= n;
  s4 /= n;
  CHECK(std::abs(s1) < 0.01);       // SE ~ 0.0022
  CHECK(std::abs(s2 - 1.0) < 0.02); // SE ~ 0.0032
  CHECK(std::abs(s4 - 3.0) < 0.1);  // SE ~ 0.022
}
