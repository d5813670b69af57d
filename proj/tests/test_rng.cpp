#include "doctest.h"

#include <cmath>
#include <vector>

#include "optexec/dynamics.hpp"
#include "optexec/rng.hpp"

using namespace optexec;

TEST_CASE("Philox4x32-10 known-answer vectors") {
    using A4 = std::array<std::uint32_t, 4>;
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("substreams are reproducible and distinct") {
    PhiloxStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        CHECK(x == b());
        CHECK(x != c());
        CHECK(x != d());
    }
}

TEST_CASE("normal draws have standard moments") {
    NormalStream z(1, 0);
    const int n = 1000000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        const double v = z();
        s1 += v;
        s2 += v * v;
        s4 += v * v * v * v;
    }
    CHECK(std::abs(s1 / n) < 4 / std::sqrt(double(n)));
    CHECK(std::abs(s2 / n - 1) < 4 * std::sqrt(2.0 / n));
    CHECK(std::abs(s4 / n - 3) < 4 * std::sqrt(96.0 / n));
}

TEST_CASE("Brownian increments depend only on seed and path index") {
    const auto a = draw_increments(64, 5.0, 9, 3);
    const auto b = draw_increments(64, 5.0, 9, 3);
    const auto c = draw_increments(64, 5.0, 9, 4);
    CHECK(a.dB1 == b.dB1);
    CHECK(a.dB2 == b.dB2);
    CHECK(a.dB1 != c.dB1);
    CHECK(a.dt == doctest::Approx(5.0 / 64));
    CHECK_THROWS_AS(draw_increments(0, 5.0, 9, 3), GridError);
}

TEST_CASE("coarsening sums consecutive increments") {
    const auto f = draw_increments(16, 1.0, 5, 0);
    const auto c = coarsen(f, 4);
    REQUIRE(c.steps() == 4);
    CHECK(c.dt == doctest::Approx(0.25));
    for (int i = 0; i < 4; ++i) {
        const double s = f.dB1[4 * i] + f.dB1[4 * i + 1] + f.dB1[4 * i + 2] + f.dB1[4 * i + 3];
        CHECK(c.dB1[i] == doctest::Approx(s).epsilon(1e-15));
    }
    CHECK_THROWS_AS(coarsen(f, 3), GridError);
}
