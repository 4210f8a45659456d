#include <doctest.h>

#include "skewlab/rng.hpp"

#include <set>

using skewlab::Philox4x32;

TEST_CASE("philox4x32-10 known-answer vectors") {
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::block(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::block(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, K{0xffffffffu, 0xffffffffu}) ==
          C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::block(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, K{0xa4093822u, 0x299f31d0u}) ==
          C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("the stream is the block sequence of (index, stream) counters") {
    Philox4x32 g(0x0123456789abcdefULL, 7);
    for (std::uint32_t idx = 0; idx < 3; ++idx) {
        const auto blk = Philox4x32::block({idx, 0, 7, 0}, {0x89abcdefu, 0x01234567u});
        for (int w = 0; w < 4; ++w) CHECK(g() == blk[w]);
    }
}

TEST_CASE("uniform draws are in [0, 1), reproducible, and streams differ") {
    Philox4x32 a(42), b(42), c(42, 1);
    double mean = 0.0;
    const int n = 200000;
    bool differs = false;
    for (int i = 0; i < n; ++i) {
        const double u = a.uniform();
        CHECK_UNARY(u >= 0.0);
        CHECK_UNARY(u < 1.0);
        CHECK(u == b.uniform());
        differs = differs || (u != c.uniform());
        mean += u;
    }
    CHECK(differs);
    CHECK(mean / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("below covers its range") {
    Philox4x32 g(3);
    std::set<std::uint32_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto v = g.below(5);
        CHECK(v < 5u);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
}
