#include <doctest.h>

#include "skewlab/lyapunov.hpp"

using namespace skewlab;

namespace {

LyapunovOptions opts(long n, int seeds = 3, int qr = 1) {
    LyapunovOptions o;
    o.n = n;
    o.burn_in = 1000;
    o.qr_period = qr;
    o.seeds.clear();
    for (int s = 1; s <= seeds; ++s) o.seeds.push_back(static_cast<std::uint64_t>(s));
    return o;
}

const double kCatLog = std::log((3.0 + std::sqrt(5.0)) / 2.0);

}  // namespace

TEST_CASE("cat map exponents") {
    auto rep = lyapunov_spectrum(ToralAutomorphism(cat_matrix()), opts(100000, 1));
    REQUIRE(rep.exponents.size() == 2);
    CHECK(rep.exponents[0] == doctest::Approx(kCatLog).epsilon(1e-3));
    CHECK(std::abs(rep.exponents[0] - 0.96242) < 1e-3);
    CHECK(std::abs(rep.exponents[1] + 0.96242) < 1e-3);
    CHECK(rep.sum_check < 1e-10);
}

TEST_CASE("exponents are invariant under the re-orthonormalization period") {
    for (int qr : {1, 5, 20}) {
        auto rep = lyapunov_spectrum(ToralAutomorphism(cat_matrix()), opts(100000, 1, qr));
        CHECK(std::abs(rep.exponents[0] - kCatLog) < 1e-6);
        CHECK(std::abs(rep.exponents[1] + kCatLog) < 1e-6);
    }
    auto s = standard_map(10.0);
    CocycleDriver drv;
    auto a = lyapunov_spectrum(s, drv, opts(50000, 3, 1));
    auto b = lyapunov_spectrum(s, drv, opts(50000, 3, 5));
    // Same orbit, same products: only rounding differs.
    for (size_t i = 0; i < 2; ++i) CHECK(std::abs(a.exponents[i] - b.exponents[i]) < 1e-9);
}

TEST_CASE("time reversal for the cat map") {
    ToralAutomorphism a(cat_matrix());
    auto fwd = lyapunov_spectrum(a, opts(100000, 1));
    auto bwd = lyapunov_spectrum(a.inverse(), opts(100000, 1));
    CHECK(std::abs(fwd.exponents[0] + bwd.exponents[1]) < 1e-6);
    CHECK(std::abs(fwd.exponents[1] + bwd.exponents[0]) < 1e-6);
}

TEST_CASE("identity fiber has zero exponents under every driver") {
    auto id = identity_fiber(4, {2, 2});
    for (CocycleMode m : {CocycleMode::deterministic_skew, CocycleMode::iid_kick}) {
        CocycleDriver drv;
        drv.mode = m;
        auto rep = lyapunov_spectrum(id, drv, opts(10000, 2));
        for (double e : rep.exponents) CHECK(std::abs(e) < 1e-9);
    }
    CocycleDriver mk;
    mk.mode = CocycleMode::markov_shift;
    mk.transition = IntMat::Ones(2, 2);
    for (double e : lyapunov_spectrum(id, mk, opts(5000, 2)).exponents) CHECK(std::abs(e) < 1e-9);

    SkewProduct f(ToralAutomorphism(cat_matrix()), 2, 1, first_coordinate_projection(2, *id), id, 1.0);
    for (double e : fiber_exponents(f, opts(5000, 2)).exponents) CHECK(std::abs(e) < 1e-9);
}

TEST_CASE("decoupled skew fiber exponents equal the standalone fiber orbit") {
    auto s = standard_map(20.0);
    SkewProduct f(ToralAutomorphism(cat_matrix()), 4, 2, IntMat::Zero(2, 2), s, 20.0);
    auto skew = fiber_exponents(f, opts(20000, 2));
    CocycleDriver standalone;
    standalone.mode = CocycleMode::deterministic_skew;
    auto alone = lyapunov_spectrum(s, standalone, opts(20000, 2));
    for (size_t i = 0; i < 2; ++i) CHECK(std::abs(skew.exponents[i] - alone.exponents[i]) < 1e-9);
}

TEST_CASE("full skew spectrum: base exponents and zero sum") {
    auto s = standard_map(10.0);
    SkewProduct f(ToralAutomorphism(cat_matrix()), 2, 1, first_coordinate_projection(2, *s), s, 10.0);
    auto rep = lyapunov_spectrum(f, opts(20000, 3));
    REQUIRE(rep.exponents.size() == 4);
    CHECK(rep.sum_check < 1e-8);
    // Block-triangular derivative: ±2 ln λ appear in the spectrum.
    bool top = false, bottom = false;
    for (double e : rep.exponents) {
        top = top || std::abs(e - 2.0 * kCatLog) < 0.05;
        bottom = bottom || std::abs(e + 2.0 * kCatLog) < 0.05;
    }
    CHECK(top);
    CHECK(bottom);
}

TEST_CASE("iid-kick standard cocycle exceeds 0.6 ln r") {
    auto s = standard_map(100.0);
    CocycleDriver drv;
    auto rep = compare_bounds(lyapunov_spectrum(s, drv, opts(100000, 3)), {{"0.6 ln r", 0.6 * std::log(100.0), 0}});
    for (const auto& run : rep.runs) {
        CHECK(run.exponents[0] > 0.6 * std::log(100.0));
        CHECK(std::abs(run.exponents[0] + run.exponents[1]) < 1e-2);
    }
    CHECK(rep.bound_comparisons[0].pass);
}

TEST_CASE("iid-kick exponent grows with r") {
    CocycleDriver drv;
    auto lo = lyapunov_spectrum(standard_map(50.0), drv, opts(20000, 10));
    auto hi = lyapunov_spectrum(standard_map(200.0), drv, opts(20000, 10));
    double lo_max = -1e300, hi_min = 1e300;
    for (const auto& r : lo.runs) lo_max = std::max(lo_max, r.exponents[0]);
    for (const auto& r : hi.runs) hi_min = std::min(hi_min, r.exponents[0]);
    CHECK(hi_min > lo_max);
}

TEST_CASE("parry measure") {
    auto full = parry_measure(IntMat::Ones(3, 3));
    CHECK(full.perron_root == doctest::Approx(3.0));
    for (int i = 0; i < 3; ++i) CHECK(full.weights[i] == doctest::Approx(1.0 / 3.0));

    IntMat golden(2, 2);
    golden << 1, 1, 1, 0;
    auto pm = parry_measure(golden);
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    CHECK(pm.perron_root == doctest::Approx(phi).epsilon(1e-12));
    // C is symmetric with Perron vector (φ, 1), so weights ∝ (φ², 1).
    CHECK(pm.weights[0] == doctest::Approx(phi * phi / (phi * phi + 1.0)).epsilon(1e-12));
    CHECK(pm.transitions(0, 0) == doctest::Approx(1.0 / phi).epsilon(1e-12));
    CHECK(pm.transitions(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pm.transitions(1, 1) == 0.0);
    Vec stat = pm.transitions.transpose() * pm.weights;
    CHECK((stat - pm.weights).norm() < 1e-12);

    auto trivial = parry_measure(IntMat::Ones(1, 1));
    CHECK(trivial.weights[0] == doctest::Approx(1.0));

    IntMat reducible(2, 2), periodic(2, 2), bad(2, 2);
    reducible << 1, 1, 0, 1;
    periodic << 0, 1, 1, 0;
    bad << 2, 1, 1, 1;
    CHECK_THROWS(parry_measure(reducible));
    CHECK_THROWS(parry_measure(periodic));
    CHECK_THROWS(parry_measure(bad));
}

TEST_CASE("markov-shift driven standard cocycle") {
    CocycleDriver drv;
    drv.mode = CocycleMode::markov_shift;
    drv.transition = IntMat::Ones(2, 2);
    auto rep = lyapunov_spectrum(standard_map(100.0), drv, opts(50000, 2));
    CHECK(rep.exponents[0] > 0.6 * std::log(100.0));
    CHECK(rep.sum_check < 1e-2);
    IntMat golden(2, 2);
    golden << 1, 1, 1, 0;
    drv.transition = golden;
    auto g = lyapunov_spectrum(standard_map(100.0), drv, opts(50000, 2));
    CHECK(g.exponents[0] > 0.6 * std::log(100.0));
}

TEST_CASE("expanding-base cocycle") {
    auto rep = expanding_base_cocycle(2, 50.0, opts(50000, 2));
    REQUIRE(rep.base_exponents.size() == 1);
    CHECK(rep.base_exponents[0] == doctest::Approx(100.0 * std::log(2.0)).epsilon(1e-15));
    CHECK(rep.exponents[0] > 0.6 * std::log(50.0));
    CHECK(std::abs(rep.exponents[0] + rep.exponents[1]) < 1e-2);

    auto neg = expanding_base_cocycle(-3, 20.5, opts(20000, 2));
    CHECK(neg.base_exponents[0] == doctest::Approx(41.0 * std::log(3.0)));
    CHECK(neg.exponents[0] > 0.6 * std::log(20.5));

    // Zero kick: the standalone standard map orbit from the same seed.
    CocycleDriver drv;
    drv.mode = CocycleMode::expanding_base;
    drv.multiplier = 2;
    drv.r = 10.0;
    drv.projection = IntMat::Zero(2, 1);
    auto zero = lyapunov_spectrum(standard_map(10.0), drv, opts(20000, 2));
    CocycleDriver standalone;
    standalone.mode = CocycleMode::deterministic_skew;
    auto alone = lyapunov_spectrum(standard_map(10.0), standalone, opts(20000, 2));
    for (size_t i = 0; i < 2; ++i) CHECK(zero.exponents[i] == alone.exponents[i]);
    CHECK_THROWS(expanding_base_cocycle(1, 10.0, opts(100, 1)));
}

TEST_CASE("compare_bounds") {
    LyapunovReport rep;
    rep.runs = {{1, {3.9, -3.9}, false}};
    rep.exponents = {3.9, -3.9};
    auto out = compare_bounds(rep, {{"0.6 ln 100", 2.763, 0}});
    CHECK(out.bound_comparisons[0].pass);
    CHECK(out.exponents == rep.exponents);
    auto same = compare_bounds(rep, {});
    CHECK(same.bound_comparisons.empty());
    CHECK(same.exponents == rep.exponents);
    CHECK_THROWS(compare_bounds(rep, {{"nan", std::nan(""), 0}}));
    auto fail = compare_bounds(rep, {{"high", 5.0, 0}});
    CHECK_FALSE(fail.bound_comparisons[0].pass);
}

TEST_CASE("determinism, threading and merge") {
    auto s = standard_map(30.0);
    CocycleDriver drv;
    auto o = opts(5000, 4);
    auto a = lyapunov_spectrum(s, drv, o);
    o.threads = 3;
    auto b = lyapunov_spectrum(s, drv, o);
    REQUIRE(a.runs.size() == b.runs.size());
    for (size_t i = 0; i < a.runs.size(); ++i) CHECK(a.runs[i].exponents == b.runs[i].exponents);

    auto part = [&](std::vector<std::uint64_t> seeds) {
        auto p = opts(5000, 1);
        p.seeds = seeds;
        return lyapunov_spectrum(s, drv, p);
    };
    auto x = part({1}), y = part({2, 3}), z = part({4});
    auto left = merge_reports(merge_reports(x, y), z);
    auto right = merge_reports(z, merge_reports(y, x));
    CHECK(left.exponents == right.exponents);
    CHECK(left.exponents == a.exponents);
    CHECK(left.seeds == a.seeds);
}

TEST_CASE("non-finite Jacobians are reported as divergence") {
    auto v = std::make_shared<CustomPotential>(
        1, [](const Vec&) { return 0.0; }, [](const Vec& q) { return Vec::Zero(q.size()); },
        [](const Vec& q) { return Mat::Constant(q.size(), q.size(), std::nan("")); });
    CocycleDriver drv;
    auto rep = lyapunov_spectrum(generic_twist(v), drv, opts(100, 2));
    CHECK(rep.diverged);
    CHECK(rep.runs[0].diverged);
}

TEST_CASE("argument validation") {
    CocycleDriver drv;
    auto o = opts(10, 1, 20);
    CHECK_THROWS(lyapunov_spectrum(standard_map(5.0), drv, o));
    CHECK(cocycle_mode_from_string("iid-kick") == CocycleMode::iid_kick);
    CHECK_THROWS(cocycle_mode_from_string("bogus"));
}
