#include <doctest.h>

#include "skewlab/curves.hpp"
#include "skewlab/hypotheses.hpp"
#include "skewlab/linalg.hpp"

#include <cmath>

using namespace skewlab;

namespace {

const double kGolden = (3.0 + std::sqrt(5.0)) / 2.0;

SkewProduct standard_skew(double r, int L, int K) {
    auto s = standard_map(r);
    return SkewProduct(ToralAutomorphism(cat_matrix()), L, K, first_coordinate_projection(2, *s), s, r);
}

SkewProduct linear_skew(int L, int K, int fiber_dim, std::vector<int> blocks) {
    auto s = identity_fiber(fiber_dim, std::move(blocks));
    return SkewProduct(ToralAutomorphism(cat_matrix()), L, K, first_coordinate_projection(2, *s), s, 100.0);
}

double angle_between(const Vec& a, const Vec& b) {
    const Vec u = a.normalized(), w = b.normalized();
    const double c = u.dot(w);
    return std::atan2((u - c * w).norm(), std::abs(c));
}

// Unstable eigenvector of [[A^L, 0], [dφ, I]] for λ^L: (u, dφ u / (λ^L - 1)).
Vec linear_unstable_oracle(const SkewProduct& f) {
    const Vec u = f.base().splitting().unstable_basis.col(0);
    const double lam = std::pow(kGolden, f.base_iterates());
    Vec v(f.dim());
    v << u, f.kick_derivative() * u / (lam - 1.0);
    return v.normalized();
}

const SkewPoint kStart{Vec::Constant(2, 0.3), Vec::Constant(2, 1.1)};

}  // namespace

TEST_CASE("unstable vector: linear skew matches the eigenvector oracle") {
    const auto f = linear_skew(4, 2, 2, {2});
    const auto uv = approximate_unstable_vector(f, kStart, 30);
    CHECK(angle_between(uv.v, linear_unstable_oracle(f)) < 1e-12);
    CHECK(uv.ratio <= uv.upper);
    CHECK(uv.in_interval);
}

TEST_CASE("unstable vector: zero backward steps return the normalized seed") {
    const auto f = standard_skew(100.0, 6, 2);
    Vec seed(4);
    seed << 3.0, 1.0, 0.2, -0.1;
    const auto uv = approximate_unstable_vector(f, kStart, 0, seed);
    CHECK((uv.v - seed.normalized()).norm() < 1e-15);
    CHECK_THROWS_AS(approximate_unstable_vector(f, kStart, -1), std::invalid_argument);
}

TEST_CASE("unstable vector: independent seeds converge and more steps change nothing") {
    const auto f = standard_skew(100.0, 6, 2);
    const Vec u = f.base().splitting().unstable_basis.col(0);
    Vec s1(4), s2(4);
    s1 << u, 0.0, 0.0;
    s2 << u, 0.01, -0.02;
    const auto a = approximate_unstable_vector(f, kStart, 30, s1);
    const auto b = approximate_unstable_vector(f, kStart, 30, s2);
    const auto c = approximate_unstable_vector(f, kStart, 40, s1);
    CHECK(angle_between(a.v, b.v) < 1e-10);
    CHECK(angle_between(a.v, c.v) < 1e-10);
    CHECK(a.ratio <= a.xi);
    CHECK(a.ratio >= a.lower);
}

TEST_CASE("growth: undominated and degenerate presets are rejected") {
    CHECK_THROWS_AS(grow_admissible_curve(standard_skew(64.0, 4, 2), kStart, 0), NotDominated);
    auto s = identity_fiber(2, {2});
    const SkewProduct flat(ToralAutomorphism(cat_matrix()), 4, 2, IntMat::Zero(2, 2), s, 1.0);
    CHECK_THROWS_AS(grow_admissible_curve(flat, kStart, 0), DegenerateInput);
}

TEST_CASE("growth: curve is admissible with unit P_i speed") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 129;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    CHECK(c.size() == 129);
    CHECK(c.full());
    const auto bounds = admissible_length_bounds(f, 0);
    const auto cert = certify_curve(f, c, bounds);
    CHECK(cert.pass);
    CHECK(cert.max_speed_error <= 1e-8);
    // P_i coordinate advances by exactly s.
    const double y0 = c.points(2, 0);
    for (int k = 0; k < c.size(); ++k) CHECK(std::abs(c.orientation * (c.points(2, k) - y0) - c.s[k]) < 1e-9);
    // Endpoint lies on f(f^{-1}(start)) = start.
    CHECK(skew_distance(c.point(0, 2), kStart) < 1e-9);

    opt.max_step = 0.5 * c.length() / 128.0;
    const auto fine = grow_admissible_curve(f, kStart, 0, opt);
    CHECK(fine.size() > 129);
    for (int k = 1; k < fine.size(); ++k) CHECK(fine.arclength[k] - fine.arclength[k - 1] <= opt.max_step);
}

TEST_CASE("length bounds: single block constants are exact and contain measured lengths") {
    const auto f = standard_skew(100.0, 6, 2);
    const auto b = admissible_length_bounds(f, 0);
    CHECK(b.K == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.lower <= b.closed_lower);
    CHECK(b.upper >= b.closed_upper);
    CHECK(b.ratio_upper == doctest::Approx(b.upper / b.lower));
}

TEST_CASE("linear skew: level-one pieces follow the eigen-direction oracle") {
    const int L = 4;
    const auto f = linear_skew(L, 2, 2, {2});
    CurveOptions opt;
    opt.samples = 65;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Vec v = linear_unstable_oracle(f);
    const double lam = std::pow(kGolden, L);
    // A straight segment along E^u with unit P_i speed.
    CHECK(c.length() == doctest::Approx(kTwoPi / std::abs(v[2])).epsilon(1e-10));

    const auto dec = decompose_image(f, c, 1, opt);
    CHECK(dec.exhaustive);
    CHECK(static_cast<double>(dec.pieces.size()) == std::ceil(lam));
    for (const auto& p : dec.pieces) {
        for (double j : p.jacobian) CHECK(j == doctest::Approx(1.0 / lam).epsilon(1e-10));
        if (p.curve.full()) CHECK(p.curve.length() == doctest::Approx(c.length()).epsilon(1e-10));
        CHECK(angle_between(p.curve.tangents.col(0), v) < 1e-10);
    }

    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    CHECK(expansion_integral(f, c, x, FieldMode::product) == doctest::Approx(0.0));
    for (double i : expansion_sequence(f, c, x, 5, FieldMode::product)) CHECK(std::abs(i) < 1e-14);

    const auto led = ledger_sums(f, c, x, 2, opt);
    REQUIRE(led.levels.size() == 3);
    for (const auto& lv : led.levels) {
        CHECK(lv.distortion == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(lv.identity_error < 1e-10);
        CHECK(lv.b == 0.0);
        CHECK(lv.admissibility_failures == 0);
    }
    const auto dist = distortion_constant(f, c, 2, opt);
    CHECK(dist.size() == 3);
}

TEST_CASE("classification: product and w-adapted classes") {
    const auto f = linear_skew(4, 2, 4, {2, 2});
    const auto cones = default_cones(f);
    auto column = [](std::initializer_list<double> v) {
        Mat m(4, 3);
        Vec x(4);
        int i = 0;
        for (double e : v) x[i++] = e;
        for (int k = 0; k < 3; ++k) m.col(k) = x;
        return m;
    };
    CHECK(classify_field(f, column({1, 0, 0, 1}), cones, FieldMode::product, 0) == PieceClass::good);
    CHECK(classify_field(f, column({1, 0, 0, 1}), cones, FieldMode::product, 1) == PieceClass::bad);
    CHECK(classify_field(f, column({1, 0, 1, 0}), cones, FieldMode::w_adapted, 0) == PieceClass::good);
    CHECK(classify_field(f, column({1, 0, 0, 1}), cones, FieldMode::w_adapted, 0) == PieceClass::almost_good);
    CHECK(classify_field(f, column({0, 1, 0, 1}), cones, FieldMode::w_adapted, 0) == PieceClass::bad);
    // The cone boundary counts as inside.
    Mat edge = column({1, 1, 1, 0});
    CHECK(classify_field(f, edge, cones, FieldMode::product, 0) == PieceClass::good);

    Vec x(4);
    x << 3.0, 4.0, 0.0, 12.0;
    CHECK(field_norm(f, x, FieldMode::product) == doctest::Approx(13.0));
    CHECK(field_norm(f, x, FieldMode::w_adapted) == doctest::Approx(12.0));
    CHECK(to_string(PieceClass::almost_good) == "almost-good");
    CHECK(field_mode_from_string("w-adapted") == FieldMode::w_adapted);
    CHECK_THROWS_AS(field_mode_from_string("other"), std::invalid_argument);
}

TEST_CASE("holder: constant field certifies, alternating field does not") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 65;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    const auto h = holder_certificate(f, c, x, 0.9, 3, FieldMode::product);
    CHECK(h.ratio == 0.0);
    CHECK(h.certified);
    CHECK(h.c_x == doctest::Approx(std::pow(std::pow(kGolden, 6), -0.9 * (1.0 - 1.0 / 6.0))));

    Mat rough = x;
    for (int k = 1; k < c.size(); k += 2) rough.col(k) = Vec(Eigen::Vector2d(1.0, 0.5).normalized());
    const auto hr = holder_certificate(f, c, rough, 0.9, 3, FieldMode::product);
    const double jump = (Eigen::Vector2d(1.0, 0.0) - Eigen::Vector2d(1.0, 0.5).normalized()).norm();
    CHECK(hr.variation == doctest::Approx(jump));
    CHECK(hr.ratio >= jump / std::pow(c.arclength[1] - c.arclength[0], 0.9) * (1.0 - 1e-12));
    CHECK_FALSE(hr.certified);
}

TEST_CASE("expansion integral: analytic integrand on a fine independent grid") {
    const double r = 100.0;
    const auto f = standard_skew(r, 6, 2);
    CurveOptions opt;
    opt.samples = 65;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    const double refined = expansion_integral_refined(f, c, x, FieldMode::product, 1e-6);

    // dS(x, y)(1, 0) = (2 + k cos x, 1).
    const double k = std::floor(r);
    const int n = 400000;
    double total = 0.0, len = 0.0;
    Vec prev = c.position(0.0);
    auto g = [&](const Vec& p) { return 0.5 * std::log(std::pow(2.0 + k * std::cos(p[2]), 2) + 1.0); };
    double gprev = g(prev);
    for (int i = 1; i <= n; ++i) {
        const Vec p = c.position(c.displacement() * i / n);
        const double gi = g(p), h = (p - prev).norm();
        total += 0.5 * (gi + gprev) * h;
        len += h;
        prev = p;
        gprev = gi;
    }
    CHECK(refined == doctest::Approx(total / len).epsilon(1e-4));

    // Same nodes, two routes: Jacobian of S against the tangent push of f.
    const double direct = expansion_integral(f, c, x, FieldMode::product);
    const auto seq = expansion_sequence(f, c, x, 2, FieldMode::product);
    CHECK(seq[0] == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("ledger: desk-scale dominated preset") {
    const double r = 100.0;
    const auto f = standard_skew(r, 6, 2);
    CurveOptions opt;
    opt.samples = 129;
    opt.paths = 4;
    opt.record_pieces = true;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    const auto led = ledger_sums(f, c, x, 2, opt);
    REQUIRE(led.levels.size() == 3);

    const auto& l0 = led.levels[0];
    CHECK(l0.g == 1.0);
    CHECK(l0.b == 0.0);
    CHECK(l0.p == 0.0);
    CHECK(led.curve_certificate.pass);
    CHECK(led.start_field.certified);

    for (size_t k = 1; k < led.levels.size(); ++k) {
        const auto& lv = led.levels[k];
        INFO("level " << k);
        CHECK(lv.identity_error < 1e-4);
        CHECK(lv.sum_ok);
        CHECK(lv.g_dominates_b);
        CHECK(lv.g >= 2.0 * lv.b);
        CHECK(lv.distortion <= 1.1);
        CHECK(lv.admissibility_failures == 0);
        CHECK(lv.length_ratio_ok);
        CHECK(lv.good_bound_failures == 0);
        CHECK(lv.zeta_bound_failures == 0);
        CHECK(lv.recursion_ok);
        CHECK(lv.holder_failures == 0);
        if (std::isfinite(led.q)) CHECK(lv.positivity >= 0.9 * led.q);
    }
    CHECK(led.levels[1].exhaustive);
    CHECK_FALSE(led.levels[2].exhaustive);
    CHECK(led.distortion_monotone);

    // Row table agrees with the level sums at the exhaustive level.
    double g1 = 0.0;
    long rows1 = 0;
    for (const auto& row : led.rows) {
        if (row.k != 1) continue;
        ++rows1;
        if (row.full && row.cls == PieceClass::good) g1 += row.min_j;
    }
    CHECK(rows1 == led.levels[1].inspected);
    CHECK(g1 == doctest::Approx(led.levels[1].g).epsilon(1e-12));
}

TEST_CASE("decomposition: piece lengths add up to the length of the image") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 129;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const auto dec = decompose_image(f, c, 1, opt);
    double pieces = 0.0;
    for (const auto& p : dec.pieces) pieces += p.curve.length();

    // Chord length of f applied to the lifted curve, with f evaluated without reduction.
    const int l = f.base_dim(), d = f.fiber_dim();
    Mat al = Mat::Identity(l, l);
    for (int i = 0; i < f.base_iterates(); ++i) al = to_real(f.base().entries()) * al;
    auto lift = [&](const Vec& p) {
        Vec out(l + d), sf(d);
        f.fiber().eval_raw(p.tail(d), sf);
        out << al * p.head(l), sf + f.kick_derivative() * p.head(l);
        return out;
    };
    const int n = 200000;
    double image = 0.0;
    Vec prev = lift(c.position(0.0));
    for (int i = 1; i <= n; ++i) {
        const Vec q = lift(c.position(c.displacement() * i / n));
        image += (q - prev).norm();
        prev = q;
    }
    CHECK(pieces == doctest::Approx(image).epsilon(1e-5));

    // Every full piece advances P_i by exactly 2π, the last by the remainder.
    for (size_t j = 0; j + 1 < dec.pieces.size(); ++j) CHECK(dec.pieces[j].curve.full());
}

TEST_CASE("push: pieces of a constant field re-certify after one step") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 129;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    const auto res = push_adapted_field(f, c, x, 1, opt);
    CHECK_FALSE(res.certificates.empty());
    CHECK(res.all_certified);
    for (const auto& p : res.decomposition.pieces)
        for (int k = 0; k < p.curve.size(); ++k) CHECK(field_norm(f, p.field.col(k), opt.mode) == doctest::Approx(1.0));
}

TEST_CASE("ledger: same seed reproduces, another seed agrees on the identity") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 65;
    opt.paths = 3;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    const auto a = ledger_sums(f, c, x, 2, opt);
    const auto b = ledger_sums(f, c, x, 2, opt);
    CHECK(a.levels[2].g == b.levels[2].g);
    CHECK(a.levels[2].count == b.levels[2].count);
    opt.seed = 99;
    const auto other = ledger_sums(f, c, x, 2, opt);
    CHECK(other.levels[2].identity_error < 1e-4);
}

TEST_CASE("decomposition: level zero is the curve and level one count is near λ^L") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 129;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const auto d0 = decompose_image(f, c, 0, opt);
    REQUIRE(d0.pieces.size() == 1);
    CHECK((d0.pieces[0].curve.points - c.points).norm() == 0.0);

    const auto d1 = decompose_image(f, c, 1, opt);
    std::vector<double> lens;
    for (const auto& p : d1.pieces)
        if (p.curve.full()) lens.push_back(p.curve.length());
    std::nth_element(lens.begin(), lens.begin() + lens.size() / 2, lens.end());
    const double heuristic = std::pow(kGolden, 6) * c.length() / lens[lens.size() / 2];
    const double n1 = static_cast<double>(d1.pieces.size());
    CHECK(n1 >= heuristic / 2.0);
    CHECK(n1 <= heuristic * 2.0);
    const auto bounds = admissible_length_bounds(f, 0);
    for (const auto& p : d1.pieces) CHECK(certify_curve(f, p.curve, bounds).pass);
}

TEST_CASE("growth: curves from different starts have comparable lengths") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 65;
    const auto a = grow_admissible_curve(f, kStart, 0, opt);
    const auto b = grow_admissible_curve(f, {Vec::Constant(2, 4.0), Vec::Constant(2, 2.5)}, 0, opt);
    const auto bounds = admissible_length_bounds(f, 0);
    const double ratio = b.length() / a.length();
    CHECK(ratio >= bounds.ratio_lower);
    CHECK(ratio <= bounds.ratio_upper);
}

TEST_CASE("push: variation of certified fields stays below the variation bound") {
    const auto f = standard_skew(100.0, 6, 2);
    CurveOptions opt;
    opt.samples = 129;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    const auto res = push_adapted_field(f, c, x, 1, opt);
    for (const auto& h : res.certificates) {
        CHECK(h.certified);
        CHECK(h.variation <= h.variation_bound);
    }
}

TEST_CASE("expansion integral: r = 1e4 good field clears the two-term and ζ bounds") {
    const double r = 1e4;
    const auto f = standard_skew(r, 12, 2);
    CurveOptions opt;
    opt.samples = 257;
    const auto c = grow_admissible_curve(f, kStart, 0, opt);
    const Mat x = constant_field(f, c, Vec::Unit(2, 0), FieldMode::product);
    const double e = expansion_integral_refined(f, c, x, FieldMode::product);

    const auto crit = standard_critical_region(r, 0);
    const double beta = estimate_beta(f.fiber(), 0, default_cones(f)[0], crit, 4096).value;
    const double zeta = estimate_zeta(f.fiber(), 0, 4096).value;
    const double l = crit.total_length();
    CHECK(e >= 0.9 * (kTwoPi - l) / kTwoPi * std::log(beta) + l / kTwoPi * std::log(zeta));
    CHECK(e >= std::log(zeta));
    // Off the critical region the integrand itself is at least log β.
    Mat jac(2, 2);
    for (int k = 0; k < c.size(); ++k) {
        const Vec y = c.points.col(k).tail(2);
        if (crit.contains(wrap_angle(y[0]))) continue;
        f.fiber().jacobian_into(y, jac);
        CHECK(std::log((jac * x.col(k)).norm()) >= std::log(beta) - 1e-12);
    }
}
