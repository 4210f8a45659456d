#include <doctest.h>

#include "skewlab/hypotheses.hpp"
#include "skewlab/linalg.hpp"

using namespace skewlab;

namespace {

SkewProduct standard_family(double r) {
    const int k = static_cast<int>(std::floor(r));
    auto s = standard_map(r);
    return SkewProduct(ToralAutomorphism(cat_matrix()), 2 * k, k, first_coordinate_projection(2, *s), s, r);
}

SkewProduct standard_skew(double r, int L, int K) {
    auto s = standard_map(r);
    return SkewProduct(ToralAutomorphism(cat_matrix()), L, K, first_coordinate_projection(2, *s), s, r);
}

// m(J|Δ) for J = [[a, -1], [1, 0]] by dense sampling of rays (1, n), |n| ≤ α.
double brute_cone_min(double a, double alpha) {
    double best = 1e300;
    for (int j = 0; j <= 4000; ++j) {
        const double n = -alpha + 2.0 * alpha * j / 4000.0;
        const double num = std::hypot(a - n, 1.0), den = std::hypot(1.0, n);
        best = std::min(best, num / den);
    }
    return best;
}

// Smallest singular value of [[a, -1], [1, 0]] from the eigenvalues of JᵀJ (det = 1).
double sigma_min_closed(double a) {
    const double t = a * a + 2.0;
    return 1.0 / std::sqrt((t + std::sqrt(t * t - 4.0)) / 2.0);
}

}  // namespace

TEST_CASE("zeta of the linear twist is sqrt(2) - 1") {
    auto s = standard_map(0.5);  // kick ⌊0.5⌋ = 0
    auto z = estimate_zeta(*s, 0, 256);
    CHECK(z.value == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
    CHECK(sigma_min_closed(2.0) == doctest::Approx(std::sqrt(2.0) - 1.0).epsilon(1e-12));
}

TEST_CASE("zeta for the standard map matches the closed form at the largest kick") {
    for (double r : {100.0, 1e4}) {
        auto s = standard_map(r);
        auto z = estimate_zeta(*s, 0, 4096);
        const double oracle = sigma_min_closed(std::floor(r) + 2.0);
        CHECK(z.value == doctest::Approx(oracle).epsilon(1e-9));
        CHECK(z.value <= 1.0 / r);
        CHECK(z.value >= standard_zeta_scale(r));
    }
}

TEST_CASE("beta at r = 1e4 against dense sampling and the stated lower bound") {
    const double r = 1e4;
    auto s = standard_map(r);
    Cone cone = delta_cone(r);
    auto crit = standard_critical_region(r);
    auto b = estimate_beta(*s, 0, cone, crit, 4096);
    CHECK_FALSE(crit.contains(b.location[0]));

    double brute = 1e300;
    for (int i = 0; i < 20000; ++i) {
        const double x = kTwoPi * i / 20000.0;
        if (crit.contains(x)) continue;
        brute = std::min(brute, brute_cone_min(2.0 + std::floor(r) * std::cos(x), cone.aperture()));
    }
    // Band edges, where |cos x| = 1/√r.
    for (const Band& band : crit.bands())
        for (double x : {band.a, band.b})
            brute = std::min(brute, brute_cone_min(2.0 + std::floor(r) * std::cos(x), cone.aperture()));
    CHECK(b.value <= brute + 1e-9);
    CHECK(b.value == doctest::Approx(brute).epsilon(2e-3));
    CHECK(b.value >= standard_beta_bound(r));
    CHECK(standard_beta_bound(r) == doctest::Approx(2.6416).epsilon(1e-4));
}

TEST_CASE("beta grid estimate is stable under grid doubling") {
    for (double r : {100.0, 1e4}) {
        auto s = standard_map(r);
        Cone cone = delta_cone(r);
        auto crit = standard_critical_region(r);
        const double b1 = estimate_beta(*s, 0, cone, crit, 4096).value;
        const double b2 = estimate_beta(*s, 0, cone, crit, 8192).value;
        CHECK(std::abs(b1 - b2) <= 0.01 * b2);
        const double z1 = estimate_zeta(*s, 0, 4096).value;
        const double z2 = estimate_zeta(*s, 0, 8192).value;
        CHECK(std::abs(z1 - z2) <= 0.01 * z2);
    }
}

TEST_CASE("beta is monotone in the cone aperture and the critical region") {
    auto s = standard_map(1e4);
    auto crit = standard_critical_region(1e4);
    double prev = 1e300;
    for (double alpha : {2.0, 5.0, 10.0, 20.0}) {
        const double b = estimate_beta(*s, 0, coordinate_cone(2, 0, alpha), crit, 2048).value;
        CHECK(b <= prev * (1.0 + 1e-12));
        prev = b;
    }
    Cone cone = delta_cone(1e4);
    prev = 0.0;
    for (double pad : {0.0, 0.01, 0.05, 0.2}) {
        const double b = estimate_beta(*s, 0, cone, crit.widened(pad), 2048).value;
        CHECK(b >= prev * (1.0 - 1e-12));
        prev = b;
    }
}

TEST_CASE("grid estimates are deterministic") {
    auto s = coupled_p(1e4, 0.5);
    Cone cone = delta_cone(1e4);
    auto crit = standard_critical_region(1e4, 1);
    auto a = estimate_beta(*s, 1, cone, crit, 512);
    auto b = estimate_beta(*s, 1, cone, crit, 512);
    CHECK(a.value == b.value);
    CHECK(a.location == b.location);
    CHECK(a.evaluations == b.evaluations);
}

TEST_CASE("S-1 arithmetic with the stated bounds") {
    const double beta = std::pow(1e4, 1.0 / 6.0) - 2.0;
    const double zeta = 1.0 / 2e4;
    auto res = check_S1({{beta, zeta, 0.04}}, 2);
    CHECK(res.products[0] == doctest::Approx(std::pow(beta, 6) * std::sqrt(zeta)));
    CHECK(res.products[0] == doctest::Approx(2.40).epsilon(5e-3));
    CHECK(res.pass);

    // r = 100 with the same bounds: (100^{1/6} - 2)^6 · 0.005^{1/2} ≈ 9.6e-7, below one.
    const double b100 = std::pow(100.0, 1.0 / 6.0) - 2.0;
    auto r100 = check_S1({{b100, 1.0 / 200.0, 0.4}}, 2);
    CHECK(r100.products[0] == doctest::Approx(9.6e-7).epsilon(0.01));
    CHECK_FALSE(r100.product_gt_one.pass);
    CHECK_FALSE(r100.pass);

    auto degenerate = check_S1({{0.1, 0.2, 0.1}}, 2);
    CHECK_FALSE(degenerate.beta_gt_zeta.pass);
    auto long_crit = check_S1({{10.0, 0.01, 1.0}}, 2);
    CHECK_FALSE(long_crit.length.pass);
    CHECK(long_crit.product_gt_one.pass);
}

TEST_CASE("S-1 with grid estimates at r = 1e4 passes") {
    const double r = 1e4;
    auto s = standard_map(r);
    auto crit = standard_critical_region(r);
    const double beta = estimate_beta(*s, 0, delta_cone(r), crit, 4096).value;
    const double zeta = estimate_zeta(*s, 0, 4096).value;
    auto res = check_S1({{beta, zeta, crit.total_length()}}, 2);
    CHECK(res.pass);
    CHECK(res.product_gt_one.margin > 0.0);
}

TEST_CASE("q_bound") {
    const double q = q_bound({8.0}, {5e-7}, 2);
    const double oracle = 0.99 * 2.0 / 3.0 * std::log(262144.0 * std::sqrt(5e-7));
    CHECK(q == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(q == doctest::Approx(3.447).epsilon(1e-3));
    CHECK(q_bound({1.0}, {1.0}, 2) == 0.0);
    CHECK_THROWS_AS(q_bound({0.5}, {0.5}, 2), DegenerateInput);
    CHECK(q_bound({8.0, 4.0}, {5e-7, 5e-7}, 2) < q);
}

TEST_CASE("S-2 for the standard map") {
    auto big = standard_map(1e4);
    auto res = check_S2(*big, 0, delta_cone(1e4), standard_critical_region(1e4), kPi / 2.0, 10000);
    CHECK(res.invariance_pass);
    CHECK(res.invariance_margin > 0.0);
    CHECK(res.band_pass);
    CHECK(res.band_width >= kPi / 2.0);

    auto small = standard_map(2.0);
    auto res2 = check_S2(*small, 0, delta_cone(2.0), standard_critical_region(2.0), kPi / 2.0, 2000);
    CHECK_FALSE(res2.invariance_pass);
    CHECK_FALSE(res2.pass);
}

TEST_CASE("S-2 band for a direction agrees with the explicit inequality") {
    // Direction e_1 maps to (2 + k cos x, 1); it lies in the closed cone iff |2 + k cos x| ≥ 1/α.
    const double r = 16.0;
    auto s = standard_map(r);
    Cone cone = delta_cone(r);
    auto res = check_S2(*s, 0, cone, standard_critical_region(r), kPi / 2.0, 100, 4096, 360);
    const double alpha = cone.aperture();
    int count = 0;
    for (int i = 0; i < 4096; ++i) {
        const double x = kTwoPi * i / 4096.0;
        if (std::abs(2.0 + 16.0 * std::cos(x)) * alpha >= 1.0) ++count;
    }
    CHECK(count > 0);
    CHECK(res.band_width <= kTwoPi);
    CHECK(res.directions == 360);
}

TEST_CASE("A-1 for the cat/standard family") {
    auto f = standard_family(40.0);
    auto a1 = check_A1(f);
    CHECK(a1.i_pass);
    CHECK(a1.p_witness == 3);
    CHECK(a1.ii_first < 1.0);
    CHECK(a1.ii_second < 1.0);
    // λ_r / ‖dφ‖² = 1/c² with c = ‖Π A^K‖/λ^K = |u_0| for the leading unit eigenvector u.
    const double u0 = std::sqrt((5.0 + std::sqrt(5.0)) / 10.0);
    CHECK(a1.norm_dphi / std::pow(a1.lambda_r, 0.5) == doctest::Approx(u0).epsilon(1e-9));
    CHECK(a1.pass);

    auto trend = check_A1_trend(standard_family, {5.0, 10.0, 20.0, 40.0});
    CHECK(trend.decreasing);
    CHECK(trend.pass);
}

TEST_CASE("A-2: K = 1 for a single block and degenerate for the Jordan base") {
    auto f = standard_family(20.0);
    auto a2 = check_A2(f);
    CHECK(a2.K == 1.0);
    CHECK(a2.pass);

    auto p = coupled_p(100.0, 0.5);
    SkewProduct g(ToralAutomorphism(jordan_cat_matrix()), 200, 100, first_coordinate_projection(4, *p), p, 100.0);
    auto a2g = check_A2(g);
    CHECK(a2g.degenerate);
    CHECK_FALSE(a2g.pass);
    // Oracle: P_i Π Q_u has one nonzero row, so its rank is at most one on a 2-D E^u.
    const Splitting& sp = g.base().splitting();
    Mat pq = g.block_projection(0) * to_real(g.projection()) * sp.unstable_basis;
    CHECK(sp.unstable_basis.cols() == 2);
    CHECK(pq.row(1).norm() == 0.0);

    auto s = standard_map(10.0);
    SkewProduct zero(ToralAutomorphism(cat_matrix()), 2, 1, IntMat::Zero(2, 2), s, 10.0);
    auto a2z = check_A2(zero);
    CHECK(a2z.degenerate);
    CHECK_FALSE(a2z.pass);
}

TEST_CASE("A-3 holds and A-4 fails for the cat/standard family") {
    auto f = standard_family(40.0);
    auto rep = check_A3_A4(f, 64);
    CHECK(rep.a3_i_pass);
    // dS^{-1} Π A^{-40} = [[0, 0], -row_0(A^{-40})] and row_0(A^{-40}) = (F_79, -F_80), so the
    // sup norm is sqrt(F_79² + F_80²) = sqrt(F_159) and τ_r ‖·‖² = 1/(φ√5) < 1 < τ_r ‖·‖³.
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    const double fib159 = std::pow(phi, 159) / std::sqrt(5.0);
    CHECK(rep.sup_kick_back == doctest::Approx(std::sqrt(fib159)).epsilon(1e-9));
    CHECK(rep.tau_r * rep.sup_kick_back * rep.sup_kick_back == doctest::Approx(1.0 / (phi * std::sqrt(5.0))).epsilon(1e-9));
    CHECK(rep.q_witness == 3);
    CHECK(rep.a3_pass);
    CHECK(rep.a4_degenerate);
    CHECK_FALSE(rep.a4_pass);
    CHECK(rep.a4_block_min[0] == 0.0);
    CHECK(rep.ph_inverse);
    CHECK(rep.tau_r == doctest::Approx(1.0 / f.lambda_r()).epsilon(1e-9));

    // Oracle for the zero entry: dS^{-1}(y) = [[0, 1], [-1, 2 + k cos y_2]] maps (c, 0) to (0, -c).
    Mat jinv = f.fiber().inverse_jacobian(Vec::Constant(2, 0.3));
    Vec e1(2);
    e1 << 1.0, 0.0;
    CHECK((jinv * e1)[0] == 0.0);

    auto trend = check_A3_trend(standard_family, {10.0, 20.0, 40.0});
    CHECK(trend.decreasing);
    CHECK(trend.pass);

    auto s = standard_map(10.0);
    SkewProduct zero(ToralAutomorphism(cat_matrix()), 2, 1, IntMat::Zero(2, 2), s, 10.0);
    auto z = check_A3_A4(zero, 16);
    CHECK(z.a4_degenerate);
    CHECK_FALSE(z.a4_pass);
}

TEST_CASE("xi: undefined without domination, cone invariant with it") {
    CHECK_THROWS_AS(compute_xi(standard_skew(1e4, 4, 2)), NotDominated);

    auto f = standard_skew(100.0, 6, 2);
    const double lambda6 = std::pow((3.0 + std::sqrt(5.0)) / 2.0, 6.0);
    CHECK(f.lambda_r() == doctest::Approx(lambda6).epsilon(1e-12));
    const double xi = compute_xi(f);
    const double df_e = f.fiber().norm_bounds().d + op_norm(f.kick_on_stable()) + 1.0 / lambda6;
    CHECK(xi == doctest::Approx(2.0 * op_norm(f.kick_on_unstable()) / (lambda6 - df_e)).epsilon(1e-12));
    auto res = xi_and_unstable_cone(f, 2000, 7);
    CHECK(res.cone_invariant);
    CHECK(res.invariance_margin >= 0.0);
    CHECK(res.expansion_ok);
    CHECK(res.min_expansion >= res.lower_bound);
    CHECK(res.max_expansion <= res.upper_bound);

    // ξ decreases as the base iterate grows.
    double prev = xi;
    for (int L : {8, 10, 12}) {
        const double x = compute_xi(standard_skew(100.0, L, 2));
        CHECK(x < prev);
        prev = x;
    }
}

TEST_CASE("full report at r = 1e4") {
    HypothesisConfig cfg;
    cfg.grid_n = 1024;
    cfg.sample_n = 2000;
    auto rep = run_hypotheses(standard_skew(1e4, 40, 20), 1e4, cfg);
    REQUIRE(rep.blocks.size() == 1);
    CHECK(rep.s1.pass);
    CHECK(rep.s1_bounds.pass);
    CHECK(rep.q > 0.0);
    CHECK(rep.blocks[0].s2.pass);
    CHECK(rep.a2.K == 1.0);
}
