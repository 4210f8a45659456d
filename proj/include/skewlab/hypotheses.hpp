#pragma once

#include "skewlab/cones.hpp"
#include "skewlab/skew.hpp"

#include <functional>
#include <string>
#include <vector>

namespace skewlab {

// Inf of a grid function with the location of the minimizer; grid_n is the number of
// points on the designated axis (other dependency axes use min(grid_n, 64)).
struct GridEstimate {
    double value = 0.0;
    Vec location;
    int grid_n = 0;
    int evaluations = 0;
};

// The s_i x s_i diagonal block of dS at y.
Mat block_jacobian(const FiberMap& s, int block, const Vec& y);

// inf over y ∉ crit of m(dS_ii(y) | cone).
GridEstimate estimate_beta(const FiberMap& s, int block, const Cone& cone, const CriticalRegion& crit, int grid_n);
// inf over y of σ_min(dS_ii(y)).
GridEstimate estimate_zeta(const FiberMap& s, int block, int grid_n);

struct Clause {
    bool pass = false;
    double margin = 0.0;  // positive iff pass
};

struct S1Block {
    double beta = 0.0;
    double zeta = 0.0;
    double crit_length = 0.0;
};

struct S1Result {
    std::vector<double> products;  // β_i^6 ζ_i^{1/σ}
    Clause length;                 // max_i l(C_i) < threshold · 2π
    Clause beta_gt_zeta;
    Clause product_gt_one;
    bool pass = false;
};

S1Result check_S1(const std::vector<S1Block>& blocks, int sigma, double threshold = 0.1);

struct S2Result {
    bool invariance_pass = false;
    double invariance_margin = 0.0;
    int invariance_samples = 0;
    bool band_pass = false;
    double band_width = 0.0;        // min over directions of the widest admissible band
    Band worst_band;                // band achieving that width
    Vec worst_direction;
    int directions = 0;
    int band_grid = 0;
    bool pass = false;
};

S2Result check_S2(const FiberMap& s, int block, const Cone& cone, const CriticalRegion& crit, double r_target,
                  int sample_n, int band_grid = 2048, int directions = 180);

struct A1Result {
    double norm_dphi = 0.0;
    double norm_dphi_stable = 0.0;
    double min_dphi_unstable = 0.0;
    double lambda_r = 0.0;
    double dS = 0.0, dS_inv = 0.0, d2S = 0.0;
    double ratio_coupling = 0.0;  // (‖dφ|E^s‖ + ‖dS‖³) / m(dφ|E^u)
    double ratio_kick = 0.0;      // ‖dφ‖ / λ_r
    bool i_pass = false;
    int p_witness = 0;            // 0 when none found up to p_max
    double ii_first = 0.0;        // λ_r / ‖dφ‖^p at the witness
    double ii_second = 0.0;       // ((‖dS^{-1}‖‖dS‖)^{3p} + (‖dS^{-1}‖‖d²S‖)^{3p}) / λ_r at the witness
    bool ii_pass = false;
    bool degenerate = false;
    std::string diagnostic;
    double threshold = 0.1;
    bool pass = false;
};

A1Result check_A1(const SkewProduct& f, int p_max = 20, double threshold = 0.1);

struct A2Result {
    double norm_dphi_unstable = 0.0;
    std::vector<double> block_min;  // m(P_i ∘ dφ|E^u)
    double K = 0.0;                 // infinite when degenerate
    bool degenerate = false;
    std::string diagnostic;
    bool pass = false;
};

A2Result check_A2(const SkewProduct& f, double threshold = 0.1);

struct A3A4Result {
    double tau_r = 0.0;
    double sup_kick_back_unstable = 0.0;  // sup_y ‖dS^{-1} dφ A_r^{-1} | E^u‖
    double sup_kick_back = 0.0;           // sup_y ‖dS^{-1} dφ A_r^{-1}‖
    double inf_kick_stable = 0.0;         // inf_y m(dS^{-1} dφ | E^s)
    double sup_kick_stable = 0.0;         // sup_y ‖dS^{-1} dφ | E^s‖
    double a3_ratio_coupling = 0.0;
    double a3_ratio_kick = 0.0;
    bool a3_i_pass = false;
    int q_witness = 0;
    bool a3_ii_pass = false;
    bool a3_pass = false;
    std::vector<double> a4_block_min;  // inf_y m(P_i dS^{-1} dφ | E^s)
    double a4_ratio = 0.0;
    bool a4_degenerate = false;
    bool a4_pass = false;
    double xi_inverse = 0.0;
    bool ph_inverse = false;
    int grid_n = 0;
    std::string diagnostic;
};

A3A4Result check_A3_A4(const SkewProduct& f, int grid_n = 64, int q_max = 20, double threshold = 0.1);

struct TrendResult {
    std::vector<double> r_values;
    std::vector<double> first;   // per r, first ratio of the clause
    std::vector<double> second;  // per r, second ratio
    bool decreasing = false;     // both sequences non-increasing along r
    bool final_pass = false;     // clause passes at the largest r
    bool pass = false;
};

using SkewFamily = std::function<SkewProduct(double r)>;
TrendResult check_A1_trend(const SkewFamily& family, const std::vector<double>& r_values, double threshold = 0.1);
TrendResult check_A3_trend(const SkewFamily& family, const std::vector<double>& r_values, int grid_n = 32,
                           double threshold = 0.1);

struct XiResult {
    double lambda_r = 0.0;
    double norm_A_unstable = 0.0;
    double norm_dphi_unstable = 0.0;
    double norm_dphi_stable = 0.0;
    double norm_A_stable = 0.0;
    double dS = 0.0;
    double norm_df_E = 0.0;
    double xi = 0.0;
    int samples = 0;
    bool cone_invariant = false;
    double invariance_margin = 0.0;  // min over samples of ξ‖v'^u‖ - ‖w'‖, relative to ‖df v‖
    bool expansion_ok = false;
    double min_expansion = 0.0;      // min ‖df v‖/‖v‖ over samples
    double max_expansion = 0.0;
    double lower_bound = 0.0;        // λ (1 - ξ)/(1 + ξ)
    double upper_bound = 0.0;        // ‖A|E^u‖ (1 + ξ)
    bool pass = false;
};

// ξ = 2‖dφ|E^u‖ / (λ_r - ‖df|E‖) with ‖df|E‖ = ‖dS‖ + ‖dφ|E^s‖ + ‖A_r|E^s‖.
// Throws NotDominated when λ_r ≤ ‖df|E‖.
double compute_xi(const SkewProduct& f);
XiResult xi_and_unstable_cone(const SkewProduct& f, int samples = 400, unsigned long long seed = 1);

// Q(r) ≥ min_i 0.99σ/(σ+1) log(β_i^6 ζ_i^{1/σ}); throws DegenerateInput when some product is below 1.
double q_bound(const std::vector<double>& betas, const std::vector<double>& zetas, int sigma);

// Bounds stated for the standard family: β ≥ r^{1/6} - 2 and ζ ≈ 1/(2r).
double standard_beta_bound(double r);
double standard_zeta_scale(double r);

struct HypothesisConfig {
    int sigma = 2;
    double r_target = kPi / 2.0;
    int grid_n = 4096;
    int sample_n = 10000;
    int band_grid = 2048;
    int band_directions = 180;
    int p_max = 20;
    int appendix_grid = 64;
    double threshold = 0.1;
};

struct BlockReport {
    int block = 0;
    GridEstimate beta;
    GridEstimate zeta;
    double beta_bound = 0.0;
    double zeta_scale = 0.0;
    double crit_length = 0.0;
    double cone_aperture = 0.0;
    S2Result s2;
};

struct HypothesisReport {
    double r = 0.0;
    int sigma = 2;
    std::vector<BlockReport> blocks;
    S1Result s1;             // grid estimates
    S1Result s1_bounds;      // stated bounds (β ≥ r^{1/6} - 2, ζ = 1/(2r))
    double q = 0.0;          // NaN when S-1 fails
    A1Result a1;
    A2Result a2;
    A3A4Result a3a4;
    XiResult xi;
    bool xi_defined = false;
    std::string xi_diagnostic;
    HypothesisConfig config;
};

// Full battery using Δ_r = cone of aperture r^{1/4} on each block's first coordinate and
// the standard critical region on each block.
HypothesisReport run_hypotheses(const SkewProduct& f, double r, const HypothesisConfig& cfg);

}  // namespace skewlab
