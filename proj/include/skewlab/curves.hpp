#pragma once

#include "skewlab/cones.hpp"
#include "skewlab/skew.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace skewlab {

// ---------------------------------------------------------------- unstable direction

struct UnstableVector {
    Vec v;               // unit, base coordinates first
    double xi = 0.0;
    double ratio = 0.0;  // ‖(E^s part, fiber part)‖ / ‖E^u part‖ in splitting coordinates
    double lower = 0.0;  // (m(dφ|E^u) - ξ(‖dφ|E^s‖ + ‖dS‖)) / ‖A_r|E^u‖, clipped at 0
    double upper = 0.0;  // ξ
    double literal_lower = 0.0;  // m(dφ|E^u) / λ_r
    bool in_interval = false;
};

// Ratio ‖(c, y)‖ / ‖a‖ for v = (Q_u a + Q_s c, y).
double unstable_cone_ratio(const SkewProduct& f, const Vec& v);

// Backward orbit of m for k_back steps, then the seed (default: first unstable base
// direction, zero fiber) pushed forward along it with renormalization.
// Throws NotDominated when ξ is undefined.
UnstableVector approximate_unstable_vector(const SkewProduct& f, const SkewPoint& m, int k_back,
                                           const Vec& seed = Vec());

// ---------------------------------------------------------------- curves and fields

enum class FieldMode { product, w_adapted };
enum class PieceClass { good, bad, almost_good };

std::string to_string(PieceClass c);
std::string to_string(FieldMode m);
FieldMode field_mode_from_string(const std::string& s);

// Curve on M parametrized by s = accumulated displacement of fiber coordinate
// block_offset(block). Points are lifted and continuous along the curve.
struct AdmissibleCurve {
    int block = 0;
    int orientation = 1;  // sign of P_i on the tangents
    std::vector<double> s;
    Mat points;    // (l + d) x n
    Mat tangents;  // d point / ds
    std::vector<double> arclength;  // cumulative chord length

    int size() const { return static_cast<int>(s.size()); }
    double displacement() const { return s.empty() ? 0.0 : s.back(); }
    double length() const { return arclength.empty() ? 0.0 : arclength.back(); }
    bool full(double tol = 1e-9) const { return std::abs(displacement() - kTwoPi) <= tol; }
    SkewPoint point(int k, int base_dim) const;  // reduced
    // Cubic Hermite interpolation in s.
    Vec position(double t) const;
    Vec velocity(double t) const;
};

struct FieldPiece {
    AdmissibleCurve curve;
    Mat field;                     // d x n, unit in the field norm
    std::vector<double> jacobian;  // J^u_{f^{-k}} at the samples
    int level = 0;
};

struct CurveOptions {
    int k_back = 40;
    int pre_iterates = 1;       // the curve is f^pre_iterates of a straight cone segment
    int samples = 257;
    double max_step = std::numeric_limits<double>::infinity();
    int samples_per_piece = 16;
    int max_refine = 4;
    int paths = 16;
    std::uint64_t seed = 1;
    double theta = 0.9;
    int holder_p = 3;
    int sigma = 2;
    FieldMode mode = FieldMode::product;
    double quadrature_tol = 1e-4;
    int grid_n = 4096;          // β, ζ grids when not supplied
    double beta = std::numeric_limits<double>::quiet_NaN();
    double zeta = std::numeric_limits<double>::quiet_NaN();
    bool record_pieces = false;
};

// Throws DegenerateInput when the unstable direction has no P_i component.
AdmissibleCurve grow_admissible_curve(const SkewProduct& f, const SkewPoint& start, int block,
                                      const CurveOptions& opt = {});
// Resample on n points equally spaced in s (Hermite interpolation).
AdmissibleCurve resample(const AdmissibleCurve& c, int n);

struct LengthBounds {
    double lower = 0.0, upper = 0.0;              // 2π × speed bounds from cone images
    double closed_lower = 0.0, closed_upper = 0.0;  // 2π λ_r/(K‖dφ|E^u‖), 2π λ_r/m(dφ|E^u)
    double delta_lower = 0.0, delta_upper = 0.0;  // measured slack against the closed form
    double K = 1.0;
    double ratio_lower = 0.0, ratio_upper = 0.0;  // admissible length ratios
};
LengthBounds admissible_length_bounds(const SkewProduct& f, int block);

struct CurveCertificate {
    double max_speed_error = 0.0;  // max | |P_i T| - 1 |
    double max_cone_ratio = 0.0;   // max ratio / ξ over tangents
    double length = 0.0;
    bool speed_ok = false, cone_ok = false, length_ok = false;
    bool pass = false;
};
CurveCertificate certify_curve(const SkewProduct& f, const AdmissibleCurve& c, const LengthBounds& bounds);

double field_norm(const SkewProduct& f, const Vec& v, FieldMode mode);

// Unit vector x (fiber dimension) repeated along the curve.
Mat constant_field(const SkewProduct& f, const AdmissibleCurve& c, const Vec& x, FieldMode mode);

struct HolderCertificate {
    double theta = 0.9;
    int p = 3;
    double c_x = 0.0;        // λ_r^{-θ(1 - 1/(2p))}
    double ratio = 0.0;      // max ‖X_m - X_m'‖ / d_γ^θ over pairs with d_γ ≤ |γ|/2
    double variation = 0.0;  // max ‖X_m - X_m'‖
    double variation_bound = 0.0;  // (2π λ_r^{1/(2p)} / m(dφ|E^u))^θ, curves of length 2π λ_r / m
    double variation_bound_literal = 0.0;  // same without the 2π
    bool certified = false;
};
HolderCertificate holder_certificate(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, double theta,
                                     int p, FieldMode mode);

// Cones Δ⁺ per block. product: only the curve's block is inspected.
PieceClass classify_field(const SkewProduct& f, const Mat& field, const std::vector<Cone>& cones, FieldMode mode,
                          int block);
std::vector<Cone> default_cones(const SkewProduct& f);
std::vector<CriticalRegion> default_critical_regions(const SkewProduct& f);

// (1/|γ|) ∫ log‖d_m f X_m‖ dγ, trapezoid on the arclength table.
double expansion_integral(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, FieldMode mode);
// Doubles the samples (Hermite points, interpolated field) until the change is below tol.
double expansion_integral_refined(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, FieldMode mode,
                                  double tol = 1e-4, int max_doublings = 12);
// I_1 .. I_n by pushing each sample's vector along its orbit.
std::vector<double> expansion_sequence(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, int n,
                                       FieldMode mode);

// ---------------------------------------------------------------- decomposition

struct PieceRow {
    int k = 0;
    long parent = 0;  // id of the piece this one was cut from
    long j = 0;       // index within the parent's image
    PieceClass cls = PieceClass::good;
    bool full = true;
    double min_j = 0.0, max_j = 0.0;
    double e_integral = 0.0;
    double length = 0.0;
};

struct LevelLedger {
    int k = 0;
    bool exhaustive = false;  // every piece of the level inspected
    long inspected = 0;
    double count = 0.0;       // estimated number of pieces
    double g = 0.0;           // Σ_good min J
    double b = 0.0;           // Σ_bad max J
    double p = 0.0;           // Σ_almost-good min J
    double b_min = 0.0;       // Σ_bad min J
    double partial_mass = 0.0;  // Σ_partial ∫J / |γ|
    double identity = 0.0;      // Σ_all ∫J dℓ / |γ|
    double identity_error = 0.0;
    double sum = 0.0;           // g + b + p
    double sum_lower = 0.0, sum_upper = 0.0;
    bool sum_ok = false;
    bool g_dominates_b = false;  // g ≥ σ b
    double distortion = 1.0;     // max over inspected pieces of max J / min J
    double positivity = 0.0;     // Σ_full min J · E
    double min_length = 0.0, max_length = 0.0;
    long admissibility_failures = 0;
    bool length_ratio_ok = false;
    double max_speed_error = 0.0, max_cone_ratio = 0.0;
    double holder_ratio = 0.0;
    long holder_failures = 0;
    double max_variation = 0.0;
    long good_bound_failures = 0;   // good pieces with E below the two-term bound
    double good_bound_margin = 0.0;
    long zeta_bound_failures = 0;   // pieces with E < log ζ
    // Shortest projection of K_r (every block off its critical region) and of its
    // complement, over the first few full pieces.
    double k_r = std::numeric_limits<double>::quiet_NaN();
    double l_r = std::numeric_limits<double>::quiet_NaN();
    // g_k ≥ (1 - 1e-5)(k_r/2π g_{k-1} + l_r/2π p_{k-1}) · recursion_factor, where the factor
    // min_length_{k-1} / (distortion_k · max_length_k) carries the measured length and
    // distortion slack; the literal form takes the factor as 1.
    double recursion_factor = 1.0;
    bool recursion_ok = true;
    bool recursion_literal_ok = true;
};

struct CurveLedger {
    int block = 0;
    double r = 0.0;
    double curve_length = 0.0;
    LengthBounds bounds;
    CurveCertificate curve_certificate;
    HolderCertificate start_field;
    double beta = 0.0, zeta = 0.0, crit_length = 0.0;
    double q = std::numeric_limits<double>::quiet_NaN();
    std::string q_diagnostic;
    double good_bound = 0.0;  // 0.9(2π - l)/(2π) log β + l/(2π) log ζ
    std::vector<LevelLedger> levels;
    std::vector<PieceRow> rows;
    bool distortion_monotone = true;
};

struct Decomposition {
    int k = 0;
    bool exhaustive = false;
    double count = 0.0;
    std::vector<FieldPiece> pieces;  // every piece cut from the inspected parents
};

// Pieces of f^k∘γ cut at every accumulated 2π of P_i displacement. Level 1 is
// exhaustive; deeper levels cut the parents met by opt.paths sampled points.
Decomposition decompose_image(const SkewProduct& f, const AdmissibleCurve& c, int k, const CurveOptions& opt = {});

struct PushResult {
    Decomposition decomposition;
    std::vector<HolderCertificate> certificates;  // full pieces only, same order
    bool all_certified = false;
};
PushResult push_adapted_field(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, int k,
                              const CurveOptions& opt = {});

CurveLedger ledger_sums(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, int k_max,
                        const CurveOptions& opt = {});

// Max J ratio within pieces, per level 0..k_max.
std::vector<double> distortion_constant(const SkewProduct& f, const AdmissibleCurve& c, int k_max,
                                        const CurveOptions& opt = {});

}  // namespace skewlab
