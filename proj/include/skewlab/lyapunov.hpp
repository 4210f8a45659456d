#pragma once

#include "skewlab/skew.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace skewlab {

enum class CocycleMode { deterministic_skew, iid_kick, markov_shift, expanding_base };

std::string to_string(CocycleMode m);
CocycleMode cocycle_mode_from_string(const std::string& s);

// How the fiber is driven. Kicks enter through `projection` (d x l): each step draws a
// base angle vector u ∈ T^l and adds Π u to the fiber point after applying S.
struct CocycleDriver {
    CocycleMode mode = CocycleMode::iid_kick;
    IntMat projection;  // empty: one angle added to coordinate 0 of every block
    IntMat transition;  // markov-shift: 0-1 matrix C
    int multiplier = 2; // expanding-base: k
    double r = 0.0;     // expanding-base: θ advances by E_{k^{⌊2r⌋}}, kick reads E_{k^{⌊r⌋}}(θ)
};

struct LyapunovOptions {
    long n = 1000000;
    long burn_in = 1000;
    int qr_period = 1;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    int threads = 0;  // 0: hardware concurrency
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<double> exponents;  // descending
    bool diverged = false;
};

struct BoundComparison {
    std::string name;
    double bound = 0.0;
    int exponent_index = 0;
    double observed = 0.0;  // minimum over seeds of that exponent
    bool pass = false;
};

struct LyapunovReport {
    std::string system;
    std::string mode;
    std::string rng = "philox4x32-10";
    std::vector<double> exponents;       // mean over seeds, descending
    std::vector<double> spread;          // max - min over seeds
    std::vector<double> standard_error;  // sample deviation / sqrt(#seeds)
    std::vector<SeedRun> runs;
    long n_steps = 0;
    long burn_in = 0;
    int qr_period = 1;
    std::vector<std::uint64_t> seeds;
    bool conservative = true;
    double sum_check = 0.0;             // |Σ exponents| of the mean spectrum
    std::vector<double> base_exponents; // exact exponents of the driving base when known
    bool diverged = false;
    std::vector<BoundComparison> bound_comparisons;
};

// Cocycle of a bare integer matrix (orbit independent).
LyapunovReport lyapunov_spectrum(const ToralAutomorphism& a, const LyapunovOptions& opt);
// Full skew derivative along a deterministic (pseudo-)orbit.
LyapunovReport lyapunov_spectrum(const SkewProduct& f, const LyapunovOptions& opt);
// Fiber block dS along the deterministic orbit of f.
LyapunovReport fiber_exponents(const SkewProduct& f, const LyapunovOptions& opt);
// Fiber cocycle driven per `driver`; deterministic_skew means the standalone fiber map.
LyapunovReport lyapunov_spectrum(const FiberMapPtr& s, const CocycleDriver& driver, const LyapunovOptions& opt);
// t_r: base θ under E_{k^{⌊2r⌋}}, fiber s_r plus (E_{k^{⌊r⌋}}(θ), 0).
LyapunovReport expanding_base_cocycle(int k, double r, const LyapunovOptions& opt);

// Concatenates runs (sorted by seed) and recomputes statistics.
LyapunovReport merge_reports(const LyapunovReport& a, const LyapunovReport& b);

struct ParryMeasure {
    double perron_root = 0.0;
    Vec weights;      // stationary distribution
    Mat transitions;  // P_ij = C_ij v_j / (λ v_i)
};

// Rejects non 0-1 or non-primitive matrices.
ParryMeasure parry_measure(const IntMat& c);

struct NamedBound {
    std::string name;
    double value = 0.0;
    int exponent_index = 0;  // the bound applies to the (index+1)-th largest exponent
};

// Attaches pass/fail per bound (every seed must exceed it); exponents untouched.
LyapunovReport compare_bounds(LyapunovReport report, const std::vector<NamedBound>& bounds);

}  // namespace skewlab
