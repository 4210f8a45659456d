#pragma once

#include "skewlab/common.hpp"
#include "skewlab/maps.hpp"

#include <vector>

namespace skewlab {

// C_E(α) = {e + f : ‖f‖ < α‖e‖} ∪ {0} for a splitting R^n = E ⊕ F.
class Cone {
public:
    Cone(Mat axis_basis, Mat complement_basis, double aperture);

    const Mat& axis_basis() const { return axis_; }
    const Mat& complement_basis() const { return comp_; }
    double aperture() const { return alpha_; }
    int axis_dimension() const { return static_cast<int>(axis_.cols()); }
    int ambient_dimension() const { return static_cast<int>(axis_.rows()); }

    // Oblique decomposition v = e + f; returns (‖e‖, ‖f‖).
    std::pair<double, double> split_norms(const Vec& v) const;
    // (α‖e‖ - ‖f‖) / ‖v‖; positive strictly inside, zero on the boundary.
    double slack(const Vec& v) const;
    // The complementary cone C_F(1/α).
    Cone complement() const;

private:
    Mat axis_, comp_;
    double alpha_;
    Mat coords_;  // inverse of [axis | complement]
};

bool cone_contains(const Cone& c, const Vec& v, bool closed = false);

// Axis e_k in R^n, complement the remaining coordinate axes.
Cone coordinate_cone(int n, int axis_index, double aperture);

// Δ_r = {(1, n) : |n| ≤ r^{1/4}} in R^2.
Cone delta_cone(double r);

struct ConeImageResult {
    bool contained = false;
    double margin = 0.0;   // min target slack over the examined rays
    int rays_examined = 0;
    std::vector<Vec> rays;    // source rays examined
    std::vector<Vec> images;  // M applied to them
};

// Whether M·C̄(source) ⊆ target (closed target when `closed`). Two dimensions are
// decided from the boundary rays; higher dimensions use quasi-uniform sampling of
// the source cone with local refinement around the worst ray.
ConeImageResult cone_image(const Mat& m, const Cone& source, const Cone& target, bool closed = true,
                           int samples = 1000);

// m(M | C) = inf over unit v in the closed cone of ‖M v‖. Exact for 2-D cones.
double cone_min_norm(const Mat& m, const Cone& c, int samples = 1000);

struct Band {
    double a = 0.0;
    double b = 0.0;
    double length() const { return b - a; }
};

// Union of bands [a,b] x T^{s_i - 1} in the designated coordinate of block i.
class CriticalRegion {
public:
    CriticalRegion() = default;
    CriticalRegion(int block_index, int coordinate_index, std::vector<Band> bands);

    int block_index() const { return block_; }
    int coordinate_index() const { return coord_; }
    // Normalized: inside [0, 2π], disjoint, sorted; wrapping bands are split.
    const std::vector<Band>& bands() const { return bands_; }
    double total_length() const;
    bool contains(double x) const;
    // Whether the fiber point y lies in the region (uses the block's offset).
    bool contains_point(const FiberMap& s, const Vec& y) const;
    // Complement in [0, 2π) as bands.
    std::vector<Band> complement() const;
    // Region with every band widened by `pad` on each side.
    CriticalRegion widened(double pad) const;

private:
    int block_ = 0;
    int coord_ = 0;
    std::vector<Band> bands_;
};

// Bands of |cos x| ≤ 1/√r: [b1, b2] and [b3, b4] with cos b1 = cos b4 = 1/√r.
CriticalRegion standard_critical_region(double r, int block_index = 0);

// Deterministic quasi-uniform unit vectors in R^n (Fibonacci lattice for n = 3).
std::vector<Vec> sphere_directions(int n, int count);

}  // namespace skewlab
