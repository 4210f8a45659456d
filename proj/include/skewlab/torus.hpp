#pragma once

#include "skewlab/common.hpp"

#include <optional>

namespace skewlab {

// Point of T^n, circumference 2π per coordinate.
class TorusVector {
public:
    TorusVector() = default;
    explicit TorusVector(const Vec& raw);

    Eigen::Index size() const { return coords_.size(); }
    double operator[](Eigen::Index i) const { return coords_[i]; }
    const Vec& coords() const { return coords_; }

    TorusVector operator+(const TorusVector& o) const;
    TorusVector operator-(const TorusVector& o) const;

private:
    Vec coords_;
};

// Componentwise reduction into [0, 2π). Rejects non-finite entries.
TorusVector reduce_mod_torus(const Vec& v);

struct Splitting {
    Mat unstable_basis;  // l x k_u, orthonormal columns
    Mat stable_basis;    // l x k_s, orthonormal columns
    double unstable_rate = 0.0;  // m(A|E^u)
    double stable_rate = 0.0;    // ‖A|E^s‖
    Mat unstable_restriction;    // A|E^u in the unstable basis
    Mat stable_restriction;      // A|E^s in the stable basis
    Eigen::VectorXcd eigenvalues;
    double invariance_residual = 0.0;  // max ‖(I - QQᵀ) A Q‖ over both subspaces
};

struct ConformalityVerdict {
    bool conformal = false;
    double margin = 0.0;  // ‖A|E‖ - m(A|E)
};

class ToralAutomorphism {
public:
    explicit ToralAutomorphism(IntMat entries, double unit_circle_tol = 1e-9);

    Eigen::Index dim() const { return entries_.rows(); }
    const IntMat& entries() const { return entries_; }
    const IntMat& inverse_entries() const { return inverse_; }
    ToralAutomorphism inverse() const;

    bool is_hyperbolic() const { return splitting_.has_value(); }
    // Throws NotHyperbolic when a unit-modulus eigenvalue was found.
    const Splitting& splitting() const;
    double lambda() const { return splitting().unstable_rate; }
    double tau() const { return splitting().stable_rate; }

    ConformalityVerdict conformal_u(double tol = 1e-9) const;
    ConformalityVerdict conformal_s(double tol = 1e-9) const;

private:
    IntMat entries_;
    IntMat inverse_;
    std::optional<Splitting> splitting_;
    std::string hyperbolic_failure_;
};

Splitting hyperbolic_splitting(const ToralAutomorphism& a);
ConformalityVerdict is_u_conformal(const ToralAutomorphism& a, double tol);

// A applied k times with reduction after every application.
TorusVector apply_iterated(const ToralAutomorphism& a, int k, const TorusVector& x);
// Same on raw storage; output reduced.
void apply_iterated_inplace(const IntMat& a, int k, Vec& x);

// The cat map [[2,1],[1,1]] and the 4x4 block matrix [[A, I], [0, A]].
IntMat cat_matrix();
IntMat jordan_cat_matrix();

}  // namespace skewlab
