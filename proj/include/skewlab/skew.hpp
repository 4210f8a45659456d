#pragma once

#include "skewlab/maps.hpp"
#include "skewlab/torus.hpp"

#include <functional>

namespace skewlab {

// Point of M = T^l x T^d.
struct SkewPoint {
    Vec base;
    Vec fiber;
};

// f(x, y) = (A^L x, S(y) + Π A^K x) with Π an integer d x l selection matrix.
class SkewProduct {
public:
    SkewProduct(ToralAutomorphism base, int base_iterates, int kick_iterates, IntMat projection, FiberMapPtr fiber,
                double r);

    const ToralAutomorphism& base() const { return base_; }
    int base_iterates() const { return L_; }
    int kick_iterates() const { return K_; }
    const IntMat& projection() const { return proj_; }
    const FiberMap& fiber() const { return *fiber_; }
    const FiberMapPtr& fiber_ptr() const { return fiber_; }
    double r() const { return r_; }
    int base_dim() const { return static_cast<int>(base_.dim()); }
    int fiber_dim() const { return fiber_->dimension(); }
    int dim() const { return base_dim() + fiber_dim(); }

    // φ(x) reduced mod 2π.
    Vec kick(const Vec& x) const;
    SkewPoint eval(const SkewPoint& m) const;
    // Fibered inverse (A^{-L} x, S^{-1}(y - φ(A^{-L} x))).
    SkewPoint inverse(const SkewPoint& m) const;
    // In-place variant of eval used by orbit loops; outputs reduced.
    void step(Vec& x, Vec& y, Vec& scratch_base, Vec& scratch_fiber) const;

    // Full derivative [[A^L, 0], [Π A^K, dS(y)]].
    Mat derivative(const SkewPoint& m) const;
    // dφ = Π A^K as a real matrix.
    const Mat& kick_derivative() const { return dphi_; }

    // P_i: R^d -> R^{s_i}, v -> (v_{off_i + c}, 0, ..., 0).
    Mat block_projection(int block, int coordinate_index = 0) const;

    // Restrictions through the base splitting (stable under large powers).
    Mat kick_on_unstable() const;  // dφ|E^u as a d x k_u matrix in the unstable basis
    Mat kick_on_stable() const;    // dφ|E^s as a d x k_s matrix in the stable basis
    Mat base_on_unstable() const;  // A^L|E^u in the unstable basis
    Mat base_on_stable() const;    // A^L|E^s in the stable basis
    double lambda_r() const;       // m(A^L|E^u)
    double tau_r() const;          // ‖A^L|E^s‖

    // Tangent push (vb, vf) -> d_m f (vb, vf); vectors are overwritten.
    void push_tangent(const SkewPoint& m, Vec& vb, Vec& vf) const;

private:
    ToralAutomorphism base_;
    int L_, K_;
    IntMat proj_;
    FiberMapPtr fiber_;
    double r_;
    Mat dphi_;
};

SkewProduct build_skew(const ToralAutomorphism& base, int base_iterates, int kick_iterates, const IntMat& projection,
                       FiberMapPtr fiber, double r);

// Π with a one in row off_i + coordinate_index, column 0 for every block i; the
// kick adds the first base coordinate to the designated coordinate of each block.
IntMat first_coordinate_projection(int base_dim, const FiberMap& fiber, int coordinate_index = 0);

// ---------------------------------------------------------------- reversibility

SkewPoint gamma_tau(double tau, const SkewPoint& m);          // (m, T_τ ∘ R (v))
SkewPoint gamma_tau_inverse(double tau, const SkewPoint& m);  // (m, R ∘ T_{-τ} (v))
SkewPoint gamma_hat(const SkewPoint& m);                      // (m, R(v)), an involution

// (T_τ R)^{-1} ∘ p^{-1} ∘ (T_τ R) in closed form.
Vec p_hat(double r, double tau, const Vec& v);
// R ∘ q^{-1} ∘ R in closed form (equals q).
Vec q_hat(double r, const Vec& v);
// Γ_τ^{-1} ∘ g^{-1} ∘ Γ_τ in closed form for a skew product with p_{r,τ} fiber.
SkewPoint g_hat(const SkewProduct& g, const SkewPoint& m);
// Γ̂ ∘ h^{-1} ∘ Γ̂ in closed form for a skew product with q_r fiber.
SkewPoint h_hat(const SkewProduct& h, const SkewPoint& m);

enum class ConjugacyFamily { p, q, g, h };

struct Conjugacy {
    std::function<SkewPoint(const SkewPoint&)> gamma;
    std::function<SkewPoint(const SkewPoint&)> gamma_inverse;
    // The closed-form conjugated map Γ^{-1} ∘ F^{-1} ∘ Γ.
    std::function<SkewPoint(const SkewPoint&)> conjugated;
    // F^{-1} itself, for checking the identity.
    std::function<SkewPoint(const SkewPoint&)> map_inverse;
};

// For p and q only the fiber part of SkewPoint is used and the base is carried
// through unchanged; g and h read r and τ from the skew product's fiber.
Conjugacy reversibility_conjugacies(ConjugacyFamily family, double r, double tau);
Conjugacy reversibility_conjugacies(ConjugacyFamily family, const SkewProduct& skew);

// Max circular distance between two skew points.
double skew_distance(const SkewPoint& a, const SkewPoint& b);

}  // namespace skewlab
