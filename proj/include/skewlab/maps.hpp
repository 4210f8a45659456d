#pragma once

#include "skewlab/common.hpp"
#include "skewlab/torus.hpp"

#include <functional>
#include <memory>
#include <mutex>
#include <vector>

namespace skewlab {

// Sup-norm data of a fiber map. Analytic fields are upper bounds; *_grid fields
// are grid estimates of the same suprema (NaN when not available).
struct NormBounds {
    double d = 0.0;
    double d_inv = 0.0;
    double d2 = 0.0;
    double d2_inv = 0.0;
    double d_grid = 0.0;
    double d_inv_grid = 0.0;
    double d2_grid = 0.0;
    int grid_resolution = 0;
};

class FiberMap {
public:
    FiberMap(int dim, std::vector<int> block_sizes, std::vector<std::vector<int>> depends_on);
    virtual ~FiberMap() = default;
    FiberMap(const FiberMap&) = delete;
    FiberMap& operator=(const FiberMap&) = delete;

    virtual std::string name() const = 0;

    int dimension() const { return dim_; }
    int block_count() const { return static_cast<int>(blocks_.size()); }
    const std::vector<int>& block_sizes() const { return blocks_; }
    int block_offset(int i) const { return offsets_.at(i); }
    // Input coordinates the Jacobian of output block i depends on.
    const std::vector<std::vector<int>>& depends_on() const { return depends_on_; }

    // Unreduced value; continuous in unreduced input.
    virtual void eval_raw(const Vec& y, Vec& out) const = 0;
    virtual void jacobian_into(const Vec& y, Mat& out) const = 0;

    virtual bool has_inverse() const { return false; }
    virtual void inverse_raw(const Vec& y, Vec& out) const;
    // Jacobian of the inverse map at y.
    virtual void inverse_jacobian_into(const Vec& y, Mat& out) const;

    TorusVector eval(const TorusVector& y) const;
    Vec eval(const Vec& y) const;
    TorusVector inverse(const TorusVector& y) const;
    Vec inverse(const Vec& y) const;
    Mat jacobian(const Vec& y) const;
    Mat inverse_jacobian(const Vec& y) const;

    const NormBounds& norm_bounds() const;

protected:
    virtual NormBounds analytic_bounds() const = 0;

private:
    int dim_;
    std::vector<int> blocks_;
    std::vector<int> offsets_;
    std::vector<std::vector<int>> depends_on_;
    mutable std::once_flag bounds_once_;
    mutable NormBounds bounds_;
};

using FiberMapPtr = std::shared_ptr<const FiberMap>;

// (x, y) -> (2x - y + k sin x, x) with k = ⌊r⌋.
class StandardMap final : public FiberMap {
public:
    explicit StandardMap(double r);
    std::string name() const override { return "standard"; }
    double r() const { return r_; }
    double kick() const { return k_; }
    void eval_raw(const Vec& y, Vec& out) const override;
    void jacobian_into(const Vec& y, Mat& out) const override;
    bool has_inverse() const override { return true; }
    void inverse_raw(const Vec& y, Vec& out) const override;
    void inverse_jacobian_into(const Vec& y, Mat& out) const override;

protected:
    NormBounds analytic_bounds() const override;

private:
    double r_;
    double k_;
};

// Factor maps of the coupled families (unreduced).
Vec coupled_J(double kick, const Vec& v);
Vec coupled_R(const Vec& v);
Vec coupled_T(double tau, const Vec& v);
Vec coupled_E(const Vec& v);
Vec coupled_E_inverse(const Vec& v);

// p = T_τ ∘ R ∘ J_r on T^4, blocks (2, 2).
class CoupledP final : public FiberMap {
public:
    CoupledP(double r, double tau);
    std::string name() const override { return "coupled_p"; }
    double r() const { return r_; }
    double tau() const { return tau_; }
    double kick() const { return k_; }
    void eval_raw(const Vec& y, Vec& out) const override;
    void jacobian_into(const Vec& y, Mat& out) const override;
    bool has_inverse() const override { return true; }
    void inverse_raw(const Vec& y, Vec& out) const override;
    void inverse_jacobian_into(const Vec& y, Mat& out) const override;

protected:
    NormBounds analytic_bounds() const override;

private:
    double r_, tau_, k_;
};

// q = E ∘ R ∘ J on T^4: (s(x,y), s(z,w) + (x,0)).
class CoupledQ final : public FiberMap {
public:
    explicit CoupledQ(double r);
    std::string name() const override { return "coupled_q"; }
    double r() const { return r_; }
    double kick() const { return k_; }
    void eval_raw(const Vec& y, Vec& out) const override;
    void jacobian_into(const Vec& y, Mat& out) const override;
    bool has_inverse() const override { return true; }
    void inverse_raw(const Vec& y, Vec& out) const override;
    void inverse_jacobian_into(const Vec& y, Mat& out) const override;

protected:
    NormBounds analytic_bounds() const override;

private:
    double r_, k_;
};

// Periodic potential on T^n supplying value, gradient and Hessian.
class Potential {
public:
    virtual ~Potential() = default;
    virtual int dim() const = 0;
    virtual double value(const Vec& q) const = 0;
    virtual Vec gradient(const Vec& q) const = 0;
    // Default: central differences of the gradient.
    virtual Mat hessian(const Vec& q) const;
    // Sup bounds of ‖Hess V‖ and of the third derivative; NaN when unknown.
    virtual double hessian_bound() const;
    virtual double third_derivative_bound() const;
    // Coordinates each gradient component depends on (default: all).
    virtual std::vector<std::vector<int>> gradient_dependencies() const;
};

using PotentialPtr = std::shared_ptr<const Potential>;

// τ1 cos x + τ2 cos y + τ3 cos(x + y).
class FroeschlePotential final : public Potential {
public:
    FroeschlePotential(double tau1, double tau2, double tau3);
    int dim() const override { return 2; }
    double value(const Vec& q) const override;
    Vec gradient(const Vec& q) const override;
    Mat hessian(const Vec& q) const override;
    double hessian_bound() const override;
    double third_derivative_bound() const override;
    std::vector<std::vector<int>> gradient_dependencies() const override;

private:
    double t1_, t2_, t3_;
};

// Σ_i a_i cos q_i; with one coordinate this is the standard-map potential.
class CosinePotential final : public Potential {
public:
    explicit CosinePotential(std::vector<double> amplitudes);
    int dim() const override { return static_cast<int>(a_.size()); }
    double value(const Vec& q) const override;
    Vec gradient(const Vec& q) const override;
    Mat hessian(const Vec& q) const override;
    double hessian_bound() const override;
    double third_derivative_bound() const override;
    std::vector<std::vector<int>> gradient_dependencies() const override;

private:
    std::vector<double> a_;
};

// User-supplied potential; the Hessian falls back to differences when absent.
class CustomPotential final : public Potential {
public:
    using ValueFn = std::function<double(const Vec&)>;
    using GradFn = std::function<Vec(const Vec&)>;
    using HessFn = std::function<Mat(const Vec&)>;
    CustomPotential(int dim, ValueFn value, GradFn gradient, HessFn hessian = nullptr);
    int dim() const override { return dim_; }
    double value(const Vec& q) const override { return value_(q); }
    Vec gradient(const Vec& q) const override { return grad_(q); }
    Mat hessian(const Vec& q) const override;

private:
    int dim_;
    ValueFn value_;
    GradFn grad_;
    HessFn hess_;
};

// S_V(q, p) = (2q - p + ∇V(q), q), coordinates interleaved (q1, p1, q2, p2, ...)
// so that each (q_i, p_i) pair is one block.
class TwistMap final : public FiberMap {
public:
    TwistMap(PotentialPtr v, std::string label = "twist");
    std::string name() const override { return label_; }
    const Potential& potential() const { return *v_; }
    void eval_raw(const Vec& y, Vec& out) const override;
    void jacobian_into(const Vec& y, Mat& out) const override;
    bool has_inverse() const override { return true; }
    void inverse_raw(const Vec& y, Vec& out) const override;

protected:
    NormBounds analytic_bounds() const override;

private:
    PotentialPtr v_;
    std::string label_;
    int n_;
};

// Linear torus map y -> M y (integer M, unimodular).
class LinearFiberMap final : public FiberMap {
public:
    LinearFiberMap(IntMat m, std::vector<int> block_sizes);
    std::string name() const override { return "linear"; }
    const IntMat& matrix() const { return m_; }
    void eval_raw(const Vec& y, Vec& out) const override;
    void jacobian_into(const Vec& y, Mat& out) const override;
    bool has_inverse() const override { return true; }
    void inverse_raw(const Vec& y, Vec& out) const override;
    void inverse_jacobian_into(const Vec& y, Mat& out) const override;

protected:
    NormBounds analytic_bounds() const override;

private:
    IntMat m_, inv_;
    Mat mr_, invr_;
};

FiberMapPtr standard_map(double r);
FiberMapPtr coupled_p(double r, double tau);
FiberMapPtr coupled_q(double r);
FiberMapPtr froeschle(double tau1, double tau2, double tau3);
FiberMapPtr generic_twist(PotentialPtr v);
FiberMapPtr linear_fiber(const IntMat& m, std::vector<int> block_sizes);
FiberMapPtr identity_fiber(int dim, std::vector<int> block_sizes);

// Max relative deviation between the analytic Jacobian and central differences.
double jacobian_fd_error(const FiberMap& s, const Vec& y, double h = 1e-5);

}  // namespace skewlab
