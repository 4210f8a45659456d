#include "skewlab/maps.hpp"

#include "skewlab/linalg.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace skewlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> offsets_of(const std::vector<int>& blocks) {
    std::vector<int> off(blocks.size());
    int acc = 0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        off[i] = acc;
        acc += blocks[i];
    }
    return off;
}

std::vector<int> union_of(const std::vector<std::vector<int>>& deps) {
    std::vector<int> all;
    for (const auto& d : deps)
        for (int c : d)
            if (std::find(all.begin(), all.end(), c) == all.end()) all.push_back(c);
    std::sort(all.begin(), all.end());
    return all;
}

}  // namespace

FiberMap::FiberMap(int dim, std::vector<int> block_sizes, std::vector<std::vector<int>> depends_on)
    : dim_(dim), blocks_(std::move(block_sizes)), depends_on_(std::move(depends_on)) {
    if (dim_ <= 0) throw std::invalid_argument("fiber dimension must be positive");
    if (std::accumulate(blocks_.begin(), blocks_.end(), 0) != dim_)
        throw std::invalid_argument("block sizes must sum to the fiber dimension");
    for (int s : blocks_)
        if (s < 2) throw std::invalid_argument("each block must have size at least 2");
    if (depends_on_.size() != blocks_.size())
        throw std::invalid_argument("depends_on needs one entry per block");
    offsets_ = offsets_of(blocks_);
}

void FiberMap::inverse_raw(const Vec&, Vec&) const {
    throw std::logic_error(name() + ": inverse not available");
}

void FiberMap::inverse_jacobian_into(const Vec& y, Mat& out) const {
    Vec pre(dim_);
    inverse_raw(y, pre);
    Mat j(dim_, dim_);
    jacobian_into(pre, j);
    out = j.inverse();
}

TorusVector FiberMap::eval(const TorusVector& y) const { return TorusVector(eval(y.coords())); }

Vec FiberMap::eval(const Vec& y) const {
    if (y.size() != dim_) throw std::invalid_argument(name() + ": dimension mismatch");
    Vec out(dim_);
    eval_raw(y, out);
    wrap_in_place(out);
    return out;
}

TorusVector FiberMap::inverse(const TorusVector& y) const { return TorusVector(inverse(y.coords())); }

Vec FiberMap::inverse(const Vec& y) const {
    if (y.size() != dim_) throw std::invalid_argument(name() + ": dimension mismatch");
    Vec out(dim_);
    inverse_raw(y, out);
    wrap_in_place(out);
    return out;
}

Mat FiberMap::jacobian(const Vec& y) const {
    Mat out(dim_, dim_);
    jacobian_into(y, out);
    return out;
}

Mat FiberMap::inverse_jacobian(const Vec& y) const {
    Mat out(dim_, dim_);
    inverse_jacobian_into(y, out);
    return out;
}

namespace {

// sup over unit u, v of |Σ_c u_c D_c v| by alternating maximization from each axis.
double bilinear_norm(const std::vector<Mat>& d) {
    const int n = static_cast<int>(d.size());
    if (n == 0) return 0.0;
    double best = 0.0;
    for (int start = 0; start < n; ++start) {
        Vec u = Vec::Zero(n);
        u[start] = 1.0;
        double val = 0.0;
        for (int it = 0; it < 30; ++it) {
            Mat m = Mat::Zero(d[0].rows(), d[0].cols());
            for (int c = 0; c < n; ++c) m += u[c] * d[c];
            Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
            val = svd.singularValues()[0];
            const Vec w = svd.matrixU().col(0), v = svd.matrixV().col(0);
            Vec nu(n);
            for (int c = 0; c < n; ++c) nu[c] = w.dot(d[c] * v);
            const double nn = nu.norm();
            if (nn == 0.0) break;
            u = nu / nn;
        }
        best = std::max(best, val);
    }
    return best;
}

}  // namespace

const NormBounds& FiberMap::norm_bounds() const {
    std::call_once(bounds_once_, [this] {
        NormBounds b = analytic_bounds();
        // Grid over the coordinates the Jacobian depends on; other coordinates fixed at 0.
        const std::vector<int> coords = union_of(depends_on_);
        const int dims = static_cast<int>(coords.size());
        int per_axis = dims <= 1 ? 4096 : (dims == 2 ? 128 : (dims == 3 ? 24 : 10));
        long long total = 1;
        for (int i = 0; i < dims; ++i) total *= per_axis;
        Vec y = Vec::Zero(dim_);
        Mat j(dim_, dim_), jp(dim_, dim_), jm(dim_, dim_);
        const double h = 1e-5;
        double dmax = 0.0, dinv = 0.0, d2 = 0.0;
        for (long long idx = 0; idx < total; ++idx) {
            long long rem = idx;
            for (int c = 0; c < dims; ++c) {
                y[coords[c]] = kTwoPi * static_cast<double>(rem % per_axis) / per_axis;
                rem /= per_axis;
            }
            jacobian_into(y, j);
            Vec s = singular_values(j);
            dmax = std::max(dmax, s[0]);
            dinv = std::max(dinv, 1.0 / s[s.size() - 1]);
            std::vector<Mat> partials;
            partials.reserve(coords.size());
            for (int c : coords) {
                Vec yp = y, ym = y;
                yp[c] += h;
                ym[c] -= h;
                jacobian_into(yp, jp);
                jacobian_into(ym, jm);
                partials.push_back((jp - jm) / (2.0 * h));
            }
            d2 = std::max(d2, bilinear_norm(partials));
        }
        b.d_grid = dmax;
        b.d_inv_grid = dinv;
        b.d2_grid = d2;
        b.grid_resolution = per_axis;
        bounds_ = b;
    });
    return bounds_;
}

// ---------------------------------------------------------------- standard map

StandardMap::StandardMap(double r) : FiberMap(2, {2}, {{0}}), r_(r), k_(std::floor(r)) {
    if (!(r >= 0.0)) throw std::invalid_argument("standard map needs r >= 0");
}

void StandardMap::eval_raw(const Vec& y, Vec& out) const {
    const double x = y[0];
    out[0] = 2.0 * x - y[1] + k_ * std::sin(x);
    out[1] = x;
}

void StandardMap::jacobian_into(const Vec& y, Mat& out) const {
    out(0, 0) = 2.0 + k_ * std::cos(y[0]);
    out(0, 1) = -1.0;
    out(1, 0) = 1.0;
    out(1, 1) = 0.0;
}

void StandardMap::inverse_raw(const Vec& y, Vec& out) const {
    const double x = y[1];
    out[0] = x;
    out[1] = 2.0 * x - y[0] + k_ * std::sin(x);
}

void StandardMap::inverse_jacobian_into(const Vec& y, Mat& out) const {
    out(0, 0) = 0.0;
    out(0, 1) = 1.0;
    out(1, 0) = -1.0;
    out(1, 1) = 2.0 + k_ * std::cos(y[1]);
}

NormBounds StandardMap::analytic_bounds() const {
    NormBounds b;
    b.d = k_ + 3.0;
    b.d_inv = k_ + 3.0;
    b.d2 = k_;
    b.d2_inv = k_;
    return b;
}

// ---------------------------------------------------------------- coupled maps

Vec coupled_J(double kick, const Vec& v) {
    Vec o(4);
    o << v[0], 2.0 * v[0] - v[1] + kick * std::sin(v[0]), v[2], 2.0 * v[2] - v[3] + kick * std::sin(v[2]);
    return o;
}

Vec coupled_R(const Vec& v) {
    Vec o(4);
    o << v[1], v[0], v[3], v[2];
    return o;
}

Vec coupled_T(double tau, const Vec& v) {
    Vec o = v;
    const double s = tau * std::sin(v[1] + v[3]);
    o[0] += s;
    o[2] += s;
    return o;
}

// Translation of the third coordinate by the second one: with this choice
// E ∘ R ∘ J reproduces (s(x,y), s(z,w) + (x, 0)).
Vec coupled_E(const Vec& v) {
    Vec o = v;
    o[2] += v[1];
    return o;
}

Vec coupled_E_inverse(const Vec& v) {
    Vec o = v;
    o[2] -= v[1];
    return o;
}

CoupledP::CoupledP(double r, double tau)
    : FiberMap(4, {2, 2}, {{0, 2}, {0, 2}}), r_(r), tau_(tau), k_(std::floor(r)) {
    if (!(r >= 0.0)) throw std::invalid_argument("coupled_p needs r >= 0");
    if (!(tau > -1.0 && tau < 1.0)) throw std::invalid_argument("coupled_p needs |tau| < 1");
}

void CoupledP::eval_raw(const Vec& v, Vec& out) const {
    const double x = v[0], y = v[1], z = v[2], w = v[3];
    const double c = tau_ * std::sin(x + z);
    out[0] = 2.0 * x - y + k_ * std::sin(x) + c;
    out[1] = x;
    out[2] = 2.0 * z - w + k_ * std::sin(z) + c;
    out[3] = z;
}

void CoupledP::jacobian_into(const Vec& v, Mat& out) const {
    const double x = v[0], z = v[2];
    const double c = tau_ * std::cos(x + z);
    out.setZero();
    out(0, 0) = 2.0 + k_ * std::cos(x) + c;
    out(0, 1) = -1.0;
    out(0, 2) = c;
    out(1, 0) = 1.0;
    out(2, 0) = c;
    out(2, 2) = 2.0 + k_ * std::cos(z) + c;
    out(2, 3) = -1.0;
    out(3, 2) = 1.0;
}

void CoupledP::inverse_raw(const Vec& v, Vec& out) const {
    out = coupled_J(k_, coupled_R(coupled_T(-tau_, v)));
}

void CoupledP::inverse_jacobian_into(const Vec& v, Mat& out) const {
    // d(J ∘ R ∘ T_{-τ}) by the chain rule.
    Mat dt = Mat::Identity(4, 4);
    const double c = -tau_ * std::cos(v[1] + v[3]);
    dt(0, 1) += c;
    dt(0, 3) += c;
    dt(2, 1) += c;
    dt(2, 3) += c;
    Mat r = Mat::Zero(4, 4);
    r(0, 1) = r(1, 0) = r(2, 3) = r(3, 2) = 1.0;
    const Vec a = coupled_R(coupled_T(-tau_, v));
    Mat dj = Mat::Zero(4, 4);
    dj(0, 0) = 1.0;
    dj(1, 0) = 2.0 + k_ * std::cos(a[0]);
    dj(1, 1) = -1.0;
    dj(2, 2) = 1.0;
    dj(3, 2) = 2.0 + k_ * std::cos(a[2]);
    dj(3, 3) = -1.0;
    out = dj * r * dt;
}

NormBounds CoupledP::analytic_bounds() const {
    const double t = std::abs(tau_);
    NormBounds b;
    b.d = k_ + 3.0 + 2.0 * t;
    b.d_inv = (k_ + 3.0) * (1.0 + 2.0 * t);
    b.d2 = k_ + 4.0 * t;
    b.d2_inv = k_ * (1.0 + 2.0 * t) * (1.0 + 2.0 * t) + (k_ + 3.0) * 4.0 * t;
    return b;
}

CoupledQ::CoupledQ(double r) : FiberMap(4, {2, 2}, {{0}, {2}}), r_(r), k_(std::floor(r)) {
    if (!(r >= 0.0)) throw std::invalid_argument("coupled_q needs r >= 0");
}

void CoupledQ::eval_raw(const Vec& v, Vec& out) const {
    const double x = v[0], y = v[1], z = v[2], w = v[3];
    out[0] = 2.0 * x - y + k_ * std::sin(x);
    out[1] = x;
    out[2] = 2.0 * z - w + k_ * std::sin(z) + x;
    out[3] = z;
}

void CoupledQ::jacobian_into(const Vec& v, Mat& out) const {
    out.setZero();
    out(0, 0) = 2.0 + k_ * std::cos(v[0]);
    out(0, 1) = -1.0;
    out(1, 0) = 1.0;
    out(2, 0) = 1.0;
    out(2, 2) = 2.0 + k_ * std::cos(v[2]);
    out(2, 3) = -1.0;
    out(3, 2) = 1.0;
}

void CoupledQ::inverse_raw(const Vec& v, Vec& out) const { out = coupled_J(k_, coupled_R(coupled_E_inverse(v))); }

void CoupledQ::inverse_jacobian_into(const Vec& v, Mat& out) const {
    const double x = v[1], z = v[3];
    out.setZero();
    out(0, 1) = 1.0;
    out(1, 0) = -1.0;
    out(1, 1) = 2.0 + k_ * std::cos(x);
    out(2, 3) = 1.0;
    out(3, 1) = 1.0;
    out(3, 2) = -1.0;
    out(3, 3) = 2.0 + k_ * std::cos(z);
}

NormBounds CoupledQ::analytic_bounds() const {
    NormBounds b;
    b.d = k_ + 4.0;
    b.d_inv = k_ + 4.0;
    b.d2 = k_;
    b.d2_inv = k_;
    return b;
}

// ---------------------------------------------------------------- potentials

Mat Potential::hessian(const Vec& q) const {
    const int n = dim();
    const double h = 1e-6;
    Mat out(n, n);
    for (int j = 0; j < n; ++j) {
        Vec qp = q, qm = q;
        qp[j] += h;
        qm[j] -= h;
        out.col(j) = (gradient(qp) - gradient(qm)) / (2.0 * h);
    }
    return 0.5 * (out + out.transpose());
}

double Potential::hessian_bound() const { return kNaN; }
double Potential::third_derivative_bound() const { return kNaN; }

std::vector<std::vector<int>> Potential::gradient_dependencies() const {
    std::vector<int> all(dim());
    std::iota(all.begin(), all.end(), 0);
    return std::vector<std::vector<int>>(dim(), all);
}

FroeschlePotential::FroeschlePotential(double tau1, double tau2, double tau3) : t1_(tau1), t2_(tau2), t3_(tau3) {}

double FroeschlePotential::value(const Vec& q) const {
    return t1_ * std::cos(q[0]) + t2_ * std::cos(q[1]) + t3_ * std::cos(q[0] + q[1]);
}

Vec FroeschlePotential::gradient(const Vec& q) const {
    const double s = t3_ * std::sin(q[0] + q[1]);
    Vec g(2);
    g << -t1_ * std::sin(q[0]) - s, -t2_ * std::sin(q[1]) - s;
    return g;
}

Mat FroeschlePotential::hessian(const Vec& q) const {
    const double c = t3_ * std::cos(q[0] + q[1]);
    Mat h(2, 2);
    h << -t1_ * std::cos(q[0]) - c, -c, -c, -t2_ * std::cos(q[1]) - c;
    return h;
}

double FroeschlePotential::hessian_bound() const {
    const double a = std::abs(t1_) + std::abs(t3_), b = std::abs(t2_) + std::abs(t3_), c = std::abs(t3_);
    return std::sqrt(a * a + b * b + 2.0 * c * c);
}

double FroeschlePotential::third_derivative_bound() const {
    return std::abs(t1_) + std::abs(t2_) + 4.0 * std::abs(t3_);
}

std::vector<std::vector<int>> FroeschlePotential::gradient_dependencies() const {
    if (t3_ == 0.0) return {{0}, {1}};
    return {{0, 1}, {0, 1}};
}

CosinePotential::CosinePotential(std::vector<double> amplitudes) : a_(std::move(amplitudes)) {
    if (a_.empty()) throw std::invalid_argument("cosine potential needs at least one amplitude");
}

double CosinePotential::value(const Vec& q) const {
    double v = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) v += a_[i] * std::cos(q[i]);
    return v;
}

Vec CosinePotential::gradient(const Vec& q) const {
    Vec g(dim());
    for (int i = 0; i < dim(); ++i) g[i] = -a_[i] * std::sin(q[i]);
    return g;
}

Mat CosinePotential::hessian(const Vec& q) const {
    Mat h = Mat::Zero(dim(), dim());
    for (int i = 0; i < dim(); ++i) h(i, i) = -a_[i] * std::cos(q[i]);
    return h;
}

double CosinePotential::hessian_bound() const {
    double m = 0.0;
    for (double a : a_) m = std::max(m, std::abs(a));
    return m;
}

double CosinePotential::third_derivative_bound() const { return hessian_bound(); }

std::vector<std::vector<int>> CosinePotential::gradient_dependencies() const {
    std::vector<std::vector<int>> d;
    for (int i = 0; i < dim(); ++i) d.push_back({i});
    return d;
}

CustomPotential::CustomPotential(int dim, ValueFn value, GradFn gradient, HessFn hessian)
    : dim_(dim), value_(std::move(value)), grad_(std::move(gradient)), hess_(std::move(hessian)) {
    if (dim_ <= 0 || !value_ || !grad_) throw std::invalid_argument("custom potential needs value and gradient");
}

Mat CustomPotential::hessian(const Vec& q) const {
    if (hess_) return hess_(q);
    return Potential::hessian(q);
}

// ---------------------------------------------------------------- twist maps

namespace {

std::vector<std::vector<int>> twist_dependencies(const Potential& v) {
    std::vector<std::vector<int>> deps;
    for (const auto& g : v.gradient_dependencies()) {
        std::vector<int> d;
        for (int c : g) d.push_back(2 * c);  // q_c lives at interleaved index 2c
        deps.push_back(d);
    }
    return deps;
}

}  // namespace

TwistMap::TwistMap(PotentialPtr v, std::string label)
    : FiberMap(2 * v->dim(), std::vector<int>(v->dim(), 2), twist_dependencies(*v)),
      v_(std::move(v)),
      label_(std::move(label)),
      n_(v_->dim()) {}

void TwistMap::eval_raw(const Vec& y, Vec& out) const {
    Vec q(n_);
    for (int i = 0; i < n_; ++i) q[i] = y[2 * i];
    const Vec g = v_->gradient(q);
    for (int i = 0; i < n_; ++i) {
        out[2 * i] = 2.0 * y[2 * i] - y[2 * i + 1] + g[i];
        out[2 * i + 1] = y[2 * i];
    }
}

void TwistMap::jacobian_into(const Vec& y, Mat& out) const {
    Vec q(n_);
    for (int i = 0; i < n_; ++i) q[i] = y[2 * i];
    const Mat h = v_->hessian(q);
    out.setZero();
    for (int i = 0; i < n_; ++i) {
        for (int j = 0; j < n_; ++j) out(2 * i, 2 * j) = h(i, j);
        out(2 * i, 2 * i) += 2.0;
        out(2 * i, 2 * i + 1) = -1.0;
        out(2 * i + 1, 2 * i) = 1.0;
    }
}

void TwistMap::inverse_raw(const Vec& y, Vec& out) const {
    // q = p', p = 2p' - q' + ∇V(p').
    Vec q(n_);
    for (int i = 0; i < n_; ++i) q[i] = y[2 * i + 1];
    const Vec g = v_->gradient(q);
    for (int i = 0; i < n_; ++i) {
        out[2 * i] = y[2 * i + 1];
        out[2 * i + 1] = 2.0 * y[2 * i + 1] - y[2 * i] + g[i];
    }
}

NormBounds TwistMap::analytic_bounds() const {
    // ‖[[2,-1],[1,0]]‖ = 1 + √2; the Hessian enters additively.
    const double base = 1.0 + std::sqrt(2.0);
    const double hb = v_->hessian_bound();
    NormBounds b;
    b.d = base + hb;
    b.d_inv = base + hb;
    b.d2 = v_->third_derivative_bound();
    b.d2_inv = v_->third_derivative_bound();
    return b;
}

// ---------------------------------------------------------------- linear maps

LinearFiberMap::LinearFiberMap(IntMat m, std::vector<int> block_sizes)
    : FiberMap(static_cast<int>(m.rows()), block_sizes, std::vector<std::vector<int>>(block_sizes.size())),
      m_(std::move(m)) {
    inv_ = int_inverse_unimodular(m_);
    mr_ = to_real(m_);
    invr_ = to_real(inv_);
}

void LinearFiberMap::eval_raw(const Vec& y, Vec& out) const { out = mr_ * y; }
void LinearFiberMap::jacobian_into(const Vec&, Mat& out) const { out = mr_; }
void LinearFiberMap::inverse_raw(const Vec& y, Vec& out) const { out = invr_ * y; }
void LinearFiberMap::inverse_jacobian_into(const Vec&, Mat& out) const { out = invr_; }

NormBounds LinearFiberMap::analytic_bounds() const {
    NormBounds b;
    b.d = op_norm(mr_);
    b.d_inv = op_norm(invr_);
    b.d2 = 0.0;
    b.d2_inv = 0.0;
    return b;
}

// ---------------------------------------------------------------- factories

FiberMapPtr standard_map(double r) { return std::make_shared<StandardMap>(r); }
FiberMapPtr coupled_p(double r, double tau) { return std::make_shared<CoupledP>(r, tau); }
FiberMapPtr coupled_q(double r) { return std::make_shared<CoupledQ>(r); }

FiberMapPtr froeschle(double tau1, double tau2, double tau3) {
    return std::make_shared<TwistMap>(std::make_shared<FroeschlePotential>(tau1, tau2, tau3), "froeschle");
}

FiberMapPtr generic_twist(PotentialPtr v) { return std::make_shared<TwistMap>(std::move(v), "twist"); }

FiberMapPtr linear_fiber(const IntMat& m, std::vector<int> block_sizes) {
    return std::make_shared<LinearFiberMap>(m, std::move(block_sizes));
}

FiberMapPtr identity_fiber(int dim, std::vector<int> block_sizes) {
    return std::make_shared<LinearFiberMap>(IntMat::Identity(dim, dim), std::move(block_sizes));
}

double jacobian_fd_error(const FiberMap& s, const Vec& y, double h) {
    const int d = s.dimension();
    const Mat j = s.jacobian(y);
    Mat fd(d, d);
    Vec fp(d), fm(d);
    for (int c = 0; c < d; ++c) {
        Vec yp = y, ym = y;
        yp[c] += h;
        ym[c] -= h;
        s.eval_raw(yp, fp);
        s.eval_raw(ym, fm);
        fd.col(c) = (fp - fm) / (2.0 * h);
    }
    return (fd - j).cwiseAbs().maxCoeff() / std::max(1.0, j.cwiseAbs().maxCoeff());
}

}  // namespace skewlab
