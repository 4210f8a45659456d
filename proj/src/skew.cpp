#include "skewlab/skew.hpp"

#include "skewlab/linalg.hpp"

#include <sstream>

namespace skewlab {

namespace {

Mat matrix_power(const Mat& m, int k) {
    Mat out = Mat::Identity(m.rows(), m.cols());
    for (int i = 0; i < k; ++i) out = m * out;
    return out;
}

// x <- A x without reduction.
void int_apply_raw(const IntMat& a, Vec& x, Vec& tmp) {
    const Eigen::Index n = x.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) s += static_cast<double>(a(i, j)) * x[j];
        tmp[i] = s;
    }
    x.swap(tmp);
}

void int_apply_wrapped(const IntMat& a, Vec& x, Vec& tmp) {
    int_apply_raw(a, x, tmp);
    wrap_in_place(x);
}

Vec project_wrapped(const IntMat& p, const Vec& x) {
    Vec out = int_apply(p, x);
    wrap_in_place(out);
    return out;
}

}  // namespace

SkewProduct::SkewProduct(ToralAutomorphism base, int base_iterates, int kick_iterates, IntMat projection,
                         FiberMapPtr fiber, double r)
    : base_(std::move(base)), L_(base_iterates), K_(kick_iterates), proj_(std::move(projection)),
      fiber_(std::move(fiber)), r_(r) {
    if (!fiber_) throw std::invalid_argument("skew product needs a fiber map");
    if (L_ < 0 || K_ < 0) throw std::invalid_argument("iterate counts must be non-negative");
    if (proj_.rows() != fiber_->dimension() || proj_.cols() != base_.dim()) {
        std::ostringstream os;
        os << "projection must be " << fiber_->dimension() << "x" << base_.dim() << ", got " << proj_.rows() << "x"
           << proj_.cols();
        throw std::invalid_argument(os.str());
    }
    dphi_ = to_real(proj_) * matrix_power(to_real(base_.entries()), K_);
}

Vec SkewProduct::kick(const Vec& x) const {
    Vec ak = x;
    apply_iterated_inplace(base_.entries(), K_, ak);
    return project_wrapped(proj_, ak);
}

void SkewProduct::step(Vec& x, Vec& y, Vec& sb, Vec& sf) const {
    const IntMat& a = base_.entries();
    sb.resize(x.size());
    wrap_in_place(x);
    Vec kicked;
    const int n = std::max(L_, K_);
    Vec cur = x;
    if (K_ == 0) kicked = cur;
    for (int i = 1; i <= n; ++i) {
        int_apply_wrapped(a, cur, sb);
        if (i == K_) kicked = cur;
        if (i == L_) x = cur;
    }
    sf.resize(y.size());
    fiber_->eval_raw(y, sf);
    sf += int_apply(proj_, kicked);
    wrap_in_place(sf);
    y.swap(sf);
}

SkewPoint SkewProduct::eval(const SkewPoint& m) const {
    if (m.base.size() != base_dim() || m.fiber.size() != fiber_dim())
        throw std::invalid_argument("skew point dimension mismatch");
    SkewPoint out = m;
    Vec sb, sf;
    step(out.base, out.fiber, sb, sf);
    return out;
}

SkewPoint SkewProduct::inverse(const SkewPoint& m) const {
    if (m.base.size() != base_dim() || m.fiber.size() != fiber_dim())
        throw std::invalid_argument("skew point dimension mismatch");
    SkewPoint out;
    out.base = m.base;
    apply_iterated_inplace(base_.inverse_entries(), L_, out.base);
    Vec y = m.fiber - kick(out.base);
    out.fiber = fiber_->inverse(y);
    return out;
}

Mat SkewProduct::derivative(const SkewPoint& m) const {
    const int l = base_dim(), d = fiber_dim();
    Mat df = Mat::Zero(l + d, l + d);
    df.topLeftCorner(l, l) = matrix_power(to_real(base_.entries()), L_);
    df.bottomLeftCorner(d, l) = dphi_;
    df.bottomRightCorner(d, d) = fiber_->jacobian(m.fiber);
    return df;
}

Mat SkewProduct::block_projection(int block, int coordinate_index) const {
    if (block < 0 || block >= fiber_->block_count()) throw std::out_of_range("block index");
    const int s = fiber_->block_sizes()[block];
    if (coordinate_index < 0 || coordinate_index >= s) throw std::out_of_range("coordinate index");
    Mat p = Mat::Zero(s, fiber_dim());
    p(0, fiber_->block_offset(block) + coordinate_index) = 1.0;
    return p;
}

Mat SkewProduct::base_on_unstable() const { return matrix_power(base_.splitting().unstable_restriction, L_); }
Mat SkewProduct::base_on_stable() const { return matrix_power(base_.splitting().stable_restriction, L_); }

Mat SkewProduct::kick_on_unstable() const {
    const Splitting& s = base_.splitting();
    return to_real(proj_) * s.unstable_basis * matrix_power(s.unstable_restriction, K_);
}

Mat SkewProduct::kick_on_stable() const {
    const Splitting& s = base_.splitting();
    return to_real(proj_) * s.stable_basis * matrix_power(s.stable_restriction, K_);
}

double SkewProduct::lambda_r() const { return min_norm(base_on_unstable()); }
double SkewProduct::tau_r() const { return op_norm(base_on_stable()); }

void SkewProduct::push_tangent(const SkewPoint& m, Vec& vb, Vec& vf) const {
    const IntMat& a = base_.entries();
    Vec tmp(vb.size());
    Vec cur = vb, kicked = vb, moved = vb;
    const int n = std::max(L_, K_);
    for (int i = 1; i <= n; ++i) {
        int_apply_raw(a, cur, tmp);
        if (i == K_) kicked = cur;
        if (i == L_) moved = cur;
    }
    Mat j(fiber_dim(), fiber_dim());
    fiber_->jacobian_into(m.fiber, j);
    vf = j * vf + int_apply(proj_, kicked);
    vb = moved;
}

SkewProduct build_skew(const ToralAutomorphism& base, int base_iterates, int kick_iterates, const IntMat& projection,
                       FiberMapPtr fiber, double r) {
    return SkewProduct(base, base_iterates, kick_iterates, projection, std::move(fiber), r);
}

IntMat first_coordinate_projection(int base_dim, const FiberMap& fiber, int coordinate_index) {
    IntMat p = IntMat::Zero(fiber.dimension(), base_dim);
    for (int i = 0; i < fiber.block_count(); ++i) {
        if (coordinate_index >= fiber.block_sizes()[i]) throw std::out_of_range("coordinate index");
        p(fiber.block_offset(i) + coordinate_index, 0) = 1;
    }
    return p;
}

// ---------------------------------------------------------------- reversibility

namespace {

void require4(const Vec& v) {
    if (v.size() != 4) throw std::invalid_argument("coupled conjugacies act on T^4");
}

// (Y, x - τ sin(Y+W), W, z - τ sin(Y+W)) with Y, W the standard updates shifted by (a, b).
Vec coupled_hat_fiber(double k, double tau, double a, double b, const Vec& v) {
    const double x = v[0], y = v[1], z = v[2], w = v[3];
    const double Y = 2.0 * x - y + k * std::sin(x) + a;
    const double W = 2.0 * z - w + k * std::sin(z) + b;
    const double s = tau * std::sin(Y + W);
    Vec o(4);
    o << Y, x - s, W, z - s;
    wrap_in_place(o);
    return o;
}

// Kick at B^{-L} m, checked to act only on the first coordinate of each block.
Vec backward_kick(const SkewProduct& f, const Vec& base_back) {
    Vec c = f.kick(base_back);
    for (int i = 0; i < f.fiber().block_count(); ++i) {
        const int off = f.fiber().block_offset(i);
        for (int j = 1; j < f.fiber().block_sizes()[i]; ++j)
            if (f.projection().row(off + j).any())
                throw std::invalid_argument("closed-form conjugacy needs a kick on first block coordinates only");
    }
    return c;
}

}  // namespace

SkewPoint gamma_tau(double tau, const SkewPoint& m) {
    require4(m.fiber);
    Vec f = coupled_T(tau, coupled_R(m.fiber));
    wrap_in_place(f);
    return {m.base, f};
}

SkewPoint gamma_tau_inverse(double tau, const SkewPoint& m) {
    require4(m.fiber);
    Vec f = coupled_R(coupled_T(-tau, m.fiber));
    wrap_in_place(f);
    return {m.base, f};
}

SkewPoint gamma_hat(const SkewPoint& m) {
    require4(m.fiber);
    Vec f = coupled_R(m.fiber);
    wrap_in_place(f);
    return {m.base, f};
}

Vec p_hat(double r, double tau, const Vec& v) {
    require4(v);
    return coupled_hat_fiber(std::floor(r), tau, 0.0, 0.0, v);
}

Vec q_hat(double r, const Vec& v) {
    require4(v);
    CoupledQ q(r);
    return q.eval(v);
}

SkewPoint g_hat(const SkewProduct& g, const SkewPoint& m) {
    const auto* p = dynamic_cast<const CoupledP*>(&g.fiber());
    if (!p) throw std::invalid_argument("g_hat needs a coupled_p fiber");
    SkewPoint out;
    out.base = m.base;
    apply_iterated_inplace(g.base().inverse_entries(), g.base_iterates(), out.base);
    const Vec c = backward_kick(g, out.base);
    out.fiber = coupled_hat_fiber(p->kick(), p->tau(), c[0], c[2], m.fiber);
    return out;
}

SkewPoint h_hat(const SkewProduct& h, const SkewPoint& m) {
    const auto* q = dynamic_cast<const CoupledQ*>(&h.fiber());
    if (!q) throw std::invalid_argument("h_hat needs a coupled_q fiber");
    SkewPoint out;
    out.base = m.base;
    apply_iterated_inplace(h.base().inverse_entries(), h.base_iterates(), out.base);
    const Vec c = backward_kick(h, out.base);
    Vec f = q->eval(m.fiber) + c;
    wrap_in_place(f);
    out.fiber = f;
    return out;
}

Conjugacy reversibility_conjugacies(ConjugacyFamily family, double r, double tau) {
    Conjugacy c;
    switch (family) {
        case ConjugacyFamily::p: {
            auto pm = std::make_shared<CoupledP>(r, tau);
            c.gamma = [tau](const SkewPoint& m) { return gamma_tau(tau, m); };
            c.gamma_inverse = [tau](const SkewPoint& m) { return gamma_tau_inverse(tau, m); };
            c.conjugated = [r, tau](const SkewPoint& m) { return SkewPoint{m.base, p_hat(r, tau, m.fiber)}; };
            c.map_inverse = [pm](const SkewPoint& m) { return SkewPoint{m.base, pm->inverse(m.fiber)}; };
            return c;
        }
        case ConjugacyFamily::q: {
            auto qm = std::make_shared<CoupledQ>(r);
            c.gamma = gamma_hat;
            c.gamma_inverse = gamma_hat;
            c.conjugated = [r](const SkewPoint& m) { return SkewPoint{m.base, q_hat(r, m.fiber)}; };
            c.map_inverse = [qm](const SkewPoint& m) { return SkewPoint{m.base, qm->inverse(m.fiber)}; };
            return c;
        }
        default:
            throw std::invalid_argument("families g and h need a skew product");
    }
}

Conjugacy reversibility_conjugacies(ConjugacyFamily family, const SkewProduct& skew) {
    Conjugacy c;
    const SkewProduct* f = &skew;
    c.map_inverse = [f](const SkewPoint& m) { return f->inverse(m); };
    switch (family) {
        case ConjugacyFamily::g: {
            const auto* p = dynamic_cast<const CoupledP*>(&skew.fiber());
            if (!p) throw std::invalid_argument("family g needs a coupled_p fiber");
            const double tau = p->tau();
            c.gamma = [tau](const SkewPoint& m) { return gamma_tau(tau, m); };
            c.gamma_inverse = [tau](const SkewPoint& m) { return gamma_tau_inverse(tau, m); };
            c.conjugated = [f](const SkewPoint& m) { return g_hat(*f, m); };
            return c;
        }
        case ConjugacyFamily::h:
            c.gamma = gamma_hat;
            c.gamma_inverse = gamma_hat;
            c.conjugated = [f](const SkewPoint& m) { return h_hat(*f, m); };
            return c;
        case ConjugacyFamily::p: {
            const auto* p = dynamic_cast<const CoupledP*>(&skew.fiber());
            if (!p) throw std::invalid_argument("family p needs a coupled_p fiber");
            return reversibility_conjugacies(family, p->r(), p->tau());
        }
        default:
            return reversibility_conjugacies(family, skew.r(), 0.0);
    }
}

double skew_distance(const SkewPoint& a, const SkewPoint& b) {
    return std::max(torus_distance(a.base, b.base), torus_distance(a.fiber, b.fiber));
}

}  // namespace skewlab
