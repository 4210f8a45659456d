#include "skewlab/torus.hpp"

#include "skewlab/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>

namespace skewlab {

TorusVector::TorusVector(const Vec& raw) : coords_(raw) { wrap_in_place(coords_); }

TorusVector TorusVector::operator+(const TorusVector& o) const {
    if (o.size() != size()) throw std::invalid_argument("torus dimension mismatch");
    return TorusVector(coords_ + o.coords_);
}

TorusVector TorusVector::operator-(const TorusVector& o) const {
    if (o.size() != size()) throw std::invalid_argument("torus dimension mismatch");
    return TorusVector(coords_ - o.coords_);
}

TorusVector reduce_mod_torus(const Vec& v) {
    if (!v.allFinite()) throw std::invalid_argument("reduce_mod_torus: non-finite coordinate");
    return TorusVector(v);
}

namespace {

// Deterministic generic starting frame for subspace iteration.
Mat start_frame(Eigen::Index n, Eigen::Index k) {
    Mat m(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = std::sin(1.0 + 7.3 * i + 3.1 * j * j + 0.37 * i * j);
    return m;
}

// Dominant k-dimensional invariant subspace of m by orthogonal iteration.
Mat dominant_subspace(const Mat& m, Eigen::Index k) {
    const Eigen::Index n = m.rows();
    if (k == 0) return Mat(n, 0);
    Mat q = orthonormalize(start_frame(n, k));
    for (int it = 0; it < 5000; ++it) {
        Mat next = orthonormalize(m * q);
        // Projector distance between consecutive subspaces.
        double change = (next * next.transpose() - q * q.transpose()).norm();
        q = next;
        if (change < 1e-15 && it > 8) break;
    }
    return q;
}

double invariance_residual(const Mat& a, const Mat& q) {
    if (q.cols() == 0) return 0.0;
    Mat aq = a * q;
    Mat resid = aq - q * (q.transpose() * aq);
    return op_norm(resid) / std::max(1.0, op_norm(a));
}

}  // namespace

ToralAutomorphism::ToralAutomorphism(IntMat entries, double unit_circle_tol) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols() || entries_.rows() == 0)
        throw std::invalid_argument("toral automorphism needs a non-empty square matrix");
    const long long det = int_determinant(entries_);
    if (det != 1 && det != -1) {
        std::ostringstream os;
        os << "toral automorphism must have |det| = 1, got " << det;
        throw std::invalid_argument(os.str());
    }
    inverse_ = int_inverse_unimodular(entries_);

    const Mat a = to_real(entries_);
    Eigen::EigenSolver<Mat> es(a, false);
    Eigen::VectorXcd ev = es.eigenvalues();
    Eigen::Index ku = 0, ks = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        const double mod = std::abs(ev[i]);
        if (std::abs(mod - 1.0) <= unit_circle_tol) {
            std::ostringstream os;
            os << "eigenvalue " << ev[i] << " on the unit circle";
            hyperbolic_failure_ = os.str();
            return;
        }
        (mod > 1.0 ? ku : ks)++;
    }
    Splitting s;
    s.eigenvalues = ev;
    s.unstable_basis = dominant_subspace(a, ku);
    s.stable_basis = dominant_subspace(to_real(inverse_), ks);
    s.unstable_restriction = s.unstable_basis.transpose() * a * s.unstable_basis;
    s.stable_restriction = s.stable_basis.transpose() * a * s.stable_basis;
    s.unstable_rate = ku > 0 ? min_norm(s.unstable_restriction) : 0.0;
    s.stable_rate = ks > 0 ? op_norm(s.stable_restriction) : 0.0;
    s.invariance_residual =
        std::max(invariance_residual(a, s.unstable_basis), invariance_residual(a, s.stable_basis));
    splitting_ = std::move(s);
}

ToralAutomorphism ToralAutomorphism::inverse() const { return ToralAutomorphism(inverse_); }

const Splitting& ToralAutomorphism::splitting() const {
    if (!splitting_) throw NotHyperbolic(hyperbolic_failure_);
    return *splitting_;
}

static ConformalityVerdict conformality_of(const Mat& restriction, double tol) {
    ConformalityVerdict v;
    if (restriction.size() == 0) {
        v.conformal = true;
        return v;
    }
    Vec s = singular_values(restriction);
    v.margin = s[0] - s[s.size() - 1];
    v.conformal = v.margin <= tol;
    return v;
}

ConformalityVerdict ToralAutomorphism::conformal_u(double tol) const {
    return conformality_of(splitting().unstable_restriction, tol);
}

ConformalityVerdict ToralAutomorphism::conformal_s(double tol) const {
    return conformality_of(splitting().stable_restriction, tol);
}

Splitting hyperbolic_splitting(const ToralAutomorphism& a) { return a.splitting(); }

ConformalityVerdict is_u_conformal(const ToralAutomorphism& a, double tol) { return a.conformal_u(tol); }

void apply_iterated_inplace(const IntMat& a, int k, Vec& x) {
    if (a.cols() != x.size()) throw std::invalid_argument("apply_iterated: dimension mismatch");
    if (k < 0) throw std::invalid_argument("apply_iterated: negative iterate count");
    const Eigen::Index n = x.size();
    Vec tmp(n);
    wrap_in_place(x);
    for (int step = 0; step < k; ++step) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double s = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) s += static_cast<double>(a(i, j)) * x[j];
            tmp[i] = wrap_angle(s);
        }
        x.swap(tmp);
    }
}

TorusVector apply_iterated(const ToralAutomorphism& a, int k, const TorusVector& x) {
    Vec v = x.coords();
    apply_iterated_inplace(a.entries(), k, v);
    return TorusVector(v);
}

IntMat cat_matrix() {
    IntMat a(2, 2);
    a << 2, 1, 1, 1;
    return a;
}

IntMat jordan_cat_matrix() {
    IntMat b = IntMat::Zero(4, 4);
    b.block(0, 0, 2, 2) = cat_matrix();
    b.block(2, 2, 2, 2) = cat_matrix();
    b.block(0, 2, 2, 2) = IntMat::Identity(2, 2);
    return b;
}

}  // namespace skewlab
