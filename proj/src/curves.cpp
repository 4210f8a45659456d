#include "skewlab/curves.hpp"

#include "skewlab/hypotheses.hpp"
#include "skewlab/linalg.hpp"
#include "skewlab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <sstream>

namespace skewlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Mat splitting_frame(const SkewProduct& f) {
    const Splitting& sp = f.base().splitting();
    Mat q(f.base_dim(), f.base_dim());
    q << sp.unstable_basis, sp.stable_basis;
    return q;
}

double cone_ratio_with(const Eigen::PartialPivLU<Mat>& frame, int ku, int l, const Vec& v) {
    const Vec coords = frame.solve(v.head(l));
    const double a = coords.head(ku).norm();
    const double rest = std::sqrt(coords.tail(l - ku).squaredNorm() + v.tail(v.size() - l).squaredNorm());
    if (a == 0.0) return rest == 0.0 ? 0.0 : kInf;
    return rest / a;
}

double real_power_entries(const IntMat& a, int k, Mat& out) {
    out = Mat::Identity(a.rows(), a.cols());
    const Mat ar = to_real(a);
    for (int i = 0; i < k; ++i) out = ar * out;
    return out.cwiseAbs().maxCoeff();
}

}  // namespace

// ---------------------------------------------------------------- unstable direction

double unstable_cone_ratio(const SkewProduct& f, const Vec& v) {
    const Eigen::PartialPivLU<Mat> frame(splitting_frame(f));
    const int ku = static_cast<int>(f.base().splitting().unstable_basis.cols());
    return cone_ratio_with(frame, ku, f.base_dim(), v);
}

UnstableVector approximate_unstable_vector(const SkewProduct& f, const SkewPoint& m, int k_back, const Vec& seed) {
    if (k_back < 0) throw std::invalid_argument("k_back must be non-negative");
    UnstableVector out;
    out.xi = compute_xi(f);
    const int l = f.base_dim(), d = f.fiber_dim();
    if (k_back > 0 && !f.fiber().has_inverse()) throw std::invalid_argument("fiber map has no inverse");

    std::vector<SkewPoint> orbit{m};
    orbit.reserve(k_back + 1);
    for (int j = 0; j < k_back; ++j) orbit.push_back(f.inverse(orbit.back()));

    Vec vb, vf;
    if (seed.size() == 0) {
        vb = f.base().splitting().unstable_basis.col(0);
        vf = Vec::Zero(d);
    } else {
        if (seed.size() != l + d) throw std::invalid_argument("seed dimension");
        vb = seed.head(l);
        vf = seed.tail(d);
    }
    double n0 = std::sqrt(vb.squaredNorm() + vf.squaredNorm());
    if (n0 == 0.0) throw std::invalid_argument("zero seed");
    vb /= n0;
    vf /= n0;
    for (int j = k_back; j >= 1; --j) {
        f.push_tangent(orbit[j], vb, vf);
        const double n = std::sqrt(vb.squaredNorm() + vf.squaredNorm());
        vb /= n;
        vf /= n;
    }
    out.v.resize(l + d);
    out.v << vb, vf;

    const double m_u = min_norm(f.kick_on_unstable());
    const double dphi_s = op_norm(f.kick_on_stable());
    const double ds = f.fiber().norm_bounds().d;
    out.ratio = unstable_cone_ratio(f, out.v);
    out.upper = out.xi;
    out.lower = std::max(0.0, (m_u - out.xi * (dphi_s + ds)) / op_norm(f.base_on_unstable()));
    out.literal_lower = m_u / f.lambda_r();
    const double tol = 1e-9;
    out.in_interval = out.ratio >= out.lower * (1.0 - tol) && out.ratio <= out.upper * (1.0 + tol);
    return out;
}

// ---------------------------------------------------------------- names

std::string to_string(PieceClass c) {
    switch (c) {
        case PieceClass::good: return "good";
        case PieceClass::bad: return "bad";
        case PieceClass::almost_good: return "almost-good";
    }
    return "?";
}

std::string to_string(FieldMode m) { return m == FieldMode::product ? "product" : "w-adapted"; }

FieldMode field_mode_from_string(const std::string& s) {
    if (s == "product") return FieldMode::product;
    if (s == "w-adapted") return FieldMode::w_adapted;
    throw std::invalid_argument("unknown field mode: " + s);
}

// ---------------------------------------------------------------- curve geometry

SkewPoint AdmissibleCurve::point(int k, int base_dim) const {
    Vec p = points.col(k);
    wrap_in_place(p);
    return {p.head(base_dim), p.tail(p.size() - base_dim)};
}

namespace {

int locate(const std::vector<double>& s, double t) {
    const int n = static_cast<int>(s.size());
    if (n < 2) throw std::logic_error("curve needs two samples");
    auto it = std::upper_bound(s.begin(), s.end(), t);
    int k = static_cast<int>(it - s.begin()) - 1;
    return std::clamp(k, 0, n - 2);
}

}  // namespace

Vec AdmissibleCurve::position(double t) const {
    const int k = locate(s, t);
    const double h = s[k + 1] - s[k];
    const double u = (t - s[k]) / h;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * points.col(k) + (u3 - 2 * u2 + u) * h * tangents.col(k) +
           (-2 * u3 + 3 * u2) * points.col(k + 1) + (u3 - u2) * h * tangents.col(k + 1);
}

Vec AdmissibleCurve::velocity(double t) const {
    const int k = locate(s, t);
    const double h = s[k + 1] - s[k];
    const double u = (t - s[k]) / h;
    const double u2 = u * u;
    return ((6 * u2 - 6 * u) * points.col(k) + (-6 * u2 + 6 * u) * points.col(k + 1)) / h +
           (3 * u2 - 4 * u + 1) * tangents.col(k) + (3 * u2 - 2 * u) * tangents.col(k + 1);
}

namespace {

void fill_arclength(AdmissibleCurve& c) {
    c.arclength.assign(c.size(), 0.0);
    for (int k = 1; k < c.size(); ++k)
        c.arclength[k] = c.arclength[k - 1] + (c.points.col(k) - c.points.col(k - 1)).norm();
}

}  // namespace

AdmissibleCurve resample(const AdmissibleCurve& c, int n) {
    if (n < 2) throw std::invalid_argument("resample needs n >= 2");
    AdmissibleCurve out;
    out.block = c.block;
    out.orientation = c.orientation;
    const int dim = static_cast<int>(c.points.rows());
    out.points.resize(dim, n);
    out.tangents.resize(dim, n);
    out.s.resize(n);
    const double total = c.displacement();
    for (int k = 0; k < n; ++k) {
        const double t = k == n - 1 ? total : total * k / (n - 1);
        out.s[k] = t;
        out.points.col(k) = c.position(t);
        out.tangents.col(k) = c.velocity(t);
    }
    fill_arclength(out);
    return out;
}

double field_norm(const SkewProduct& f, const Vec& v, FieldMode mode) {
    if (mode == FieldMode::product) return v.norm();
    const FiberMap& s = f.fiber();
    double m = 0.0;
    for (int i = 0; i < s.block_count(); ++i) m = std::max(m, v.segment(s.block_offset(i), s.block_sizes()[i]).norm());
    return m;
}

std::vector<Cone> default_cones(const SkewProduct& f) {
    std::vector<Cone> out;
    const double alpha = std::pow(f.r(), 0.25);
    for (int size : f.fiber().block_sizes()) out.push_back(coordinate_cone(size, 0, alpha));
    return out;
}

std::vector<CriticalRegion> default_critical_regions(const SkewProduct& f) {
    std::vector<CriticalRegion> out;
    for (int i = 0; i < f.fiber().block_count(); ++i) out.push_back(standard_critical_region(f.r(), i));
    return out;
}

Mat constant_field(const SkewProduct& f, const AdmissibleCurve& c, const Vec& x, FieldMode mode) {
    if (x.size() != f.fiber_dim()) throw std::invalid_argument("field dimension");
    const double n = field_norm(f, x, mode);
    if (n == 0.0) throw std::invalid_argument("zero field");
    Mat out(x.size(), c.size());
    for (int k = 0; k < c.size(); ++k) out.col(k) = x / n;
    return out;
}

PieceClass classify_field(const SkewProduct& f, const Mat& field, const std::vector<Cone>& cones, FieldMode mode,
                          int block) {
    const FiberMap& s = f.fiber();
    if (static_cast<int>(cones.size()) != s.block_count()) throw std::invalid_argument("one cone per block");
    auto block_good = [&](int i) {
        for (Eigen::Index k = 0; k < field.cols(); ++k) {
            const Vec part = field.col(k).segment(s.block_offset(i), s.block_sizes()[i]);
            if (!cone_contains(cones[i], part, true)) return false;
        }
        return true;
    };
    if (mode == FieldMode::product) return block_good(block) ? PieceClass::good : PieceClass::bad;
    int good = 0;
    for (int i = 0; i < s.block_count(); ++i) good += block_good(i) ? 1 : 0;
    if (good == s.block_count()) return PieceClass::good;
    return good > 0 ? PieceClass::almost_good : PieceClass::bad;
}

// ---------------------------------------------------------------- length bounds

LengthBounds admissible_length_bounds(const SkewProduct& f, int block) {
    LengthBounds b;
    const double xi = compute_xi(f);
    const int row = f.fiber().block_offset(block);
    const Mat du = f.kick_on_unstable();
    const Mat pdu = du.row(row);
    const double big_i = op_norm(pdu), small_i = min_norm(pdu);
    const double eps = (op_norm(f.kick_on_stable()) + f.fiber().norm_bounds().d) * xi;
    const double a_max = op_norm(f.base_on_unstable()), a_min = f.lambda_r();
    const double root2xi = std::sqrt(2.0) * xi;
    b.lower = kTwoPi * (1.0 - root2xi) * a_min / (big_i + eps);
    b.upper = small_i > eps ? kTwoPi * (1.0 + root2xi) * a_max / (small_i - eps) : kInf;
    const A2Result a2 = check_A2(f);
    b.K = a2.degenerate ? kInf : a2.K;
    const double nd = op_norm(du), md = min_norm(du);
    b.closed_lower = kTwoPi * a_min / (b.K * nd);
    b.closed_upper = md > 0.0 ? kTwoPi * a_min / md : kInf;
    b.delta_lower = 1.0 - b.lower / b.closed_lower;
    b.delta_upper = b.upper / b.closed_upper - 1.0;
    b.ratio_lower = b.lower / b.upper;
    b.ratio_upper = b.upper / b.lower;
    return b;
}

CurveCertificate certify_curve(const SkewProduct& f, const AdmissibleCurve& c, const LengthBounds& bounds) {
    CurveCertificate cert;
    const int l = f.base_dim();
    const int row = l + f.fiber().block_offset(c.block);
    const double xi = compute_xi(f);
    const Eigen::PartialPivLU<Mat> frame(splitting_frame(f));
    const int ku = static_cast<int>(f.base().splitting().unstable_basis.cols());
    for (int k = 0; k < c.size(); ++k) {
        const Vec t = c.tangents.col(k);
        cert.max_speed_error = std::max(cert.max_speed_error, std::abs(std::abs(t[row]) - 1.0));
        const double ratio = cone_ratio_with(frame, ku, l, t);
        cert.max_cone_ratio = std::max(cert.max_cone_ratio, xi > 0.0 ? ratio / xi : (ratio > 0.0 ? kInf : 0.0));
    }
    cert.length = c.length();
    cert.speed_ok = cert.max_speed_error <= 1e-8;
    cert.cone_ok = cert.max_cone_ratio <= 1.0 + 1e-9;
    cert.length_ok = !c.full() || (cert.length >= bounds.lower * (1.0 - 1e-9) && cert.length <= bounds.upper * (1.0 + 1e-9));
    cert.pass = cert.speed_ok && cert.cone_ok && cert.length_ok;
    return cert;
}

HolderCertificate holder_certificate(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, double theta,
                                     int p, FieldMode mode) {
    HolderCertificate h;
    h.theta = theta;
    h.p = p;
    const double lambda = f.lambda_r();
    h.c_x = std::pow(lambda, -theta * (1.0 - 1.0 / (2.0 * p)));
    const double md = min_norm(f.kick_on_unstable());
    h.variation_bound_literal = md > 0.0 ? std::pow(std::pow(lambda, 1.0 / (2.0 * p)) / md, theta) : kInf;
    h.variation_bound = std::pow(kTwoPi, theta) * h.variation_bound_literal;
    const double half = 0.5 * c.length();
    const int n = c.size();
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            const double diff = field_norm(f, field.col(a) - field.col(b), mode);
            h.variation = std::max(h.variation, diff);
            const double dist = c.arclength[b] - c.arclength[a];
            if (dist > half) break;
            if (dist > 0.0) h.ratio = std::max(h.ratio, diff / std::pow(dist, theta));
            else if (diff > 0.0) h.ratio = kInf;
        }
    }
    h.certified = h.ratio <= h.c_x;
    return h;
}

// ---------------------------------------------------------------- expansion integrals

namespace {

double log_growth(const SkewProduct& f, const Vec& y, const Vec& x, FieldMode mode, Mat& jac) {
    if (jac.rows() != f.fiber_dim()) jac.resize(f.fiber_dim(), f.fiber_dim());
    f.fiber().jacobian_into(y, jac);
    const double n = field_norm(f, jac * x, mode);
    if (!(n > 0.0)) throw DegenerateInput("zero vector in expansion integral");
    return std::log(n);
}

Vec interpolate_field(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, double t, FieldMode mode) {
    const int k = locate(c.s, t);
    const double u = std::clamp((t - c.s[k]) / (c.s[k + 1] - c.s[k]), 0.0, 1.0);
    Vec v = (1.0 - u) * field.col(k) + u * field.col(k + 1);
    const double n = field_norm(f, v, mode);
    if (n == 0.0) throw DegenerateInput("field interpolates through zero");
    return v / n;
}

double interpolate_log(const std::vector<double>& s, const std::vector<double>& vals, double t) {
    const int k = locate(s, t);
    const double u = std::clamp((t - s[k]) / (s[k + 1] - s[k]), 0.0, 1.0);
    return std::exp((1.0 - u) * std::log(vals[k]) + u * std::log(vals[k + 1]));
}

}  // namespace

double expansion_integral(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, FieldMode mode) {
    Mat jac;
    std::vector<double> g(c.size());
    for (int k = 0; k < c.size(); ++k) g[k] = log_growth(f, c.points.col(k).tail(f.fiber_dim()), field.col(k), mode, jac);
    double total = 0.0;
    for (int k = 1; k < c.size(); ++k) total += 0.5 * (g[k - 1] + g[k]) * (c.arclength[k] - c.arclength[k - 1]);
    if (!(c.length() > 0.0)) throw DegenerateInput("curve of zero length");
    return total / c.length();
}

double expansion_integral_refined(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, FieldMode mode,
                                  double tol, int max_doublings) {
    double prev = expansion_integral(f, c, field, mode);
    int n = c.size();
    for (int it = 0; it < max_doublings; ++it) {
        n = 2 * n - 1;
        const AdmissibleCurve fine = resample(c, n);
        Mat fld(field.rows(), n);
        for (int k = 0; k < n; ++k) fld.col(k) = interpolate_field(f, c, field, fine.s[k], mode);
        const double cur = expansion_integral(f, fine, fld, mode);
        if (std::abs(cur - prev) < tol) return cur;
        prev = cur;
    }
    return prev;
}

std::vector<double> expansion_sequence(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, int n,
                                       FieldMode mode) {
    if (n < 1) throw std::invalid_argument("n must be positive");
    const int l = f.base_dim();
    std::vector<std::vector<double>> logs(c.size(), std::vector<double>(n, 0.0));
    for (int k = 0; k < c.size(); ++k) {
        SkewPoint m = c.point(k, l);
        Vec vb = Vec::Zero(l), vf = field.col(k);
        double acc = 0.0;
        for (int step = 0; step < n; ++step) {
            f.push_tangent(m, vb, vf);
            const double norm = field_norm(f, vf, mode);
            if (!(norm > 0.0)) throw DegenerateInput("zero vector in I_n");
            acc += std::log(norm);
            vf /= norm;
            vb /= norm;
            logs[k][step] = acc;
            m = f.eval(m);
        }
    }
    std::vector<double> out(n, 0.0);
    for (int step = 0; step < n; ++step) {
        double total = 0.0;
        for (int k = 1; k < c.size(); ++k)
            total += 0.5 * (logs[k - 1][step] + logs[k][step]) * (c.arclength[k] - c.arclength[k - 1]);
        out[step] = total / c.length();
    }
    return out;
}

// ---------------------------------------------------------------- pushing pieces forward

namespace {

struct Image {
    Vec z;     // lifted image point, not re-anchored
    Vec tan;   // d f · velocity
    double dD = 0.0;
    double J = 1.0;
    Vec y;     // pushed unit field
    double g = 0.0;  // log growth of y at the image point
};

struct Engine {
    const SkewProduct& f;
    int l, d, dim, block, row;
    FieldMode mode;
    Mat AL, dphi;
    double xi = 0.0;
    Eigen::PartialPivLU<Mat> frame;
    int ku = 1;

    Engine(const SkewProduct& sk, int blk, FieldMode m)
        : f(sk), l(sk.base_dim()), d(sk.fiber_dim()), dim(l + d), block(blk),
          row(sk.base_dim() + sk.fiber().block_offset(blk)), mode(m), dphi(sk.kick_derivative()),
          frame(splitting_frame(sk)) {
        const double biggest = real_power_entries(sk.base().entries(), sk.base_iterates(), AL);
        if (biggest > 1e15) throw std::invalid_argument("A^L entries exceed double precision");
        xi = compute_xi(sk);
        ku = static_cast<int>(sk.base().splitting().unstable_basis.cols());
    }

    // Image under f of the parent's spline at parameter t.
    Image image(const FieldPiece& parent, double t, bool with_field = true) const {
        Image im;
        const Vec pos = parent.curve.position(t), vel = parent.curve.velocity(t);
        const Vec zb = pos.head(l), zf = pos.tail(d);
        Vec sf(d);
        f.fiber().eval_raw(zf, sf);
        im.z.resize(dim);
        im.z << AL * zb, sf + dphi * zb;
        Mat jac(d, d);
        f.fiber().jacobian_into(zf, jac);
        im.tan.resize(dim);
        im.tan << AL * vel.head(l), jac * vel.tail(d) + dphi * vel.head(l);
        im.dD = im.tan[row];
        if (!with_field) return im;
        const double jp = interpolate_log(parent.curve.s, parent.jacobian, t);
        const double tn = im.tan.norm();
        if (!(tn > 0.0)) throw DegenerateInput("tangent collapsed");
        im.J = jp * vel.norm() / tn;
        const Vec yp = interpolate_field(f, parent.curve, parent.field, t, mode);
        im.y = jac * yp;
        const double yn = field_norm(f, im.y, mode);
        if (!(yn > 0.0)) throw DegenerateInput("field collapsed");
        im.y /= yn;
        im.g = log_growth(f, im.z.tail(d), im.y, mode, jac);
        return im;
    }

    double pi_coord(const FieldPiece& parent, double t, double& deriv) const {
        const Image im = image(parent, t, false);
        deriv = im.dD;
        return im.z[row];
    }

    // t in [lo, hi] with orient*(P_i f(γ(t)) - base0) = target.
    double solve(const FieldPiece& parent, double base0, int orient, double target, double lo, double hi) const {
        double dlo, dhi;
        double flo = orient * (pi_coord(parent, lo, dlo) - base0) - target;
        double fhi = orient * (pi_coord(parent, hi, dhi) - base0) - target;
        if (flo > 0.0 || fhi < 0.0) {
            if (std::abs(flo) < 1e-12 * (1.0 + std::abs(target))) return lo;
            if (std::abs(fhi) < 1e-12 * (1.0 + std::abs(target))) return hi;
            throw std::runtime_error("cut point not bracketed");
        }
        double t = lo + (hi - lo) * (-flo) / (fhi - flo);
        for (int it = 0; it < 100; ++it) {
            double dv;
            const double fv = orient * (pi_coord(parent, t, dv) - base0) - target;
            if (std::abs(fv) <= 1e-13 * (1.0 + std::abs(target))) return t;
            if (fv > 0.0) hi = t;
            else lo = t;
            const double step = orient * dv;
            double next = step > 0.0 ? t - fv / step : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (hi - lo <= 1e-15 * std::max(1.0, std::abs(hi))) return next;
            t = next;
        }
        return t;
    }

    // Assemble a child piece from images at parameters ts (increasing) whose displacement
    // starts at `start` in the parent image.
    FieldPiece assemble(const std::vector<Image>& ims, double base0, int orient, double start, double span,
                        int level) const {
        const int n = static_cast<int>(ims.size());
        FieldPiece child;
        child.level = level;
        child.curve.block = block;
        child.curve.orientation = orient;
        child.curve.s.resize(n);
        child.curve.points.resize(dim, n);
        child.curve.tangents.resize(dim, n);
        child.field.resize(d, n);
        child.jacobian.resize(n);
        Vec anchor(dim);
        for (int i = 0; i < dim; ++i) anchor[i] = kTwoPi * std::floor(ims[0].z[i] / kTwoPi);
        for (int k = 0; k < n; ++k) {
            double sv = orient * (ims[k].z[row] - base0) - start;
            if (k == 0) sv = 0.0;
            if (k == n - 1) sv = span;
            child.curve.s[k] = sv;
            child.curve.points.col(k) = ims[k].z - anchor;
            child.curve.tangents.col(k) = ims[k].tan / std::abs(ims[k].dD);
            child.field.col(k) = ims[k].y;
            child.jacobian[k] = ims[k].J;
        }
        fill_arclength(child.curve);
        return child;
    }
};

struct ChildInfo {
    long j = 0;
    bool full = true;
    double t_a = 0.0, t_b = 0.0;
    double start = 0.0;  // 2π j
};

struct Cut {
    double base0 = 0.0;
    int orient = 1;
    double total = 0.0;  // |displacement| of the parent's image
};

// Enumerates every piece of f(parent). Grid samples between exact cut points; the grid
// is doubled when a piece would get fewer than half the requested samples.
void for_each_child(const Engine& eng, const FieldPiece& parent, int spp, int max_refine, Cut& cut,
                    const std::function<void(const ChildInfo&, FieldPiece&&, const std::vector<double>&,
                                             const std::vector<Image>&)>& visit) {
    const double S = parent.curve.displacement();
    const int pn = parent.curve.size();
    double max_rate = 0.0;
    for (int k = 0; k < pn; ++k) {
        double dv;
        eng.pi_coord(parent, parent.curve.s[k], dv);
        max_rate = std::max(max_rate, std::abs(dv));
    }
    long grid = std::max<long>(pn, static_cast<long>(std::ceil(spp * max_rate * S / kTwoPi)) + 2);

    for (int attempt = 0; attempt <= max_refine; ++attempt, grid = 2 * grid - 1) {
        std::vector<double> ts(grid);
        std::vector<Image> ims(grid);
        for (long g = 0; g < grid; ++g) {
            ts[g] = g == grid - 1 ? S : S * static_cast<double>(g) / (grid - 1);
            ims[g] = eng.image(parent, ts[g]);
        }
        cut.base0 = ims[0].z[eng.row];
        const double raw_total = ims[grid - 1].z[eng.row] - cut.base0;
        if (!(std::abs(raw_total) > 1e-12)) throw DegenerateInput("image has no P_i displacement");
        cut.orient = raw_total > 0 ? 1 : -1;
        cut.total = std::abs(raw_total);
        std::vector<double> D(grid);
        for (long g = 0; g < grid; ++g) D[g] = cut.orient * (ims[g].z[eng.row] - cut.base0);
        for (long g = 1; g < grid; ++g)
            if (!(D[g] > D[g - 1])) throw std::runtime_error("image not monotone in P_i: left the unstable cone");

        const long full_count = static_cast<long>(std::floor(cut.total / kTwoPi * (1.0 + 1e-14)));
        const double remainder = cut.total - full_count * kTwoPi;
        const long pieces = full_count + (remainder > 1e-9 ? 1 : 0);
        std::vector<double> cuts(pieces + 1);
        cuts[0] = 0.0;
        cuts[pieces] = S;
        for (long j = 1; j < pieces; ++j) {
            const double target = kTwoPi * j;
            const long g = std::upper_bound(D.begin(), D.end(), target) - D.begin();
            const long lo = std::max<long>(g - 1, 0), hi = std::min<long>(g, grid - 1);
            cuts[j] = eng.solve(parent, cut.base0, cut.orient, target, ts[lo], ts[hi]);
        }
        // Sample counts first, so refinement happens before any piece is emitted.
        const long need = std::max(2, spp / 2);
        bool under = false;
        std::vector<std::pair<long, long>> ranges(pieces);
        for (long j = 0; j < pieces && !under; ++j) {
            const double ta = cuts[j], tb = cuts[j + 1];
            const double eps = 1e-12 * std::max(1.0, S);
            const long first = std::upper_bound(ts.begin(), ts.end(), ta + eps) - ts.begin();
            const long last = std::lower_bound(ts.begin(), ts.end(), tb - eps) - ts.begin();
            ranges[j] = {first, last};
            const bool is_full = j < full_count;
            if (is_full && last - first < need) under = true;
        }
        if (under) {
            if (attempt == max_refine) throw std::runtime_error("undersampled image: refinement budget exhausted");
            continue;
        }
        for (long j = 0; j < pieces; ++j) {
            ChildInfo info;
            info.j = j;
            info.full = j < full_count;
            info.t_a = cuts[j];
            info.t_b = cuts[j + 1];
            info.start = kTwoPi * j;
            std::vector<double> cts;
            std::vector<Image> cims;
            cts.push_back(info.t_a);
            cims.push_back(eng.image(parent, info.t_a));
            for (long g = ranges[j].first; g < ranges[j].second; ++g) {
                cts.push_back(ts[g]);
                cims.push_back(ims[g]);
            }
            cts.push_back(info.t_b);
            cims.push_back(eng.image(parent, info.t_b));
            const double span = info.full ? kTwoPi : cut.total - info.start;
            FieldPiece child = eng.assemble(cims, cut.base0, cut.orient, info.start, span, parent.level + 1);
            visit(info, std::move(child), cts, cims);
        }
        return;
    }
}

// Child with samples at prescribed displacements (used to build the root curve).
FieldPiece child_at_targets(const Engine& eng, const FieldPiece& parent, const std::vector<double>& targets) {
    const double S = parent.curve.displacement();
    double d0, d1;
    const double base0 = eng.pi_coord(parent, 0.0, d0);
    const double end = eng.pi_coord(parent, S, d1);
    const int orient = end > base0 ? 1 : -1;
    if (std::abs(end - base0) < targets.back()) throw std::runtime_error("image shorter than requested piece");
    std::vector<Image> ims;
    double lo = 0.0;
    for (double target : targets) {
        const double t = target == 0.0 ? 0.0 : eng.solve(parent, base0, orient, target, lo, S);
        ims.push_back(eng.image(parent, t));
        lo = t;
    }
    return eng.assemble(ims, base0, orient, 0.0, targets.back(), parent.level + 1);
}

}  // namespace

AdmissibleCurve grow_admissible_curve(const SkewProduct& f, const SkewPoint& start, int block, const CurveOptions& opt) {
    if (block < 0 || block >= f.fiber().block_count()) throw std::out_of_range("block index");
    if (opt.samples < 3) throw std::invalid_argument("samples must be at least 3");
    if (opt.pre_iterates < 0) throw std::invalid_argument("pre_iterates must be non-negative");
    const Engine eng(f, block, FieldMode::product);
    SkewPoint seed_point = start;
    for (int k = 0; k < opt.pre_iterates; ++k) seed_point = f.inverse(seed_point);
    const UnstableVector uv = approximate_unstable_vector(f, seed_point, opt.k_back);
    const double pv = uv.v[eng.row];
    if (std::abs(pv) < 1e-12 * uv.v.norm()) throw DegenerateInput("unstable direction has no P_i component");

    Vec p0(eng.dim);
    p0 << seed_point.base, seed_point.fiber;
    wrap_in_place(p0);
    const Vec tangent = uv.v / std::abs(pv);

    auto straight = [&](int n) {
        FieldPiece seg;
        seg.curve.block = block;
        seg.curve.orientation = pv > 0 ? 1 : -1;
        seg.curve.s.resize(n);
        seg.curve.points.resize(eng.dim, n);
        seg.curve.tangents.resize(eng.dim, n);
        for (int k = 0; k < n; ++k) {
            const double t = k == n - 1 ? kTwoPi : kTwoPi * k / (n - 1);
            seg.curve.s[k] = t;
            seg.curve.points.col(k) = p0 + t * tangent;
            seg.curve.tangents.col(k) = tangent;
        }
        fill_arclength(seg.curve);
        seg.field = Mat::Zero(eng.d, n);
        seg.field.row(f.fiber().block_offset(block)).setOnes();
        seg.jacobian.assign(n, 1.0);
        return seg;
    };

    for (int n = opt.samples;; n = 2 * n - 1) {
        FieldPiece piece = straight(opt.pre_iterates == 0 ? n : std::max(n, 2 * opt.samples_per_piece));
        std::vector<double> targets(n);
        for (int k = 0; k < n; ++k) targets[k] = k == n - 1 ? kTwoPi : kTwoPi * k / (n - 1);
        for (int k = 0; k < opt.pre_iterates; ++k) piece = child_at_targets(eng, piece, targets);
        AdmissibleCurve c = std::move(piece.curve);
        double max_chord = 0.0;
        for (int k = 1; k < c.size(); ++k) max_chord = std::max(max_chord, c.arclength[k] - c.arclength[k - 1]);
        if (max_chord <= opt.max_step) return c;
        if (n > (1 << 22)) throw std::runtime_error("max_step unreachable");
    }
}

// ---------------------------------------------------------------- ledger engine

namespace {

struct PieceStats {
    PieceClass cls = PieceClass::good;
    double min_j = 0.0, max_j = 0.0, int_j = 0.0, e = 0.0, length = 0.0;
    CurveCertificate cert;
    HolderCertificate holder;
    double k_r = kInf, l_r = kInf;
};

struct Context {
    const SkewProduct& f;
    const CurveOptions& opt;
    Engine eng;
    std::vector<Cone> cones;
    std::vector<CriticalRegion> crit;
    LengthBounds bounds;
    double gamma_length = 1.0;

    Context(const SkewProduct& sk, int block, const CurveOptions& o)
        : f(sk), opt(o), eng(sk, block, o.mode), cones(default_cones(sk)), crit(default_critical_regions(sk)),
          bounds(admissible_length_bounds(sk, block)) {}
};

// Adaptive quadrature of g over chord arclength: a segment is halved until the
// extrapolated error of its contribution is below tol times its length.
template <class Eval>
std::pair<double, double> adaptive_segment(const Eval& eval, double ta, const Vec& za, double ga, double tb,
                                           const Vec& zb, double gb, double tol, int depth) {
    const double chord = (zb - za).norm();
    const double coarse = 0.5 * (ga + gb) * chord;
    const double tm = 0.5 * (ta + tb);
    Vec zm;
    double gm;
    eval(tm, zm, gm);
    const double c1 = (zm - za).norm(), c2 = (zb - zm).norm();
    const double fine = 0.5 * (ga + gm) * c1 + 0.5 * (gm + gb) * c2;
    // Richardson step: the halved trapezoid errs by about (fine - coarse)/3.
    const double err = (fine - coarse) / 3.0;
    if (depth <= 0 || std::abs(err) <= tol * (c1 + c2)) return {fine + err, c1 + c2};
    const auto left = adaptive_segment(eval, ta, za, ga, tm, zm, gm, tol, depth - 1);
    const auto right = adaptive_segment(eval, tm, zm, gm, tb, zb, gb, tol, depth - 1);
    return {left.first + right.first, left.second + right.second};
}

// Projection lengths of K_r (all blocks off their critical region) and of the points with
// some block inside it, measured on the designated coordinate of every block.
void k_l_measure(const Context& ctx, const AdmissibleCurve& c, double& k_len, double& l_len) {
    const FiberMap& s = ctx.f.fiber();
    const int n = 2048, bins = 1024;
    const AdmissibleCurve fine = resample(c, n);
    k_len = kInf;
    l_len = kInf;
    for (int i = 0; i < s.block_count(); ++i) {
        std::vector<char> kb(bins, 0), lb(bins, 0);
        for (int k = 0; k < n; ++k) {
            const Vec y = fine.points.col(k).tail(s.dimension());
            bool in_k = true;
            for (const auto& cr : ctx.crit) in_k = in_k && !cr.contains_point(s, y);
            const double coord = wrap_angle(y[s.block_offset(i)]);
            const int bin = std::min(bins - 1, static_cast<int>(coord / kTwoPi * bins));
            (in_k ? kb : lb)[bin] = 1;
        }
        const auto covered = [&](const std::vector<char>& v) {
            return kTwoPi * static_cast<double>(std::count(v.begin(), v.end(), 1)) / bins;
        };
        k_len = std::min(k_len, covered(kb));
        l_len = std::min(l_len, covered(lb));
    }
}

template <class Eval>
PieceStats piece_stats(const Context& ctx, const FieldPiece& pc, const std::vector<double>& params,
                       const std::vector<double>& g, const Eval& eval, bool full, bool measure_kl) {
    PieceStats st;
    const AdmissibleCurve& c = pc.curve;
    st.cls = classify_field(ctx.f, pc.field, ctx.cones, ctx.opt.mode, c.block);
    st.min_j = *std::min_element(pc.jacobian.begin(), pc.jacobian.end());
    st.max_j = *std::max_element(pc.jacobian.begin(), pc.jacobian.end());
    st.length = c.length();
    for (int k = 1; k < c.size(); ++k)
        st.int_j += 0.5 * (pc.jacobian[k - 1] + pc.jacobian[k]) * (c.arclength[k] - c.arclength[k - 1]);
    double integral = 0.0, len = 0.0;
    for (int k = 1; k < c.size(); ++k) {
        const auto seg = adaptive_segment(eval, params[k - 1], Vec(c.points.col(k - 1)), g[k - 1], params[k],
                                          Vec(c.points.col(k)), g[k], ctx.opt.quadrature_tol, 30);
        integral += seg.first;
        len += seg.second;
    }
    st.e = integral / len;
    if (full) {
        st.cert = certify_curve(ctx.f, c, ctx.bounds);
        st.holder = holder_certificate(ctx.f, c, pc.field, ctx.opt.theta, ctx.opt.holder_p, ctx.opt.mode);
        if (measure_kl) k_l_measure(ctx, c, st.k_r, st.l_r);
    }
    return st;
}

struct Accumulator {
    LevelLedger lv;
    bool any_full = false;
    void add(const PieceStats& st, bool full, double w, const Context& ctx, double good_bound, double log_zeta) {
        ++lv.inspected;
        lv.count += w;
        lv.identity += w * st.int_j / ctx.gamma_length;
        lv.distortion = std::max(lv.distortion, st.max_j / st.min_j);
        if (!full) {
            lv.partial_mass += w * st.int_j / ctx.gamma_length;
            return;
        }
        switch (st.cls) {
            case PieceClass::good: lv.g += w * st.min_j; break;
            case PieceClass::bad:
                lv.b += w * st.max_j;
                lv.b_min += w * st.min_j;
                break;
            case PieceClass::almost_good: lv.p += w * st.min_j; break;
        }
        lv.positivity += w * st.min_j * st.e;
        if (!any_full) {
            lv.min_length = st.length;
            lv.max_length = st.length;
            lv.good_bound_margin = kInf;
            any_full = true;
        }
        lv.min_length = std::min(lv.min_length, st.length);
        lv.max_length = std::max(lv.max_length, st.length);
        if (!st.cert.pass) ++lv.admissibility_failures;
        lv.max_speed_error = std::max(lv.max_speed_error, st.cert.max_speed_error);
        lv.max_cone_ratio = std::max(lv.max_cone_ratio, st.cert.max_cone_ratio);
        lv.holder_ratio = std::max(lv.holder_ratio, st.holder.ratio);
        if (!st.holder.certified) ++lv.holder_failures;
        lv.max_variation = std::max(lv.max_variation, st.holder.variation);
        if (st.cls == PieceClass::good) {
            lv.good_bound_margin = std::min(lv.good_bound_margin, st.e - good_bound);
            if (st.e < good_bound) ++lv.good_bound_failures;
        }
        if (st.e < log_zeta) ++lv.zeta_bound_failures;
        if (std::isfinite(st.k_r)) lv.k_r = std::isnan(lv.k_r) ? st.k_r : std::min(lv.k_r, st.k_r);
        if (std::isfinite(st.l_r)) lv.l_r = std::isnan(lv.l_r) ? st.l_r : std::min(lv.l_r, st.l_r);
    }
    void finish(const Context& ctx, const LevelLedger* prev) {
        lv.identity_error = std::abs(lv.identity - 1.0);
        lv.sum = lv.g + lv.b + lv.p;
        const double full_mass = lv.identity - lv.partial_mass;
        if (any_full) {
            lv.sum_lower = full_mass * ctx.gamma_length / (lv.distortion * lv.max_length);
            lv.sum_upper = lv.distortion * full_mass * ctx.gamma_length / lv.min_length;
            lv.sum_ok = lv.sum >= lv.sum_lower * (1.0 - 1e-9) && lv.sum <= lv.sum_upper * (1.0 + 1e-9);
            lv.length_ratio_ok = lv.max_length / lv.min_length <= ctx.bounds.ratio_upper * (1.0 + 1e-9);
        } else {
            lv.good_bound_margin = 0.0;
        }
        lv.g_dominates_b = lv.g >= ctx.opt.sigma * lv.b;
        if (prev && any_full && !std::isnan(lv.k_r)) {
            const double lr = std::isnan(lv.l_r) ? 0.0 : lv.l_r;
            const double rhs = (1.0 - 1e-5) * (lv.k_r / kTwoPi * prev->g + lr / kTwoPi * prev->p);
            lv.recursion_factor = prev->min_length / (lv.distortion * lv.max_length);
            lv.recursion_ok = lv.g >= rhs * lv.recursion_factor;
            lv.recursion_literal_ok = lv.g >= rhs;
        }
    }
};

struct Node {
    std::shared_ptr<FieldPiece> piece;
    double mass = 1.0;
    long id = 0;
};

struct Path {
    int node = 0;
    double t = 0.0;
};

struct DriverResult {
    CurveLedger ledger;
    Decomposition collected;
};

DriverResult drive(const SkewProduct& f, const AdmissibleCurve& curve, const Mat& field, int k_max,
                   const CurveOptions& opt, int collect_level) {
    if (k_max < 0) throw std::invalid_argument("k must be non-negative");
    if (field.cols() != curve.size() || field.rows() != f.fiber_dim()) throw std::invalid_argument("field shape");
    if (opt.paths < 1) throw std::invalid_argument("paths must be positive");
    Context ctx(f, curve.block, opt);
    ctx.gamma_length = curve.length();
    DriverResult res;
    CurveLedger& out = res.ledger;
    out.block = curve.block;
    out.r = f.r();
    out.curve_length = curve.length();
    out.bounds = ctx.bounds;
    out.curve_certificate = certify_curve(f, curve, ctx.bounds);
    out.start_field = holder_certificate(f, curve, field, opt.theta, opt.holder_p, opt.mode);

    // β, ζ per block for the two-term bound and Q.
    const FiberMap& s = f.fiber();
    std::vector<double> betas, zetas;
    for (int i = 0; i < s.block_count(); ++i) {
        const bool given = i == curve.block && std::isfinite(opt.beta) && std::isfinite(opt.zeta);
        betas.push_back(given ? opt.beta : estimate_beta(s, i, ctx.cones[i], ctx.crit[i], opt.grid_n).value);
        zetas.push_back(given ? opt.zeta : estimate_zeta(s, i, opt.grid_n).value);
    }
    out.beta = betas[curve.block];
    out.zeta = zetas[curve.block];
    out.crit_length = ctx.crit[curve.block].total_length();
    const double log_beta = std::log(out.beta), log_zeta = std::log(out.zeta);
    out.good_bound = 0.9 * (kTwoPi - out.crit_length) / kTwoPi * log_beta + out.crit_length / kTwoPi * log_zeta;
    try {
        out.q = q_bound(betas, zetas, opt.sigma);
    } catch (const DegenerateInput& e) {
        out.q_diagnostic = e.what();
    }

    const bool measure_kl = true;
    const int kl_limit = 8;
    long next_id = 1;

    // Level 0: the curve itself.
    auto root = std::make_shared<FieldPiece>();
    root->curve = curve;
    root->field = field;
    root->jacobian.assign(curve.size(), 1.0);
    {
        Mat jac;
        std::vector<double> g(curve.size());
        for (int k = 0; k < curve.size(); ++k)
            g[k] = log_growth(f, curve.points.col(k).tail(f.fiber_dim()), field.col(k), opt.mode, jac);
        auto eval = [&](double t, Vec& z, double& gv) {
            z = curve.position(t);
            gv = log_growth(f, z.tail(f.fiber_dim()), interpolate_field(f, curve, field, t, opt.mode), opt.mode, jac);
        };
        const PieceStats st = piece_stats(ctx, *root, curve.s, g, eval, curve.full(), measure_kl);
        Accumulator acc;
        acc.lv.k = 0;
        acc.lv.exhaustive = true;
        acc.add(st, curve.full(), 1.0, ctx, out.good_bound, log_zeta);
        acc.finish(ctx, nullptr);
        out.levels.push_back(acc.lv);
        if (opt.record_pieces)
            out.rows.push_back({0, 0, 0, st.cls, curve.full(), st.min_j, st.max_j, st.e, st.length});
        if (collect_level == 0) {
            res.collected.k = 0;
            res.collected.exhaustive = true;
            res.collected.count = 1.0;
            res.collected.pieces.push_back(*root);
        }
    }

    // Sampled points, stratified in arclength.
    std::vector<Node> nodes{{root, 1.0, 0}};
    std::vector<Path> paths(opt.paths);
    {
        Philox4x32 rng(opt.seed, 0);
        for (int m = 0; m < opt.paths; ++m) {
            const double target = (m + rng.uniform()) / opt.paths * curve.length();
            const auto it = std::upper_bound(curve.arclength.begin(), curve.arclength.end(), target);
            const int k = std::clamp(static_cast<int>(it - curve.arclength.begin()) - 1, 0, curve.size() - 2);
            const double seg = curve.arclength[k + 1] - curve.arclength[k];
            const double u = seg > 0.0 ? (target - curve.arclength[k]) / seg : 0.0;
            paths[m] = {0, curve.s[k] + u * (curve.s[k + 1] - curve.s[k])};
        }
    }

    for (int k = 1; k <= k_max; ++k) {
        Accumulator acc;
        acc.lv.k = k;
        acc.lv.exhaustive = nodes.size() == 1 && nodes[0].id == 0;
        std::map<int, std::vector<int>> members;
        for (int m = 0; m < opt.paths; ++m) members[paths[m].node].push_back(m);
        std::vector<Node> next_nodes;
        std::vector<Path> next_paths(opt.paths);
        int kl_used = 0;
        if (collect_level == k) {
            res.collected.k = k;
            res.collected.exhaustive = acc.lv.exhaustive;
        }
        for (const auto& [node_index, idxs] : members) {
            const Node& node = nodes[node_index];
            const FieldPiece& parent = *node.piece;
            const double w = static_cast<double>(idxs.size()) / (opt.paths * node.mass);
            // Path targets sorted by parameter.
            std::vector<int> order = idxs;
            std::sort(order.begin(), order.end(), [&](int a, int b) { return paths[a].t < paths[b].t; });
            size_t cursor = 0;
            Cut cut;
            auto visit = [&](const ChildInfo& info, FieldPiece&& child, const std::vector<double>& ts,
                             const std::vector<Image>& ims) {
                std::vector<double> g(ims.size());
                for (size_t i = 0; i < ims.size(); ++i) g[i] = ims[i].g;
                const Vec anchor = ims[0].z - child.curve.points.col(0);
                auto eval = [&](double t, Vec& z, double& gv) {
                    const Image im = ctx.eng.image(parent, t);
                    z = im.z - anchor;
                    gv = im.g;
                };
                const bool kl = measure_kl && info.full && kl_used < kl_limit;
                if (kl) ++kl_used;
                const PieceStats st = piece_stats(ctx, child, ts, g, eval, info.full, kl);
                acc.add(st, info.full, w, ctx, out.good_bound, log_zeta);
                if (opt.record_pieces)
                    out.rows.push_back({k, node.id, info.j, st.cls, info.full, st.min_j, st.max_j, st.e, st.length});
                // Paths landing in this child move down.
                int created = -1;
                while (cursor < order.size() && paths[order[cursor]].t <= info.t_b) {
                    const int m = order[cursor];
                    if (paths[m].t < info.t_a) {
                        ++cursor;
                        continue;
                    }
                    if (created < 0) {
                        Node nn;
                        nn.piece = std::make_shared<FieldPiece>(child);
                        nn.mass = st.int_j / ctx.gamma_length;
                        nn.id = next_id++;
                        next_nodes.push_back(nn);
                        created = static_cast<int>(next_nodes.size()) - 1;
                    }
                    double dv;
                    const double sv = cut.orient * (ctx.eng.pi_coord(parent, paths[m].t, dv) - cut.base0) - info.start;
                    next_paths[m] = {created, std::clamp(sv, 0.0, child.curve.displacement())};
                    ++cursor;
                }
                if (collect_level == k) res.collected.pieces.push_back(std::move(child));
            };
            for_each_child(ctx.eng, parent, opt.samples_per_piece, opt.max_refine, cut, visit);
        }
        acc.finish(ctx, &out.levels.back());
        if (collect_level == k) res.collected.count = acc.lv.count;
        out.levels.push_back(acc.lv);
        nodes = std::move(next_nodes);
        paths = std::move(next_paths);
    }
    for (size_t k = 1; k < out.levels.size(); ++k)
        if (out.levels[k].distortion < out.levels[k - 1].distortion) out.distortion_monotone = false;
    return res;
}

Mat default_field(const SkewProduct& f, const AdmissibleCurve& c, FieldMode mode) {
    Vec x = Vec::Zero(f.fiber_dim());
    if (mode == FieldMode::product) {
        x[f.fiber().block_offset(c.block)] = 1.0;
    } else {
        for (int i = 0; i < f.fiber().block_count(); ++i) x[f.fiber().block_offset(i)] = 1.0;
    }
    return constant_field(f, c, x, mode);
}

}  // namespace

Decomposition decompose_image(const SkewProduct& f, const AdmissibleCurve& c, int k, const CurveOptions& opt) {
    return drive(f, c, default_field(f, c, opt.mode), k, opt, k).collected;
}

PushResult push_adapted_field(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, int k,
                              const CurveOptions& opt) {
    PushResult out;
    out.decomposition = drive(f, c, field, k, opt, k).collected;
    out.all_certified = true;
    for (const FieldPiece& p : out.decomposition.pieces) {
        if (!p.curve.full()) continue;
        out.certificates.push_back(holder_certificate(f, p.curve, p.field, opt.theta, opt.holder_p, opt.mode));
        out.all_certified = out.all_certified && out.certificates.back().certified;
    }
    return out;
}

CurveLedger ledger_sums(const SkewProduct& f, const AdmissibleCurve& c, const Mat& field, int k_max,
                        const CurveOptions& opt) {
    return drive(f, c, field, k_max, opt, -1).ledger;
}

std::vector<double> distortion_constant(const SkewProduct& f, const AdmissibleCurve& c, int k_max,
                                        const CurveOptions& opt) {
    const CurveLedger led = drive(f, c, default_field(f, c, opt.mode), k_max, opt, -1).ledger;
    std::vector<double> out;
    for (const auto& lv : led.levels) out.push_back(lv.distortion);
    return out;
}

}  // namespace skewlab
