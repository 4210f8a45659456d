#include "skewlab/cones.hpp"

#include "skewlab/linalg.hpp"

#include <limits>
#include <random>

namespace skewlab {

Cone::Cone(Mat axis_basis, Mat complement_basis, double aperture) : alpha_(aperture) {
    if (!(aperture > 0.0) || !std::isfinite(aperture)) throw std::invalid_argument("cone aperture must be positive");
    if (axis_basis.rows() != complement_basis.rows() || axis_basis.cols() == 0 ||
        axis_basis.cols() + complement_basis.cols() != axis_basis.rows())
        throw std::invalid_argument("cone bases must split the ambient space");
    axis_ = orthonormalize(axis_basis);
    comp_ = complement_basis.cols() > 0 ? orthonormalize(complement_basis) : Mat(axis_basis.rows(), 0);
    Mat frame(axis_.rows(), axis_.rows());
    frame << axis_, comp_;
    Eigen::FullPivLU<Mat> lu(frame);
    if (!lu.isInvertible()) throw std::invalid_argument("cone axis and complement are not transversal");
    coords_ = lu.inverse();
}

std::pair<double, double> Cone::split_norms(const Vec& v) const {
    const Vec c = coords_ * v;
    const Eigen::Index k = axis_.cols();
    return {c.head(k).norm(), c.tail(c.size() - k).norm()};
}

double Cone::slack(const Vec& v) const {
    const double n = v.norm();
    if (n == 0.0) return std::numeric_limits<double>::infinity();
    auto [e, f] = split_norms(v);
    return (alpha_ * e - f) / n;
}

Cone Cone::complement() const {
    if (comp_.cols() == 0) throw std::invalid_argument("cone with full axis has no complement");
    return Cone(comp_, axis_, 1.0 / alpha_);
}

bool cone_contains(const Cone& c, const Vec& v, bool closed) {
    if (v.size() != c.ambient_dimension()) throw std::invalid_argument("cone dimension mismatch");
    if (v.isZero(0.0)) return true;
    auto [e, f] = c.split_norms(v);
    return closed ? f <= c.aperture() * e : f < c.aperture() * e;
}

Cone coordinate_cone(int n, int axis_index, double aperture) {
    if (axis_index < 0 || axis_index >= n) throw std::out_of_range("cone axis index");
    Mat axis = Mat::Zero(n, 1);
    axis(axis_index, 0) = 1.0;
    Mat comp(n, n - 1);
    int col = 0;
    for (int i = 0; i < n; ++i) {
        if (i == axis_index) continue;
        comp.col(col) = Vec::Unit(n, i);
        ++col;
    }
    return Cone(axis, comp, aperture);
}

Cone delta_cone(double r) {
    if (!(r > 0.0)) throw std::invalid_argument("delta cone needs r > 0");
    return coordinate_cone(2, 0, std::pow(r, 0.25));
}

std::vector<Vec> sphere_directions(int n, int count) {
    std::vector<Vec> out;
    out.reserve(static_cast<size_t>(count));
    if (n == 1) {
        out.push_back(Vec::Ones(1));
        return out;
    }
    if (n == 2) {
        for (int j = 0; j < count; ++j) {
            const double t = kTwoPi * j / count;
            Vec v(2);
            v << std::cos(t), std::sin(t);
            out.push_back(v);
        }
        return out;
    }
    if (n == 3) {
        const double golden = kPi * (3.0 - std::sqrt(5.0));
        for (int j = 0; j < count; ++j) {
            const double z = 1.0 - 2.0 * (j + 0.5) / count;
            const double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
            Vec v(3);
            v << rad * std::cos(golden * j), rad * std::sin(golden * j), z;
            out.push_back(v);
        }
        return out;
    }
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> g;
    for (int j = 0; j < count; ++j) {
        Vec v(n);
        for (int i = 0; i < n; ++i) v[i] = g(rng);
        out.push_back(v.normalized());
    }
    return out;
}

namespace {

void require_nonsingular(const Mat& m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("cone_image needs a square matrix");
    Vec s = singular_values(m);
    if (s[s.size() - 1] <= 1e-14 * std::max(1.0, s[0])) throw std::invalid_argument("cone_image: singular matrix");
}

// Rays e + t α f for t in [-1, 1], 2-D case.
Vec planar_ray(const Cone& c, double t) {
    return c.axis_basis().col(0) + t * c.aperture() * c.complement_basis().col(0);
}

// Pushes an arbitrary direction into the closed cone: the F part is clipped to α‖e‖.
bool into_cone(const Cone& c, const Vec& u, const Mat& frame_inv, Vec& out) {
    const Vec coords = frame_inv * u;
    const Eigen::Index k = c.axis_dimension();
    const Vec ce = coords.head(k), cf = coords.tail(coords.size() - k);
    const double ne = ce.norm();
    if (ne == 0.0) return false;
    const double nf = cf.norm();
    const double cap = c.aperture() * ne;
    Vec f = c.complement_basis() * cf;
    if (nf > cap) f *= cap / nf;
    out = c.axis_basis() * ce + f;
    return true;
}

Mat frame_inverse(const Cone& c) {
    Mat frame(c.ambient_dimension(), c.ambient_dimension());
    frame << c.axis_basis(), c.complement_basis();
    return frame.inverse();
}

// Minimizes `score` over the closed cone by sampling plus a shrinking local search.
template <class Score>
std::pair<Vec, double> minimize_over_cone(const Cone& c, int samples, Score score) {
    const int n = c.ambient_dimension();
    const Mat finv = frame_inverse(c);
    Vec best;
    double best_val = std::numeric_limits<double>::infinity();
    auto consider = [&](const Vec& v) {
        const double s = score(v);
        if (s < best_val) {
            best_val = s;
            best = v;
        }
    };
    for (int j = 0; j < c.axis_dimension(); ++j) consider(c.axis_basis().col(j));
    Vec v;
    for (const Vec& u : sphere_directions(n, samples))
        if (into_cone(c, u, finv, v)) consider(v);
    std::mt19937_64 rng(0xc0ffee);
    std::normal_distribution<double> g;
    double step = 0.2;
    for (int round = 0; round < 40; ++round) {
        for (int trial = 0; trial < 4 * n; ++trial) {
            Vec d(n);
            for (int i = 0; i < n; ++i) d[i] = g(rng);
            Vec cand = best.normalized() + step * d.normalized();
            if (into_cone(c, cand, finv, v)) consider(v);
        }
        step *= 0.7;
    }
    return {best, best_val};
}

}  // namespace

ConeImageResult cone_image(const Mat& m, const Cone& source, const Cone& target, bool closed, int samples) {
    if (m.cols() != source.ambient_dimension() || m.rows() != target.ambient_dimension())
        throw std::invalid_argument("cone_image dimension mismatch");
    require_nonsingular(m);
    ConeImageResult res;
    const double tol = closed ? 1e-12 : 0.0;
    auto record = [&](const Vec& v) {
        res.rays.push_back(v);
        res.images.push_back(m * v);
    };
    if (source.ambient_dimension() == 2 && source.axis_dimension() == 1 && target.axis_dimension() == 1) {
        record(planar_ray(source, -1.0));
        record(planar_ray(source, 1.0));
        const int interior = 64;
        for (int j = 1; j < interior; ++j) record(planar_ray(source, -1.0 + 2.0 * j / interior));
        res.margin = std::numeric_limits<double>::infinity();
        for (const Vec& w : res.images) res.margin = std::min(res.margin, target.slack(w));
        const bool ends = target.slack(res.images[0]) >= -tol && target.slack(res.images[1]) >= -tol &&
                          (closed || (target.slack(res.images[0]) > 0.0 && target.slack(res.images[1]) > 0.0));
        // With both end rays inside, the image arc is either inside the target or
        // covers its whole complement; the complement axis settles which.
        const Vec back = m.inverse() * target.complement_basis().col(0);
        const bool covers_complement = cone_contains(source, back, true);
        res.contained = ends && !covers_complement;
        res.rays_examined = static_cast<int>(res.rays.size());
        return res;
    }
    auto [worst, val] =
        minimize_over_cone(source, samples, [&](const Vec& v) { return target.slack(Vec(m * v)); });
    for (const Vec& u : sphere_directions(source.ambient_dimension(), std::min(samples, 64))) {
        Vec v;
        if (into_cone(source, u, frame_inverse(source), v)) record(v);
    }
    record(worst);
    res.margin = val;
    res.contained = closed ? val >= -tol : val > 0.0;
    res.rays_examined = samples;
    return res;
}

double cone_min_norm(const Mat& m, const Cone& c, int samples) {
    if (m.cols() != c.ambient_dimension()) throw std::invalid_argument("cone_min_norm dimension mismatch");
    if (c.ambient_dimension() == 2 && c.axis_dimension() == 1) {
        const Vec e = c.axis_basis().col(0), f = c.aperture() * c.complement_basis().col(0);
        const Vec me = m * e, mf = m * f;
        // ‖M(e + t f)‖² / ‖e + t f‖² as a ratio of quadratics in t.
        const double a0 = me.squaredNorm(), a1 = 2.0 * me.dot(mf), a2 = mf.squaredNorm();
        const double b0 = e.squaredNorm(), b1 = 2.0 * e.dot(f), b2 = f.squaredNorm();
        auto ratio = [&](double t) { return (a0 + a1 * t + a2 * t * t) / (b0 + b1 * t + b2 * t * t); };
        double best = std::min(ratio(-1.0), ratio(1.0));
        const double qa = a2 * b1 - a1 * b2, qb = 2.0 * (a2 * b0 - a0 * b2), qc = a1 * b0 - a0 * b1;
        auto try_root = [&](double t) {
            if (t >= -1.0 && t <= 1.0) best = std::min(best, ratio(t));
        };
        if (std::abs(qa) < 1e-300) {
            if (qb != 0.0) try_root(-qc / qb);
        } else {
            const double disc = qb * qb - 4.0 * qa * qc;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                const double q = -0.5 * (qb + (qb >= 0 ? sq : -sq));
                if (q != 0.0) {
                    try_root(q / qa);
                    try_root(qc / q);
                }
            }
        }
        return std::sqrt(std::max(0.0, best));
    }
    auto [v, val] = minimize_over_cone(c, samples, [&](const Vec& w) { return (m * w).norm() / w.norm(); });
    return val;
}

// ---------------------------------------------------------------- bands

CriticalRegion::CriticalRegion(int block_index, int coordinate_index, std::vector<Band> bands)
    : block_(block_index), coord_(coordinate_index) {
    std::vector<Band> pieces;
    for (const Band& b : bands) {
        if (!(b.b >= b.a) || !std::isfinite(b.a) || !std::isfinite(b.b)) throw std::invalid_argument("invalid band");
        if (b.b - b.a >= kTwoPi) {
            pieces = {{0.0, kTwoPi}};
            break;
        }
        const double a = wrap_angle(b.a);
        const double e = a + (b.b - b.a);
        if (e > kTwoPi) {
            pieces.push_back({a, kTwoPi});
            pieces.push_back({0.0, e - kTwoPi});
        } else {
            pieces.push_back({a, e});
        }
    }
    std::sort(pieces.begin(), pieces.end(), [](const Band& x, const Band& y) { return x.a < y.a; });
    for (const Band& p : pieces) {
        if (!bands_.empty() && p.a <= bands_.back().b)
            bands_.back().b = std::max(bands_.back().b, p.b);
        else
            bands_.push_back(p);
    }
}

double CriticalRegion::total_length() const {
    double l = 0.0;
    for (const Band& b : bands_) l += b.length();
    return l;
}

bool CriticalRegion::contains(double x) const {
    const double w = wrap_angle(x);
    for (const Band& b : bands_)
        if (w >= b.a && w <= b.b) return true;
    // The closed band ending at 2π also contains 0.
    return !bands_.empty() && bands_.back().b >= kTwoPi && w == 0.0;
}

bool CriticalRegion::contains_point(const FiberMap& s, const Vec& y) const {
    return contains(y[s.block_offset(block_) + coord_]);
}

std::vector<Band> CriticalRegion::complement() const {
    std::vector<Band> out;
    double cursor = 0.0;
    for (const Band& b : bands_) {
        if (b.a > cursor) out.push_back({cursor, b.a});
        cursor = std::max(cursor, b.b);
    }
    if (cursor < kTwoPi) out.push_back({cursor, kTwoPi});
    return out;
}

CriticalRegion CriticalRegion::widened(double pad) const {
    std::vector<Band> w;
    for (const Band& b : bands_) w.push_back({b.a - pad, b.b + pad});
    return CriticalRegion(block_, coord_, w);
}

CriticalRegion standard_critical_region(double r, int block_index) {
    if (!(r > 1.0)) throw std::invalid_argument("critical region needs r > 1");
    const double c = 1.0 / std::sqrt(r);
    const double b1 = std::acos(c), b2 = std::acos(-c);
    return CriticalRegion(block_index, 0, {{b1, b2}, {kTwoPi - b2, kTwoPi - b1}});
}

}  // namespace skewlab
