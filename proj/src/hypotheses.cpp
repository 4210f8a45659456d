#include "skewlab/hypotheses.hpp"

#include "skewlab/linalg.hpp"

#include <limits>
#include <random>
#include <sstream>

namespace skewlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kGolden = 0.6180339887498949;

struct Axis {
    int coord;
    int n;
};

// Visits the tensor grid with y = 0 off the listed axes.
template <class F>
void for_each_grid(int dim, const std::vector<Axis>& axes, F&& visit) {
    Vec y = Vec::Zero(dim);
    std::vector<int> idx(axes.size(), 0);
    while (true) {
        for (size_t a = 0; a < axes.size(); ++a) y[axes[a].coord] = kTwoPi * idx[a] / axes[a].n;
        visit(y);
        size_t a = 0;
        while (a < axes.size()) {
            if (++idx[a] < axes[a].n) break;
            idx[a] = 0;
            ++a;
        }
        if (a == axes.size()) break;
    }
}

std::vector<Axis> dependency_axes(const FiberMap& s, int block, int designated, int grid_n) {
    const auto& deps = s.depends_on().at(block);
    const int others = static_cast<int>(deps.size()) - 1;
    const int side = others >= 2 ? std::min(grid_n, 16) : std::min(grid_n, 64);
    std::vector<Axis> axes;
    axes.push_back({designated, grid_n});
    for (int c : deps)
        if (c != designated) axes.push_back({c, side});
    return axes;
}

double golden_min(const std::function<double(double)>& g, double a, double b, int iters, double& arg) {
    double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
    double gc = g(c), gd = g(d);
    for (int i = 0; i < iters; ++i) {
        if (gc < gd) {
            b = d;
            d = c;
            gd = gc;
            c = b - kGolden * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + kGolden * (b - a);
            gd = g(d);
        }
    }
    const double ga = g(a), gb = g(b);
    double best = gc;
    arg = c;
    if (gd < best) best = gd, arg = d;
    if (ga < best) best = ga, arg = a;
    if (gb < best) best = gb, arg = b;
    return best;
}

// Largest interval inside [lo, hi] around x avoiding the region's bands.
void clip_to_complement(const CriticalRegion& crit, double x, double& lo, double& hi) {
    constexpr double eps = 1e-13;
    for (const Band& band : crit.bands()) {
        for (double shift : {-kTwoPi, 0.0, kTwoPi}) {
            const double a = band.a + shift, b = band.b + shift;
            if (b < x && b + eps > lo) lo = b + eps;
            if (a > x && a - eps < hi) hi = a - eps;
        }
    }
}

GridEstimate grid_minimize(const FiberMap& s, int block, int designated, const CriticalRegion* crit, int grid_n,
                           const std::function<double(const Vec&)>& f) {
    if (grid_n < 4) throw std::invalid_argument("grid_n must be at least 4");
    const auto axes = dependency_axes(s, block, designated, grid_n);
    GridEstimate est;
    est.value = kInf;
    est.grid_n = grid_n;
    for_each_grid(s.dimension(), axes, [&](const Vec& y) {
        if (crit && crit->contains(y[designated])) return;
        ++est.evaluations;
        const double v = f(y);
        if (v < est.value) {
            est.value = v;
            est.location = y;
        }
    });
    if (est.location.size() == 0) return est;

    Vec y = est.location;
    for (int sweep = 0; sweep < 2; ++sweep) {
        for (const Axis& ax : axes) {
            const double h = kTwoPi / ax.n;
            const double x = y[ax.coord];
            double lo = x - h, hi = x + h;
            if (crit && ax.coord == designated) clip_to_complement(*crit, x, lo, hi);
            if (!(hi > lo)) continue;
            Vec trial = y;
            double arg = x;
            const double v = golden_min(
                [&](double t) {
                    trial[ax.coord] = t;
                    ++est.evaluations;
                    return f(trial);
                },
                lo, hi, 40, arg);
            if (v < est.value) {
                est.value = v;
                y[ax.coord] = arg;
            }
        }
    }
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = wrap_angle(y[i]);
    est.location = y;
    return est;
}

int designated_coordinate(const FiberMap& s, const CriticalRegion& crit, int block) {
    if (crit.block_index() != block) throw std::invalid_argument("critical region belongs to another block");
    return s.block_offset(block) + crit.coordinate_index();
}

double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (m == -kInf) return -kInf;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

Mat power(const Mat& m, int k) {
    Mat out = Mat::Identity(m.rows(), m.cols());
    const Mat base = k >= 0 ? m : Mat(m.inverse());
    for (int i = 0; i < std::abs(k); ++i) out = out * base;
    return out;
}

// Π A^{K - L} as a real matrix.
Mat kick_times_inverse_base(const SkewProduct& f) {
    const int e = f.kick_iterates() - f.base_iterates();
    const Mat a = to_real(e >= 0 ? f.base().entries() : f.base().inverse_entries());
    Mat p = Mat::Identity(a.rows(), a.cols());
    for (int i = 0; i < std::abs(e); ++i) p = a * p;
    return to_real(f.projection()) * p;
}

// ‖dφ|E^u‖ etc. restricted through the splitting: Π Q_u M_u^{K - L}.
Mat kick_back_on_unstable(const SkewProduct& f) {
    const Splitting& sp = f.base().splitting();
    return to_real(f.projection()) * sp.unstable_basis *
           power(sp.unstable_restriction, f.kick_iterates() - f.base_iterates());
}

bool non_increasing(const std::vector<double>& v) {
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[i - 1] * (1.0 + 1e-12)) return false;
    return true;
}

}  // namespace

Mat block_jacobian(const FiberMap& s, int block, const Vec& y) {
    const int off = s.block_offset(block), n = s.block_sizes().at(block);
    return s.jacobian(y).block(off, off, n, n);
}

GridEstimate estimate_beta(const FiberMap& s, int block, const Cone& cone, const CriticalRegion& crit, int grid_n) {
    if (cone.ambient_dimension() != s.block_sizes().at(block)) throw std::invalid_argument("cone dimension");
    const int designated = designated_coordinate(s, crit, block);
    return grid_minimize(s, block, designated, &crit, grid_n,
                         [&](const Vec& y) { return cone_min_norm(block_jacobian(s, block, y), cone, 400); });
}

GridEstimate estimate_zeta(const FiberMap& s, int block, int grid_n) {
    const auto& deps = s.depends_on().at(block);
    const int designated = deps.empty() ? s.block_offset(block) : deps.front();
    return grid_minimize(s, block, designated, nullptr, grid_n,
                         [&](const Vec& y) { return min_norm(block_jacobian(s, block, y)); });
}

S1Result check_S1(const std::vector<S1Block>& blocks, int sigma, double threshold) {
    if (blocks.empty()) throw std::invalid_argument("no blocks");
    if (sigma < 1) throw std::invalid_argument("sigma must be positive");
    S1Result res;
    double max_len = 0.0, min_gap = kInf, min_prod = kInf;
    for (const S1Block& b : blocks) {
        const double prod = std::pow(b.beta, 6.0) * std::pow(b.zeta, 1.0 / sigma);
        res.products.push_back(prod);
        max_len = std::max(max_len, b.crit_length);
        min_gap = std::min(min_gap, b.beta - b.zeta);
        min_prod = std::min(min_prod, prod);
    }
    res.length = {max_len < threshold * kTwoPi, threshold * kTwoPi - max_len};
    res.beta_gt_zeta = {min_gap > 0.0, min_gap};
    res.product_gt_one = {min_prod > 1.0, min_prod - 1.0};
    res.pass = res.length.pass && res.beta_gt_zeta.pass && res.product_gt_one.pass;
    return res;
}

S2Result check_S2(const FiberMap& s, int block, const Cone& cone, const CriticalRegion& crit, double r_target,
                  int sample_n, int band_grid, int directions) {
    const int n = s.block_sizes().at(block);
    if (cone.ambient_dimension() != n) throw std::invalid_argument("cone dimension");
    if (sample_n < 1 || band_grid < 8 || directions < 1) throw std::invalid_argument("S-2 sampling sizes");
    const int designated = designated_coordinate(s, crit, block);
    std::vector<int> deps{designated};
    for (int c : s.depends_on().at(block))
        if (c != designated) deps.push_back(c);
    S2Result res;
    res.band_grid = band_grid;

    // (a) cone invariance off the critical region on a Kronecker sequence.
    std::vector<double> alphas;
    for (size_t j = 0; j < deps.size(); ++j) alphas.push_back(std::fmod(std::sqrt(2.0 + 3.0 * j) * 0.5 + 0.1, 1.0));
    alphas[0] = kGolden;
    res.invariance_pass = true;
    res.invariance_margin = kInf;
    Vec y = Vec::Zero(s.dimension());
    for (long t = 1; res.invariance_samples < sample_n && t < 20L * sample_n; ++t) {
        for (size_t j = 0; j < deps.size(); ++j) y[deps[j]] = kTwoPi * std::fmod(t * alphas[j], 1.0);
        if (crit.contains(y[designated])) continue;
        ++res.invariance_samples;
        auto img = cone_image(block_jacobian(s, block, y), cone, cone, true, 200);
        res.invariance_margin = std::min(res.invariance_margin, img.margin);
        if (!img.contained) res.invariance_pass = false;
    }

    // (b) for each direction, the widest band of the designated coordinate where the
    // direction lands in the cone for every value of the remaining coordinates.
    std::vector<Axis> rest;
    const int side = deps.size() > 2 ? 8 : 16;
    for (int c : deps)
        if (c != designated) rest.push_back({c, side});
    std::vector<std::vector<Mat>> jac(band_grid);
    for (int i = 0; i < band_grid; ++i) {
        const double x = kTwoPi * i / band_grid;
        if (rest.empty()) {
            Vec z = Vec::Zero(s.dimension());
            z[designated] = x;
            jac[i].push_back(block_jacobian(s, block, z));
        } else {
            for_each_grid(s.dimension(), rest, [&](const Vec& z0) {
                Vec z = z0;
                z[designated] = x;
                jac[i].push_back(block_jacobian(s, block, z));
            });
        }
    }
    std::vector<Vec> dirs;
    if (n == 2) {
        for (int j = 0; j < directions; ++j) {
            const double th = kPi * j / directions;
            Vec v(2);
            v << std::cos(th), std::sin(th);
            dirs.push_back(v);
        }
    } else {
        dirs = sphere_directions(n, directions);
    }
    res.directions = static_cast<int>(dirs.size());
    res.band_width = kInf;
    const double h = kTwoPi / band_grid;
    std::vector<char> mask(band_grid);
    for (const Vec& v : dirs) {
        for (int i = 0; i < band_grid; ++i) {
            bool ok = true;
            for (const Mat& m : jac[i])
                if (!cone_contains(cone, m * v, true)) {
                    ok = false;
                    break;
                }
            mask[i] = ok;
        }
        int best = 0, best_start = 0;
        bool all = true;
        for (char c : mask) all = all && c;
        if (all) {
            best = band_grid;
        } else {
            int start = 0;
            while (mask[start]) ++start;  // begin just after a gap so runs do not wrap twice
            int run = 0, run_start = 0;
            for (int k = 1; k <= band_grid; ++k) {
                const int i = (start + k) % band_grid;
                if (mask[i]) {
                    if (run == 0) run_start = i;
                    ++run;
                    if (run > best) best = run, best_start = run_start;
                } else {
                    run = 0;
                }
            }
        }
        const double width = best * h;
        if (width < res.band_width) {
            res.band_width = width;
            res.worst_band = {best_start * h, best_start * h + width};
            res.worst_direction = v;
        }
    }
    res.band_pass = res.band_width >= r_target;
    res.pass = res.invariance_pass && res.band_pass;
    return res;
}

A1Result check_A1(const SkewProduct& f, int p_max, double threshold) {
    A1Result res;
    res.threshold = threshold;
    const NormBounds& nb = f.fiber().norm_bounds();
    res.dS = nb.d;
    res.dS_inv = nb.d_inv;
    res.d2S = nb.d2;
    res.norm_dphi = op_norm(f.kick_derivative());
    res.norm_dphi_stable = op_norm(f.kick_on_stable());
    res.min_dphi_unstable = min_norm(f.kick_on_unstable());
    res.lambda_r = f.lambda_r();
    res.ratio_kick = res.norm_dphi / res.lambda_r;
    if (res.min_dphi_unstable <= 0.0) {
        res.degenerate = true;
        res.ratio_coupling = kInf;
        res.diagnostic = "m(dphi|E^u) = 0: coupling does not see the unstable direction";
    } else {
        res.ratio_coupling = (res.norm_dphi_stable + std::pow(res.dS, 3.0)) / res.min_dphi_unstable;
    }
    res.i_pass = !res.degenerate && res.ratio_coupling < threshold && res.ratio_kick < threshold;

    const double log_lambda = std::log(res.lambda_r);
    const double log_dphi = std::log(res.norm_dphi);
    const double l1 = std::log(res.dS_inv * res.dS), l2 = std::log(res.dS_inv * res.d2S);
    for (int p = 1; p <= p_max && res.norm_dphi > 0.0; ++p) {
        const double first = log_lambda - p * log_dphi;
        const double second = log_sum_exp(3.0 * p * l1, 3.0 * p * l2) - log_lambda;
        if (first < 0.0 && second < 0.0) {
            res.p_witness = p;
            res.ii_first = std::exp(first);
            res.ii_second = std::exp(second);
            break;
        }
    }
    res.ii_pass = res.p_witness > 0;
    res.pass = res.i_pass && res.ii_pass;
    return res;
}

A2Result check_A2(const SkewProduct& f, double threshold) {
    A2Result res;
    const Mat du = f.kick_on_unstable();
    res.norm_dphi_unstable = op_norm(du);
    double mn = kInf;
    for (int i = 0; i < f.fiber().block_count(); ++i) {
        const double m = min_norm(f.block_projection(i, 0) * du);
        res.block_min.push_back(m);
        mn = std::min(mn, m);
    }
    if (!(mn > 0.0)) {
        res.degenerate = true;
        res.K = kInf;
        std::ostringstream os;
        os << "min_i m(P_i dphi|E^u) = 0 (unstable dimension " << du.cols() << ")";
        res.diagnostic = os.str();
        return res;
    }
    res.K = res.norm_dphi_unstable / mn;
    res.pass = res.K - 1.0 < threshold;
    return res;
}

A3A4Result check_A3_A4(const SkewProduct& f, int grid_n, int q_max, double threshold) {
    const FiberMap& s = f.fiber();
    if (!s.has_inverse()) throw std::invalid_argument("fiber map has no inverse");
    A3A4Result res;
    const int d = s.dimension();
    const int side = d <= 2 ? grid_n : std::min(grid_n, 12);
    res.grid_n = side;
    res.tau_r = f.tau_r();

    const Mat back_u = kick_back_on_unstable(f);
    const Mat back = kick_times_inverse_base(f);
    const Mat stable = f.kick_on_stable();
    const int blocks = s.block_count();
    std::vector<Mat> proj;
    for (int i = 0; i < blocks; ++i) proj.push_back(f.block_projection(i, 0));

    res.inf_kick_stable = kInf;
    res.a4_block_min.assign(blocks, kInf);
    std::vector<Axis> axes;
    for (int c = 0; c < d; ++c) axes.push_back({c, side});
    Mat jinv(d, d);
    for_each_grid(d, axes, [&](const Vec& y) {
        s.inverse_jacobian_into(y, jinv);
        res.sup_kick_back_unstable = std::max(res.sup_kick_back_unstable, op_norm(jinv * back_u));
        res.sup_kick_back = std::max(res.sup_kick_back, op_norm(jinv * back));
        const Mat js = jinv * stable;
        res.sup_kick_stable = std::max(res.sup_kick_stable, op_norm(js));
        res.inf_kick_stable = std::min(res.inf_kick_stable, min_norm(js));
        for (int i = 0; i < blocks; ++i) res.a4_block_min[i] = std::min(res.a4_block_min[i], min_norm(proj[i] * js));
    });

    const NormBounds& nb = s.norm_bounds();
    if (res.inf_kick_stable > 0.0) {
        res.a3_ratio_coupling =
            res.tau_r * (res.sup_kick_back_unstable + std::pow(nb.d_inv, 3.0)) / res.inf_kick_stable;
    } else {
        res.a3_ratio_coupling = kInf;
        res.diagnostic = "m(dS^-1 dphi|E^s) = 0";
    }
    res.a3_ratio_kick = res.tau_r * res.sup_kick_back;
    res.a3_i_pass = res.a3_ratio_coupling < threshold && res.a3_ratio_kick < threshold;

    const double log_tau = std::log(res.tau_r);
    const double lb = std::log(res.sup_kick_back);
    const double l1 = std::log(nb.d * nb.d_inv), l2 = std::log(nb.d * nb.d2_inv);
    for (int q = 1; q <= q_max && res.sup_kick_back > 0.0; ++q) {
        const bool grows = log_tau + q * lb > 0.0;
        const bool small = log_tau + log_sum_exp(3.0 * q * l1, 3.0 * q * l2) < 0.0;
        if (grows && small) {
            res.q_witness = q;
            break;
        }
    }
    res.a3_ii_pass = res.q_witness > 0;
    res.a3_pass = res.a3_i_pass && res.a3_ii_pass;

    double a4_min = kInf;
    for (double m : res.a4_block_min) a4_min = std::min(a4_min, m);
    if (!(a4_min > 0.0)) {
        res.a4_degenerate = true;
        res.a4_ratio = kInf;
        if (!res.diagnostic.empty()) res.diagnostic += "; ";
        res.diagnostic += "min_i m(P_i dS^-1 dphi|E^s) = 0";
    } else {
        res.a4_ratio = res.sup_kick_stable / a4_min;
        res.a4_pass = res.a4_ratio - 1.0 < threshold;
    }

    const double denom = 1.0 - res.tau_r * (res.sup_kick_back + nb.d_inv + 1.0);
    res.ph_inverse = denom > 0.0;
    res.xi_inverse = res.ph_inverse ? res.sup_kick_stable / denom : kInf;
    return res;
}

TrendResult check_A1_trend(const SkewFamily& family, const std::vector<double>& r_values, double threshold) {
    if (r_values.size() < 2) throw std::invalid_argument("trend needs at least two values of r");
    TrendResult t;
    t.r_values = r_values;
    A1Result last;
    for (double r : r_values) {
        last = check_A1(family(r), 20, threshold);
        t.first.push_back(last.ratio_coupling);
        t.second.push_back(last.ratio_kick);
    }
    t.decreasing = non_increasing(t.first) && non_increasing(t.second);
    t.final_pass = last.pass;
    t.pass = t.decreasing && t.final_pass;
    return t;
}

TrendResult check_A3_trend(const SkewFamily& family, const std::vector<double>& r_values, int grid_n,
                           double threshold) {
    if (r_values.size() < 2) throw std::invalid_argument("trend needs at least two values of r");
    TrendResult t;
    t.r_values = r_values;
    A3A4Result last;
    for (double r : r_values) {
        last = check_A3_A4(family(r), grid_n, 20, threshold);
        t.first.push_back(last.a3_ratio_coupling);
        t.second.push_back(last.a3_ratio_kick);
    }
    t.decreasing = non_increasing(t.first) && non_increasing(t.second);
    t.final_pass = last.a3_pass;
    t.pass = t.decreasing && t.final_pass;
    return t;
}

double compute_xi(const SkewProduct& f) {
    const double lambda = f.lambda_r();
    const double df_e = f.fiber().norm_bounds().d + op_norm(f.kick_on_stable()) + f.tau_r();
    if (!(lambda > df_e)) {
        std::ostringstream os;
        os << "lambda_r = " << lambda << " <= ||df|E|| = " << df_e << ": xi undefined, not wPH at this r";
        throw NotDominated(os.str());
    }
    return 2.0 * op_norm(f.kick_on_unstable()) / (lambda - df_e);
}

XiResult xi_and_unstable_cone(const SkewProduct& f, int samples, unsigned long long seed) {
    XiResult res;
    res.xi = compute_xi(f);
    res.lambda_r = f.lambda_r();
    const Mat mu = f.base_on_unstable(), ms = f.base_on_stable();
    const Mat du = f.kick_on_unstable(), ds = f.kick_on_stable();
    res.norm_A_unstable = op_norm(mu);
    res.norm_A_stable = op_norm(ms);
    res.norm_dphi_unstable = op_norm(du);
    res.norm_dphi_stable = op_norm(ds);
    res.dS = f.fiber().norm_bounds().d;
    res.norm_df_E = res.dS + res.norm_dphi_stable + res.norm_A_stable;
    res.lower_bound = res.lambda_r * (1.0 - res.xi) / (1.0 + res.xi);
    res.upper_bound = res.norm_A_unstable * (1.0 + res.xi);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ang(0.0, kTwoPi), unit(0.0, 1.0);
    std::normal_distribution<double> gauss;
    const int ku = static_cast<int>(mu.rows()), ks = static_cast<int>(ms.rows()), d = f.fiber_dim();
    res.cone_invariant = true;
    res.invariance_margin = kInf;
    res.min_expansion = kInf;
    res.max_expansion = 0.0;
    Vec y(d), a(ku), w(ks + d);
    for (int t = 0; t < samples; ++t) {
        for (int i = 0; i < d; ++i) y[i] = ang(rng);
        for (int i = 0; i < ku; ++i) a[i] = gauss(rng);
        for (int i = 0; i < ks + d; ++i) w[i] = gauss(rng);
        // Points of the closed cone ‖w‖ ≤ ξ‖a‖, including its boundary.
        const double scale = t % 4 == 0 ? 1.0 : unit(rng);
        w *= scale * res.xi * a.norm() / w.norm();
        const Vec c = w.head(ks), v = w.tail(d);
        const Vec a2 = mu * a, c2 = ms * c;
        const Vec v2 = du * a + ds * c + f.fiber().jacobian(y) * v;
        const double w2 = std::sqrt(c2.squaredNorm() + v2.squaredNorm());
        const double before = a.norm() + w.norm(), after = a2.norm() + w2;
        res.invariance_margin = std::min(res.invariance_margin, (res.xi * a2.norm() - w2) / after);
        if (w2 > res.xi * a2.norm()) res.cone_invariant = false;
        const double ratio = after / before;
        res.min_expansion = std::min(res.min_expansion, ratio);
        res.max_expansion = std::max(res.max_expansion, ratio);
        ++res.samples;
    }
    const double tol = 1e-12;
    res.expansion_ok = res.min_expansion >= res.lower_bound * (1.0 - tol) &&
                       res.max_expansion <= res.upper_bound * (1.0 + tol);
    res.pass = res.cone_invariant && res.expansion_ok;
    return res;
}

double q_bound(const std::vector<double>& betas, const std::vector<double>& zetas, int sigma) {
    if (betas.empty() || betas.size() != zetas.size()) throw std::invalid_argument("beta/zeta sizes");
    if (sigma < 1) throw std::invalid_argument("sigma must be positive");
    double q = kInf;
    for (size_t i = 0; i < betas.size(); ++i) {
        const double log_prod = 6.0 * std::log(betas[i]) + std::log(zetas[i]) / sigma;
        if (log_prod < 0.0) throw DegenerateInput("beta^6 zeta^(1/sigma) < 1: S-1 fails");
        q = std::min(q, 0.99 * sigma / (sigma + 1.0) * log_prod);
    }
    return q;
}

double standard_beta_bound(double r) { return std::pow(r, 1.0 / 6.0) - 2.0; }
double standard_zeta_scale(double r) { return 1.0 / (2.0 * r); }

HypothesisReport run_hypotheses(const SkewProduct& f, double r, const HypothesisConfig& cfg) {
    HypothesisReport rep;
    rep.r = r;
    rep.sigma = cfg.sigma;
    rep.config = cfg;
    const FiberMap& s = f.fiber();
    std::vector<S1Block> est_blocks, bound_blocks;
    std::vector<double> betas, zetas;
    for (int i = 0; i < s.block_count(); ++i) {
        BlockReport br;
        br.block = i;
        const int n = s.block_sizes()[i];
        br.cone_aperture = std::pow(r, 0.25);
        Cone cone = coordinate_cone(n, 0, br.cone_aperture);
        CriticalRegion crit = r > 1.0 ? standard_critical_region(r, i) : CriticalRegion(i, 0, {});
        br.crit_length = crit.total_length();
        br.beta = estimate_beta(s, i, cone, crit, cfg.grid_n);
        br.zeta = estimate_zeta(s, i, cfg.grid_n);
        br.beta_bound = standard_beta_bound(r);
        br.zeta_scale = standard_zeta_scale(r);
        br.s2 = check_S2(s, i, cone, crit, cfg.r_target, cfg.sample_n, cfg.band_grid, cfg.band_directions);
        est_blocks.push_back({br.beta.value, br.zeta.value, br.crit_length});
        bound_blocks.push_back({br.beta_bound, br.zeta_scale, br.crit_length});
        betas.push_back(br.beta.value);
        zetas.push_back(br.zeta.value);
        rep.blocks.push_back(std::move(br));
    }
    rep.s1 = check_S1(est_blocks, cfg.sigma, cfg.threshold);
    rep.s1_bounds = check_S1(bound_blocks, cfg.sigma, cfg.threshold);
    rep.q = rep.s1.pass ? q_bound(betas, zetas, cfg.sigma) : std::numeric_limits<double>::quiet_NaN();
    rep.a1 = check_A1(f, cfg.p_max, cfg.threshold);
    rep.a2 = check_A2(f, cfg.threshold);
    if (s.has_inverse()) rep.a3a4 = check_A3_A4(f, cfg.appendix_grid, cfg.p_max, cfg.threshold);
    try {
        rep.xi = xi_and_unstable_cone(f);
        rep.xi_defined = true;
    } catch (const NotDominated& e) {
        rep.xi_diagnostic = e.what();
    }
    return rep;
}

}  // namespace skewlab
