#include "skewlab/lyapunov.hpp"

#include "skewlab/linalg.hpp"
#include "skewlab/rng.hpp"

#include <Eigen/Eigenvalues>

#include <deque>
#include <functional>
#include <limits>
#include <thread>

namespace skewlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Frame pushed through the Jacobian product, re-orthonormalized by modified Gram-Schmidt.
class Benettin {
public:
    explicit Benettin(int m) : q_(Mat::Identity(m, m)), tmp_(m, m), sums_(Vec::Zero(m)) {}

    void push(const Mat& j) {
        tmp_.noalias() = j * q_;
        q_.swap(tmp_);
    }

    // Returns false on a non-finite or vanishing column; `gap` receives max - min of log R_ii.
    bool orthonormalize(bool accumulate, double& gap) {
        const Eigen::Index m = q_.cols();
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (Eigen::Index i = 0; i < m; ++i) {
            for (Eigen::Index k = 0; k < i; ++k) q_.col(i) -= q_.col(k).dot(q_.col(i)) * q_.col(k);
            const double nrm = q_.col(i).norm();
            if (!std::isfinite(nrm) || nrm == 0.0) return false;
            q_.col(i) /= nrm;
            const double lg = std::log(nrm);
            lo = std::min(lo, lg);
            hi = std::max(hi, lg);
            if (accumulate) sums_[i] += lg;
        }
        gap = hi - lo;
        return true;
    }

    const Vec& sums() const { return sums_; }

private:
    Mat q_, tmp_;
    Vec sums_;
};

using StepFn = std::function<void(Mat&)>;  // writes the Jacobian at the current state, then advances
using SystemFactory = std::function<StepFn(std::uint64_t seed)>;

SeedRun run_one(int dim, const StepFn& step, std::uint64_t seed, const LyapunovOptions& opt) {
    SeedRun run;
    run.seed = seed;
    Benettin b(dim);
    Mat j = Mat::Zero(dim, dim);
    const long total = opt.burn_in + opt.n;
    // Between re-orthonormalizations the frame columns separate by e^{gap}; past ~e^{18}
    // the weaker directions sink below double precision, so the period shrinks to keep
    // the separation under that level.
    constexpr double kMaxLogSeparation = 18.0;
    long period = opt.qr_period, since = 0;
    for (long t = 0; t < total; ++t) {
        step(j);
        b.push(j);
        ++since;
        const long done = t + 1;
        if (since >= period || done == opt.burn_in || done == total) {
            double gap = 0.0;
            if (!b.orthonormalize(done > opt.burn_in, gap)) {
                run.diverged = true;
                break;
            }
            const double per_step = gap / static_cast<double>(since);
            period = per_step > 0.0 ? std::clamp(static_cast<long>(kMaxLogSeparation / per_step), 1L,
                                                 static_cast<long>(opt.qr_period))
                                    : opt.qr_period;
            since = 0;
        }
    }
    if (run.diverged) {
        run.exponents.assign(dim, kNaN);
        return run;
    }
    for (int i = 0; i < dim; ++i) run.exponents.push_back(b.sums()[i] / static_cast<double>(opt.n));
    std::sort(run.exponents.begin(), run.exponents.end(), std::greater<>());
    return run;
}

void summarize(LyapunovReport& rep) {
    std::sort(rep.runs.begin(), rep.runs.end(), [](const SeedRun& a, const SeedRun& b) { return a.seed < b.seed; });
    rep.seeds.clear();
    rep.diverged = false;
    size_t dim = 0;
    for (const SeedRun& r : rep.runs) {
        rep.seeds.push_back(r.seed);
        rep.diverged = rep.diverged || r.diverged;
        dim = std::max(dim, r.exponents.size());
    }
    rep.exponents.assign(dim, kNaN);
    rep.spread.assign(dim, kNaN);
    rep.standard_error.assign(dim, kNaN);
    for (size_t i = 0; i < dim; ++i) {
        std::vector<double> v;
        for (const SeedRun& r : rep.runs)
            if (!r.diverged) v.push_back(r.exponents[i]);
        if (v.empty()) continue;
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double x : v) var += (x - mean) * (x - mean);
        rep.exponents[i] = mean;
        rep.spread[i] = *std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end());
        rep.standard_error[i] = v.size() > 1 ? std::sqrt(var / (v.size() - 1.0) / v.size()) : 0.0;
    }
    double sum = 0.0;
    for (double x : rep.exponents) sum += x;
    rep.sum_check = std::abs(sum);
}

LyapunovReport run_seeds(int dim, const SystemFactory& make, const LyapunovOptions& opt, std::string system,
                         std::string mode) {
    if (opt.qr_period < 1 || opt.n < opt.qr_period) throw std::invalid_argument("need n >= qr_period >= 1");
    if (opt.burn_in < 0) throw std::invalid_argument("burn_in must be non-negative");
    if (opt.seeds.empty()) throw std::invalid_argument("no seeds");
    LyapunovReport rep;
    rep.system = std::move(system);
    rep.mode = std::move(mode);
    rep.n_steps = opt.n;
    rep.burn_in = opt.burn_in;
    rep.qr_period = opt.qr_period;
    rep.runs.resize(opt.seeds.size());

    int workers = opt.threads > 0 ? opt.threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::clamp(workers, 1, static_cast<int>(opt.seeds.size()));
    auto work = [&](int w) {
        for (size_t i = w; i < opt.seeds.size(); i += workers) rep.runs[i] = run_one(dim, make(opt.seeds[i]), opt.seeds[i], opt);
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    summarize(rep);
    return rep;
}

Vec random_angles(Philox4x32& g, int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = kTwoPi * g.uniform();
    return v;
}

Mat matrix_power_real(const IntMat& a, int k) {
    const Mat ar = to_real(a);
    Mat p = Mat::Identity(a.rows(), a.cols());
    for (int i = 0; i < k; ++i) p = ar * p;
    return p;
}

IntMat default_projection(const FiberMap& s) { return first_coordinate_projection(1, s); }

// Digits of a base-b expansion supplied on demand.
class DigitStream {
public:
    DigitStream(std::uint32_t base, Philox4x32& g) : base_(base), g_(g) {}
    std::uint32_t at(size_t i) {
        while (digits_.size() <= i) digits_.push_back(base_ > 1 ? g_.below(base_) : 0u);
        return digits_[i];
    }
    void drop(size_t n) {
        at(n);
        digits_.erase(digits_.begin(), digits_.begin() + static_cast<long>(n));
    }
    // 2π Σ_{j<depth} d_{from+j} b^{-(j+1)}
    double angle(size_t from, int depth) {
        double v = 0.0;
        for (int j = depth - 1; j >= 0; --j) v = (v + at(from + j)) / base_;
        return kTwoPi * v;
    }

private:
    std::uint32_t base_;
    Philox4x32& g_;
    std::deque<std::uint32_t> digits_;
};

int digits_for_double(std::uint32_t base) {
    return base > 1 ? static_cast<int>(std::ceil(53.0 / std::log2(static_cast<double>(base)))) + 1 : 1;
}

}  // namespace

std::string to_string(CocycleMode m) {
    switch (m) {
        case CocycleMode::deterministic_skew: return "deterministic-skew";
        case CocycleMode::iid_kick: return "iid-kick";
        case CocycleMode::markov_shift: return "markov-shift";
        case CocycleMode::expanding_base: return "expanding-base";
    }
    return "unknown";
}

CocycleMode cocycle_mode_from_string(const std::string& s) {
    for (CocycleMode m : {CocycleMode::deterministic_skew, CocycleMode::iid_kick, CocycleMode::markov_shift,
                          CocycleMode::expanding_base})
        if (to_string(m) == s) return m;
    throw std::invalid_argument("unknown cocycle mode: " + s);
}

LyapunovReport lyapunov_spectrum(const ToralAutomorphism& a, const LyapunovOptions& opt) {
    const Mat ar = to_real(a.entries());
    const int dim = static_cast<int>(a.dim());
    return run_seeds(
        dim, [&](std::uint64_t) -> StepFn { return [&ar](Mat& j) { j = ar; }; }, opt, "toral-automorphism",
        "linear");
}

LyapunovReport lyapunov_spectrum(const SkewProduct& f, const LyapunovOptions& opt) {
    const int l = f.base_dim(), d = f.fiber_dim(), dim = l + d;
    const Mat top = matrix_power_real(f.base().entries(), f.base_iterates());
    const Mat dphi = f.kick_derivative();
    auto make = [&](std::uint64_t seed) -> StepFn {
        Philox4x32 g(seed, 0);
        Vec y = random_angles(g, d);
        Vec x = random_angles(g, l);
        return [&f, &top, &dphi, l, d, x, y, sb = Vec(l), sf = Vec(d), js = Mat(d, d)](Mat& j) mutable {
            j.setZero();
            j.topLeftCorner(l, l) = top;
            j.bottomLeftCorner(d, l) = dphi;
            f.fiber().jacobian_into(y, js);
            j.bottomRightCorner(d, d) = js;
            f.step(x, y, sb, sf);
        };
    };
    return run_seeds(dim, make, opt, "skew:" + f.fiber().name(), "deterministic-skew");
}

LyapunovReport fiber_exponents(const SkewProduct& f, const LyapunovOptions& opt) {
    const int l = f.base_dim(), d = f.fiber_dim();
    auto make = [&](std::uint64_t seed) -> StepFn {
        Philox4x32 g(seed, 0);
        Vec y = random_angles(g, d);
        Vec x = random_angles(g, l);
        return [&f, x, y, sb = Vec(l), sf = Vec(d)](Mat& j) mutable {
            f.fiber().jacobian_into(y, j);
            f.step(x, y, sb, sf);
        };
    };
    return run_seeds(d, make, opt, "skew-fiber:" + f.fiber().name(), "deterministic-skew");
}

LyapunovReport lyapunov_spectrum(const FiberMapPtr& s, const CocycleDriver& driver, const LyapunovOptions& opt) {
    if (!s) throw std::invalid_argument("null fiber map");
    const int d = s->dimension();
    const IntMat proj = driver.projection.size() ? driver.projection : default_projection(*s);
    if (proj.rows() != d) throw std::invalid_argument("projection must have one row per fiber coordinate");
    const Mat pr = to_real(proj);
    const int l = static_cast<int>(proj.cols());
    const FiberMap& map = *s;
    LyapunovReport rep;

    switch (driver.mode) {
        case CocycleMode::deterministic_skew: {
            auto make = [&](std::uint64_t seed) -> StepFn {
                Philox4x32 g(seed, 0);
                Vec y = random_angles(g, d);
                return [&map, y, out = Vec(d)](Mat& j) mutable {
                    map.jacobian_into(y, j);
                    map.eval_raw(y, out);
                    y.swap(out);
                    wrap_in_place(y);
                };
            };
            rep = run_seeds(d, make, opt, map.name(), to_string(driver.mode));
            break;
        }
        case CocycleMode::iid_kick: {
            auto make = [&](std::uint64_t seed) -> StepFn {
                Philox4x32 g(seed, 0);
                Vec y = random_angles(g, d);
                return [&map, &pr, l, y, out = Vec(d), u = Vec(l), drive = Philox4x32(seed, 1)](Mat& j) mutable {
                    map.jacobian_into(y, j);
                    map.eval_raw(y, out);
                    for (int c = 0; c < l; ++c) u[c] = kTwoPi * drive.uniform();
                    out.noalias() += pr * u;
                    y.swap(out);
                    wrap_in_place(y);
                };
            };
            rep = run_seeds(d, make, opt, map.name(), to_string(driver.mode));
            break;
        }
        case CocycleMode::markov_shift: {
            if (l != 1) throw std::invalid_argument("markov-shift kicks use a single angle");
            const ParryMeasure pm = parry_measure(driver.transition);
            const auto k = static_cast<std::uint32_t>(driver.transition.rows());
            const int depth = digits_for_double(k);
            auto make = [&, k, depth](std::uint64_t seed) -> StepFn {
                Philox4x32 g(seed, 0);
                Vec y = random_angles(g, d);
                // The symbol sequence ω_n, ω_{n+1}, ... is kept `depth` symbols ahead.
                auto state = std::make_shared<std::pair<Philox4x32, std::deque<std::uint32_t>>>(Philox4x32(seed, 1),
                                                                                             std::deque<std::uint32_t>{});
                auto sample = [](Philox4x32& gen, const Eigen::RowVectorXd& probs) {
                    const double u = gen.uniform();
                    double acc = 0.0;
                    Eigen::Index last = 0;
                    for (Eigen::Index i = 0; i < probs.size(); ++i) {
                        if (probs[i] <= 0.0) continue;
                        last = i;
                        acc += probs[i];
                        if (u < acc) return static_cast<std::uint32_t>(i);
                    }
                    return static_cast<std::uint32_t>(last);
                };
                auto& [gen, window] = *state;
                window.push_back(sample(gen, pm.weights.transpose()));
                while (static_cast<int>(window.size()) < depth) window.push_back(sample(gen, pm.transitions.row(window.back())));
                return [&map, &pr, &pm, state, sample, y, out = Vec(d), k, depth](Mat& j) mutable {
                    auto& [gen2, win] = *state;
                    double v = 0.0;
                    if (k > 1)
                        for (int i = depth - 1; i >= 0; --i) v = (v + win[i]) / k;
                    map.jacobian_into(y, j);
                    map.eval_raw(y, out);
                    out.noalias() += pr.col(0) * (kTwoPi * v);
                    y.swap(out);
                    wrap_in_place(y);
                    win.pop_front();
                    win.push_back(sample(gen2, pm.transitions.row(win.back())));
                };
            };
            rep = run_seeds(d, make, opt, map.name(), to_string(driver.mode));
            break;
        }
        case CocycleMode::expanding_base: {
            if (l != 1) throw std::invalid_argument("expanding-base kicks use a single angle");
            if (std::abs(driver.multiplier) < 2) throw std::invalid_argument("expanding base needs |k| >= 2");
            const auto base = static_cast<std::uint32_t>(std::abs(driver.multiplier));
            const long shift = static_cast<long>(std::floor(2.0 * driver.r));
            const long kick_shift = static_cast<long>(std::floor(driver.r));
            if (shift < 1 || kick_shift < 0) throw std::invalid_argument("expanding base needs r >= 1/2");
            const int depth = digits_for_double(base);
            const bool negative = driver.multiplier < 0;
            // sign(k)^m for the kick read-out and for each base step
            const double kick_sign = negative && (kick_shift % 2) ? -1.0 : 1.0;
            const double step_sign = negative && (shift % 2) ? -1.0 : 1.0;
            auto make = [&, base, depth](std::uint64_t seed) -> StepFn {
                Philox4x32 g(seed, 0);
                Vec y = random_angles(g, d);
                auto gen = std::make_shared<Philox4x32>(seed, 1);
                auto digits = std::make_shared<DigitStream>(base, *gen);
                return [&map, &pr, gen, digits, y, out = Vec(d), sign = 1.0, depth, shift, kick_shift, kick_sign,
                        step_sign](Mat& j) mutable {
                    const double kick = wrap_angle(sign * kick_sign * digits->angle(kick_shift, depth));
                    map.jacobian_into(y, j);
                    map.eval_raw(y, out);
                    out.noalias() += pr.col(0) * kick;
                    y.swap(out);
                    wrap_in_place(y);
                    digits->drop(shift);
                    sign *= step_sign;
                };
            };
            rep = run_seeds(d, make, opt, map.name(), to_string(driver.mode));
            rep.base_exponents = {static_cast<double>(shift) * std::log(static_cast<double>(base))};
            break;
        }
    }
    return rep;
}

LyapunovReport expanding_base_cocycle(int k, double r, const LyapunovOptions& opt) {
    CocycleDriver drv;
    drv.mode = CocycleMode::expanding_base;
    drv.multiplier = k;
    drv.r = r;
    return lyapunov_spectrum(standard_map(r), drv, opt);
}

LyapunovReport merge_reports(const LyapunovReport& a, const LyapunovReport& b) {
    if (a.system != b.system || a.mode != b.mode || a.n_steps != b.n_steps || a.burn_in != b.burn_in ||
        a.qr_period != b.qr_period)
        throw std::invalid_argument("reports describe different runs");
    LyapunovReport m = a;
    m.runs.insert(m.runs.end(), b.runs.begin(), b.runs.end());
    m.bound_comparisons.clear();
    summarize(m);
    return m;
}

ParryMeasure parry_measure(const IntMat& c) {
    const Eigen::Index n = c.rows();
    if (n < 1 || c.cols() != n) throw std::invalid_argument("transition matrix must be square");
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            if (c(i, j) != 0 && c(i, j) != 1) throw std::invalid_argument("transition matrix must be 0-1");
    // Primitive iff some power is positive; Wielandt bound (n-1)^2 + 1.
    Eigen::MatrixXi reach = c.cast<int>(), base = reach;
    bool primitive = false;
    const long limit = (n - 1) * (n - 1) + 1;
    for (long p = 1; p <= limit; ++p) {
        if ((reach.array() > 0).all()) {
            primitive = true;
            break;
        }
        reach = ((reach * base).array() > 0).cast<int>();
    }
    if (!primitive) throw std::invalid_argument("transition matrix is not primitive");

    auto perron = [](const Mat& m, double& root) {
        Eigen::EigenSolver<Mat> es(m);
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i].real() > es.eigenvalues()[best].real()) best = i;
        root = es.eigenvalues()[best].real();
        Vec v = es.eigenvectors().col(best).real();
        if (v.sum() < 0.0) v = -v;
        return Vec(v.cwiseAbs());
    };
    const Mat cr = to_real(c);
    ParryMeasure pm;
    double root_t = 0.0;
    const Vec v = perron(cr, pm.perron_root);
    const Vec u = perron(cr.transpose(), root_t);
    pm.weights = u.cwiseProduct(v);
    pm.weights /= pm.weights.sum();
    pm.transitions = Mat::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) pm.transitions(i, j) = cr(i, j) * v[j] / (pm.perron_root * v[i]);
        pm.transitions.row(i) /= pm.transitions.row(i).sum();
    }
    return pm;
}

LyapunovReport compare_bounds(LyapunovReport report, const std::vector<NamedBound>& bounds) {
    for (const NamedBound& b : bounds) {
        if (!std::isfinite(b.value)) throw std::invalid_argument("bound " + b.name + " is not finite");
        if (b.exponent_index < 0) throw std::invalid_argument("negative exponent index");
        BoundComparison cmp;
        cmp.name = b.name;
        cmp.bound = b.value;
        cmp.exponent_index = b.exponent_index;
        cmp.observed = std::numeric_limits<double>::infinity();
        bool ok = !report.runs.empty();
        for (const SeedRun& r : report.runs) {
            if (r.diverged || b.exponent_index >= static_cast<int>(r.exponents.size())) {
                ok = false;
                cmp.observed = kNaN;
                break;
            }
            cmp.observed = std::min(cmp.observed, r.exponents[b.exponent_index]);
        }
        cmp.pass = ok && cmp.observed > b.value;
        report.bound_comparisons.push_back(cmp);
    }
    return report;
}

}  // namespace skewlab
