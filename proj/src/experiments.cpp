#include "skewlab/experiments.hpp"

#include "skewlab/linalg.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace skewlab {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json clause_json(const Clause& c) { return {{"pass", c.pass}, {"margin", c.margin}}; }

json s1_json(const S1Result& s) {
    return {{"products", s.products},
            {"length", clause_json(s.length)},
            {"beta_gt_zeta", clause_json(s.beta_gt_zeta)},
            {"product_gt_one", clause_json(s.product_gt_one)},
            {"pass", s.pass}};
}

json grid_json(const GridEstimate& g) {
    return {{"value", g.value}, {"location", vec_json(g.location)}, {"grid_n", g.grid_n}, {"evaluations", g.evaluations}};
}

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
    std::string out;
    for (size_t i = 0; i < seeds.size(); ++i) out += (i ? ";" : "") + std::to_string(seeds[i]);
    return out;
}

std::string fmt(double v) { return format_double(v); }

IntMat parse_int_matrix(const std::string& key, const std::string& text) {
    std::vector<std::vector<long long>> rows;
    std::stringstream all(text);
    std::string row;
    while (std::getline(all, row, ';')) {
        std::vector<long long> r;
        std::stringstream rs(row);
        std::string cell;
        while (std::getline(rs, cell, ',')) {
            try {
                r.push_back(std::stoll(cell));
            } catch (const std::exception&) {
                throw ConfigError("invalid integer matrix in " + key);
            }
        }
        rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError("empty matrix in " + key);
    IntMat m(rows.size(), rows[0].size());
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw ConfigError("ragged matrix in " + key);
        for (size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

std::vector<NamedBound> default_bounds(const std::string& family, const std::string& mode, double r) {
    if (mode == "expanding-base" || family == "standard") return {{"0.6 ln r", 0.6 * std::log(r), 0}};
    if (family == "coupled-p" || family == "coupled-q" || family == "froeschle") {
        const double b = 0.3 * std::log(r / 9.0);
        return {{"0.3 ln(r/9)", b, 0}, {"0.3 ln(r/9)", b, 1}};
    }
    return {};
}

void require(RunResult& res, bool ok, const std::string& what) {
    if (!ok) {
        res.pass = false;
        res.failures.push_back(what);
    }
}

}  // namespace

// ---------------------------------------------------------------- systems

FiberMapPtr fiber_from_config(ExperimentConfig& cfg) {
    const std::string family = cfg.get_string("system.family", "standard");
    if (family == "identity") {
        const int d = cfg.get_int("system.fiber_dim", 2);
        if (d <= 0 || d % 2) throw ConfigError("system.fiber_dim must be positive and even");
        return identity_fiber(d, std::vector<int>(d / 2, 2));
    }
    const double r = cfg.get_double("system.r", 100.0);
    if (family == "standard") return standard_map(r);
    if (family == "coupled-p") return coupled_p(r, cfg.get_double("system.tau", 1e-3));
    if (family == "coupled-q") return coupled_q(r);
    if (family == "froeschle")
        return froeschle(cfg.get_double("system.tau1", r), cfg.get_double("system.tau2", r),
                         cfg.get_double("system.tau3", 1e-3));
    throw ConfigError("unknown system.family: " + family);
}

SkewProduct skew_from_config(ExperimentConfig& cfg) {
    auto fiber = fiber_from_config(cfg);
    const std::string base = cfg.get_string("system.base", "cat");
    IntMat a;
    if (base == "cat") a = cat_matrix();
    else if (base == "jordan") a = jordan_cat_matrix();
    else throw ConfigError("unknown system.base: " + base);
    const int L = cfg.get_int("system.base_iterates", 6);
    const int K = cfg.get_int("system.kick_iterates", 2);
    const double r = cfg.get_double("system.r", 100.0);
    return build_skew(ToralAutomorphism(a), L, K, first_coordinate_projection(static_cast<int>(a.rows()), *fiber),
                      fiber, r);
}

// ---------------------------------------------------------------- JSON

json to_json(const LyapunovReport& r) {
    json runs = json::array();
    for (const auto& s : r.runs) runs.push_back({{"seed", s.seed}, {"exponents", s.exponents}, {"diverged", s.diverged}});
    json bounds = json::array();
    for (const auto& b : r.bound_comparisons)
        bounds.push_back({{"name", b.name},
                          {"bound", b.bound},
                          {"exponent_index", b.exponent_index},
                          {"observed", b.observed},
                          {"pass", b.pass}});
    return {{"system", r.system},
            {"mode", r.mode},
            {"rng", r.rng},
            {"exponents", r.exponents},
            {"spread", r.spread},
            {"standard_error", r.standard_error},
            {"runs", runs},
            {"n_steps", r.n_steps},
            {"burn_in", r.burn_in},
            {"qr_period", r.qr_period},
            {"seeds", r.seeds},
            {"conservative", r.conservative},
            {"sum_check", r.sum_check},
            {"base_exponents", r.base_exponents},
            {"diverged", r.diverged},
            {"bound_comparisons", bounds}};
}

json to_json(const HypothesisReport& r) {
    json blocks = json::array();
    for (const auto& b : r.blocks) {
        blocks.push_back({{"block", b.block},
                          {"beta", grid_json(b.beta)},
                          {"zeta", grid_json(b.zeta)},
                          {"beta_bound", b.beta_bound},
                          {"zeta_scale", b.zeta_scale},
                          {"crit_length", b.crit_length},
                          {"cone_aperture", b.cone_aperture},
                          {"s2",
                           {{"invariance_pass", b.s2.invariance_pass},
                            {"invariance_margin", b.s2.invariance_margin},
                            {"invariance_samples", b.s2.invariance_samples},
                            {"band_pass", b.s2.band_pass},
                            {"band_width", b.s2.band_width},
                            {"worst_band", {b.s2.worst_band.a, b.s2.worst_band.b}},
                            {"worst_direction", vec_json(b.s2.worst_direction)},
                            {"directions", b.s2.directions},
                            {"band_grid", b.s2.band_grid},
                            {"pass", b.s2.pass}}}});
    }
    const auto& a1 = r.a1;
    const auto& a34 = r.a3a4;
    return {{"r", r.r},
            {"sigma", r.sigma},
            {"blocks", blocks},
            {"s1", s1_json(r.s1)},
            {"s1_stated_bounds", s1_json(r.s1_bounds)},
            {"q", r.q},
            {"a1",
             {{"norm_dphi", a1.norm_dphi},
              {"norm_dphi_stable", a1.norm_dphi_stable},
              {"min_dphi_unstable", a1.min_dphi_unstable},
              {"lambda_r", a1.lambda_r},
              {"dS", a1.dS},
              {"dS_inv", a1.dS_inv},
              {"d2S", a1.d2S},
              {"ratio_coupling", a1.ratio_coupling},
              {"ratio_kick", a1.ratio_kick},
              {"i_pass", a1.i_pass},
              {"p_witness", a1.p_witness},
              {"ii_first", a1.ii_first},
              {"ii_second", a1.ii_second},
              {"ii_pass", a1.ii_pass},
              {"degenerate", a1.degenerate},
              {"diagnostic", a1.diagnostic},
              {"pass", a1.pass}}},
            {"a2",
             {{"norm_dphi_unstable", r.a2.norm_dphi_unstable},
              {"block_min", r.a2.block_min},
              {"K", r.a2.K},
              {"degenerate", r.a2.degenerate},
              {"diagnostic", r.a2.diagnostic},
              {"pass", r.a2.pass}}},
            {"a3a4",
             {{"tau_r", a34.tau_r},
              {"a3_ratio_coupling", a34.a3_ratio_coupling},
              {"a3_ratio_kick", a34.a3_ratio_kick},
              {"a3_i_pass", a34.a3_i_pass},
              {"q_witness", a34.q_witness},
              {"a3_ii_pass", a34.a3_ii_pass},
              {"a3_pass", a34.a3_pass},
              {"a4_block_min", a34.a4_block_min},
              {"a4_ratio", a34.a4_ratio},
              {"a4_degenerate", a34.a4_degenerate},
              {"a4_pass", a34.a4_pass},
              {"xi_inverse", a34.xi_inverse},
              {"ph_inverse", a34.ph_inverse},
              {"grid_n", a34.grid_n},
              {"diagnostic", a34.diagnostic}}},
            {"xi_defined", r.xi_defined},
            {"xi_diagnostic", r.xi_diagnostic},
            {"xi",
             {{"xi", r.xi.xi},
              {"lambda_r", r.xi.lambda_r},
              {"norm_df_E", r.xi.norm_df_E},
              {"cone_invariant", r.xi.cone_invariant},
              {"invariance_margin", r.xi.invariance_margin},
              {"expansion_ok", r.xi.expansion_ok},
              {"min_expansion", r.xi.min_expansion},
              {"max_expansion", r.xi.max_expansion},
              {"lower_bound", r.xi.lower_bound},
              {"upper_bound", r.xi.upper_bound},
              {"samples", r.xi.samples},
              {"pass", r.xi.pass}}},
            {"config",
             {{"grid_n", r.config.grid_n},
              {"sample_n", r.config.sample_n},
              {"band_grid", r.config.band_grid},
              {"band_directions", r.config.band_directions},
              {"r_target", r.config.r_target},
              {"p_max", r.config.p_max},
              {"appendix_grid", r.config.appendix_grid},
              {"threshold", r.config.threshold}}}};
}

json to_json(const CurveLedger& led) {
    json levels = json::array();
    for (const auto& lv : led.levels) {
        levels.push_back({{"k", lv.k},
                          {"exhaustive", lv.exhaustive},
                          {"inspected", lv.inspected},
                          {"count", lv.count},
                          {"g", lv.g},
                          {"b", lv.b},
                          {"p", lv.p},
                          {"b_min", lv.b_min},
                          {"partial_mass", lv.partial_mass},
                          {"identity", lv.identity},
                          {"identity_error", lv.identity_error},
                          {"sum", lv.sum},
                          {"sum_lower", lv.sum_lower},
                          {"sum_upper", lv.sum_upper},
                          {"sum_ok", lv.sum_ok},
                          {"g_dominates_b", lv.g_dominates_b},
                          {"distortion", lv.distortion},
                          {"positivity", lv.positivity},
                          {"min_length", lv.min_length},
                          {"max_length", lv.max_length},
                          {"admissibility_failures", lv.admissibility_failures},
                          {"length_ratio_ok", lv.length_ratio_ok},
                          {"max_speed_error", lv.max_speed_error},
                          {"max_cone_ratio", lv.max_cone_ratio},
                          {"holder_ratio", lv.holder_ratio},
                          {"holder_failures", lv.holder_failures},
                          {"max_variation", lv.max_variation},
                          {"good_bound_failures", lv.good_bound_failures},
                          {"good_bound_margin", lv.good_bound_margin},
                          {"zeta_bound_failures", lv.zeta_bound_failures},
                          {"k_r", lv.k_r},
                          {"l_r", lv.l_r},
                          {"recursion_factor", lv.recursion_factor},
                          {"recursion_ok", lv.recursion_ok},
                          {"recursion_literal_ok", lv.recursion_literal_ok}});
    }
    const auto& b = led.bounds;
    const auto& c = led.curve_certificate;
    const auto& h = led.start_field;
    return {{"block", led.block},
            {"r", led.r},
            {"curve_length", led.curve_length},
            {"length_bounds",
             {{"lower", b.lower},
              {"upper", b.upper},
              {"closed_lower", b.closed_lower},
              {"closed_upper", b.closed_upper},
              {"delta_lower", b.delta_lower},
              {"delta_upper", b.delta_upper},
              {"K", b.K},
              {"ratio_lower", b.ratio_lower},
              {"ratio_upper", b.ratio_upper}}},
            {"curve_certificate",
             {{"max_speed_error", c.max_speed_error},
              {"max_cone_ratio", c.max_cone_ratio},
              {"length", c.length},
              {"speed_ok", c.speed_ok},
              {"cone_ok", c.cone_ok},
              {"length_ok", c.length_ok},
              {"pass", c.pass}}},
            {"start_field",
             {{"theta", h.theta},
              {"p", h.p},
              {"c_x", h.c_x},
              {"ratio", h.ratio},
              {"variation", h.variation},
              {"variation_bound", h.variation_bound},
              {"variation_bound_literal", h.variation_bound_literal},
              {"certified", h.certified}}},
            {"beta", led.beta},
            {"zeta", led.zeta},
            {"crit_length", led.crit_length},
            {"q", led.q},
            {"q_diagnostic", led.q_diagnostic},
            {"good_bound", led.good_bound},
            {"distortion_monotone", led.distortion_monotone},
            {"levels", levels}};
}

// ---------------------------------------------------------------- CSV

std::string csv_stamp(const ExperimentConfig& cfg, const std::string& extra) {
    return "# config_sha256=" + cfg.hash() + (extra.empty() ? "" : " " + extra) + "\n";
}

std::string lyapunov_csv(const LyapunovReport& r, const std::string& stamp) {
    std::string out = stamp + "seed,exponent_index,value\n";
    for (const auto& run : r.runs)
        for (size_t i = 0; i < run.exponents.size(); ++i)
            out += std::to_string(run.seed) + "," + std::to_string(i) + "," + fmt(run.exponents[i]) + "\n";
    return out;
}

std::string curve_pieces_csv(const CurveLedger& led, const std::string& stamp) {
    std::string out = stamp + "k,parent,j,class,full,min_j,max_j,e_integral,length\n";
    for (const auto& row : led.rows)
        out += std::to_string(row.k) + "," + std::to_string(row.parent) + "," + std::to_string(row.j) + "," +
               to_string(row.cls) + "," + (row.full ? "1" : "0") + "," + fmt(row.min_j) + "," + fmt(row.max_j) + "," +
               fmt(row.e_integral) + "," + fmt(row.length) + "\n";
    return out;
}

std::string curve_levels_csv(const CurveLedger& led, const std::string& stamp) {
    std::string out = stamp +
                      "k,exhaustive,inspected,count,g,b,p,b_min,identity_error,sum,sum_lower,sum_upper,distortion,"
                      "positivity,min_length,max_length,admissibility_failures,holder_failures,k_r,l_r,recursion_ok\n";
    for (const auto& lv : led.levels)
        out += std::to_string(lv.k) + "," + (lv.exhaustive ? "1" : "0") + "," + std::to_string(lv.inspected) + "," +
               fmt(lv.count) + "," + fmt(lv.g) + "," + fmt(lv.b) + "," + fmt(lv.p) + "," + fmt(lv.b_min) + "," +
               fmt(lv.identity_error) + "," + fmt(lv.sum) + "," + fmt(lv.sum_lower) + "," + fmt(lv.sum_upper) + "," +
               fmt(lv.distortion) + "," + fmt(lv.positivity) + "," + fmt(lv.min_length) + "," + fmt(lv.max_length) +
               "," + std::to_string(lv.admissibility_failures) + "," + std::to_string(lv.holder_failures) + "," +
               fmt(lv.k_r) + "," + fmt(lv.l_r) + "," + (lv.recursion_ok ? "1" : "0") + "\n";
    return out;
}

// ---------------------------------------------------------------- runners

RunResult run_maps_eval(ExperimentConfig& cfg) {
    RunResult res;
    const std::string target = cfg.get_string("maps.target", "fiber");
    const int steps = cfg.get_int("maps.steps", 10);
    if (steps < 0) throw ConfigError("maps.steps must be non-negative");
    const std::vector<double> coords = cfg.get_doubles("maps.point", "0.5,0.25");
    Vec p(static_cast<Eigen::Index>(coords.size()));
    for (size_t i = 0; i < coords.size(); ++i) p[i] = coords[i];

    std::string csv = csv_stamp(cfg, "");
    json orbit = json::array();
    auto emit_header = [&](Eigen::Index n) {
        csv += "step";
        for (Eigen::Index i = 0; i < n; ++i) csv += ",c" + std::to_string(i);
        csv += ",det_jacobian\n";
    };
    auto emit_row = [&](int step, const Vec& v, double det) {
        csv += std::to_string(step);
        for (Eigen::Index i = 0; i < v.size(); ++i) csv += "," + fmt(v[i]);
        csv += "," + fmt(det) + "\n";
        orbit.push_back({{"step", step}, {"point", vec_json(v)}, {"det_jacobian", det}});
    };
    if (target == "fiber") {
        const auto s = fiber_from_config(cfg);
        if (p.size() != s->dimension()) throw ConfigError("maps.point has the wrong dimension");
        emit_header(p.size());
        Vec y = p;
        wrap_in_place(y);
        for (int k = 0; k <= steps; ++k) {
            emit_row(k, y, s->jacobian(y).determinant());
            y = s->eval(y);
        }
        res.summary["map"] = s->name();
    } else if (target == "skew") {
        const auto f = skew_from_config(cfg);
        if (p.size() != f.dim()) throw ConfigError("maps.point has the wrong dimension");
        emit_header(p.size());
        SkewPoint m{p.head(f.base_dim()), p.tail(f.fiber_dim())};
        wrap_in_place(m.base);
        wrap_in_place(m.fiber);
        for (int k = 0; k <= steps; ++k) {
            Vec v(f.dim());
            v << m.base, m.fiber;
            emit_row(k, v, f.derivative(m).determinant());
            m = f.eval(m);
        }
        res.summary["map"] = "skew:" + f.fiber().name();
    } else {
        throw ConfigError("maps.target must be fiber or skew");
    }
    res.summary["orbit"] = orbit;
    res.files.push_back({"orbit.csv", csv});
    return res;
}

RunResult run_check(ExperimentConfig& cfg) {
    RunResult res;
    HypothesisConfig hc;
    hc.sigma = cfg.get_int("hypotheses.sigma", hc.sigma);
    hc.r_target = cfg.get_double("hypotheses.r_target", hc.r_target);
    hc.grid_n = cfg.get_int("hypotheses.grid_n", hc.grid_n);
    hc.sample_n = cfg.get_int("hypotheses.sample_n", hc.sample_n);
    hc.band_grid = cfg.get_int("hypotheses.band_grid", hc.band_grid);
    hc.band_directions = cfg.get_int("hypotheses.band_directions", hc.band_directions);
    hc.p_max = cfg.get_int("hypotheses.p_max", hc.p_max);
    hc.appendix_grid = cfg.get_int("hypotheses.appendix_grid", hc.appendix_grid);
    hc.threshold = cfg.get_double("hypotheses.threshold", hc.threshold);
    const auto f = skew_from_config(cfg);
    const auto rep = run_hypotheses(f, cfg.get_double("system.r", 100.0), hc);
    res.summary = to_json(rep);
    require(res, rep.s1.pass, "S-1 (grid estimates)");
    for (const auto& b : rep.blocks) require(res, b.s2.pass, "S-2 block " + std::to_string(b.block));

    std::string csv = csv_stamp(cfg, "grid_n=" + std::to_string(hc.grid_n)) +
                      "block,beta,zeta,beta_bound,zeta_scale,crit_length,s1_product,s2_pass,band_width\n";
    for (size_t i = 0; i < rep.blocks.size(); ++i) {
        const auto& b = rep.blocks[i];
        const double prod = i < rep.s1.products.size() ? rep.s1.products[i] : std::nan("");
        csv += std::to_string(b.block) + "," + fmt(b.beta.value) + "," + fmt(b.zeta.value) + "," + fmt(b.beta_bound) +
               "," + fmt(b.zeta_scale) + "," + fmt(b.crit_length) + "," + fmt(prod) + "," +
               (b.s2.pass ? "1" : "0") + "," + fmt(b.s2.band_width) + "\n";
    }
    res.files.push_back({"hypotheses.csv", csv});
    return res;
}

RunResult run_lyapunov(ExperimentConfig& cfg) {
    RunResult res;
    LyapunovOptions opt;
    opt.n = cfg.get_long("lyapunov.n", 1000000);
    opt.burn_in = cfg.get_long("lyapunov.burn_in", 1000);
    opt.qr_period = cfg.get_int("lyapunov.qr_period", 1);
    opt.seeds = cfg.get_seeds("lyapunov.seeds", "1-10");
    opt.threads = cfg.get_int("lyapunov.threads", 1);
    const std::string mode = cfg.get_string("lyapunov.mode", "iid-kick");
    const std::string family = cfg.get_string("system.family", "standard");
    const double r = cfg.get_double("system.r", 100.0);

    LyapunovReport rep;
    if (mode == "expanding-base") {
        rep = expanding_base_cocycle(cfg.get_int("lyapunov.multiplier", 2), r, opt);
    } else if (mode == "skew-fiber") {
        rep = fiber_exponents(skew_from_config(cfg), opt);
    } else if (mode == "deterministic-skew") {
        rep = lyapunov_spectrum(skew_from_config(cfg), opt);
    } else {
        CocycleDriver drv;
        drv.mode = cocycle_mode_from_string(mode);
        if (drv.mode == CocycleMode::markov_shift) {
            drv.transition = parse_int_matrix("lyapunov.transition", cfg.get_string("lyapunov.transition", "1,1;1,0"));
            drv.multiplier = cfg.get_int("lyapunov.multiplier", 2);
        }
        rep = lyapunov_spectrum(fiber_from_config(cfg), drv, opt);
    }
    rep = compare_bounds(rep, default_bounds(family, mode, r));
    const double sum_tol = cfg.get_double("lyapunov.sum_tol", rep.exponents.size() > 2 ? 2e-2 : 1e-2);
    res.summary = to_json(rep);
    res.summary["sum_tolerance"] = sum_tol;
    require(res, !rep.diverged, "divergence");
    for (const auto& b : rep.bound_comparisons)
        require(res, b.pass, b.name + " on exponent " + std::to_string(b.exponent_index + 1));
    require(res, rep.sum_check < sum_tol, "exponent sum");
    res.files.push_back(
        {"lyapunov.csv", lyapunov_csv(rep, csv_stamp(cfg, "rng=" + rep.rng + " seeds=" + join_seeds(rep.seeds)))});
    return res;
}

RunResult run_curves(ExperimentConfig& cfg) {
    RunResult res;
    CurveOptions opt;
    const int block = cfg.get_int("curves.block", 0);
    const int k_max = cfg.get_int("curves.k_max", 3);
    opt.k_back = cfg.get_int("curves.k_back", opt.k_back);
    opt.pre_iterates = cfg.get_int("curves.pre_iterates", opt.pre_iterates);
    opt.samples = cfg.get_int("curves.samples", opt.samples);
    opt.samples_per_piece = cfg.get_int("curves.samples_per_piece", opt.samples_per_piece);
    opt.max_refine = cfg.get_int("curves.max_refine", opt.max_refine);
    opt.paths = cfg.get_int("curves.paths", opt.paths);
    opt.seed = static_cast<std::uint64_t>(cfg.get_long("curves.seed", 1));
    opt.theta = cfg.get_double("curves.theta", opt.theta);
    opt.holder_p = cfg.get_int("curves.holder_p", opt.holder_p);
    opt.sigma = cfg.get_int("curves.sigma", opt.sigma);
    opt.mode = field_mode_from_string(cfg.get_string("curves.mode", "product"));
    opt.quadrature_tol = cfg.get_double("curves.quadrature_tol", opt.quadrature_tol);
    opt.grid_n = cfg.get_int("curves.grid_n", opt.grid_n);
    opt.record_pieces = true;
    const double max_distortion = cfg.get_double("curves.max_distortion", 1.1);
    const double identity_tol = cfg.get_double("curves.identity_tol", 1e-4);

    const auto f = skew_from_config(cfg);
    std::vector<double> start_coords;
    {
        std::string fallback;
        for (int i = 0; i < f.dim(); ++i) fallback += (i ? "," : "") + std::string(i < f.base_dim() ? "0.3" : "1.1");
        start_coords = cfg.get_doubles("curves.start", fallback);
    }
    if (static_cast<int>(start_coords.size()) != f.dim()) throw ConfigError("curves.start has the wrong dimension");
    SkewPoint start{Vec(f.base_dim()), Vec(f.fiber_dim())};
    for (int i = 0; i < f.dim(); ++i) (i < f.base_dim() ? start.base[i] : start.fiber[i - f.base_dim()]) = start_coords[i];

    try {
        const auto curve = grow_admissible_curve(f, start, block, opt);
        Vec x = Vec::Zero(f.fiber_dim());
        if (opt.mode == FieldMode::product) x[f.fiber().block_offset(block)] = 1.0;
        else
            for (int i = 0; i < f.fiber().block_count(); ++i) x[f.fiber().block_offset(i)] = 1.0;
        const Mat field = constant_field(f, curve, x, opt.mode);
        const auto led = ledger_sums(f, curve, field, k_max, opt);
        res.summary = to_json(led);
        require(res, led.curve_certificate.pass, "curve admissibility");
        require(res, led.start_field.certified, "starting field certificate");
        require(res, std::isfinite(led.q), "Q undefined: " + led.q_diagnostic);
        for (const auto& lv : led.levels) {
            const std::string at = " at k=" + std::to_string(lv.k);
            require(res, lv.identity_error <= identity_tol, "change of variables" + at);
            require(res, lv.admissibility_failures == 0, "piece admissibility" + at);
            require(res, lv.k == 0 || lv.length_ratio_ok, "length ratio" + at);
            require(res, lv.sum_ok || lv.k == 0, "sum sandwich" + at);
            require(res, lv.g >= opt.sigma * lv.b, "g >= sigma b" + at);
            require(res, lv.distortion <= max_distortion, "distortion" + at);
            require(res, lv.holder_failures == 0, "Hölder re-certification" + at);
            require(res, lv.good_bound_failures == 0, "good-field bound" + at);
            require(res, lv.zeta_bound_failures == 0, "zeta bound" + at);
            require(res, lv.recursion_ok, "g recursion" + at);
            if (std::isfinite(led.q)) require(res, lv.positivity >= 0.9 * led.q, "positivity" + at);
        }
        const std::string stamp = csv_stamp(cfg, "seed=" + std::to_string(opt.seed) +
                                                     " paths=" + std::to_string(opt.paths) +
                                                     " grid_n=" + std::to_string(opt.grid_n));
        res.files.push_back({"curves_pieces.csv", curve_pieces_csv(led, stamp)});
        res.files.push_back({"curves_levels.csv", curve_levels_csv(led, stamp)});
    } catch (const NotDominated& e) {
        res.summary["error"] = std::string("not dominated: ") + e.what();
        require(res, false, "not dominated");
    } catch (const DegenerateInput& e) {
        res.summary["error"] = std::string("degenerate: ") + e.what();
        require(res, false, "degenerate input");
    }
    return res;
}

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"nuhd", "coupled-p", "coupled-q", "froeschle", "shift", "hypotheses"};
    return names;
}

RunResult run_preset(const std::string& name, ExperimentConfig& cfg) {
    auto def = [&](const std::string& key, const std::string& value) {
        if (!cfg.has(key)) cfg.set(key, value);
    };
    cfg.set("preset.name", name);
    if (name == "nuhd") {
        def("system.family", "standard");
        def("system.r", "100");
        def("lyapunov.mode", "iid-kick");
        return run_lyapunov(cfg);
    }
    if (name == "coupled-p" || name == "coupled-q") {
        def("system.family", name);
        def("system.r", "200");
        def("lyapunov.mode", "iid-kick");
        return run_lyapunov(cfg);
    }
    if (name == "froeschle") {
        def("system.family", "froeschle");
        def("system.r", "200");
        def("lyapunov.mode", "iid-kick");
        return run_lyapunov(cfg);
    }
    if (name == "shift") {
        def("system.family", "standard");
        def("system.r", "50");
        def("lyapunov.multiplier", "2");
        RunResult out;
        cfg.set("lyapunov.mode", "expanding-base");
        RunResult a = run_lyapunov(cfg);
        def("lyapunov.transition", "1,1;1,0");
        cfg.set("lyapunov.mode", "markov-shift");
        RunResult b = run_lyapunov(cfg);
        cfg.set("lyapunov.mode", "expanding-base,markov-shift");
        out.summary = {{"expanding_base", a.summary}, {"markov_shift", b.summary}};
        out.files = {{"lyapunov_expanding_base.csv", a.files.at(0).second},
                     {"lyapunov_markov_shift.csv", b.files.at(0).second}};
        out.pass = a.pass && b.pass;
        for (const auto& s : a.failures) out.failures.push_back("expanding-base: " + s);
        for (const auto& s : b.failures) out.failures.push_back("markov-shift: " + s);
        return out;
    }
    if (name == "hypotheses") {
        def("system.family", "standard");
        def("system.r", "10000");
        def("system.base_iterates", "40");
        def("system.kick_iterates", "20");
        RunResult res = run_check(cfg);
        require(res, res.summary["s1_stated_bounds"]["pass"].get<bool>(), "S-1 (stated bounds)");
        require(res, res.summary["a2"]["pass"].get<bool>(), "A-2");
        return res;
    }
    throw ConfigError("unknown preset: " + name);
}

void attach_config(RunResult& res, const ExperimentConfig& cfg) {
    // Getters fill defaults during the run, so stamps written early are refreshed here.
    const std::string prefix = "# config_sha256=";
    const std::string hash = cfg.hash();
    for (auto& [name, text] : res.files)
        if (text.rfind(prefix, 0) == 0) text.replace(prefix.size(), hash.size(), hash);
    res.summary["config"] = cfg.canonical();
    res.summary["config_sha256"] = cfg.hash();
    res.summary["pass"] = res.pass;
    res.summary["failures"] = res.failures;
}

std::vector<std::string> write_outputs(const RunResult& res, const std::string& dir, const std::string& stem) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + dir + ": " + ec.message());
    std::vector<std::string> written;
    auto put = [&](const std::string& name, const std::string& text) {
        const fs::path path = fs::path(dir) / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << text;
        if (!out) throw std::runtime_error("write failed: " + path.string());
        written.push_back(path.string());
    };
    put(stem + ".json", res.summary.dump(2) + "\n");
    for (const auto& [name, text] : res.files) put(name, text);
    return written;
}

}  // namespace skewlab
