#include <doctest.h>

#include "skewlab/experiments.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace skewlab;

namespace {

long count_lines(const std::string& s) {
    long n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

ExperimentConfig small_lyapunov(const std::string& family, const std::string& seeds) {
    ExperimentConfig cfg;
    cfg.set("system.family", family);
    cfg.set("system.r", "50");
    cfg.set("lyapunov.n", "2000");
    cfg.set("lyapunov.burn_in", "10");
    cfg.set("lyapunov.seeds", seeds);
    return cfg;
}

}  // namespace

TEST_CASE("INI parsing flattens sections into dotted keys") {
    auto cfg = ExperimentConfig::from_string("[system]\nfamily = coupled-p\nr = 200\n\n[lyapunov]\nseeds = 1-3,7\n");
    CHECK(cfg.get_string("system.family", "x") == "coupled-p");
    CHECK(cfg.get_double("system.r", 0.0) == 200.0);
    CHECK(cfg.get_seeds("lyapunov.seeds", "1") == std::vector<std::uint64_t>{1, 2, 3, 7});
    CHECK_THROWS_AS(ExperimentConfig::from_string("[broken\n"), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_file("/nonexistent/cfg.ini"), ConfigError);
}

TEST_CASE("typed getters validate and record their defaults") {
    ExperimentConfig cfg;
    cfg.set("a.n", "1e6");
    cfg.set("a.bad", "1.5");
    cfg.set("a.word", "abc");
    CHECK(cfg.get_long("a.n", 0) == 1000000);
    CHECK_THROWS_AS(cfg.get_long("a.bad", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_double("a.word", 0.0), ConfigError);
    CHECK_THROWS_AS(cfg.get_seeds("a.word", "1"), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("a.word", true), ConfigError);
    CHECK_FALSE(cfg.has("b.x"));
    CHECK(cfg.get_double("b.x", 0.25) == 0.25);
    CHECK(cfg.has("b.x"));
    CHECK(cfg.canonical().find("b.x = 0.25\n") != std::string::npos);
}

TEST_CASE("canonical text is sorted and hashed with SHA-256") {
    // FIPS 180-2 test vector.
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    ExperimentConfig a, b;
    a.set("z.k", "1");
    a.set("a.k", "2");
    b.set("a.k", "2");
    b.set("z.k", "1");
    CHECK(a.canonical() == "a.k = 2\nz.k = 1\n");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash() == sha256_hex(a.canonical()));
    b.set("z.k", "3");
    CHECK(a.hash() != b.hash());
}

TEST_CASE("format_double round-trips") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 10000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
        CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(100.0) == "100");
}

TEST_CASE("empty exponent list gives a header-only CSV") {
    LyapunovReport empty;
    const std::string csv = lyapunov_csv(empty, "# stamp\n");
    CHECK(csv == "# stamp\nseed,exponent_index,value\n");
}

TEST_CASE("Lyapunov CSV has one row per seed and exponent") {
    for (const auto& [family, dim] : {std::pair<std::string, int>{"standard", 2}, {"coupled-p", 4}}) {
        auto cfg = small_lyapunov(family, "1-3");
        const RunResult res = run_lyapunov(cfg);
        REQUIRE(res.files.size() == 1);
        CHECK(count_lines(res.files[0].second) == 2 + 3 * dim);
        CHECK(res.files[0].second.rfind("# config_sha256=" + cfg.hash(), 0) == 0);
    }
}

TEST_CASE("JSON summaries round-trip byte-identically") {
    auto cfg = small_lyapunov("standard", "1-2");
    RunResult res = run_lyapunov(cfg);
    attach_config(res, cfg);
    const std::string text = res.summary.dump(2);
    CHECK(nlohmann::json::parse(text).dump(2) == text);
    CHECK(res.summary["config"] == cfg.canonical());
    CHECK(res.summary["config_sha256"] == cfg.hash());
    CHECK(res.summary["runs"].size() == 2);
}

TEST_CASE("config defaults are embedded so a run replays from its own canonical text") {
    auto cfg = small_lyapunov("standard", "4");
    const RunResult first = run_lyapunov(cfg);
    auto replay = ExperimentConfig::from_string("");
    for (const auto& [k, v] : cfg.values()) replay.set(k, v);
    const RunResult second = run_lyapunov(replay);
    CHECK(first.files == second.files);
    CHECK(cfg.has("lyapunov.qr_period"));
    CHECK(cfg.has("lyapunov.mode"));
}

TEST_CASE("bound checks drive the verdict") {
    auto cfg = small_lyapunov("standard", "1");
    cfg.set("system.r", "100");
    CHECK(run_lyapunov(cfg).pass);
    // The identity fiber has zero exponents, so no bound is attached and the sum is exact.
    auto id = small_lyapunov("identity", "1");
    const RunResult r = run_lyapunov(id);
    CHECK(r.pass);
    CHECK(r.summary["bound_comparisons"].empty());
}

TEST_CASE("unknown names are configuration errors") {
    ExperimentConfig cfg;
    CHECK_THROWS_AS(run_preset("nope", cfg), ConfigError);
    cfg.set("system.family", "nope");
    CHECK_THROWS_AS(fiber_from_config(cfg), ConfigError);
    ExperimentConfig base;
    base.set("system.base", "nope");
    CHECK_THROWS_AS(skew_from_config(base), ConfigError);
}

TEST_CASE("curves run reports an undominated setting as a failed run") {
    ExperimentConfig cfg;
    cfg.set("system.r", "10000");
    cfg.set("system.base_iterates", "4");
    cfg.set("system.kick_iterates", "2");
    const RunResult res = run_curves(cfg);
    CHECK_FALSE(res.pass);
    CHECK(res.summary.contains("error"));
    CHECK(res.files.empty());
}

TEST_CASE("maps eval keeps determinant one along an orbit") {
    ExperimentConfig cfg;
    cfg.set("system.family", "froeschle");
    cfg.set("maps.point", "0.1,0.2,0.3,0.4");
    cfg.set("maps.steps", "20");
    const RunResult res = run_maps_eval(cfg);
    CHECK(res.summary["orbit"].size() == 21);
    for (const auto& row : res.summary["orbit"]) CHECK(std::abs(row["det_jacobian"].get<double>() - 1.0) < 1e-10);
    cfg.set("maps.point", "0.1,0.2");
    CHECK_THROWS_AS(run_maps_eval(cfg), ConfigError);
}

TEST_CASE("write_outputs names the failing path") {
    namespace fs = std::filesystem;
    const fs::path tmp = fs::temp_directory_path() / "skewlab_io_test";
    fs::remove_all(tmp);
    fs::create_directories(tmp);
    RunResult res;
    res.summary = {{"x", 1}};
    res.files = {{"a.csv", "h\n"}};
    const auto written = write_outputs(res, (tmp / "ok").string(), "run");
    CHECK(written.size() == 2);
    std::ifstream in(tmp / "ok" / "a.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == "h");

    std::ofstream(tmp / "plain_file") << "x";
    const std::string bad = (tmp / "plain_file" / "sub").string();
    try {
        write_outputs(res, bad, "run");
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find(bad) != std::string::npos);
    }
    fs::remove_all(tmp);
}

TEST_CASE("CSV stamps carry the hash of the final config") {
    ExperimentConfig cfg;
    cfg.set("system.family", "standard");
    RunResult res = run_maps_eval(cfg);
    attach_config(res, cfg);
    REQUIRE(res.files.size() == 1);
    CHECK(res.files[0].second.rfind("# config_sha256=" + cfg.hash() + "\n", 0) == 0);
    CHECK(cfg.has("maps.steps"));
}
