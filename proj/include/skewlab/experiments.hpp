#pragma once

#include "skewlab/config.hpp"
#include "skewlab/curves.hpp"
#include "skewlab/hypotheses.hpp"
#include "skewlab/lyapunov.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace skewlab {

struct RunResult {
    nlohmann::json summary;
    std::vector<std::pair<std::string, std::string>> files;  // file name, CSV text
    bool pass = true;
    std::vector<std::string> failures;
};

// Systems from config keys system.family, system.r, system.tau, system.tau1..3,
// system.fiber_dim, system.base, system.base_iterates, system.kick_iterates.
FiberMapPtr fiber_from_config(ExperimentConfig& cfg);
SkewProduct skew_from_config(ExperimentConfig& cfg);

nlohmann::json to_json(const LyapunovReport& r);
nlohmann::json to_json(const HypothesisReport& r);
nlohmann::json to_json(const CurveLedger& led);

// "# config_sha256=<hex> <extra>" first line of every CSV.
std::string csv_stamp(const ExperimentConfig& cfg, const std::string& extra);
// Columns seed,exponent_index,value; one row per seed and exponent.
std::string lyapunov_csv(const LyapunovReport& r, const std::string& stamp);
// Columns k,parent,j,class,full,min_j,max_j,e_integral,length.
std::string curve_pieces_csv(const CurveLedger& led, const std::string& stamp);
// One row per level with the ledger sums and checks.
std::string curve_levels_csv(const CurveLedger& led, const std::string& stamp);

RunResult run_maps_eval(ExperimentConfig& cfg);
RunResult run_check(ExperimentConfig& cfg);
RunResult run_lyapunov(ExperimentConfig& cfg);
RunResult run_curves(ExperimentConfig& cfg);
// nuhd, coupled-p, coupled-q, froeschle, shift, hypotheses. Unknown names throw ConfigError.
RunResult run_preset(const std::string& name, ExperimentConfig& cfg);
const std::vector<std::string>& preset_names();

// Adds the canonical config and its hash to the summary and re-stamps the CSV files
// with the final hash.
void attach_config(RunResult& res, const ExperimentConfig& cfg);
// Writes <stem>.json and the CSV files into dir; throws std::runtime_error naming the path.
std::vector<std::string> write_outputs(const RunResult& res, const std::string& dir, const std::string& stem);

}  // namespace skewlab
