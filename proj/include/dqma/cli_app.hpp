#pragma once

// Experiment harness: config ingestion, protocol dispatch, sweeps, attack
// runs and the built-in verification suite. The functions are exposed so
// the command logic is testable in-process; the binary is a thin wrapper.

#include "dqma/qcore.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace dqma::cli {

struct schema_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Options {
    std::uint64_t seed = 1;
    int threads = 1;
    std::int64_t dim_cap = kDefaultDimCap;
    bool timings = false;  // real wall times break byte-identical output
    std::string format = "json";
};

// One experiment; returns the ExperimentResult document.
nlohmann::json run_command(const nlohmann::json& config, const Options& opts);

// Cartesian sweep; returns JSON-lines or CSV as one string.
std::string sweep_command(const nlohmann::json& config, const Options& opts);

// Attack dispatch; returns the attack report document.
nlohmann::json attack_command(const nlohmann::json& config, const Options& opts);

std::string result_to_csv_line(const nlohmann::json& result);
std::string csv_header();

// Exit codes: 0 ok, 1 selftest failure, 2 schema violation, 3 dim cap
// exceeded, 4 numerical failure.
int dispatch(int argc, char** argv);

}  // namespace dqma::cli
