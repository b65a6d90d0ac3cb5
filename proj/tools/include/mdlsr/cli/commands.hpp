#pragma once

#include <filesystem>
#include <iosfwd>

#include "mdlsr/cli/config.hpp"

namespace mdlsr::cli {

/// Samples the config's data file. Writes trace.csv and report.json.
void cmd_discover(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Learnability sweep of every planted model. Writes sweep.csv and summary.csv.
void cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Exact and approximate transition noise per (model, N). Writes transition.csv.
void cmd_transition(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Ranked table of every model in the bounded grammar. Writes enumerate.csv.
void cmd_enumerate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Predictions of a discover report on test data. Writes predictions.csv.
void cmd_predict(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Entry point shared by the executable and the tests. Returns the exit code:
/// 0 success, 1 validation error, 2 runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace mdlsr::cli
