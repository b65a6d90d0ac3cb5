#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mdlsr/phase.hpp"
#include "mdlsr/prior.hpp"
#include "mdlsr/sampler.hpp"

namespace mdlsr::cli {

/// Bad configuration, flags or input files; maps to exit code 1.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct PlantedSpec {
    std::string id;
    std::string expression;
    std::vector<double> theta;
    std::vector<Interval> domain;
};

/// Injected transition inputs that bypass the planted model.
struct TransitionInputs {
    double delta2 = 0.0;
    double complexity_gap = 0.0;
    double k = 1.0;
};

struct PredictSpec {
    std::filesystem::path report;
    std::filesystem::path test_data;
    std::optional<double> s_eps;
};

struct RunConfig {
    std::shared_ptr<const OpVocabulary> vocab;
    std::size_t dimension = 1;
    std::shared_ptr<const PriorConfig> prior;
    TrialOptions trial;
    /// Sizes, noise grid, replicas and Monte Carlo samples; model id and seed
    /// are filled per model at run time.
    SweepSpec sweep;
    std::vector<PlantedSpec> models;
    std::optional<std::filesystem::path> data;
    std::optional<PredictSpec> predict;
    EnumerationBounds enumerate;
    std::optional<TransitionInputs> transition;
    std::uint64_t seed = 0;
    std::filesystem::path output = ".";
    /// Also write gnuplot-ready .dat files.
    bool plots = false;
};

/// Parses a run configuration. Relative paths resolve against `base_dir`.
/// Throws ValidationError.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);

/// Builds the planted model for `spec` over the config's vocabulary.
PlantedModel make_planted(const RunConfig& config, const PlantedSpec& spec);

} // namespace mdlsr::cli
