#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mdlsr/expr_tree.hpp"

namespace mdlsr {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OpHyperparameters {
    double alpha = 3.0;
    double beta = 0.1;
};

/// Maximum-entropy prior over model structures,
/// p(m) ∝ exp(-Σ_o (alpha_o n_o(m) + beta_o n_o(m)^2)), one entry per vocabulary op.
/// The normalization constant is never computed.
class PriorConfig {
public:
    /// Validates alpha, beta >= 0 and alpha + beta > 0 for every entry.
    PriorConfig(std::shared_ptr<const OpVocabulary> vocab, std::vector<OpHyperparameters> per_op);

    /// alpha = 3.0, beta = 0.1 for every operation.
    static PriorConfig uniform(std::shared_ptr<const OpVocabulary> vocab, double alpha = 3.0, double beta = 0.1);

    const OpVocabulary& vocabulary() const { return *vocab_; }
    const OpHyperparameters& hyper(OpId id) const { return per_op_.at(id); }

    /// H_M(m) in nats: Σ_o (alpha_o n_o + beta_o n_o^2). Zero exactly for op-free trees.
    double model_complexity(const ExprTree& tree) const;
    double model_complexity(const std::vector<std::size_t>& counts) const;

private:
    std::shared_ptr<const OpVocabulary> vocab_;
    std::vector<OpHyperparameters> per_op_;
};

inline double model_complexity(const ExprTree& tree, const PriorConfig& cfg) { return cfg.model_complexity(tree); }

/// The op-free models: "_c0" followed by "x1".."xd".
std::vector<ExprTree> trivial_models(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension);

/// Parses {"ops": {"+": {"alpha": 3.0, "beta": 0.1}, ...}}. Every vocabulary op
/// needs an entry; entries for ops outside the vocabulary are ignored.
/// Throws ConfigError.
PriorConfig parse_prior(std::string_view json_text, std::shared_ptr<const OpVocabulary> vocab);
PriorConfig load_prior(const std::filesystem::path& path, std::shared_ptr<const OpVocabulary> vocab);

/// JSON text of a prior, in the same format parse_prior accepts.
std::string prior_to_json(const PriorConfig& prior);

} // namespace mdlsr
