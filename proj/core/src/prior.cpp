#include "mdlsr/prior.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mdlsr {

PriorConfig::PriorConfig(std::shared_ptr<const OpVocabulary> vocab, std::vector<OpHyperparameters> per_op)
    : vocab_(std::move(vocab)), per_op_(std::move(per_op))
{
    if (per_op_.size() != vocab_->size()) {
        throw ConfigError("prior needs one entry per vocabulary operation");
    }
    for (std::size_t i = 0; i < per_op_.size(); ++i) {
        const auto& h = per_op_[i];
        const std::string name(vocab_->op(static_cast<OpId>(i)).name);
        if (!std::isfinite(h.alpha) || !std::isfinite(h.beta) || h.alpha < 0.0 || h.beta < 0.0) {
            throw ConfigError("prior hyperparameters for '" + name + "' must be finite and nonnegative");
        }
        // Strictly positive cost keeps op-free trees the unique prior maximizers.
        if (h.alpha + h.beta <= 0.0) {
            throw ConfigError("prior for '" + name + "' needs alpha + beta > 0");
        }
    }
}

PriorConfig PriorConfig::uniform(std::shared_ptr<const OpVocabulary> vocab, double alpha, double beta)
{
    const std::size_t n = vocab->size();
    return PriorConfig(std::move(vocab), std::vector<OpHyperparameters>(n, OpHyperparameters{alpha, beta}));
}

double PriorConfig::model_complexity(const std::vector<std::size_t>& counts) const
{
    double h = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const auto n = static_cast<double>(counts[i]);
        h += per_op_[i].alpha * n + per_op_[i].beta * n * n;
    }
    return h;
}

double PriorConfig::model_complexity(const ExprTree& tree) const
{
    if (!(tree.vocabulary() == *vocab_)) {
        throw ConfigError("tree vocabulary does not match the prior's vocabulary");
    }
    return model_complexity(op_counts(tree));
}

std::vector<ExprTree> trivial_models(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension)
{
    if (dimension < 1) {
        throw std::invalid_argument("trivial_models: dimension must be >= 1");
    }
    std::vector<ExprTree> out;
    out.push_back(ExprTree::constant_model(vocab, dimension));
    for (std::size_t j = 0; j < dimension; ++j) {
        out.emplace_back(vocab, dimension, std::vector<Node>{Node::variable(j)});
    }
    return out;
}

PriorConfig parse_prior(std::string_view json_text, std::shared_ptr<const OpVocabulary> vocab)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed prior file: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("ops") || !doc["ops"].is_object()) {
        throw ConfigError("prior file needs an \"ops\" object");
    }
    const auto& ops = doc["ops"];
    std::vector<OpHyperparameters> per_op;
    for (std::size_t i = 0; i < vocab->size(); ++i) {
        const std::string name(vocab->op(static_cast<OpId>(i)).name);
        if (!ops.contains(name)) {
            throw ConfigError("prior file has no entry for operation '" + name + "'");
        }
        const auto& entry = ops[name];
        if (!entry.is_object() || !entry.contains("alpha") || !entry.contains("beta") ||
            !entry["alpha"].is_number() || !entry["beta"].is_number()) {
            throw ConfigError("prior entry for '" + name + "' needs numeric \"alpha\" and \"beta\"");
        }
        per_op.push_back({entry["alpha"].get<double>(), entry["beta"].get<double>()});
    }
    return PriorConfig(std::move(vocab), std::move(per_op));
}

PriorConfig load_prior(const std::filesystem::path& path, std::shared_ptr<const OpVocabulary> vocab)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open prior file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_prior(buf.str(), std::move(vocab));
}

std::string prior_to_json(const PriorConfig& prior)
{
    nlohmann::ordered_json ops = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < prior.vocabulary().size(); ++i) {
        const auto id = static_cast<OpId>(i);
        ops[std::string(prior.vocabulary().op(id).name)] = {{"alpha", prior.hyper(id).alpha},
                                                             {"beta", prior.hyper(id).beta}};
    }
    nlohmann::ordered_json doc;
    doc["ops"] = ops;
    return doc.dump(2);
}

} // namespace mdlsr
