#include "mdlsr/description_length.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "mdlsr/canonical.hpp"
#include "mdlsr/rng.hpp"

namespace mdlsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double floored(double s2, double variance_floor) { return std::max(s2, variance_floor); }

} // namespace

double log_likelihood(const Dataset& data, const FitResult& fit, double variance_floor)
{
    if (!fit.converged || !std::isfinite(fit.s2)) {
        return -kInf;
    }
    const auto n = static_cast<double>(data.size());
    return -0.5 * n * (std::log(2.0 * std::numbers::pi * floored(fit.s2, variance_floor)) + 1.0);
}

double bic(const Dataset& data, const ExprTree& tree, const FitResult& fit, double variance_floor)
{
    const auto n = static_cast<double>(data.size());
    const auto k = static_cast<double>(tree.param_count());
    return -2.0 * log_likelihood(data, fit, variance_floor) + (k + 1.0) * std::log(n);
}

DescriptionLength description_length(const Dataset& data, const ExprTree& tree, const FitResult& fit,
                                     const PriorConfig& prior, double variance_floor)
{
    const auto n = static_cast<double>(data.size());
    const auto k = static_cast<double>(tree.param_count());
    DescriptionLength dl;
    dl.fit_term = -log_likelihood(data, fit, variance_floor);
    dl.param_penalty = 0.5 * (k + 1.0) * std::log(n);
    dl.model_complexity = prior.model_complexity(tree);
    return dl;
}

DescriptionLength description_length(const Dataset& data, const ExprTree& tree, const PriorConfig& prior,
                                     const FitOptions& options, std::uint64_t seed)
{
    ModelScorer scorer(data, prior, options, seed);
    return scorer.score(tree)->dl;
}

double predicted_dl_true(double n, double k_true, double model_complexity, double mean_eps2)
{
    if (!(mean_eps2 > 0.0) || !std::isfinite(mean_eps2)) {
        throw std::domain_error("predicted_dl_true: mean squared noise must be positive");
    }
    return 0.5 * n * (std::log(2.0 * std::numbers::pi * mean_eps2) + 1.0) + 0.5 * (k_true + 1.0) * std::log(n) +
           model_complexity;
}

double predicted_dl_trivial(double n, double mean_eps2, double mean_delta2, double trivial_complexity)
{
    const double total = mean_eps2 + mean_delta2;
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw std::domain_error("predicted_dl_trivial: total variance must be positive");
    }
    return 0.5 * n * (std::log(2.0 * std::numbers::pi * total) + 1.0) + std::log(n) + trivial_complexity;
}

std::shared_ptr<const ScoredModel> FitCache::find(const std::string& key) const
{
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : it->second;
}

void FitCache::insert(std::shared_ptr<const ScoredModel> model)
{
    std::lock_guard lock(mutex_);
    entries_[model->key] = std::move(model);
}

std::size_t FitCache::size() const
{
    std::lock_guard lock(mutex_);
    return entries_.size();
}

ModelScorer::ModelScorer(const Dataset& data, const PriorConfig& prior, FitOptions options, std::uint64_t fit_seed,
                         std::shared_ptr<FitCache> cache)
    : data_(data), prior_(prior), options_(options), fit_seed_(fit_seed), cache_(std::move(cache))
{
    if (data_.size() == 0) {
        throw std::invalid_argument("ModelScorer: empty dataset");
    }
}

std::shared_ptr<const ScoredModel> ModelScorer::score(const ExprTree& tree, std::span<const double> warm_start)
{
    if (tree.dimension() != data_.dimension()) {
        throw std::invalid_argument("model dimension " + std::to_string(tree.dimension()) +
                                    " does not match dataset dimension " + std::to_string(data_.dimension()));
    }
    Canonicalized canon = canonicalize(tree);
    if (auto hit = cache_->find(canon.key)) {
        return hit;
    }
    std::vector<double> warm;
    if (warm_start.size() == tree.param_count()) {
        warm.resize(warm_start.size());
        for (std::size_t s = 0; s < warm_start.size(); ++s) {
            warm[canon.slot_map[s]] = warm_start[s];
        }
    }
    auto model = std::make_shared<ScoredModel>();
    model->fit = fit_params(canon.tree, data_, options_, split_seed(fit_seed_, hash_string(canon.key)), warm);
    model->dl = description_length(data_, canon.tree, model->fit, prior_, options_.variance_floor);
    model->key = std::move(canon.key);
    ++fits_;
    cache_->insert(model);
    return model;
}

std::vector<double> ModelScorer::params_for(const ExprTree& tree, std::span<const double> canonical_theta) const
{
    const Canonicalized canon = canonicalize(tree);
    std::vector<double> out(tree.param_count());
    for (std::size_t s = 0; s < out.size(); ++s) {
        out[s] = canonical_theta[canon.slot_map[s]];
    }
    return out;
}

} // namespace mdlsr
