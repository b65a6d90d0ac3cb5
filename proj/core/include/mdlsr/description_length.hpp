#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mdlsr/dataset.hpp"
#include "mdlsr/expr_tree.hpp"
#include "mdlsr/fit.hpp"
#include "mdlsr/prior.hpp"

namespace mdlsr {

/// H(m) = B(m)/2 + H_M(m) split into its three terms (nats).
struct DescriptionLength {
    /// (N/2)(ln 2π s_y^2 + 1), with s_y^2 floored.
    double fit_term = 0.0;
    /// ((k+1)/2) ln N.
    double param_penalty = 0.0;
    /// H_M(m) = -ln p(m) with H_M of op-free models equal to 0.
    double model_complexity = 0.0;

    double total() const { return fit_term + param_penalty + model_complexity; }
    double bic() const { return 2.0 * (fit_term + param_penalty); }
};

/// ln L at the MLE plug-in: -(N/2)(ln 2π s^2 + 1) with s^2 = max(s_y^2, floor).
/// Returns -inf for an unfittable model.
double log_likelihood(const Dataset& data, const FitResult& fit, double variance_floor = 1e-12);

/// B(m) = -2 ln L + (k+1) ln N.
double bic(const Dataset& data, const ExprTree& tree, const FitResult& fit, double variance_floor = 1e-12);

/// Assembles H(m) from an existing fit. Unfittable models get +inf terms.
DescriptionLength description_length(const Dataset& data, const ExprTree& tree, const FitResult& fit,
                                     const PriorConfig& prior, double variance_floor = 1e-12);

/// Fits the model, then assembles H(m).
DescriptionLength description_length(const Dataset& data, const ExprTree& tree, const PriorConfig& prior,
                                     const FitOptions& options = {}, std::uint64_t seed = 0);

/// Expected H(m*) given the mean squared noise: (N/2)[ln 2π<eps^2> + 1] + ((k*+1)/2) ln N + H_M(m*).
double predicted_dl_true(double n, double k_true, double model_complexity, double mean_eps2);

/// Expected H of the constant model: (N/2)[ln 2π(<eps^2> + <delta^2>) + 1] + ln N + H_M(m^c).
double predicted_dl_trivial(double n, double mean_eps2, double mean_delta2, double trivial_complexity = 0.0);

/// A fitted and scored model structure. `theta` is in the slot order of
/// the canonical form identified by `key`.
struct ScoredModel {
    std::string key;
    FitResult fit;
    DescriptionLength dl;
};

/// Map from canonical key to fit, safe for concurrent use. Concurrent
/// duplicate inserts keep the last value.
class FitCache {
public:
    std::shared_ptr<const ScoredModel> find(const std::string& key) const;
    void insert(std::shared_ptr<const ScoredModel> model);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::unordered_map<std::string, std::shared_ptr<const ScoredModel>> entries_;
};

/// Computes H(m) on one dataset through a fit cache keyed by canonical form,
/// so equivalent trees are fitted once. Random fit starts are seeded from the
/// canonical key.
class ModelScorer {
public:
    ModelScorer(const Dataset& data, const PriorConfig& prior, FitOptions options, std::uint64_t fit_seed,
                std::shared_ptr<FitCache> cache = std::make_shared<FitCache>());

    /// Scores `tree`; `warm_start` is in `tree`'s own slot order.
    std::shared_ptr<const ScoredModel> score(const ExprTree& tree, std::span<const double> warm_start = {});

    /// Maps a canonical-order parameter vector back to `tree`'s slot order.
    std::vector<double> params_for(const ExprTree& tree, std::span<const double> canonical_theta) const;

    const Dataset& data() const { return data_; }
    const PriorConfig& prior() const { return prior_; }
    const FitOptions& options() const { return options_; }
    FitCache& cache() { return *cache_; }
    std::size_t fits_performed() const { return fits_; }

private:
    const Dataset& data_;
    const PriorConfig& prior_;
    FitOptions options_;
    std::uint64_t fit_seed_;
    std::shared_ptr<FitCache> cache_;
    std::size_t fits_ = 0;
};

} // namespace mdlsr
