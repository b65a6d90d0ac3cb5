#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mdlsr/dataset.hpp"
#include "mdlsr/expr_tree.hpp"
#include "mdlsr/prior.hpp"
#include "mdlsr/sampler.hpp"

namespace mdlsr {

struct Interval {
    double low = -2.0;
    double high = 2.0;
};

/// A generating model m*(x, θ*) with the box its inputs are drawn from.
class PlantedModel {
public:
    /// Throws std::invalid_argument when θ* has the wrong length, the domain
    /// has the wrong dimension or an interval is empty. An empty `domain`
    /// means [-2, 2] for every input.
    PlantedModel(ExprTree tree, std::vector<double> theta, std::vector<Interval> domain = {});

    const ExprTree& tree() const { return tree_; }
    const std::vector<double>& theta() const { return theta_; }
    const std::vector<Interval>& domain() const { return domain_; }
    std::size_t dimension() const { return tree_.dimension(); }
    std::size_t param_count() const { return tree_.param_count(); }

private:
    ExprTree tree_;
    std::vector<double> theta_;
    std::vector<Interval> domain_;
};

/// Draws N points uniformly on the domain box with y = m*(x, θ*) + Normal(0, s²).
/// Points where m* is not finite are redrawn a bounded number of times.
Dataset generate_dataset(const PlantedModel& planted, std::size_t n, double s_eps, std::uint64_t seed);

struct Delta2Estimate {
    double value = 0.0;
    double standard_error = 0.0;
};

/// Monte Carlo variance of m*(x, θ*) over the domain box. Requires n_mc >= 1000.
Delta2Estimate estimate_delta2(const PlantedModel& planted, std::size_t n_mc, std::uint64_t seed);

/// Noise at which the true model and the constant model have equal expected
/// description length:
/// sqrt(δ² / (exp(2 ΔH_M / N) N^((k-1)/N) - 1)). A nonpositive denominator gives +inf.
double transition_noise_exact(double delta2, double complexity_gap, double k, double n);

/// Large-N form sqrt(δ² N / (2 ΔH_M + (k-1) ln N)). Throws std::domain_error
/// when the denominator is not positive.
double transition_noise_approx(double delta2, double complexity_gap, double k, double n);

/// Residual used in place of a non-finite test prediction.
inline constexpr double kNonFiniteResidual = 1e6;

/// Root mean squared prediction error on `test`.
double rmse(const ExprTree& tree, std::span<const double> theta, const Dataset& test);

struct TrialOptions {
    SamplerOptions sampler;
    /// Learnable when H(MDL) >= H(m*) - gap_tolerance.
    double gap_tolerance = 1e-6;
};

struct TrialRecord {
    std::string model_id;
    std::size_t n = 0;
    double s_eps = 0.0;
    std::size_t replica = 0;
    std::uint64_t seed = 0;
    std::string mdl_expr;
    double h_mdl = 0.0;
    double h_true = 0.0;
    bool learnable = false;
    double rmse = 0.0;

    double gap() const { return h_mdl - h_true; }
    double rmse_over_s() const
    {
        return s_eps > 0.0 ? rmse / s_eps : std::numeric_limits<double>::infinity();
    }
};

/// One training set D and test set D' of size N, H(m*) fitted on D starting
/// from θ*, one sampler run on D, and the MDL model's RMSE on D'.
TrialRecord learnability_trial(const PlantedModel& planted, const PriorConfig& prior, std::size_t n, double s_eps,
                               std::uint64_t seed, const TrialOptions& options);

/// Noise levels to sweep. `absolute` wins when set, then `relative`
/// (multiples of the exact transition noise at each N); otherwise the grid is
/// `points` log-spaced values over [low, high] times that transition noise.
struct NoiseGrid {
    std::vector<double> absolute;
    std::vector<double> relative;
    std::size_t points = 12;
    double low = 1.0 / 30.0;
    double high = 10.0;

    std::vector<double> levels(double transition) const;
};

struct SweepSpec {
    std::string model_id = "model";
    std::vector<std::size_t> sizes{25, 100, 400};
    NoiseGrid noise;
    std::size_t replicas = 20;
    std::uint64_t seed = 0;
    /// Worker threads; 0 uses the hardware concurrency.
    std::size_t jobs = 1;
    /// Monte Carlo samples for δ².
    std::size_t delta2_samples = 200000;
};

struct SweepCell {
    std::size_t n = 0;
    double s_eps = 0.0;
    double rho = 0.0;
    double mean_rmse_over_s = 0.0;
    double mean_h_mdl = 0.0;
    double mean_h_true = 0.0;
    std::size_t trials = 0;
};

struct TransitionPoint {
    std::size_t n = 0;
    double exact = 0.0;
    double approx = 0.0;
};

struct SweepResult {
    std::string model_id;
    Delta2Estimate delta2;
    double complexity_gap = 0.0;
    std::size_t k_true = 0;
    std::vector<TransitionPoint> transitions;
    /// Sorted by (N, s_eps index, replica).
    std::vector<TrialRecord> trials;
    /// Sorted by (N, s_eps).
    std::vector<SweepCell> cells;

    const TransitionPoint& transition(std::size_t n) const;
    std::vector<SweepCell> curve(std::size_t n) const;
};

/// Deterministic per-trial seed for the key (model, N, noise index, replica).
std::uint64_t trial_seed(std::uint64_t master, const std::string& model_id, std::size_t n, std::size_t noise_index,
                         std::size_t replica);

/// Runs replicas x noise levels x sizes trials on a worker pool. Results are
/// independent of the number of workers.
SweepResult learnability_curve(const PlantedModel& planted, const PriorConfig& prior, const SweepSpec& spec,
                               const TrialOptions& options);

/// Noise at which ρ first falls from >= 0.5 to < 0.5 along the grid,
/// interpolated linearly in log s. nullopt when ρ never crosses.
std::optional<double> rho_crossing(const std::vector<SweepCell>& curve);

struct CollapsedPoint {
    std::string model_id;
    std::size_t n = 0;
    double scaled_noise = 0.0;
    double rho = 0.0;
};

/// Learnability against s / s× for every curve of every sweep.
std::vector<CollapsedPoint> scaled_collapse(const std::vector<SweepResult>& sweeps);

/// `model_id,N,s_eps,replica,seed,learnable,gap,H_mdl,H_true,rmse,rmse_over_s,mdl_expr`
void write_sweep_csv(std::ostream& out, const SweepResult& sweep, bool header = true);
/// `model_id,N,s_eps,rho,mean_rmse_over_s,s_eps_cross_exact,s_eps_cross_approx`
void write_summary_csv(std::ostream& out, const SweepResult& sweep, bool header = true);

} // namespace mdlsr
