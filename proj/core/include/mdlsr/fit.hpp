#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "mdlsr/dataset.hpp"
#include "mdlsr/expr_tree.hpp"

namespace mdlsr {

enum class FitMethod { LevenbergMarquardt, NelderMead };

FitMethod parse_fit_method(std::string_view name);
std::string_view to_string(FitMethod method);

struct FitOptions {
    /// Random starts drawn uniformly in [param_min, param_max]^k, in addition
    /// to the warm start when one is supplied.
    std::size_t restarts = 4;
    /// Simplex iterations per start (Nelder-Mead).
    std::size_t max_iters = 2000;
    /// Model evaluations per start (Levenberg-Marquardt), Jacobians included.
    std::size_t max_evaluations = 100;
    double param_min = -10.0;
    double param_max = 10.0;
    /// Floor applied to s_y^2 before taking logarithms.
    double variance_floor = 1e-12;
    FitMethod method = FitMethod::LevenbergMarquardt;
    /// Relative RSS change below which a local search stops.
    double tolerance = 1e-10;
};

/// Maximum-likelihood fit of a model's parameters under Gaussian noise.
struct FitResult {
    std::vector<double> theta;
    /// MLE noise variance RSS / N (unfloored); +inf when nothing was fittable.
    double s2 = 0.0;
    double rss = 0.0;
    bool converged = false;
    std::size_t evaluations = 0;
};

/// Sum of squared residuals at `theta`; +inf when any prediction is non-finite.
double residual_sum_of_squares(const ExprTree& tree, const Dataset& data, std::span<const double> theta);

struct LocalFit {
    std::vector<double> theta;
    double rss = 0.0;
    std::size_t evaluations = 0;
};

/// Derivative-free simplex search on an arbitrary objective.
LocalFit nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> start,
                     double initial_step, std::size_t max_iters, double tolerance);

/// Minimizes RSS(theta) = Σ (y_i - m(x_i, theta))^2 by multi-start local
/// search. The best finite optimum over all starts wins. k = 0 evaluates the
/// tree once. If no start is feasible, returns converged = false with
/// s2 = rss = +inf.
FitResult fit_params(const ExprTree& tree, const Dataset& data, const FitOptions& options, std::uint64_t seed,
                     std::span<const double> warm_start = {});

} // namespace mdlsr
