#include "mdlsr/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <Eigen/Dense>

#include "mdlsr/batch_eval.hpp"

namespace mdlsr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double rss_of(std::span<const double> y, std::span<const double> pred)
{
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y[i] - pred[i];
        s += r * r;
    }
    return std::isfinite(s) ? s : kInf;
}

class RssObjective {
public:
    RssObjective(const ExprTree& tree, const Dataset& data) : eval_(tree), data_(data), pred_(data.size()) {}

    double operator()(std::span<const double> theta)
    {
        ++evaluations;
        if (!eval_.predict(theta, data_, pred_)) {
            return kInf;
        }
        return rss_of(data_.y(), pred_);
    }

    BatchEvaluator& evaluator() { return eval_; }
    std::size_t evaluations = 0;

private:
    BatchEvaluator eval_;
    const Dataset& data_;
    std::vector<double> pred_;
};

LocalFit levenberg_marquardt(RssObjective& objective, const Dataset& data, std::vector<double> theta,
                             std::size_t max_evaluations, double tolerance)
{
    const std::size_t n = data.size();
    const std::size_t k = theta.size();
    std::vector<double> pred(n);
    std::vector<double> jac(n * k);
    LocalFit out{theta, kInf, 0};

    auto& ev = objective.evaluator();
    ++objective.evaluations;
    if (!ev.predict_with_jacobian(theta, data, pred, jac)) {
        return out;
    }
    double rss = rss_of(data.y(), pred);
    if (!std::isfinite(rss)) {
        return out;
    }

    Eigen::MatrixXd a(k, k);
    Eigen::VectorXd g(k);
    double lambda = 1e-3;
    std::vector<double> trial(k);
    std::size_t used = 1;
    while (used < max_evaluations && rss > 0.0) {
        const auto y = data.y();
        for (std::size_t r = 0; r < k; ++r) {
            const double* jr = &jac[r * n];
            double gr = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                gr += jr[i] * (y[i] - pred[i]);
            }
            g(static_cast<Eigen::Index>(r)) = gr;
            for (std::size_t c = 0; c <= r; ++c) {
                const double* jc = &jac[c * n];
                double s = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    s += jr[i] * jc[i];
                }
                a(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = s;
                a(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = s;
            }
        }
        const double diag_max = a.diagonal().maxCoeff();
        if (!(diag_max > 0.0)) {
            break; // flat in every direction
        }

        bool improved = false;
        double new_rss = rss;
        while (lambda < 1e10 && used < max_evaluations) {
            Eigen::MatrixXd m = a;
            for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(k); ++d) {
                m(d, d) += lambda * std::max(a(d, d), 1e-12 * diag_max);
            }
            const Eigen::VectorXd step = m.ldlt().solve(g);
            for (std::size_t c = 0; c < k; ++c) {
                trial[c] = theta[c] + step(static_cast<Eigen::Index>(c));
            }
            const double candidate = objective(trial);
            ++used;
            if (candidate < rss) {
                new_rss = candidate;
                improved = true;
                lambda = std::max(lambda * 0.2, 1e-15);
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            break;
        }
        const double change = (rss - new_rss) / rss;
        theta = trial;
        rss = new_rss;
        ++objective.evaluations;
        ++used;
        if (!ev.predict_with_jacobian(theta, data, pred, jac)) {
            break;
        }
        if (change < tolerance) {
            break;
        }
    }
    out.theta = std::move(theta);
    out.rss = rss;
    return out;
}

} // namespace

FitMethod parse_fit_method(std::string_view name)
{
    if (name == "levenberg-marquardt" || name == "lm") {
        return FitMethod::LevenbergMarquardt;
    }
    if (name == "nelder-mead" || name == "nm") {
        return FitMethod::NelderMead;
    }
    throw std::invalid_argument("unknown fit method '" + std::string(name) + "'");
}

std::string_view to_string(FitMethod method)
{
    return method == FitMethod::LevenbergMarquardt ? "levenberg-marquardt" : "nelder-mead";
}

double residual_sum_of_squares(const ExprTree& tree, const Dataset& data, std::span<const double> theta)
{
    RssObjective objective(tree, data);
    return objective(theta);
}

LocalFit nelder_mead(const std::function<double(std::span<const double>)>& objective, std::vector<double> start,
                     double initial_step, std::size_t max_iters, double tolerance)
{
    const std::size_t k = start.size();
    LocalFit out{start, objective(start), 1};
    if (k == 0 || !std::isfinite(out.rss)) {
        return out;
    }

    // Adaptive coefficients (Gao & Han) behave better than the classic ones for k > 2.
    const double dim = static_cast<double>(k);
    const double alpha = 1.0;
    const double gamma = 1.0 + 2.0 / dim;
    const double rho = 0.75 - 1.0 / (2.0 * dim);
    const double sigma = 1.0 - 1.0 / dim;

    std::vector<std::vector<double>> simplex(k + 1, start);
    std::vector<double> f(k + 1, out.rss);
    for (std::size_t i = 0; i < k; ++i) {
        const double h = start[i] != 0.0 ? initial_step * std::fabs(start[i]) : initial_step;
        simplex[i + 1][i] += h;
        f[i + 1] = objective(simplex[i + 1]);
        ++out.evaluations;
    }

    std::vector<std::size_t> order(k + 1);
    std::vector<double> centroid(k);
    std::vector<double> xr(k);
    std::vector<double> xe(k);
    std::vector<double> xc(k);
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        std::iota(order.begin(), order.end(), 0U);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) { return f[lhs] < f[rhs]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[k - 1];

        const double spread = f[worst] - f[best];
        if (std::isfinite(f[worst]) && spread <= tolerance * std::fabs(f[best]) + 1e-300) {
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t v = 0; v <= k; ++v) {
            if (v == worst) {
                continue;
            }
            for (std::size_t i = 0; i < k; ++i) {
                centroid[i] += simplex[v][i] / dim;
            }
        }
        for (std::size_t i = 0; i < k; ++i) {
            xr[i] = centroid[i] + alpha * (centroid[i] - simplex[worst][i]);
        }
        const double fr = objective(xr);
        ++out.evaluations;
        if (fr < f[best]) {
            for (std::size_t i = 0; i < k; ++i) {
                xe[i] = centroid[i] + gamma * (xr[i] - centroid[i]);
            }
            const double fe = objective(xe);
            ++out.evaluations;
            if (fe < fr) {
                simplex[worst] = xe;
                f[worst] = fe;
            } else {
                simplex[worst] = xr;
                f[worst] = fr;
            }
            continue;
        }
        if (fr < f[second]) {
            simplex[worst] = xr;
            f[worst] = fr;
            continue;
        }
        const bool outside = fr < f[worst];
        for (std::size_t i = 0; i < k; ++i) {
            xc[i] = outside ? centroid[i] + rho * (xr[i] - centroid[i])
                            : centroid[i] + rho * (simplex[worst][i] - centroid[i]);
        }
        const double fc = objective(xc);
        ++out.evaluations;
        if (fc < (outside ? fr : f[worst])) {
            simplex[worst] = xc;
            f[worst] = fc;
            continue;
        }
        for (std::size_t v = 0; v <= k; ++v) {
            if (v == best) {
                continue;
            }
            for (std::size_t i = 0; i < k; ++i) {
                simplex[v][i] = simplex[best][i] + sigma * (simplex[v][i] - simplex[best][i]);
            }
            f[v] = objective(simplex[v]);
            ++out.evaluations;
        }
    }
    const auto best = static_cast<std::size_t>(std::min_element(f.begin(), f.end()) - f.begin());
    out.theta = simplex[best];
    out.rss = f[best];
    return out;
}

FitResult fit_params(const ExprTree& tree, const Dataset& data, const FitOptions& options, std::uint64_t seed,
                     std::span<const double> warm_start)
{
    const std::size_t k = tree.param_count();
    const auto n = static_cast<double>(data.size());
    RssObjective objective(tree, data);
    FitResult result;

    if (k == 0) {
        result.rss = objective(std::span<const double>{});
        result.converged = std::isfinite(result.rss);
        result.s2 = result.converged ? result.rss / n : kInf;
        result.evaluations = objective.evaluations;
        return result;
    }

    std::vector<std::vector<double>> starts;
    if (warm_start.size() == k && std::all_of(warm_start.begin(), warm_start.end(), [](double v) { return std::isfinite(v); })) {
        starts.emplace_back(warm_start.begin(), warm_start.end());
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uniform(options.param_min, options.param_max);
    for (std::size_t r = 0; r < options.restarts; ++r) {
        std::vector<double> s(k);
        for (double& v : s) {
            v = uniform(rng);
        }
        starts.push_back(std::move(s));
    }

    double best_rss = kInf;
    std::vector<double> best_theta;
    for (const auto& start : starts) {
        LocalFit local;
        if (options.method == FitMethod::LevenbergMarquardt) {
            local = levenberg_marquardt(objective, data, start, options.max_evaluations, options.tolerance);
        } else {
            local = nelder_mead([&](std::span<const double> t) { return objective(t); }, start, 0.1,
                                options.max_iters, options.tolerance);
        }
        if (local.rss < best_rss) {
            best_rss = local.rss;
            best_theta = std::move(local.theta);
        }
    }

    result.evaluations = objective.evaluations;
    if (!std::isfinite(best_rss)) {
        result.theta.assign(k, std::numeric_limits<double>::quiet_NaN());
        result.rss = kInf;
        result.s2 = kInf;
        result.converged = false;
        return result;
    }
    result.theta = std::move(best_theta);
    result.rss = best_rss;
    result.s2 = best_rss / n;
    result.converged = true;
    return result;
}

} // namespace mdlsr
