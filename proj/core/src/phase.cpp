#include "mdlsr/phase.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "mdlsr/description_length.hpp"
#include "mdlsr/text.hpp"

namespace mdlsr {

namespace {

constexpr std::size_t kMaxRedraws = 1000;

std::vector<double> draw_point(const std::vector<Interval>& domain, Rng& rng)
{
    std::vector<double> x(domain.size());
    for (std::size_t j = 0; j < domain.size(); ++j) {
        x[j] = std::uniform_real_distribution<double>(domain[j].low, domain[j].high)(rng);
    }
    return x;
}

double draw_value(const PlantedModel& planted, Rng& rng, std::vector<double>& x)
{
    for (std::size_t attempt = 0; attempt < kMaxRedraws; ++attempt) {
        x = draw_point(planted.domain(), rng);
        if (auto v = evaluate(planted.tree(), planted.theta(), x)) {
            return *v;
        }
    }
    throw std::runtime_error("planted model is not finite on its domain");
}

} // namespace

PlantedModel::PlantedModel(ExprTree tree, std::vector<double> theta, std::vector<Interval> domain)
    : tree_(std::move(tree)), theta_(std::move(theta)), domain_(std::move(domain))
{
    if (theta_.size() != tree_.param_count()) {
        throw std::invalid_argument(fmt::format("planted model has {} parameters but theta has {} values",
                                                tree_.param_count(), theta_.size()));
    }
    if (domain_.empty()) {
        domain_.assign(tree_.dimension(), Interval{});
    }
    if (domain_.size() != tree_.dimension()) {
        throw std::invalid_argument(fmt::format("domain has {} intervals for {} inputs", domain_.size(),
                                                tree_.dimension()));
    }
    for (const Interval& iv : domain_) {
        if (!(iv.low < iv.high) || !std::isfinite(iv.low) || !std::isfinite(iv.high)) {
            throw std::invalid_argument(fmt::format("empty input interval [{}, {}]", iv.low, iv.high));
        }
    }
    for (double t : theta_) {
        if (!std::isfinite(t)) {
            throw std::invalid_argument("planted parameters must be finite");
        }
    }
}

Dataset generate_dataset(const PlantedModel& planted, std::size_t n, double s_eps, std::uint64_t seed)
{
    if (n == 0) {
        throw std::invalid_argument("dataset size must be at least 1");
    }
    if (!(s_eps >= 0.0) || !std::isfinite(s_eps)) {
        throw std::invalid_argument("noise level must be finite and nonnegative");
    }
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const std::size_t d = planted.dimension();
    std::vector<double> rows;
    rows.reserve(n * d);
    std::vector<double> y;
    y.reserve(n);
    std::vector<double> x;
    for (std::size_t i = 0; i < n; ++i) {
        const double value = draw_value(planted, rng, x);
        rows.insert(rows.end(), x.begin(), x.end());
        y.push_back(value + s_eps * noise(rng));
    }
    Provenance provenance{to_text(planted.tree()), planted.theta(), s_eps, seed};
    return Dataset(d, rows, std::move(y), std::move(provenance));
}

Delta2Estimate estimate_delta2(const PlantedModel& planted, std::size_t n_mc, std::uint64_t seed)
{
    if (n_mc < 1000) {
        throw std::invalid_argument("variance estimate needs at least 1000 samples");
    }
    Rng rng(seed);
    std::vector<double> values(n_mc);
    for (double& v : values) {
        const auto x = draw_point(planted.domain(), rng);
        const auto f = evaluate(planted.tree(), planted.theta(), x);
        if (!f) {
            throw std::runtime_error("planted model is not finite on its domain");
        }
        v = *f;
    }
    const auto n = static_cast<double>(n_mc);
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= n;
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : values) {
        const double d2 = (v - mean) * (v - mean);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    return Delta2Estimate{m2, std::sqrt(std::max(0.0, m4 - m2 * m2) / n)};
}

double transition_noise_exact(double delta2, double complexity_gap, double k, double n)
{
    if (delta2 < 0.0) {
        throw std::domain_error("variance of the true model must be nonnegative");
    }
    if (n < 2.0) {
        throw std::domain_error("transition noise needs N >= 2");
    }
    const double denominator = std::expm1(2.0 * complexity_gap / n + (k - 1.0) / n * std::log(n));
    if (denominator <= 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return std::sqrt(delta2 / denominator);
}

double transition_noise_approx(double delta2, double complexity_gap, double k, double n)
{
    if (delta2 < 0.0) {
        throw std::domain_error("variance of the true model must be nonnegative");
    }
    const double denominator = 2.0 * complexity_gap + (k - 1.0) * std::log(n);
    if (!(denominator > 0.0)) {
        throw std::domain_error("large-N transition noise needs 2*complexity_gap + (k-1) ln N > 0");
    }
    return std::sqrt(delta2 * n / denominator);
}

double rmse(const ExprTree& tree, std::span<const double> theta, const Dataset& test)
{
    if (tree.dimension() != test.dimension()) {
        throw std::invalid_argument(fmt::format("model dimension {} does not match test data dimension {}",
                                                tree.dimension(), test.dimension()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto prediction = evaluate(tree, theta, test.row(i));
        const double r = prediction ? test.y()[i] - *prediction : kNonFiniteResidual;
        sum += r * r;
    }
    return std::sqrt(sum / static_cast<double>(test.size()));
}

TrialRecord learnability_trial(const PlantedModel& planted, const PriorConfig& prior, std::size_t n, double s_eps,
                               std::uint64_t seed, const TrialOptions& options)
{
    const Dataset train = generate_dataset(planted, n, s_eps, split_seed(seed, 1));
    const Dataset test = generate_dataset(planted, n, s_eps, split_seed(seed, 2));
    const std::uint64_t chain_seed = split_seed(seed, 3);

    auto cache = std::make_shared<FitCache>();
    ModelScorer scorer(train, prior, options.sampler.fit, fit_seed_for(chain_seed), cache);
    const double h_true = scorer.score(planted.tree(), planted.theta())->dl.total();
    const SampleTrace trace = sample(train, prior, options.sampler, chain_seed, cache);

    TrialRecord rec;
    rec.n = n;
    rec.s_eps = s_eps;
    rec.seed = seed;
    rec.mdl_expr = trace.mdl_model;
    rec.h_mdl = trace.mdl_h();
    rec.h_true = h_true;
    rec.learnable = rec.h_mdl >= h_true - options.gap_tolerance;
    rec.rmse = rmse(*trace.mdl_tree, trace.mdl_theta, test);
    return rec;
}

std::vector<double> NoiseGrid::levels(double transition) const
{
    if (!absolute.empty()) {
        return absolute;
    }
    if (!relative.empty()) {
        if (!std::isfinite(transition)) {
            throw std::invalid_argument("relative noise grid needs a finite transition noise");
        }
        std::vector<double> out;
        for (double r : relative) {
            if (!(r > 0.0)) {
                throw std::invalid_argument("relative noise levels must be positive");
            }
            out.push_back(r * transition);
        }
        return out;
    }
    if (points == 0 || !(low > 0.0) || !(high >= low)) {
        throw std::invalid_argument("noise grid needs points >= 1 and 0 < low <= high");
    }
    if (!std::isfinite(transition)) {
        throw std::invalid_argument("relative noise grid needs a finite transition noise");
    }
    std::vector<double> out(points);
    for (std::size_t i = 0; i < points; ++i) {
        const double t = points == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(points - 1);
        out[i] = transition * std::exp(std::log(low) + t * (std::log(high) - std::log(low)));
    }
    return out;
}

const TransitionPoint& SweepResult::transition(std::size_t n) const
{
    for (const TransitionPoint& t : transitions) {
        if (t.n == n) {
            return t;
        }
    }
    throw std::out_of_range(fmt::format("no transition point for N = {}", n));
}

std::vector<SweepCell> SweepResult::curve(std::size_t n) const
{
    std::vector<SweepCell> out;
    std::copy_if(cells.begin(), cells.end(), std::back_inserter(out), [n](const SweepCell& c) { return c.n == n; });
    return out;
}

std::uint64_t trial_seed(std::uint64_t master, const std::string& model_id, std::size_t n, std::size_t noise_index,
                         std::size_t replica)
{
    std::uint64_t s = split_seed(master, hash_string(model_id));
    s = split_seed(s, n);
    s = split_seed(s, noise_index);
    return split_seed(s, replica);
}

SweepResult learnability_curve(const PlantedModel& planted, const PriorConfig& prior, const SweepSpec& spec,
                               const TrialOptions& options)
{
    if (spec.replicas == 0) {
        throw std::invalid_argument("a sweep needs at least one replica");
    }
    if (spec.sizes.empty()) {
        throw std::invalid_argument("a sweep needs at least one dataset size");
    }
    SweepResult result;
    result.model_id = spec.model_id;
    result.delta2 = estimate_delta2(planted, spec.delta2_samples, split_seed(spec.seed, hash_string("delta2")));
    result.complexity_gap = prior.model_complexity(planted.tree());
    result.k_true = planted.param_count();

    struct Task {
        std::size_t n;
        std::size_t noise_index;
        double s_eps;
        std::size_t replica;
    };
    std::vector<Task> tasks;
    std::vector<std::vector<double>> grids;
    for (std::size_t n : spec.sizes) {
        const auto nd = static_cast<double>(n);
        const auto k = static_cast<double>(result.k_true);
        TransitionPoint tp{n, transition_noise_exact(result.delta2.value, result.complexity_gap, k, nd), 0.0};
        const double approx_denominator = 2.0 * result.complexity_gap + (k - 1.0) * std::log(nd);
        tp.approx = approx_denominator > 0.0
                        ? transition_noise_approx(result.delta2.value, result.complexity_gap, k, nd)
                        : std::numeric_limits<double>::infinity();
        result.transitions.push_back(tp);
        grids.push_back(spec.noise.levels(tp.exact));
        for (std::size_t i = 0; i < grids.back().size(); ++i) {
            for (std::size_t r = 0; r < spec.replicas; ++r) {
                tasks.push_back(Task{n, i, grids.back()[i], r});
            }
        }
    }

    std::vector<TrialRecord> records(tasks.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&]() {
        for (std::size_t t = next++; t < tasks.size(); t = next++) {
            try {
                const Task& task = tasks[t];
                const std::uint64_t seed =
                    trial_seed(spec.seed, spec.model_id, task.n, task.noise_index, task.replica);
                TrialRecord rec = learnability_trial(planted, prior, task.n, task.s_eps, seed, options);
                rec.model_id = spec.model_id;
                rec.replica = task.replica;
                records[t] = std::move(rec);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) {
                    failure = std::current_exception();
                }
                next = tasks.size();
            }
        }
    };
    std::size_t jobs = spec.jobs == 0 ? std::max(1U, std::thread::hardware_concurrency()) : spec.jobs;
    jobs = std::min(jobs, tasks.size());
    if (jobs <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t j = 0; j < jobs; ++j) {
            pool.emplace_back(worker);
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    result.trials = std::move(records);

    std::size_t t = 0;
    for (std::size_t g = 0; g < spec.sizes.size(); ++g) {
        for (double s : grids[g]) {
            SweepCell cell{spec.sizes[g], s};
            for (std::size_t r = 0; r < spec.replicas; ++r, ++t) {
                const TrialRecord& rec = result.trials[t];
                cell.rho += rec.learnable ? 1.0 : 0.0;
                cell.mean_rmse_over_s += rec.rmse_over_s();
                cell.mean_h_mdl += rec.h_mdl;
                cell.mean_h_true += rec.h_true;
            }
            const auto reps = static_cast<double>(spec.replicas);
            cell.trials = spec.replicas;
            cell.rho /= reps;
            cell.mean_rmse_over_s /= reps;
            cell.mean_h_mdl /= reps;
            cell.mean_h_true /= reps;
            result.cells.push_back(cell);
        }
    }
    return result;
}

std::optional<double> rho_crossing(const std::vector<SweepCell>& curve)
{
    for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
        const SweepCell& a = curve[i];
        const SweepCell& b = curve[i + 1];
        if (a.rho >= 0.5 && b.rho < 0.5) {
            const double f = (a.rho - 0.5) / (a.rho - b.rho);
            return std::exp(std::log(a.s_eps) + f * (std::log(b.s_eps) - std::log(a.s_eps)));
        }
    }
    return std::nullopt;
}

std::vector<CollapsedPoint> scaled_collapse(const std::vector<SweepResult>& sweeps)
{
    std::vector<CollapsedPoint> out;
    for (const SweepResult& sweep : sweeps) {
        for (const SweepCell& cell : sweep.cells) {
            const double cross = sweep.transition(cell.n).exact;
            out.push_back(CollapsedPoint{sweep.model_id, cell.n, cell.s_eps / cross, cell.rho});
        }
    }
    return out;
}

void write_sweep_csv(std::ostream& out, const SweepResult& sweep, bool header)
{
    if (header) {
        out << "model_id,N,s_eps,replica,seed,learnable,gap,H_mdl,H_true,rmse,rmse_over_s,mdl_expr\n";
    }
    for (const TrialRecord& r : sweep.trials) {
        out << fmt::format("{},{},{:.17g},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},\"{}\"\n", r.model_id, r.n,
                           r.s_eps, r.replica, r.seed, r.learnable ? 1 : 0, r.gap(), r.h_mdl, r.h_true, r.rmse,
                           r.rmse_over_s(), r.mdl_expr);
    }
}

void write_summary_csv(std::ostream& out, const SweepResult& sweep, bool header)
{
    if (header) {
        out << "model_id,N,s_eps,rho,mean_rmse_over_s,s_eps_cross_exact,s_eps_cross_approx\n";
    }
    for (const SweepCell& c : sweep.cells) {
        const TransitionPoint& tp = sweep.transition(c.n);
        out << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", sweep.model_id, c.n, c.s_eps, c.rho,
                           c.mean_rmse_over_s, tp.exact, tp.approx);
    }
}

} // namespace mdlsr
