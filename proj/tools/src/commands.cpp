#include "mdlsr/cli/commands.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "mdlsr/canonical.hpp"
#include "mdlsr/description_length.hpp"
#include "mdlsr/text.hpp"

namespace mdlsr::cli {

namespace {

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::ofstream open_output(const std::filesystem::path& dir, const std::string& name)
{
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + (dir / name).string());
    }
    return out;
}

Dataset load_data(const std::filesystem::path& path, std::size_t dimension)
{
    Dataset data = [&] {
        try {
            return read_csv(path);
        } catch (const std::exception& e) {
            throw ValidationError("data file " + path.string() + ": " + e.what());
        }
    }();
    if (data.dimension() != dimension) {
        throw ValidationError(fmt::format("data file {} has {} inputs but the config declares {}", path.string(),
                                          data.dimension(), dimension));
    }
    return data;
}

const std::filesystem::path& require_data(const RunConfig& config)
{
    if (!config.data) {
        throw ValidationError("config needs a \"data\" file for this command");
    }
    return *config.data;
}

void write_curve_dat(const std::filesystem::path& out_dir, const SweepResult& sweep)
{
    auto out = open_output(out_dir, "rho_" + sweep.model_id + ".dat");
    fmt::print(out, "# s_eps rho mean_rmse_over_s s_eps_over_cross\n");
    bool first = true;
    for (const auto& tp : sweep.transitions) {
        if (!first) {
            fmt::print(out, "\n\n");
        }
        first = false;
        fmt::print(out, "# N = {}\n", tp.n);
        for (const auto& cell : sweep.curve(tp.n)) {
            fmt::print(out, "{} {} {} {}\n", num(cell.s_eps), num(cell.rho), num(cell.mean_rmse_over_s),
                       num(cell.s_eps / tp.exact));
        }
    }
}

void print_transition(std::ostream& log, const std::string& id, std::size_t n, double exact, double approx)
{
    if (std::isinf(exact)) {
        fmt::print(log, "{} N={}: infinite (trivial true model)\n", id, n);
        return;
    }
    if (std::isinf(approx)) {
        fmt::print(log, "{} N={}: exact {:.6g}, approx undefined\n", id, n, exact);
        return;
    }
    fmt::print(log, "{} N={}: exact {:.6g}, approx {:.6g}, relative difference {:.4g}\n", id, n, exact, approx,
               std::abs(approx - exact) / exact);
}

struct TransitionRow {
    std::string id;
    std::size_t n;
    double delta2;
    double delta2_se;
    double gap;
    double k;
};

} // namespace

void cmd_discover(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log)
{
    const Dataset data = load_data(require_data(config), config.dimension);
    const SampleTrace trace = sample(data, *config.prior, config.trial.sampler, config.seed);

    auto trace_out = open_output(out_dir, "trace.csv");
    write_trace_csv(trace_out, trace);

    const std::string expr = to_text(*trace.mdl_tree);
    nlohmann::ordered_json report;
    report["expression"] = expr;
    report["theta"] = trace.mdl_theta;
    report["vocabulary"] = config.vocab->names();
    report["dimension"] = config.dimension;
    report["n"] = data.size();
    report["k"] = trace.mdl_tree->param_count();
    report["H"] = trace.mdl_h();
    report["fit_term"] = trace.mdl_dl.fit_term;
    report["param_penalty"] = trace.mdl_dl.param_penalty;
    report["model_complexity"] = trace.mdl_dl.model_complexity;
    report["s_y"] = std::sqrt(trace.mdl_fit.s2);
    report["acceptance_rate"] = trace.acceptance_rate;
    report["distinct_models"] = trace.distinct_models;
    report["seed"] = config.seed;
    auto report_out = open_output(out_dir, "report.json");
    report_out << report.dump(2) << '\n';

    fmt::print(log, "MDL model: {}\n", expr);
    for (std::size_t i = 0; i < trace.mdl_theta.size(); ++i) {
        fmt::print(log, "  _c{} = {}\n", i, num(trace.mdl_theta[i]));
    }
    fmt::print(log, "H = {} (fit {}, parameters {}, complexity {})\n", num(trace.mdl_h()),
               num(trace.mdl_dl.fit_term), num(trace.mdl_dl.param_penalty), num(trace.mdl_dl.model_complexity));
    fmt::print(log, "s_y = {}\n", num(std::sqrt(trace.mdl_fit.s2)));
    fmt::print(log, "acceptance rate {:.4f}, {} distinct models\n", trace.acceptance_rate, trace.distinct_models);
}

void cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log)
{
    if (config.models.empty()) {
        throw ValidationError("config needs at least one planted model in \"models\"");
    }
    auto sweep_out = open_output(out_dir, "sweep.csv");
    auto summary_out = open_output(out_dir, "summary.csv");
    std::vector<SweepResult> results;
    for (std::size_t m = 0; m < config.models.size(); ++m) {
        const PlantedSpec& model = config.models[m];
        SweepSpec spec = config.sweep;
        spec.model_id = model.id;
        spec.seed = config.seed;
        results.push_back(learnability_curve(make_planted(config, model), *config.prior, spec, config.trial));
        const SweepResult& result = results.back();
        write_sweep_csv(sweep_out, result, m == 0);
        write_summary_csv(summary_out, result, m == 0);
        for (const auto& tp : result.transitions) {
            const auto crossing = rho_crossing(result.curve(tp.n));
            fmt::print(log, "{} N={}: transition {:.6g}, empirical crossing {}\n", model.id, tp.n, tp.exact,
                       crossing ? fmt::format("{:.6g}", *crossing) : std::string("none"));
        }
        if (config.plots) {
            write_curve_dat(out_dir, result);
        }
    }
    if (config.plots) {
        auto out = open_output(out_dir, "collapse.dat");
        fmt::print(out, "# model N s_eps_over_cross rho\n");
        for (const auto& p : scaled_collapse(results)) {
            fmt::print(out, "{} {} {} {}\n", p.model_id, p.n, num(p.scaled_noise), num(p.rho));
        }
    }
}

void cmd_transition(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log)
{
    std::vector<TransitionRow> rows;
    if (config.transition) {
        for (std::size_t n : config.sweep.sizes) {
            rows.push_back({"injected", n, config.transition->delta2, 0.0, config.transition->complexity_gap,
                            config.transition->k});
        }
    } else {
        if (config.models.empty()) {
            throw ValidationError("config needs \"models\" or \"transition\" inputs");
        }
        for (const auto& model : config.models) {
            const PlantedModel planted = make_planted(config, model);
            const Delta2Estimate d2 =
                estimate_delta2(planted, config.sweep.delta2_samples, split_seed(config.seed, hash_string("delta2")));
            const double gap = config.prior->model_complexity(planted.tree());
            for (std::size_t n : config.sweep.sizes) {
                rows.push_back({model.id, n, d2.value, d2.standard_error, gap,
                                static_cast<double>(planted.param_count())});
            }
        }
    }

    auto out = open_output(out_dir, "transition.csv");
    fmt::print(out, "model_id,N,delta2,delta2_se,H_M,k,s_eps_cross_exact,s_eps_cross_approx,relative_difference\n");
    for (const auto& r : rows) {
        const auto nd = static_cast<double>(r.n);
        const double exact = transition_noise_exact(r.delta2, r.gap, r.k, nd);
        const double denominator = 2.0 * r.gap + (r.k - 1.0) * std::log(nd);
        const double approx = denominator > 0.0 ? transition_noise_approx(r.delta2, r.gap, r.k, nd)
                                                : std::numeric_limits<double>::infinity();
        const double rel = std::isfinite(exact) && std::isfinite(approx)
                               ? std::abs(approx - exact) / exact
                               : std::numeric_limits<double>::quiet_NaN();
        fmt::print(out, "{},{},{},{},{},{},{},{},{}\n", r.id, r.n, num(r.delta2), num(r.delta2_se), num(r.gap),
                   num(r.k), num(exact), num(approx), num(rel));
        print_transition(log, r.id, r.n, exact, approx);
    }
}

void cmd_enumerate(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log)
{
    const Dataset data = load_data(require_data(config), config.dimension);
    std::vector<EnumeratedModel> models;
    try {
        models = enumerate_models(data, *config.prior, config.enumerate, config.trial.sampler.fit, config.seed);
    } catch (const std::length_error& e) {
        throw ValidationError(e.what());
    }
    auto out = open_output(out_dir, "enumerate.csv");
    fmt::print(out, "rank,H,fit_term,param_penalty,H_M,k,posterior,mdl,model\n");
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto& m = models[i];
        fmt::print(out, "{},{},{},{},{},{},{},{},\"{}\"\n", i + 1, num(m.h()), num(m.dl.fit_term),
                   num(m.dl.param_penalty), num(m.dl.model_complexity), m.tree.param_count(), num(m.posterior),
                   i == 0 ? 1 : 0, to_text(m.tree));
    }
    fmt::print(log, "{} canonical models\n", models.size());
    for (std::size_t i = 0; i < std::min<std::size_t>(models.size(), 10); ++i) {
        fmt::print(log, "{:>4} H={:<12.6f} p={:<10.4g} {}{}\n", i + 1, models[i].h(), models[i].posterior,
                   to_text(models[i].tree), i == 0 ? "  [MDL]" : "");
    }
}

void cmd_predict(const RunConfig& config, const std::filesystem::path& out_dir, std::ostream& log)
{
    if (!config.predict) {
        throw ValidationError("config needs a \"predict\" section");
    }
    const PredictSpec& spec = *config.predict;
    std::ifstream in(spec.report);
    if (!in) {
        throw ValidationError("cannot open report " + spec.report.string());
    }
    nlohmann::json report;
    try {
        report = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
    if (!report.contains("expression") || !report["expression"].is_string()) {
        throw ValidationError("report has no expression");
    }
    if (!report.contains("theta") || !report["theta"].is_array()) {
        throw ValidationError("report has no fitted parameters");
    }
    std::vector<double> theta;
    std::shared_ptr<const OpVocabulary> vocab = config.vocab;
    std::size_t dimension = config.dimension;
    try {
        theta = report["theta"].get<std::vector<double>>();
        if (report.contains("vocabulary")) {
            vocab = std::make_shared<const OpVocabulary>(report["vocabulary"].get<std::vector<std::string>>());
        }
        if (report.contains("dimension")) {
            dimension = report["dimension"].get<std::size_t>();
        }
    } catch (const std::exception& e) {
        throw ValidationError(std::string("malformed report: ") + e.what());
    }
    const ExprTree tree = [&] {
        try {
            return parse_text(report["expression"].get<std::string>(), vocab, dimension);
        } catch (const std::exception& e) {
            throw ValidationError(std::string("report expression: ") + e.what());
        }
    }();
    if (theta.size() != tree.param_count()) {
        throw ValidationError(fmt::format("report has {} parameters but the expression needs {}", theta.size(),
                                          tree.param_count()));
    }
    const Dataset test = load_data(spec.test_data, dimension);

    auto out = open_output(out_dir, "predictions.csv");
    for (std::size_t j = 0; j < dimension; ++j) {
        fmt::print(out, "x{},", j + 1);
    }
    fmt::print(out, "y,y_hat\n");
    for (std::size_t i = 0; i < test.size(); ++i) {
        const std::vector<double> x = test.row(i);
        for (double v : x) {
            fmt::print(out, "{},", num(v));
        }
        const auto y_hat = evaluate(tree, theta, x);
        fmt::print(out, "{},{}\n", num(test.y()[i]), num(y_hat ? *y_hat : std::numeric_limits<double>::quiet_NaN()));
    }
    const double err = rmse(tree, theta, test);
    fmt::print(log, "RMSE = {}\n", num(err));
    if (spec.s_eps) {
        fmt::print(log, "RMSE/s_eps = {}\n", num(err / *spec.s_eps));
    }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Bayesian symbolic regression and learnability sweeps"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::size_t jobs = 0;
    std::uint64_t seed = 0;
    app.add_option("--config", config_path, "Run configuration (JSON)")->required();
    auto* out_opt = app.add_option("--out", out_dir, "Output directory");
    auto* jobs_opt = app.add_option("--jobs", jobs, "Worker threads for sweeps (0 = all cores)");
    auto* seed_opt = app.add_option("--seed", seed, "Override the master seed");
    const std::pair<const char*, const char*> commands[] = {
        {"discover", "Sample models for a data file and report the MDL model"},
        {"sweep", "Run learnability trials over sizes and noise levels"},
        {"transition", "Compute the transition noise per model and size"},
        {"enumerate", "Rank every model of a bounded grammar by description length"},
        {"predict", "Evaluate a discovered model on test data"},
    };
    for (const auto& [name, help] : commands) {
        app.add_subcommand(name, help)->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    try {
        RunConfig config = load_run_config(config_path);
        if (*seed_opt) {
            config.seed = seed;
        }
        if (*jobs_opt) {
            config.sweep.jobs = jobs;
        }
        const std::filesystem::path dir = *out_opt ? std::filesystem::path(out_dir) : config.output;
        const std::string command = app.get_subcommands().front()->get_name();
        if (command == "discover") {
            cmd_discover(config, dir, out);
        } else if (command == "sweep") {
            cmd_sweep(config, dir, out);
        } else if (command == "transition") {
            cmd_transition(config, dir, out);
        } else if (command == "enumerate") {
            cmd_enumerate(config, dir, out);
        } else {
            cmd_predict(config, dir, out);
        }
    } catch (const ValidationError& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        fmt::print(err, "error: {}\n", e.what());
        return 2;
    }
    return 0;
}

} // namespace mdlsr::cli
