#include "mdlsr/cli/config.hpp"

#include <fstream>
#include <initializer_list>
#include <limits>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mdlsr/text.hpp"

namespace mdlsr::cli {

namespace {

using nlohmann::json;

void check_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed)
{
    if (!obj.is_object()) {
        throw ValidationError(std::string(where) + " must be an object");
    }
    const std::set<std::string_view> known(allowed);
    for (const auto& [key, value] : obj.items()) {
        if (!known.contains(key)) {
            throw ValidationError("unknown key '" + key + "' in " + std::string(where));
        }
    }
}

template <typename T>
T get(const json& obj, const char* key, std::string_view where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError("bad or missing value for '" + std::string(key) + "' in " + std::string(where));
    }
}

template <typename T>
void read_opt(const json& obj, const char* key, std::string_view where, T& target)
{
    if (obj.contains(key)) {
        target = get<T>(obj, key, where);
    }
}

std::size_t read_count(const json& obj, const char* key, std::string_view where, std::size_t fallback)
{
    if (!obj.contains(key)) {
        return fallback;
    }
    if (!obj[key].is_number_unsigned()) {
        throw ValidationError("'" + std::string(key) + "' in " + std::string(where) + " must be a nonnegative integer");
    }
    return obj[key].get<std::size_t>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p)
{
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void parse_fit(const json& j, FitOptions& fit)
{
    constexpr std::string_view where = "fit";
    check_keys(j, where,
               {"restarts", "max_iters", "max_evaluations", "param_range", "variance_floor", "method", "tolerance"});
    fit.restarts = read_count(j, "restarts", where, fit.restarts);
    fit.max_iters = read_count(j, "max_iters", where, fit.max_iters);
    fit.max_evaluations = read_count(j, "max_evaluations", where, fit.max_evaluations);
    if (j.contains("param_range")) {
        const auto range = get<std::vector<double>>(j, "param_range", where);
        if (range.size() != 2 || !(range[0] < range[1])) {
            throw ValidationError("fit.param_range must be [low, high] with low < high");
        }
        fit.param_min = range[0];
        fit.param_max = range[1];
    }
    read_opt(j, "variance_floor", where, fit.variance_floor);
    read_opt(j, "tolerance", where, fit.tolerance);
    if (j.contains("method")) {
        try {
            fit.method = parse_fit_method(get<std::string>(j, "method", where));
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
    if (!(fit.variance_floor > 0.0) || !(fit.tolerance > 0.0)) {
        throw ValidationError("fit.variance_floor and fit.tolerance must be positive");
    }
}

void parse_sampler(const json& j, SamplerOptions& s)
{
    constexpr std::string_view where = "sampler";
    check_keys(j, where,
               {"steps", "thin", "burn_in", "max_nodes", "temperatures", "restarts", "blocks", "record_visits"});
    s.steps = read_count(j, "steps", where, s.steps);
    s.thin = read_count(j, "thin", where, s.thin);
    s.max_nodes = read_count(j, "max_nodes", where, s.max_nodes);
    s.restarts = read_count(j, "restarts", where, s.restarts);
    read_opt(j, "burn_in", where, s.burn_in);
    read_opt(j, "temperatures", where, s.temperatures);
    read_opt(j, "record_visits", where, s.record_visits);
    if (j.contains("blocks")) {
        try {
            s.blocks = parse_block_weighting(get<std::string>(j, "blocks", where));
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    }
    if (s.steps == 0 || s.thin == 0 || s.restarts == 0) {
        throw ValidationError("sampler.steps, sampler.thin and sampler.restarts must be at least 1");
    }
    if (!(s.burn_in >= 0.0 && s.burn_in < 1.0)) {
        throw ValidationError("sampler.burn_in must lie in [0, 1)");
    }
    if (s.temperatures.empty() || s.temperatures.front() != 1.0) {
        throw ValidationError("sampler.temperatures must start at 1");
    }
    for (std::size_t i = 1; i < s.temperatures.size(); ++i) {
        if (!(s.temperatures[i] > s.temperatures[i - 1])) {
            throw ValidationError("sampler.temperatures must be strictly ascending");
        }
    }
}

void parse_sweep(const json& j, RunConfig& cfg)
{
    constexpr std::string_view where = "sweep";
    check_keys(j, where, {"sizes", "noise", "replicas", "jobs", "delta2_samples", "gap_tolerance"});
    read_opt(j, "sizes", where, cfg.sweep.sizes);
    cfg.sweep.replicas = read_count(j, "replicas", where, cfg.sweep.replicas);
    cfg.sweep.jobs = read_count(j, "jobs", where, cfg.sweep.jobs);
    cfg.sweep.delta2_samples = read_count(j, "delta2_samples", where, cfg.sweep.delta2_samples);
    read_opt(j, "gap_tolerance", where, cfg.trial.gap_tolerance);
    if (j.contains("noise")) {
        const json& noise = j["noise"];
        check_keys(noise, "sweep.noise", {"absolute", "relative", "points", "low", "high"});
        read_opt(noise, "absolute", "sweep.noise", cfg.sweep.noise.absolute);
        read_opt(noise, "relative", "sweep.noise", cfg.sweep.noise.relative);
        for (double r : cfg.sweep.noise.relative) {
            if (!(r > 0.0)) {
                throw ValidationError("sweep.noise.relative levels must be positive");
            }
        }
        cfg.sweep.noise.points = read_count(noise, "points", "sweep.noise", cfg.sweep.noise.points);
        read_opt(noise, "low", "sweep.noise", cfg.sweep.noise.low);
        read_opt(noise, "high", "sweep.noise", cfg.sweep.noise.high);
        for (double s : cfg.sweep.noise.absolute) {
            if (!(s >= 0.0)) {
                throw ValidationError("sweep.noise.absolute levels must be nonnegative");
            }
        }
        if (cfg.sweep.noise.absolute.empty() && cfg.sweep.noise.relative.empty() &&
            (cfg.sweep.noise.points == 0 || !(cfg.sweep.noise.low > 0.0) ||
             !(cfg.sweep.noise.high >= cfg.sweep.noise.low))) {
            throw ValidationError("sweep.noise needs points >= 1 and 0 < low <= high");
        }
    }
    if (cfg.sweep.replicas == 0) {
        throw ValidationError("sweep.replicas must be at least 1");
    }
    if (cfg.sweep.delta2_samples < 1000) {
        throw ValidationError("sweep.delta2_samples must be at least 1000");
    }
    for (std::size_t n : cfg.sweep.sizes) {
        if (n < 2) {
            throw ValidationError("sweep.sizes entries must be at least 2");
        }
    }
}

PlantedSpec parse_model(const json& j, const RunConfig& cfg)
{
    constexpr std::string_view where = "models[]";
    check_keys(j, where, {"id", "expression", "theta", "domain"});
    PlantedSpec spec;
    spec.id = get<std::string>(j, "id", where);
    spec.expression = get<std::string>(j, "expression", where);
    spec.theta = get<std::vector<double>>(j, "theta", where);
    if (j.contains("domain")) {
        for (const auto& iv : get<std::vector<std::vector<double>>>(j, "domain", where)) {
            if (iv.size() != 2) {
                throw ValidationError("domain intervals must be [low, high]");
            }
            spec.domain.push_back({iv[0], iv[1]});
        }
    }
    if (spec.id.empty() || spec.id.find_first_of(",\"\n") != std::string::npos) {
        throw ValidationError("model id must be nonempty without commas, quotes or newlines");
    }
    // Parses and validates now so a bad expression fails before any work starts.
    make_planted(cfg, spec);
    return spec;
}

} // namespace

PlantedModel make_planted(const RunConfig& config, const PlantedSpec& spec)
{
    try {
        return PlantedModel(parse_text(spec.expression, config.vocab, config.dimension), spec.theta, spec.domain);
    } catch (const ParseError& e) {
        throw ValidationError("model '" + spec.id + "': " + e.what());
    } catch (const std::invalid_argument& e) {
        throw ValidationError("model '" + spec.id + "': " + e.what());
    }
}

RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir)
{
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed config: ") + e.what());
    }
    constexpr std::string_view where = "config";
    check_keys(doc, where,
               {"vocabulary", "dimension", "prior", "fit", "sampler", "sweep", "models", "data", "predict",
                "enumerate", "transition", "seed", "output", "plots"});

    RunConfig cfg;
    if (!doc.contains("seed") || !doc["seed"].is_number_unsigned()) {
        throw ValidationError("config needs an unsigned integer \"seed\"");
    }
    cfg.seed = doc["seed"].get<std::uint64_t>();

    try {
        cfg.vocab = doc.contains("vocabulary")
                        ? std::make_shared<const OpVocabulary>(get<std::vector<std::string>>(doc, "vocabulary", where))
                        : std::make_shared<const OpVocabulary>(OpVocabulary::default_set());
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    cfg.dimension = read_count(doc, "dimension", where, cfg.dimension);
    if (cfg.dimension == 0) {
        throw ValidationError("dimension must be at least 1");
    }

    try {
        if (!doc.contains("prior")) {
            cfg.prior = std::make_shared<const PriorConfig>(PriorConfig::uniform(cfg.vocab));
        } else if (doc["prior"].is_string()) {
            cfg.prior = std::make_shared<const PriorConfig>(
                load_prior(resolve(base_dir, doc["prior"].get<std::string>()), cfg.vocab));
        } else if (doc["prior"].is_object() && doc["prior"].contains("ops")) {
            cfg.prior = std::make_shared<const PriorConfig>(parse_prior(doc["prior"].dump(), cfg.vocab));
        } else if (doc["prior"].is_object()) {
            check_keys(doc["prior"], "prior", {"alpha", "beta"});
            double alpha = 3.0;
            double beta = 0.1;
            read_opt(doc["prior"], "alpha", "prior", alpha);
            read_opt(doc["prior"], "beta", "prior", beta);
            cfg.prior = std::make_shared<const PriorConfig>(PriorConfig::uniform(cfg.vocab, alpha, beta));
        } else {
            throw ValidationError("prior must be a file path or an object");
        }
    } catch (const ConfigError& e) {
        throw ValidationError(e.what());
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }

    if (doc.contains("fit")) {
        parse_fit(doc["fit"], cfg.trial.sampler.fit);
    }
    if (doc.contains("sampler")) {
        parse_sampler(doc["sampler"], cfg.trial.sampler);
    }
    if (doc.contains("sweep")) {
        parse_sweep(doc["sweep"], cfg);
    }
    if (doc.contains("models")) {
        if (!doc["models"].is_array()) {
            throw ValidationError("models must be an array");
        }
        std::set<std::string> ids;
        for (const auto& m : doc["models"]) {
            cfg.models.push_back(parse_model(m, cfg));
            if (!ids.insert(cfg.models.back().id).second) {
                throw ValidationError("duplicate model id '" + cfg.models.back().id + "'");
            }
        }
    }
    if (doc.contains("data")) {
        cfg.data = resolve(base_dir, get<std::string>(doc, "data", where));
    }
    if (doc.contains("predict")) {
        const json& p = doc["predict"];
        check_keys(p, "predict", {"report", "test_data", "s_eps"});
        PredictSpec spec;
        spec.report = resolve(base_dir, get<std::string>(p, "report", "predict"));
        spec.test_data = resolve(base_dir, get<std::string>(p, "test_data", "predict"));
        if (p.contains("s_eps")) {
            spec.s_eps = get<double>(p, "s_eps", "predict");
            if (!(*spec.s_eps > 0.0)) {
                throw ValidationError("predict.s_eps must be positive");
            }
        }
        cfg.predict = spec;
    }
    if (doc.contains("enumerate")) {
        check_keys(doc["enumerate"], "enumerate", {"max_nodes", "max_models"});
        cfg.enumerate.max_nodes = read_count(doc["enumerate"], "max_nodes", "enumerate", cfg.enumerate.max_nodes);
        cfg.enumerate.max_models = read_count(doc["enumerate"], "max_models", "enumerate", cfg.enumerate.max_models);
    }
    if (doc.contains("transition")) {
        const json& t = doc["transition"];
        check_keys(t, "transition", {"delta2", "complexity_gap", "k"});
        TransitionInputs in;
        in.delta2 = get<double>(t, "delta2", "transition");
        in.complexity_gap = get<double>(t, "complexity_gap", "transition");
        in.k = get<double>(t, "k", "transition");
        if (!(in.delta2 >= 0.0) || !(in.complexity_gap >= 0.0) || !(in.k >= 1.0)) {
            throw ValidationError("transition needs delta2 >= 0, complexity_gap >= 0 and k >= 1");
        }
        cfg.transition = in;
    }
    if (doc.contains("output")) {
        cfg.output = resolve(base_dir, get<std::string>(doc, "output", where));
    }
    read_opt(doc, "plots", where, cfg.plots);
    return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open config " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

} // namespace mdlsr::cli
