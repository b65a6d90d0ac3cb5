#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "mdlsr/description_length.hpp"
#include "mdlsr/phase.hpp"
#include "support.hpp"

using namespace mdlsr;
using mdlsr::testing::default_vocab;
using mdlsr::testing::make_dataset;
using mdlsr::testing::parse;

namespace {

PlantedModel planted(const std::string& expr, std::vector<double> theta, std::size_t dimension = 2)
{
    return PlantedModel(parse(expr, dimension), std::move(theta));
}

// sqrt(d2 / (exp(2g/N + (k-1) ln N / N) - 1)) evaluated with long double.
double exact_oracle(double d2, double g, double k, double n)
{
    const long double e = 2.0L * g / n + (k - 1.0L) * std::log(static_cast<long double>(n)) / n;
    return static_cast<double>(std::sqrt(d2 / (std::exp(e) - 1.0L)));
}

SweepCell cell(double s, double rho)
{
    SweepCell c;
    c.s_eps = s;
    c.rho = rho;
    return c;
}

} // namespace

TEST(Planted, ValidatesInputs)
{
    EXPECT_THROW(planted("(_c0 * x1)", {}), std::invalid_argument);
    EXPECT_THROW(PlantedModel(parse("x1", 1), {}, {Interval{1.0, 1.0}}), std::invalid_argument);
    EXPECT_THROW(PlantedModel(parse("x1", 1), {}, {Interval{}, Interval{}}), std::invalid_argument);
    EXPECT_EQ(planted("(_c0 * x1)", {1.0}).domain().size(), 2U);
}

TEST(Generate, NoiselessAndDeterministic)
{
    const auto m = planted("((_c0 * sin(x1)) + x2)", {2.0});
    const auto d = generate_dataset(m, 50, 0.0, 3);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_DOUBLE_EQ(d.y()[i], 2.0 * std::sin(d.x(i, 0)) + d.x(i, 1));
        EXPECT_GE(d.x(i, 0), -2.0);
        EXPECT_LE(d.x(i, 0), 2.0);
    }
    const auto again = generate_dataset(m, 50, 0.7, 9);
    const auto same = generate_dataset(m, 50, 0.7, 9);
    for (std::size_t i = 0; i < again.size(); ++i) {
        EXPECT_EQ(again.y()[i], same.y()[i]);
        EXPECT_EQ(again.x(i, 1), same.x(i, 1));
    }
    ASSERT_TRUE(d.provenance());
    EXPECT_EQ(d.provenance()->seed, 3U);
    EXPECT_THROW(generate_dataset(m, 0, 0.1, 1), std::invalid_argument);
    EXPECT_THROW(generate_dataset(planted("log((x1 - 5))", {}, 1), 5, 0.1, 1), std::runtime_error);
}

TEST(Generate, NoiseHasRequestedScale)
{
    const auto m = planted("_c0", {1.0}, 1);
    const auto d = generate_dataset(m, 20000, 0.5, 4);
    double sum = 0.0;
    double sq = 0.0;
    for (double y : d.y()) {
        sum += y - 1.0;
        sq += (y - 1.0) * (y - 1.0);
    }
    EXPECT_NEAR(sum / 20000.0, 0.0, 0.02);
    EXPECT_NEAR(std::sqrt(sq / 20000.0), 0.5, 0.01);
}

TEST(Delta2, AnalyticVariances)
{
    const auto lin = estimate_delta2(planted("x1", {}, 1), 400000, 5);
    EXPECT_NEAR(lin.value, 4.0 / 3.0, 4.0 * lin.standard_error + 1e-3);
    const auto sq = estimate_delta2(planted("(x1 * x1)", {}, 1), 400000, 6);
    EXPECT_NEAR(sq.value, 64.0 / 45.0, 4.0 * sq.standard_error + 1e-3);
    EXPECT_EQ(estimate_delta2(planted("_c0", {3.0}, 1), 1000, 7).value, 0.0);
    EXPECT_THROW(estimate_delta2(planted("x1", {}, 1), 999, 1), std::invalid_argument);
}

TEST(Transition, HandValues)
{
    EXPECT_NEAR(transition_noise_exact(4, 2, 3, 100), 5.322, 5.322e-3);
    EXPECT_NEAR(transition_noise_approx(4, 2, 3, 100), 5.503, 5.503e-3);
    EXPECT_NEAR(transition_noise_exact(4, 2, 3, 100), exact_oracle(4, 2, 3, 100), 1e-12);
    EXPECT_TRUE(std::isinf(transition_noise_exact(4, 0, 1, 100)));
    EXPECT_THROW(transition_noise_approx(4, 0, 1, 100), std::domain_error);
    EXPECT_THROW(transition_noise_exact(-1, 2, 3, 100), std::domain_error);
    EXPECT_NEAR(transition_noise_approx(4, 2, 1, 100), std::sqrt(4.0 * 100.0 / 4.0), 1e-12);
}

TEST(Transition, GrowsWithN)
{
    double prev = 0.0;
    for (double n : {10.0, 100.0, 1e3, 1e4, 1e5, 1e6}) {
        const double s = transition_noise_exact(4, 2, 3, n);
        EXPECT_GT(s, prev);
        prev = s;
        EXPECT_GT(transition_noise_approx(4, 2, 3, 2.0 * n), transition_noise_approx(4, 2, 3, n));
    }
    EXPECT_GT(transition_noise_exact(4, 2, 3, 1e6), 10.0 * transition_noise_exact(4, 2, 3, 1e3));
}

TEST(Transition, ApproximationMatchesSeriesRatio)
{
    for (double n = 100; n <= 10000; n *= 1.2) {
        for (double g = 0.5; g <= 5.0; g += 0.25) {
            for (double k = 2; k <= 6; k += 1) {
                const double x = 2.0 * g / n + (k - 1.0) * std::log(n) / n;
                const double e = exact_oracle(4, g, k, n);
                EXPECT_NEAR(transition_noise_approx(4, g, k, n) / e, std::sqrt(std::expm1(x) / x), 1e-12);
            }
        }
    }
}

TEST(Transition, ApproximationWithinFivePercentForLargeSamples)
{
    for (double n = 1000; n <= 10000; n *= 1.2) {
        for (double g = 0.5; g <= 5.0; g += 0.25) {
            for (double k = 2; k <= 6; k += 1) {
                const double e = exact_oracle(4, g, k, n);
                EXPECT_LE(std::abs(transition_noise_approx(4, g, k, n) - e) / e, 0.05);
            }
        }
    }
}

TEST(Rmse, HandValues)
{
    const auto test = make_dataset(1, {{0.0}, {1.0}}, {3.0, -4.0});
    EXPECT_NEAR(rmse(parse("_c0", 1), std::vector<double>{0.0}, test), 3.5355, 1e-4);
    const auto exact = make_dataset(1, {{1.0}, {2.0}}, {2.0, 4.0});
    EXPECT_EQ(rmse(parse("(_c0 * x1)", 1), std::vector<double>{2.0}, exact), 0.0);
    const auto bad = make_dataset(1, {{-1.0}, {1.0}}, {0.0, 0.0});
    EXPECT_NEAR(rmse(parse("log(x1)", 1), {}, bad), kNonFiniteResidual / std::sqrt(2.0), 1e-6);
}

TEST(Rmse, TrueModelApproachesNoiseLevel)
{
    const auto m = planted("((_c0 * sin(x1)) + x2)", {2.0});
    const auto test = generate_dataset(m, 50000, 0.3, 8);
    EXPECT_NEAR(rmse(m.tree(), m.theta(), test) / 0.3, 1.0, 0.02);
}

TEST(Trial, GapDefinesLearnability)
{
    TrialRecord r;
    r.h_true = 10.0;
    r.h_mdl = 9.5;
    r.s_eps = 0.5;
    r.rmse = 0.6;
    EXPECT_DOUBLE_EQ(r.gap(), -0.5);
    EXPECT_DOUBLE_EQ(r.rmse_over_s(), 1.2);
}

TEST(Trial, TrivialTrueModelIsLearnable)
{
    const auto m = planted("_c0", {1.5});
    TrialOptions opt;
    opt.sampler.steps = 1500;
    int learnable = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto rec = learnability_trial(m, PriorConfig::uniform(default_vocab()), 30, 1.0, seed, opt);
        learnable += rec.learnable ? 1 : 0;
        EXPECT_EQ(rec.learnable, rec.gap() >= -opt.gap_tolerance);
        EXPECT_GE(rec.rmse, 0.0);
    }
    EXPECT_GE(learnable, 18);
}

TEST(Trial, RecordMatchesIndependentRecomputation)
{
    const auto m = planted("(_c0 * x1)", {2.0});
    const auto prior = PriorConfig::uniform(default_vocab());
    TrialOptions opt;
    opt.sampler.steps = 3000;
    const auto rec = learnability_trial(m, prior, 60, 0.05, 17, opt);
    const auto train = generate_dataset(m, 60, 0.05, split_seed(17, 1));
    const auto test = generate_dataset(m, 60, 0.05, split_seed(17, 2));
    const auto fit = fit_params(m.tree(), train, opt.sampler.fit, 0, m.theta());
    EXPECT_NEAR(rec.h_true, description_length(train, m.tree(), fit, prior).total(), 1e-6);
    const auto mdl = parse(rec.mdl_expr);
    const auto mdl_fit = fit_params(mdl, train, opt.sampler.fit, 0);
    EXPECT_NEAR(rec.rmse, rmse(mdl, mdl_fit.theta, test), 1e-4 * (1.0 + rec.rmse));
    EXPECT_EQ(rec.learnable, rec.gap() >= -opt.gap_tolerance);
}

TEST(Grid, LogSpacedAroundTransition)
{
    NoiseGrid g;
    const auto levels = g.levels(2.0);
    ASSERT_EQ(levels.size(), 12U);
    EXPECT_NEAR(levels.front(), 2.0 / 30.0, 1e-12);
    EXPECT_NEAR(levels.back(), 20.0, 1e-12);
    for (std::size_t i = 1; i < levels.size(); ++i) {
        EXPECT_NEAR(levels[i] / levels[i - 1], std::pow(300.0, 1.0 / 11.0), 1e-9);
    }
    g.relative = {0.5, 2.0};
    EXPECT_EQ(g.levels(3.0), (std::vector<double>{1.5, 6.0}));
    g.absolute = {0.1};
    EXPECT_EQ(g.levels(3.0), (std::vector<double>{0.1}));
}

TEST(Crossing, InterpolatesInLogNoise)
{
    EXPECT_NEAR(*rho_crossing({cell(1, 1.0), cell(4, 0.0)}), 2.0, 1e-12);
    EXPECT_NEAR(*rho_crossing({cell(1, 1.0), cell(2, 0.75), cell(8, 0.25), cell(16, 0.0)}), 4.0, 1e-12);
    EXPECT_FALSE(rho_crossing({cell(1, 1.0), cell(2, 0.9)}));
    EXPECT_FALSE(rho_crossing({cell(1, 0.2), cell(2, 0.1)}));
}

TEST(Collapse, RescalesByTransition)
{
    SweepResult a;
    a.model_id = "a";
    a.transitions = {TransitionPoint{100, 2.0, 2.1}};
    SweepResult b;
    b.model_id = "b";
    b.transitions = {TransitionPoint{100, 6.0, 6.1}};
    for (double r : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const double rho = r < 1.0 ? 1.0 : (r == 1.0 ? 0.5 : 0.0);
        SweepCell ca = cell(2.0 * r, rho);
        ca.n = 100;
        SweepCell cb = cell(6.0 * r, rho);
        cb.n = 100;
        a.cells.push_back(ca);
        b.cells.push_back(cb);
    }
    const auto pts = scaled_collapse({a, b});
    ASSERT_EQ(pts.size(), 10U);
    for (std::size_t i = 0; i < 5; ++i) {
        EXPECT_NEAR(pts[i].scaled_noise, pts[i + 5].scaled_noise, 1e-12);
        EXPECT_EQ(pts[i].rho, pts[i + 5].rho);
    }
    std::vector<SweepCell> scaled;
    for (std::size_t i = 0; i < 5; ++i) {
        scaled.push_back(cell(pts[i].scaled_noise, pts[i].rho));
    }
    EXPECT_NEAR(*rho_crossing(scaled), 1.0, 1e-12);
}

TEST(Sweep, CountsBoundsAndWorkerIndependence)
{
    const auto m = planted("(_c0 * x1)", {2.0});
    const auto prior = PriorConfig::uniform(default_vocab());
    SweepSpec spec;
    spec.model_id = "lin";
    spec.sizes = {20, 40};
    spec.noise.points = 3;
    spec.noise.low = 0.1;
    spec.noise.high = 5.0;
    spec.replicas = 2;
    spec.seed = 3;
    spec.delta2_samples = 2000;
    TrialOptions opt;
    opt.sampler.steps = 300;
    const auto one = learnability_curve(m, prior, spec, opt);
    spec.jobs = 3;
    const auto three = learnability_curve(m, prior, spec, opt);
    ASSERT_EQ(one.trials.size(), 12U);
    ASSERT_EQ(one.cells.size(), 6U);
    for (const auto& c : one.cells) {
        EXPECT_EQ(c.trials, 2U);
        EXPECT_GE(c.rho, 0.0);
        EXPECT_LE(c.rho, 1.0);
    }
    std::ostringstream a;
    std::ostringstream b;
    write_sweep_csv(a, one);
    write_sweep_csv(b, three);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().substr(0, a.str().find('\n')),
              "model_id,N,s_eps,replica,seed,learnable,gap,H_mdl,H_true,rmse,rmse_over_s,mdl_expr");
    std::ostringstream s;
    write_summary_csv(s, one);
    EXPECT_EQ(s.str().substr(0, s.str().find('\n')),
              "model_id,N,s_eps,rho,mean_rmse_over_s,s_eps_cross_exact,s_eps_cross_approx");

    spec.replicas = 1;
    spec.jobs = 1;
    for (const auto& c : learnability_curve(m, prior, spec, opt).cells) {
        EXPECT_TRUE(c.rho == 0.0 || c.rho == 1.0);
    }
    spec.replicas = 0;
    EXPECT_THROW(learnability_curve(m, prior, spec, opt), std::invalid_argument);
}

TEST(Sweep, TrialSeedsAreDistinctPerKey)
{
    std::set<std::uint64_t> seeds;
    for (std::size_t n : {25, 100}) {
        for (std::size_t i = 0; i < 4; ++i) {
            for (std::size_t r = 0; r < 4; ++r) {
                seeds.insert(trial_seed(1, "a", n, i, r));
                seeds.insert(trial_seed(1, "b", n, i, r));
            }
        }
    }
    EXPECT_EQ(seeds.size(), 64U);
    EXPECT_EQ(trial_seed(1, "a", 25, 0, 0), trial_seed(1, "a", 25, 0, 0));
}
