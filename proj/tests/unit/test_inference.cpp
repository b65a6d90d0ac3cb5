#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "mdlsr/canonical.hpp"
#include "mdlsr/description_length.hpp"
#include "mdlsr/fit.hpp"
#include "mdlsr/phase.hpp"
#include "support.hpp"

using namespace mdlsr;
using mdlsr::testing::default_vocab;
using mdlsr::testing::make_dataset;
using mdlsr::testing::parse;

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Dataset two_points() { return make_dataset(1, {{1.0}, {3.0}}, {1.0, 3.0}); }

} // namespace

TEST(Dataset, RejectsEmptyAndNonFinite)
{
    EXPECT_THROW(make_dataset(1, {}, {}), std::invalid_argument);
    EXPECT_THROW(make_dataset(1, {{NAN}}, {1.0}), std::invalid_argument);
    EXPECT_THROW(parse_csv(""), std::runtime_error);
    EXPECT_THROW(parse_csv("x1,y\n"), std::runtime_error);
    EXPECT_THROW(parse_csv("x1,y\n1,2,3\n"), std::runtime_error);
    const auto d = parse_csv("x1,x2,y\n1,2,3\n4,5,6\n");
    EXPECT_EQ(d.size(), 2U);
    EXPECT_EQ(d.dimension(), 2U);
    EXPECT_EQ(d.x(1, 1), 5.0);
}

TEST(Fit, ExactLinearFit)
{
    const auto data = make_dataset(1, {{1.0}, {2.0}}, {2.0, 4.0});
    const auto fit = fit_params(parse("(_c0 * x1)", 1), data, {}, 1);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.theta[0], 2.0, 1e-8);
    EXPECT_NEAR(fit.rss, 0.0, 1e-12);
    EXPECT_NEAR(fit.s2, 0.0, 1e-12);
}

TEST(Fit, ConstantIsMeanAndBiasedVariance)
{
    const auto fit = fit_params(parse("_c0", 1), two_points(), {}, 1);
    ASSERT_TRUE(fit.converged);
    EXPECT_NEAR(fit.theta[0], 2.0, 1e-10);
    EXPECT_NEAR(fit.s2, 1.0, 1e-10);
}

TEST(Fit, UnfittableModel)
{
    const auto data = make_dataset(1, {{-1.0}, {-2.0}}, {0.0, 1.0});
    const auto fit = fit_params(parse("log(x1)", 1), data, {}, 1);
    EXPECT_FALSE(fit.converged);
    EXPECT_TRUE(std::isinf(fit.s2));
    EXPECT_TRUE(std::isinf(description_length(data, parse("log(x1)", 1), fit, PriorConfig::uniform(default_vocab()))
                               .total()));
}

TEST(Fit, NelderMeadMatchesLevenbergMarquardt)
{
    Rng rng(31);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int i = 0; i < 50; ++i) {
        const double x = -2.0 + 4.0 * uniform01(rng);
        rows.push_back({x});
        y.push_back(1.5 * std::sin(0.8 * x) + 0.01 * (uniform01(rng) - 0.5));
    }
    const auto data = make_dataset(1, rows, y);
    const auto tree = parse("(_c0 * sin((_c1 * x1)))", 1);
    FitOptions lm;
    FitOptions nm;
    nm.method = FitMethod::NelderMead;
    const std::vector<double> warm{1.0, 1.0};
    const auto a = fit_params(tree, data, lm, 2, warm);
    const auto b = fit_params(tree, data, nm, 2, warm);
    EXPECT_NEAR(a.rss, b.rss, 1e-6 * (1.0 + a.rss));
}

TEST(FitProperty, NeverWorseThanTheWarmStart)
{
    Rng rng(32);
    for (int i = 0; i < 200; ++i) {
        const ExprTree t = mdlsr::testing::random_tree(default_vocab(), 1, 9, rng);
        if (t.param_count() == 0) {
            continue;
        }
        std::vector<std::vector<double>> rows;
        std::vector<double> y;
        for (int r = 0; r < 20; ++r) {
            const double x = -2.0 + 4.0 * uniform01(rng);
            rows.push_back({x});
            y.push_back(x * x - x + uniform01(rng));
        }
        const auto data = make_dataset(1, rows, y);
        std::vector<double> start(t.param_count());
        for (double& s : start) {
            s = -2.0 + 4.0 * uniform01(rng);
        }
        const double start_rss = residual_sum_of_squares(t, data, start);
        FitOptions opts;
        opts.restarts = 0;
        const auto fit = fit_params(t, data, opts, 7, start);
        if (std::isfinite(start_rss)) {
            ASSERT_TRUE(fit.converged);
            EXPECT_LE(fit.rss, start_rss * (1.0 + 1e-12)) << to_text(t);
        }
        if (fit.converged) {
            EXPECT_NEAR(fit.s2, fit.rss / 20.0, 1e-12 * (1.0 + fit.s2));
        }
    }
}

TEST(Likelihood, HandValues)
{
    FitResult fit;
    fit.converged = true;
    fit.s2 = 1.0;
    EXPECT_NEAR(log_likelihood(two_points(), fit), -2.8379, 1e-4);

    std::vector<std::vector<double>> rows(100, std::vector<double>{0.0});
    const auto hundred = make_dataset(1, rows, std::vector<double>(100, 0.0));
    EXPECT_NEAR(log_likelihood(hundred, fit), -50.0 * (std::log(2.0 * std::numbers::pi) + 1.0), 1e-9);
    EXPECT_NEAR(log_likelihood(hundred, fit), -141.895, 2e-3);

    fit.s2 = 0.0;
    EXPECT_DOUBLE_EQ(log_likelihood(hundred, fit), -50.0 * (std::log(2.0 * std::numbers::pi * 1e-12) + 1.0));
}

TEST(Bic, HandValues)
{
    FitResult fit;
    fit.converged = true;
    fit.s2 = 1.0;
    fit.theta = {};
    EXPECT_NEAR(bic(two_points(), parse("x1", 1), fit), 6.3690, 1e-4);
    fit.theta = {2.0};
    EXPECT_NEAR(bic(two_points(), parse("_c0", 1), fit), 7.0621, 1e-4);
    fit.theta = {2.0, 0.0};
    EXPECT_NEAR(bic(two_points(), parse("(_c0 + _c1)", 1), fit) - bic(two_points(), parse("_c0", 1), fit),
                std::log(2.0), 1e-12);
}

TEST(DescriptionLength, ConstantModelOnTwoPoints)
{
    const auto prior = PriorConfig::uniform(default_vocab());
    const auto dl = description_length(two_points(), parse("_c0", 1), prior);
    EXPECT_NEAR(dl.total(), kLog2Pi + 1.0 + std::log(2.0), 1e-9);
    EXPECT_NEAR(dl.total(), 3.5310, 1e-4);
}

TEST(DescriptionLength, PerfectFitIsFloored)
{
    const auto prior = PriorConfig::uniform(default_vocab());
    const auto data = two_points();
    const auto exact = description_length(data, parse("x1", 1), prior);
    EXPECT_TRUE(std::isfinite(exact.total()));
    EXPECT_LT(exact.total(), description_length(data, parse("_c0", 1), prior).total());
    EXPECT_LT(exact.total(), description_length(data, parse("(_c0 * x1)", 1), prior).total());
}

TEST(DescriptionLength, DecomposesIntoBicAndComplexity)
{
    const auto prior = PriorConfig::uniform(default_vocab());
    const auto data = make_dataset(1, {{0.5}, {1.0}, {2.0}, {-1.0}}, {0.2, 1.1, 3.9, 1.2});
    for (const char* text : {"_c0", "(_c0 * x1)", "((_c0 * x1) + sin(x1))", "exp((x1 * _c0))"}) {
        const auto t = parse(text, 1);
        const auto fit = fit_params(t, data, {}, 3);
        const auto dl = description_length(data, t, fit, prior);
        EXPECT_NEAR(dl.total() - bic(data, t, fit) / 2.0, prior.model_complexity(t), 1e-9) << text;
        EXPECT_NEAR(dl.total(), dl.fit_term + dl.param_penalty + dl.model_complexity, 1e-12);
    }
}

TEST(DescriptionLength, InvariantUnderSlotRenumbering)
{
    const auto prior = PriorConfig::uniform(default_vocab());
    const auto data = make_dataset(2, {{0.5, 1.0}, {1.0, -1.0}, {2.0, 0.3}, {-1.0, 0.7}, {0.1, 0.1}},
                                   {0.2, 1.1, 3.9, 1.2, 0.4});
    ModelScorer scorer(data, prior, {}, 5);
    const auto a = scorer.score(parse("((_c0 * x1) + (_c1 * x2))"));
    const auto b = scorer.score(parse("((_c1 * x2) + (_c0 * x1))").with_ordered_params());
    EXPECT_EQ(a->key, b->key);
    EXPECT_EQ(a->dl.total(), b->dl.total());
    EXPECT_EQ(scorer.fits_performed(), 1U);
}

TEST(Predicted, TrueModelDescriptionLength)
{
    EXPECT_NEAR(predicted_dl_true(100, 2, 3, 1.0), 151.80, 1e-2);
    EXPECT_NEAR(predicted_dl_true(100, 2, 3, 2.0) - predicted_dl_true(100, 2, 3, 1.0), 50.0 * std::log(2.0), 1e-9);
    EXPECT_THROW(predicted_dl_true(100, 2, 3, 0.0), std::domain_error);
}

TEST(Predicted, TrivialModelDescriptionLength)
{
    EXPECT_NEAR(predicted_dl_trivial(100, 1.0, 3.0), 215.82, 1e-2);
    EXPECT_NEAR(predicted_dl_trivial(100, 1.7, 0.0), predicted_dl_true(100, 1, 0, 1.7), 1e-12);
    EXPECT_THROW(predicted_dl_trivial(100, 0.0, 0.0), std::domain_error);
}

TEST(Predicted, EqualAtTheTransitionNoise)
{
    for (double n : {25.0, 100.0, 400.0}) {
        const double s = transition_noise_exact(4.0, 2.0, 3.0, n);
        EXPECT_NEAR(predicted_dl_true(n, 3.0, 2.0, s * s), predicted_dl_trivial(n, s * s, 4.0), 1e-8);
    }
}

TEST(Predicted, GapIdentityWithRealizedAverages)
{
    Rng rng(41);
    const std::size_t n = 200;
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    std::vector<double> eps;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = -2.0 + 4.0 * uniform01(rng);
        rows.push_back({x});
        eps.push_back(std::normal_distribution<double>(0.0, 0.3)(rng));
    }
    for (std::size_t i = 0; i < n; ++i) {
        y.push_back(1.7 * rows[i][0] + eps[i]);
    }
    const auto data = make_dataset(1, rows, y);
    const auto prior = PriorConfig::uniform(default_vocab());
    const auto tree = parse("(_c0 * x1)", 1);
    const auto fit = fit_params(tree, data, {}, 1);
    const auto dl_true = description_length(data, tree, fit, prior);
    EXPECT_NEAR(dl_true.total(), predicted_dl_true(static_cast<double>(n), 1.0, prior.model_complexity(tree), fit.s2), 1e-6);

    const auto fit_c = fit_params(parse("_c0", 1), data, {}, 1);
    double ybar = 0.0;
    for (double v : y) {
        ybar += v;
    }
    ybar /= static_cast<double>(n);
    double var = 0.0;
    for (double v : y) {
        var += (v - ybar) * (v - ybar);
    }
    var /= static_cast<double>(n);
    const auto dl_c = description_length(data, parse("_c0", 1), fit_c, prior);
    EXPECT_NEAR(dl_c.total(), predicted_dl_trivial(static_cast<double>(n), var, 0.0), 1e-6);
}
