#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "mdlsr/batch_eval.hpp"
#include "mdlsr/canonical.hpp"
#include "mdlsr/description_length.hpp"
#include "mdlsr/fit.hpp"
#include "mdlsr/phase.hpp"
#include "mdlsr/sampler.hpp"
#include "mdlsr/text.hpp"

using namespace mdlsr;

namespace {

const char* const kModelA = "((_c0 * sin(x1)) + (_c1 * (x2 * x2)))";

std::shared_ptr<const OpVocabulary> vocab()
{
    static const auto v = std::make_shared<const OpVocabulary>(OpVocabulary::default_set());
    return v;
}

const PlantedModel& planted()
{
    static const PlantedModel m(parse_text(kModelA, vocab(), 2), {7.3, 3.1});
    return m;
}

void BM_EvaluatePointwise(benchmark::State& state)
{
    const auto data = generate_dataset(planted(), static_cast<std::size_t>(state.range(0)), 1.0, 1);
    const auto& tree = planted().tree();
    const std::vector<double> theta{7.3, 3.1};
    std::vector<double> x(2);
    for (auto _ : state) {
        double sum = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            x[0] = data.x(i, 0);
            x[1] = data.x(i, 1);
            sum += *evaluate(tree, theta, x);
        }
        benchmark::DoNotOptimize(sum);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluatePointwise)->Arg(100)->Arg(400);

void BM_EvaluateBatch(benchmark::State& state)
{
    const auto data = generate_dataset(planted(), static_cast<std::size_t>(state.range(0)), 1.0, 1);
    BatchEvaluator eval(planted().tree());
    const std::vector<double> theta{7.3, 3.1};
    std::vector<double> out(data.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval.predict(theta, data, out));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluateBatch)->Arg(100)->Arg(400);

void BM_EvaluateBatchJacobian(benchmark::State& state)
{
    const auto data = generate_dataset(planted(), static_cast<std::size_t>(state.range(0)), 1.0, 1);
    BatchEvaluator eval(planted().tree());
    const std::vector<double> theta{7.3, 3.1};
    std::vector<double> out(data.size());
    std::vector<double> jac(2 * data.size());
    for (auto _ : state) {
        benchmark::DoNotOptimize(eval.predict_with_jacobian(theta, data, out, jac));
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EvaluateBatchJacobian)->Arg(100)->Arg(400);

void BM_FitLevenbergMarquardt(benchmark::State& state)
{
    const auto data = generate_dataset(planted(), static_cast<std::size_t>(state.range(0)), 1.0, 2);
    FitOptions opt;
    opt.restarts = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_params(planted().tree(), data, opt, 3));
    }
}
BENCHMARK(BM_FitLevenbergMarquardt)->Arg(100)->Arg(400);

void BM_FitNelderMead(benchmark::State& state)
{
    const auto data = generate_dataset(planted(), static_cast<std::size_t>(state.range(0)), 1.0, 2);
    FitOptions opt;
    opt.restarts = 1;
    opt.method = FitMethod::NelderMead;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_params(planted().tree(), data, opt, 3));
    }
}
BENCHMARK(BM_FitNelderMead)->Arg(100)->Arg(400);

void BM_DescriptionLength(benchmark::State& state)
{
    const auto data = generate_dataset(planted(), 100, 1.0, 4);
    const auto prior = PriorConfig::uniform(vocab());
    FitOptions opt;
    opt.restarts = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(description_length(data, planted().tree(), prior, opt, 5).total());
    }
}
BENCHMARK(BM_DescriptionLength);

void BM_CanonicalKey(benchmark::State& state)
{
    const auto tree = parse_text("((((x2 * x1) + _c0) * exp((x2 * _c1))) + sin((_c2 * x1)))", vocab(), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(canonical_key(tree));
    }
}
BENCHMARK(BM_CanonicalKey);

void BM_SamplerSteps(benchmark::State& state)
{
    const auto data = generate_dataset(planted(), static_cast<std::size_t>(state.range(0)), 1.0, 6);
    const auto prior = PriorConfig::uniform(vocab());
    SamplerOptions opt;
    opt.steps = 1000;
    opt.fit.restarts = 1;
    opt.blocks = BlockWeighting::ByOps;
    std::uint64_t seed = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample(data, prior, opt, ++seed).mdl_h());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(opt.steps));
}
BENCHMARK(BM_SamplerSteps)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_ProposeMove(benchmark::State& state)
{
    const MoveGenerator moves(vocab(), 2, kDefaultMaxNodes);
    const auto tree = parse_text("((((x2 * x1) + _c0) * exp((x2 * _c1))) + sin((_c2 * x1)))", vocab(), 2);
    const std::vector<double> theta{1.0, 1.0, 1.0};
    Rng rng(7);
    for (auto _ : state) {
        benchmark::DoNotOptimize(moves.propose(tree, theta, rng));
    }
}
BENCHMARK(BM_ProposeMove);

} // namespace

BENCHMARK_MAIN();
