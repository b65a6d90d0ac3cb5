#include "mdlsr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "mdlsr/canonical.hpp"
#include "mdlsr/text.hpp"

namespace mdlsr {

namespace {

constexpr double kFamilyProbability = 1.0 / 3.0;
constexpr std::uint16_t kFreshSlot = 0xffff;
constexpr std::uint64_t kSwapStream = 0x5357415053ULL;
constexpr std::uint64_t kFitStream = 0x464954ULL;
constexpr std::uint64_t kRestartStream = 0x52455354ULL;
constexpr std::size_t kMaxOrderedTrees = 20'000'000;

bool same_shape(const Node& a, const Node& b)
{
    if (a.kind != b.kind) {
        return false;
    }
    switch (a.kind) {
    case NodeKind::Param: return true;
    case NodeKind::Constant: return a.value == b.value;
    default: return a.index == b.index;
    }
}

MoveProposal null_move(MoveKind kind)
{
    MoveProposal out;
    out.kind = kind;
    return out;
}

// Depth of every subtree, indexed by prefix position.
std::vector<int> subtree_depths(const ExprTree& tree)
{
    std::vector<int> depth(tree.size(), 0);
    std::vector<int> stack;
    stack.reserve(tree.size());
    for (std::size_t i = tree.size(); i-- > 0;) {
        const int a = tree.arity(i);
        int d = 0;
        for (int c = 0; c < a; ++c) {
            d = std::max(d, stack.back() + 1);
            stack.pop_back();
        }
        depth[i] = d;
        stack.push_back(d);
    }
    return depth;
}

} // namespace

std::string_view to_string(MoveKind kind)
{
    switch (kind) {
    case MoveKind::NodeChange: return "node_change";
    case MoveKind::TermAddition: return "term_addition";
    case MoveKind::TermRemoval: return "term_removal";
    case MoveKind::BlockReplacement: return "block_replacement";
    }
    return "unknown";
}

BlockWeighting parse_block_weighting(std::string_view name)
{
    if (name == "uniform") {
        return BlockWeighting::Uniform;
    }
    if (name == "by_ops") {
        return BlockWeighting::ByOps;
    }
    throw std::invalid_argument("unknown block weighting '" + std::string(name) + "' (expected uniform or by_ops)");
}

std::string_view to_string(BlockWeighting weighting)
{
    return weighting == BlockWeighting::Uniform ? "uniform" : "by_ops";
}

// ---------------------------------------------------------------------------
// BlockDictionary

BlockDictionary::BlockDictionary(const OpVocabulary& vocab, std::size_t dimension, BlockWeighting weighting)
    : vocab_(vocab), leaf_labels_(dimension + 1), weighting_(weighting)
{
    const auto unary = static_cast<double>(vocab.of_arity(1).size());
    const auto binary = static_cast<double>(vocab.of_arity(2).size());
    by_ops_[0][0] = static_cast<double>(leaf_labels_);
    for (int d = 1; d <= kMaxDepth; ++d) {
        const auto& prev = by_ops_[d - 1];
        auto& cur = by_ops_[d];
        cur[0] = static_cast<double>(leaf_labels_);
        for (std::size_t c = 1; c <= kMaxOps; ++c) {
            double n = unary * prev[c - 1];
            for (std::size_t a = 0; a < c; ++a) {
                n += binary * prev[a] * prev[c - 1 - a];
            }
            cur[c] = n;
        }
    }
    for (double n : by_ops_[kMaxDepth]) {
        nonempty_classes_ += n > 0.0 ? 1U : 0U;
    }
}

double BlockDictionary::total() const
{
    double sum = 0.0;
    for (double n : by_ops_[kMaxDepth]) {
        sum += n;
    }
    return sum;
}

std::vector<Node> BlockDictionary::draw(Rng& rng) const
{
    const auto& classes = by_ops_[kMaxDepth];
    std::size_t ops = 0;
    if (weighting_ == BlockWeighting::Uniform) {
        std::discrete_distribution<std::size_t> pick(classes.begin(), classes.end());
        ops = pick(rng);
    } else {
        std::array<double, kMaxOps + 1> nonempty{};
        for (std::size_t c = 0; c <= kMaxOps; ++c) {
            nonempty[c] = classes[c] > 0.0 ? 1.0 : 0.0;
        }
        std::discrete_distribution<std::size_t> pick(nonempty.begin(), nonempty.end());
        ops = pick(rng);
    }
    std::vector<Node> out;
    draw_into(kMaxDepth, ops, rng, out);
    std::uint16_t slot = 0;
    for (Node& n : out) {
        if (n.kind == NodeKind::Param) {
            n.index = slot++;
        }
    }
    return out;
}

void BlockDictionary::draw_into(int depth, std::size_t ops, Rng& rng, std::vector<Node>& out) const
{
    if (ops == 0) {
        const std::size_t label = uniform_index(rng, leaf_labels_);
        out.push_back(label + 1 == leaf_labels_ ? Node::param(0) : Node::variable(label));
        return;
    }
    const auto& prev = by_ops_[depth - 1];
    const auto unary = vocab_.of_arity(1);
    const auto binary = vocab_.of_arity(2);
    // Choice 0 is a unary root; choice a + 1 is a binary root whose left
    // operand has a operations.
    std::vector<double> weights(ops + 1, 0.0);
    weights[0] = static_cast<double>(unary.size()) * prev[ops - 1];
    for (std::size_t a = 0; a < ops; ++a) {
        weights[a + 1] = static_cast<double>(binary.size()) * prev[a] * prev[ops - 1 - a];
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const std::size_t choice = pick(rng);
    if (choice == 0) {
        out.push_back(Node::op(unary[uniform_index(rng, unary.size())]));
        draw_into(depth - 1, ops - 1, rng, out);
        return;
    }
    const std::size_t left = choice - 1;
    out.push_back(Node::op(binary[uniform_index(rng, binary.size())]));
    draw_into(depth - 1, left, rng, out);
    draw_into(depth - 1, ops - 1 - left, rng, out);
}

double BlockDictionary::probability(std::span<const Node> block) const
{
    std::size_t ops = 0;
    std::vector<int> stack;
    for (std::size_t i = block.size(); i-- > 0;) {
        const Node& n = block[i];
        int arity = 0;
        switch (n.kind) {
        case NodeKind::Constant: return 0.0;
        case NodeKind::Variable:
            if (n.index + 1U >= leaf_labels_) {
                return 0.0;
            }
            break;
        case NodeKind::Param: break;
        case NodeKind::Op:
            if (n.index >= vocab_.size()) {
                return 0.0;
            }
            arity = vocab_.op(n.index).arity;
            ++ops;
            break;
        }
        if (stack.size() < static_cast<std::size_t>(arity)) {
            return 0.0;
        }
        int d = 0;
        for (int c = 0; c < arity; ++c) {
            d = std::max(d, stack.back() + 1);
            stack.pop_back();
        }
        stack.push_back(d);
    }
    if (stack.size() != 1 || stack.back() > kMaxDepth || ops > kMaxOps) {
        return 0.0;
    }
    const double count = by_ops_[kMaxDepth][ops];
    if (weighting_ == BlockWeighting::Uniform) {
        return 1.0 / total();
    }
    return 1.0 / (static_cast<double>(nonempty_classes_) * count);
}

// ---------------------------------------------------------------------------
// MoveGenerator

MoveGenerator::MoveGenerator(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension,
                             std::size_t max_nodes, BlockWeighting weighting)
    : vocab_(std::move(vocab)), dimension_(dimension), max_nodes_(max_nodes), blocks_(*vocab_, dimension, weighting)
{
    if (max_nodes_ == 0) {
        throw std::invalid_argument("max_nodes must be at least 1");
    }
}

Node MoveGenerator::leaf_label(std::size_t label) const
{
    return label == dimension_ ? Node::param(kFreshSlot) : Node::variable(label);
}

MoveProposal MoveGenerator::finish(MoveKind kind, std::vector<Node> prefix, std::span<const double> old_theta,
                                   double fresh_value) const
{
    MoveProposal out;
    out.kind = kind;
    if (prefix.size() > max_nodes_) {
        return out;
    }
    std::uint16_t slot = 0;
    for (Node& n : prefix) {
        if (n.kind != NodeKind::Param) {
            continue;
        }
        const bool inherited = n.index != kFreshSlot && n.index < old_theta.size();
        out.warm_start.push_back(inherited ? old_theta[n.index] : fresh_value);
        n.index = slot++;
    }
    out.tree.emplace(vocab_, dimension_, std::move(prefix));
    return out;
}

MoveProposal MoveGenerator::propose(const ExprTree& tree, std::span<const double> theta, Rng& rng) const
{
    switch (uniform_index(rng, 3)) {
    case 0: return node_change(tree, theta, rng);
    case 1:
        if (uniform01(rng) < 0.5) {
            return term_addition(tree, theta, rng);
        }
        return term_removal(tree, theta);
    default: return block_replacement(tree, theta, rng);
    }
}

MoveProposal MoveGenerator::node_change(const ExprTree& tree, std::span<const double> theta, Rng& rng) const
{
    const std::size_t pos = uniform_index(rng, tree.size());
    const Node& current = tree.node(pos);
    std::vector<Node> prefix(tree.nodes().begin(), tree.nodes().end());
    std::size_t choices = 0;
    if (current.kind == NodeKind::Op) {
        const auto same_arity = vocab_->of_arity(tree.arity(pos));
        choices = same_arity.size() - 1;
        if (choices == 0) {
            return null_move(MoveKind::NodeChange);
        }
        std::size_t pick = uniform_index(rng, choices);
        const auto self = static_cast<std::size_t>(
            std::find(same_arity.begin(), same_arity.end(), current.index) - same_arity.begin());
        pick += pick >= self ? 1U : 0U;
        prefix[pos] = Node::op(same_arity[pick]);
    } else {
        if (current.kind == NodeKind::Constant) {
            return null_move(MoveKind::NodeChange);
        }
        choices = leaf_labels() - 1;
        if (choices == 0) {
            return null_move(MoveKind::NodeChange);
        }
        const std::size_t self = current.kind == NodeKind::Param ? dimension_ : current.index;
        std::size_t pick = uniform_index(rng, choices);
        pick += pick >= self ? 1U : 0U;
        prefix[pos] = leaf_label(pick);
    }
    MoveProposal out = finish(MoveKind::NodeChange, std::move(prefix), theta, 1.0);
    out.forward = kFamilyProbability / static_cast<double>(tree.size() * choices);
    out.backward = out.forward;
    return out;
}

MoveProposal MoveGenerator::term_addition(const ExprTree& tree, std::span<const double> theta, Rng& rng) const
{
    const auto binary = vocab_->of_arity(2);
    if (binary.empty()) {
        return null_move(MoveKind::TermAddition);
    }
    const OpId op = binary[uniform_index(rng, binary.size())];
    const std::size_t label = uniform_index(rng, leaf_labels());
    std::vector<Node> prefix;
    prefix.reserve(tree.size() + 2);
    prefix.push_back(Node::op(op));
    prefix.insert(prefix.end(), tree.nodes().begin(), tree.nodes().end());
    prefix.push_back(leaf_label(label));
    const OpKind kind = vocab_->op(op).kind;
    const double fresh = kind == OpKind::Add || kind == OpKind::Sub ? 0.0 : 1.0;
    MoveProposal out = finish(MoveKind::TermAddition, std::move(prefix), theta, fresh);
    out.forward = kFamilyProbability * 0.5 / static_cast<double>(binary.size() * leaf_labels());
    out.backward = kFamilyProbability * 0.5;
    return out;
}

MoveProposal MoveGenerator::term_removal(const ExprTree& tree, std::span<const double> theta) const
{
    const std::size_t n = tree.size();
    if (n < 3 || tree.arity(0) != 2 || tree.subtree_end(1) != n - 1 || tree.node(n - 1).kind == NodeKind::Constant) {
        return null_move(MoveKind::TermRemoval);
    }
    const auto binary = vocab_->of_arity(2);
    std::vector<Node> prefix(tree.nodes().begin() + 1, tree.nodes().end() - 1);
    MoveProposal out = finish(MoveKind::TermRemoval, std::move(prefix), theta, 1.0);
    out.forward = kFamilyProbability * 0.5;
    out.backward = kFamilyProbability * 0.5 / static_cast<double>(binary.size() * leaf_labels());
    return out;
}

std::vector<std::size_t> MoveGenerator::block_sites(const ExprTree& tree)
{
    const std::vector<int> depth = subtree_depths(tree);
    std::vector<std::size_t> sites;
    for (std::size_t i = 0; i < depth.size(); ++i) {
        if (depth[i] <= BlockDictionary::kMaxDepth) {
            sites.push_back(i);
        }
    }
    return sites;
}

MoveProposal MoveGenerator::block_replacement(const ExprTree& tree, std::span<const double> theta, Rng& rng) const
{
    const std::vector<std::size_t> sites = block_sites(tree);
    const std::size_t pos = sites[uniform_index(rng, sites.size())];
    std::vector<Node> block = blocks_.draw(rng);
    for (Node& n : block) {
        if (n.kind == NodeKind::Param) {
            n.index = kFreshSlot;
        }
    }
    const std::size_t end = tree.subtree_end(pos);
    if (tree.size() - (end - pos) + block.size() > max_nodes_) {
        return null_move(MoveKind::BlockReplacement);
    }
    std::vector<Node> prefix(tree.nodes().begin(), tree.nodes().begin() + static_cast<std::ptrdiff_t>(pos));
    prefix.insert(prefix.end(), block.begin(), block.end());
    prefix.insert(prefix.end(), tree.nodes().begin() + static_cast<std::ptrdiff_t>(end), tree.nodes().end());
    MoveProposal out = finish(MoveKind::BlockReplacement, std::move(prefix), theta, 1.0);
    out.forward = block_probability(tree, *out.tree);
    out.backward = block_probability(*out.tree, tree);
    return out;
}

double MoveGenerator::block_probability(const ExprTree& from, const ExprTree& to) const
{
    const auto a = from.nodes();
    const auto b = to.nodes();
    std::size_t common_prefix = 0;
    while (common_prefix < a.size() && common_prefix < b.size() && same_shape(a[common_prefix], b[common_prefix])) {
        ++common_prefix;
    }
    std::size_t common_suffix = 0;
    while (common_suffix < a.size() && common_suffix < b.size() &&
           same_shape(a[a.size() - 1 - common_suffix], b[b.size() - 1 - common_suffix])) {
        ++common_suffix;
    }
    const std::vector<std::size_t> sites = block_sites(from);
    double total = 0.0;
    for (std::size_t pos : sites) {
        if (pos > common_prefix) {
            break;
        }
        const std::size_t suffix = from.size() - from.subtree_end(pos);
        if (suffix > common_suffix || pos + suffix >= to.size()) {
            continue;
        }
        const std::size_t end = to.size() - suffix;
        if (to.subtree_end(pos) != end) {
            continue;
        }
        total += blocks_.probability(b.subspan(pos, end - pos));
    }
    return kFamilyProbability * total / static_cast<double>(sites.size());
}

double MoveGenerator::transition_probability(const ExprTree& from, const ExprTree& to) const
{
    if (to.size() > max_nodes_) {
        return 0.0;
    }
    double q = block_probability(from, to);

    const auto binary = vocab_->of_arity(2);
    const auto a = from.nodes();
    const auto b = to.nodes();
    if (a.size() == b.size()) {
        std::size_t differing = 0;
        std::size_t where = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (!same_shape(a[i], b[i])) {
                ++differing;
                where = i;
            }
        }
        if (differing == 1) {
            const Node& x = a[where];
            const Node& y = b[where];
            std::size_t choices = 0;
            if (x.kind == NodeKind::Op && y.kind == NodeKind::Op && from.arity(where) == to.arity(where)) {
                choices = vocab_->of_arity(from.arity(where)).size() - 1;
            } else if (x.kind != NodeKind::Op && y.kind != NodeKind::Op && x.kind != NodeKind::Constant &&
                       y.kind != NodeKind::Constant) {
                choices = leaf_labels() - 1;
            }
            if (choices > 0) {
                q += kFamilyProbability / static_cast<double>(a.size() * choices);
            }
        }
    }
    // Addition: to = (from op leaf).
    if (b.size() == a.size() + 2 && to.arity(0) == 2 && to.subtree_end(1) == b.size() - 1 &&
        b.back().kind != NodeKind::Constant && std::equal(a.begin(), a.end(), b.begin() + 1, same_shape)) {
        q += kFamilyProbability * 0.5 / static_cast<double>(binary.size() * leaf_labels());
    }
    // Removal: from = (to op leaf).
    if (a.size() == b.size() + 2 && from.arity(0) == 2 && from.subtree_end(1) == a.size() - 1 &&
        a.back().kind != NodeKind::Constant && std::equal(b.begin(), b.end(), a.begin() + 1, same_shape)) {
        q += kFamilyProbability * 0.5;
    }
    return q;
}

// ---------------------------------------------------------------------------
// Chain

double acceptance_probability(double current_h, double proposed_h, double log_proposal_ratio, double temperature)
{
    if (!std::isfinite(proposed_h)) {
        return 0.0;
    }
    const double log_a = -(proposed_h - current_h) / temperature + log_proposal_ratio;
    return log_a >= 0.0 ? 1.0 : std::exp(log_a);
}

double swap_probability(double h_i, double temperature_i, double h_j, double temperature_j)
{
    const double log_a = (1.0 / temperature_i - 1.0 / temperature_j) * (h_i - h_j);
    if (std::isnan(log_a)) {
        return 0.0;
    }
    return log_a >= 0.0 ? 1.0 : std::exp(log_a);
}

ChainState::ChainState(ExprTree start, ModelScorer& scorer, double temperature_, std::uint64_t seed)
    : tree(std::move(start)), best(tree), temperature(temperature_), rng(seed)
{
    if (!(temperature > 0.0)) {
        throw std::invalid_argument("temperature must be positive");
    }
    scored = scorer.score(tree);
    theta = scored->fit.theta.size() == tree.param_count() ? scorer.params_for(tree, scored->fit.theta)
                                                           : std::vector<double>{};
    arrangements = commutative_arrangements(tree);
    best_theta = theta;
    best_scored = scored;
}

StepOutcome metropolis_step(ChainState& state, ModelScorer& scorer, const MoveGenerator& moves)
{
    ++state.step;
    MoveProposal proposal = moves.propose(state.tree, state.theta, state.rng);
    StepOutcome outcome{proposal.kind};
    if (!proposal.tree) {
        outcome.null_proposal = true;
        return outcome;
    }
    auto scored = scorer.score(*proposal.tree, proposal.warm_start);
    const double proposed_h = scored->dl.total();
    const std::uint64_t arrangements = commutative_arrangements(*proposal.tree);
    const double log_ratio = std::log(proposal.backward) - std::log(proposal.forward) +
                             std::log(static_cast<double>(state.arrangements)) -
                             std::log(static_cast<double>(arrangements));
    const double a = acceptance_probability(state.h(), proposed_h, log_ratio, state.temperature);
    const double u = uniform01(state.rng);

    std::vector<double> theta;
    const bool fitted = std::isfinite(proposed_h) && scored->fit.theta.size() == proposal.tree->param_count();
    if (fitted) {
        theta = scorer.params_for(*proposal.tree, scored->fit.theta);
    }
    if (fitted && proposed_h < state.best_h()) {
        state.best = *proposal.tree;
        state.best_theta = theta;
        state.best_scored = scored;
    }
    if (u < a) {
        state.tree = std::move(*proposal.tree);
        state.theta = std::move(theta);
        state.scored = std::move(scored);
        state.arrangements = arrangements;
        outcome.accepted = true;
    }
    return outcome;
}

std::uint64_t fit_seed_for(std::uint64_t seed) { return split_seed(seed, kFitStream); }

SampleTrace sample(const Dataset& data, const PriorConfig& prior, const SamplerOptions& options, std::uint64_t seed,
                   std::shared_ptr<FitCache> cache)
{
    return tempered_sample(data, prior, options.temperatures, options, seed, std::move(cache));
}

namespace {

SampleTrace run_ladder(const Dataset& data, const PriorConfig& prior, const std::vector<double>& temperatures,
                       const SamplerOptions& options, std::uint64_t seed, std::uint64_t fit_seed,
                       const std::shared_ptr<FitCache>& cache);

} // namespace

SampleTrace tempered_sample(const Dataset& data, const PriorConfig& prior, std::vector<double> temperatures,
                            SamplerOptions options, std::uint64_t seed, std::shared_ptr<FitCache> cache)
{
    if (options.steps == 0) {
        throw std::invalid_argument("the sampler needs at least one step");
    }
    if (options.thin == 0) {
        throw std::invalid_argument("thin must be at least 1");
    }
    if (!(options.burn_in >= 0.0 && options.burn_in < 1.0)) {
        throw std::invalid_argument("burn-in fraction must lie in [0, 1)");
    }
    if (temperatures.empty() || temperatures.front() != 1.0 ||
        !std::is_sorted(temperatures.begin(), temperatures.end())) {
        throw std::invalid_argument("temperatures must be ascending and start at 1");
    }
    if (options.restarts == 0) {
        throw std::invalid_argument("restarts must be at least 1");
    }
    if (!cache) {
        cache = std::make_shared<FitCache>();
    }
    SampleTrace trace = run_ladder(data, prior, temperatures, options, seed, fit_seed_for(seed), cache);
    double acceptance = trace.acceptance_rate;
    for (std::size_t r = 1; r < options.restarts; ++r) {
        SampleTrace more =
            run_ladder(data, prior, temperatures, options, split_seed(seed, kRestartStream + r), fit_seed_for(seed), cache);
        acceptance += more.acceptance_rate;
        trace.null_proposals += more.null_proposals;
        for (const auto& [key, count] : more.visits) {
            trace.visits[key] += count;
        }
        if (more.mdl_h() < trace.mdl_h()) {
            trace.mdl_tree = std::move(more.mdl_tree);
            trace.mdl_model = std::move(more.mdl_model);
            trace.mdl_key = std::move(more.mdl_key);
            trace.mdl_theta = std::move(more.mdl_theta);
            trace.mdl_dl = more.mdl_dl;
            trace.mdl_fit = std::move(more.mdl_fit);
        }
    }
    trace.acceptance_rate = acceptance / static_cast<double>(options.restarts);
    trace.distinct_models = cache->size();
    return trace;
}

namespace {

SampleTrace run_ladder(const Dataset& data, const PriorConfig& prior, const std::vector<double>& temperatures,
                       const SamplerOptions& options, std::uint64_t seed, std::uint64_t fit_seed,
                       const std::shared_ptr<FitCache>& cache)
{
    const auto vocab = std::make_shared<const OpVocabulary>(prior.vocabulary());
    ModelScorer scorer(data, prior, options.fit, fit_seed, cache);
    const MoveGenerator moves(vocab, data.dimension(), options.max_nodes, options.blocks);

    std::vector<ChainState> chains;
    chains.reserve(temperatures.size());
    for (std::size_t c = 0; c < temperatures.size(); ++c) {
        chains.emplace_back(ExprTree::constant_model(vocab, data.dimension()), scorer, temperatures[c],
                            split_seed(seed, c));
    }
    Rng swap_rng(split_seed(seed, kSwapStream));

    SampleTrace trace;
    const auto record = [&](const ChainState& s, bool accepted) {
        trace.rows.push_back(TraceRow{s.step, to_text(s.tree), s.h(), s.scored->dl.model_complexity,
                                      s.tree.param_count(), accepted});
    };
    record(chains[0], true);

    const auto burn_in = static_cast<std::size_t>(options.burn_in * static_cast<double>(options.steps));
    std::unordered_map<const ScoredModel*, std::size_t> visits;
    std::size_t accepted = 0;
    std::size_t swaps_tried = 0;
    std::size_t swaps_done = 0;
    for (std::size_t step = 1; step <= options.steps; ++step) {
        StepOutcome first{};
        for (std::size_t c = 0; c < chains.size(); ++c) {
            const StepOutcome o = metropolis_step(chains[c], scorer, moves);
            if (c == 0) {
                first = o;
            }
        }
        accepted += first.accepted ? 1U : 0U;
        trace.null_proposals += first.null_proposal ? 1U : 0U;
        if (chains.size() > 1) {
            const std::size_t i = uniform_index(swap_rng, chains.size() - 1);
            ChainState& lo = chains[i];
            ChainState& hi = chains[i + 1];
            ++swaps_tried;
            const double p = swap_probability(lo.h(), lo.temperature, hi.h(), hi.temperature);
            if (uniform01(swap_rng) < p) {
                std::swap(lo.tree, hi.tree);
                std::swap(lo.theta, hi.theta);
                std::swap(lo.scored, hi.scored);
                std::swap(lo.arrangements, hi.arrangements);
                ++swaps_done;
            }
        }
        if (options.record_visits && step > burn_in) {
            ++visits[chains[0].scored.get()];
        }
        if (step % options.thin == 0) {
            record(chains[0], first.accepted);
        }
    }

    const ChainState* best = &chains[0];
    for (const ChainState& c : chains) {
        if (c.best_h() < best->best_h()) {
            best = &c;
        }
    }
    trace.mdl_tree = best->best;
    trace.mdl_model = to_text(best->best);
    trace.mdl_key = best->best_scored->key;
    trace.mdl_theta = best->best_theta;
    trace.mdl_dl = best->best_scored->dl;
    trace.mdl_fit = best->best_scored->fit;
    trace.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(options.steps);
    trace.swap_rate = swaps_tried == 0 ? 0.0 : static_cast<double>(swaps_done) / static_cast<double>(swaps_tried);
    trace.distinct_models = cache->size();
    for (const auto& [model, count] : visits) {
        trace.visits[model->key] += count;
    }
    return trace;
}

} // namespace

void write_trace_csv(std::ostream& out, const SampleTrace& trace)
{
    out << "step,H,H_M,k,accepted,model\n";
    for (const TraceRow& r : trace.rows) {
        out << fmt::format("{},{:.17g},{:.17g},{},{},\"{}\"\n", r.step, r.h, r.model_complexity, r.params,
                           r.accepted ? 1 : 0, r.model);
    }
}

// ---------------------------------------------------------------------------
// Enumeration

namespace {

class StructureEnumerator {
public:
    StructureEnumerator(const OpVocabulary& vocab, std::size_t dimension) : vocab_(vocab), dimension_(dimension) {}

    double count(std::size_t size)
    {
        while (counts_.size() <= size) {
            const std::size_t s = counts_.size();
            double n = 0.0;
            if (s == 1) {
                n = static_cast<double>(dimension_ + 1);
            } else if (s >= 2) {
                n = static_cast<double>(vocab_.of_arity(1).size()) * counts_[s - 1];
                for (std::size_t a = 1; a + 1 < s; ++a) {
                    n += static_cast<double>(vocab_.of_arity(2).size()) * counts_[a] * counts_[s - 1 - a];
                }
            }
            counts_.push_back(n);
        }
        return counts_[size];
    }

    const std::vector<std::vector<Node>>& trees(std::size_t size)
    {
        while (memo_.size() <= size) {
            const std::size_t s = memo_.size();
            std::vector<std::vector<Node>> out;
            if (s == 1) {
                for (std::size_t j = 0; j < dimension_; ++j) {
                    out.push_back({Node::variable(j)});
                }
                out.push_back({Node::param(0)});
            } else if (s >= 2) {
                for (OpId op : vocab_.of_arity(1)) {
                    for (const auto& child : memo_[s - 1]) {
                        std::vector<Node> t{Node::op(op)};
                        t.insert(t.end(), child.begin(), child.end());
                        out.push_back(std::move(t));
                    }
                }
                for (OpId op : vocab_.of_arity(2)) {
                    for (std::size_t a = 1; a + 1 < s; ++a) {
                        for (const auto& left : memo_[a]) {
                            for (const auto& right : memo_[s - 1 - a]) {
                                std::vector<Node> t{Node::op(op)};
                                t.insert(t.end(), left.begin(), left.end());
                                t.insert(t.end(), right.begin(), right.end());
                                out.push_back(std::move(t));
                            }
                        }
                    }
                }
            }
            memo_.push_back(std::move(out));
        }
        return memo_[size];
    }

private:
    const OpVocabulary& vocab_;
    std::size_t dimension_;
    std::vector<double> counts_;
    std::vector<std::vector<std::vector<Node>>> memo_;
};

} // namespace

std::vector<ExprTree> enumerate_structures(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension,
                                           const EnumerationBounds& bounds)
{
    StructureEnumerator gen(*vocab, dimension);
    double ordered = 0.0;
    for (std::size_t s = 1; s <= bounds.max_nodes; ++s) {
        ordered += gen.count(s);
    }
    if (ordered > static_cast<double>(kMaxOrderedTrees)) {
        throw std::length_error(fmt::format("model space has {:.0f} ordered trees; tighten max_nodes or the "
                                            "vocabulary",
                                            ordered));
    }
    std::vector<ExprTree> out;
    std::unordered_set<std::string> seen;
    for (std::size_t s = 1; s <= bounds.max_nodes; ++s) {
        for (std::vector<Node> prefix : gen.trees(s)) {
            std::uint16_t slot = 0;
            for (Node& n : prefix) {
                if (n.kind == NodeKind::Param) {
                    n.index = slot++;
                }
            }
            Canonicalized canon = canonicalize(ExprTree(vocab, dimension, std::move(prefix)));
            if (!seen.insert(canon.key).second) {
                continue;
            }
            if (out.size() >= bounds.max_models) {
                throw std::length_error(fmt::format("model space exceeds {} canonical models; tighten max_nodes or "
                                                    "the vocabulary",
                                                    bounds.max_models));
            }
            out.push_back(std::move(canon.tree));
        }
    }
    return out;
}

std::vector<EnumeratedModel> enumerate_models(const Dataset& data, const PriorConfig& prior,
                                              const EnumerationBounds& bounds, const FitOptions& fit,
                                              std::uint64_t seed, std::shared_ptr<FitCache> cache)
{
    const auto vocab = std::make_shared<const OpVocabulary>(prior.vocabulary());
    if (!cache) {
        cache = std::make_shared<FitCache>();
    }
    ModelScorer scorer(data, prior, fit, fit_seed_for(seed), cache);
    std::vector<EnumeratedModel> out;
    for (ExprTree& tree : enumerate_structures(vocab, data.dimension(), bounds)) {
        auto scored = scorer.score(tree);
        out.push_back(EnumeratedModel{std::move(tree), scored->key, scored->fit.theta, scored->dl});
    }
    std::sort(out.begin(), out.end(), [](const EnumeratedModel& a, const EnumeratedModel& b) {
        if (a.h() != b.h()) {
            return a.h() < b.h();
        }
        return a.key < b.key;
    });
    const double h_min = out.front().h();
    double z = 0.0;
    for (const EnumeratedModel& m : out) {
        z += std::isfinite(m.h()) ? std::exp(-(m.h() - h_min)) : 0.0;
    }
    for (EnumeratedModel& m : out) {
        m.posterior = std::isfinite(m.h()) ? std::exp(-(m.h() - h_min)) / z : 0.0;
    }
    return out;
}

} // namespace mdlsr
