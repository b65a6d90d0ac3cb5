#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mdlsr/dataset.hpp"
#include "mdlsr/description_length.hpp"
#include "mdlsr/expr_tree.hpp"
#include "mdlsr/fit.hpp"
#include "mdlsr/prior.hpp"
#include "mdlsr/rng.hpp"

namespace mdlsr {

enum class MoveKind : std::uint8_t { NodeChange, TermAddition, TermRemoval, BlockReplacement };

std::string_view to_string(MoveKind kind);

/// How BlockReplacement picks a replacement subtree from the dictionary.
enum class BlockWeighting : std::uint8_t {
    /// Every dictionary tree equally likely.
    Uniform,
    /// Operation count (0..3) uniform first, then uniform within that count.
    ByOps,
};

BlockWeighting parse_block_weighting(std::string_view name);
std::string_view to_string(BlockWeighting weighting);

/// All trees of depth <= 2 over a vocabulary, leaves drawn from {x1..xd, _c}.
/// The dictionary is never materialized; draws are built recursively from
/// per-operation-count tallies.
class BlockDictionary {
public:
    BlockDictionary(const OpVocabulary& vocab, std::size_t dimension, BlockWeighting weighting);

    static constexpr int kMaxDepth = 2;
    static constexpr std::size_t kMaxOps = 3;

    /// A block with parameter leaves numbered 0, 1, ... in prefix order.
    std::vector<Node> draw(Rng& rng) const;
    /// Probability that draw() returns `block`, ignoring parameter numbering;
    /// 0 for anything outside the dictionary.
    double probability(std::span<const Node> block) const;

    double total() const;
    /// Number of dictionary trees with exactly `ops` operations.
    double class_size(std::size_t ops) const { return by_ops_[kMaxDepth][ops]; }
    BlockWeighting weighting() const { return weighting_; }

private:
    void draw_into(int depth, std::size_t ops, Rng& rng, std::vector<Node>& out) const;

    const OpVocabulary& vocab_;
    std::size_t leaf_labels_;
    BlockWeighting weighting_;
    std::size_t nonempty_classes_ = 0;
    // by_ops_[depth][c]: trees of depth <= depth with exactly c operations.
    std::array<std::array<double, kMaxOps + 1>, kMaxDepth + 1> by_ops_{};
};

/// A candidate move. An empty `tree` is a null proposal, counted as a rejection.
struct MoveProposal {
    MoveKind kind = MoveKind::NodeChange;
    std::optional<ExprTree> tree;
    /// q(m -> m') including the 1/3 family choice.
    double forward = 0.0;
    /// q(m' -> m).
    double backward = 0.0;
    /// Starting parameters for the proposed tree, in its slot order.
    std::vector<double> warm_start;
};

/// Generates the three move families over trees whose parameter leaves each
/// own a slot. Proposals above `max_nodes` are null.
class MoveGenerator {
public:
    MoveGenerator(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension, std::size_t max_nodes,
                  BlockWeighting weighting = BlockWeighting::Uniform);

    MoveProposal propose(const ExprTree& tree, std::span<const double> theta, Rng& rng) const;

    MoveProposal node_change(const ExprTree& tree, std::span<const double> theta, Rng& rng) const;
    MoveProposal term_addition(const ExprTree& tree, std::span<const double> theta, Rng& rng) const;
    MoveProposal term_removal(const ExprTree& tree, std::span<const double> theta) const;
    MoveProposal block_replacement(const ExprTree& tree, std::span<const double> theta, Rng& rng) const;

    /// Exact q(from -> to) of the BlockReplacement family, summed over every
    /// position whose replacement turns `from` into `to`.
    double block_probability(const ExprTree& from, const ExprTree& to) const;
    /// Exact q(from -> to) of the whole mixture of move families.
    double transition_probability(const ExprTree& from, const ExprTree& to) const;

    /// Prefix positions whose subtree has depth <= 2.
    static std::vector<std::size_t> block_sites(const ExprTree& tree);

    const BlockDictionary& blocks() const { return blocks_; }
    std::size_t max_nodes() const { return max_nodes_; }
    std::size_t leaf_labels() const { return dimension_ + 1; }

private:
    Node leaf_label(std::size_t label) const;
    MoveProposal finish(MoveKind kind, std::vector<Node> prefix, std::span<const double> old_theta,
                        double fresh_value) const;

    std::shared_ptr<const OpVocabulary> vocab_;
    std::size_t dimension_;
    std::size_t max_nodes_;
    BlockDictionary blocks_;
};

/// min{1, exp(-ΔH/T) * ratio}; 0 when the proposed H is not finite.
double acceptance_probability(double current_h, double proposed_h, double log_proposal_ratio,
                              double temperature = 1.0);

/// Probability of swapping two tempered chains:
/// min{1, exp((1/T_i - 1/T_j)(H_i - H_j))}.
double swap_probability(double h_i, double temperature_i, double h_j, double temperature_j);

struct SamplerOptions {
    std::size_t steps = 50000;
    std::size_t thin = 100;
    /// Fraction of steps discarded before visit counting.
    double burn_in = 0.1;
    std::size_t max_nodes = kDefaultMaxNodes;
    BlockWeighting blocks = BlockWeighting::Uniform;
    FitOptions fit;
    /// Tempering ladder, ascending from 1. A single entry means plain Metropolis.
    std::vector<double> temperatures{1.0};
    /// Independent restarts from "_c0", each running `steps` steps. The MDL
    /// model is taken over all of them.
    std::size_t restarts = 1;
    /// Count visits per canonical model after burn-in.
    bool record_visits = false;
};

/// One Metropolis chain. Trees keep one slot per parameter leaf, so the
/// chain targets exp(-H/T) / arrangements on ordered trees, which puts
/// exp(-H/T) on each commutative equivalence class.
struct ChainState {
    ChainState(ExprTree start, ModelScorer& scorer, double temperature, std::uint64_t seed);

    ExprTree tree;
    /// Fitted parameters in `tree`'s slot order.
    std::vector<double> theta;
    std::shared_ptr<const ScoredModel> scored;
    std::uint64_t arrangements = 1;

    ExprTree best;
    std::vector<double> best_theta;
    std::shared_ptr<const ScoredModel> best_scored;

    std::size_t step = 0;
    double temperature = 1.0;
    Rng rng;

    double h() const { return scored->dl.total(); }
    double best_h() const { return best_scored->dl.total(); }
};

struct StepOutcome {
    MoveKind kind = MoveKind::NodeChange;
    bool accepted = false;
    bool null_proposal = false;
};

/// One Metropolis-Hastings step. Unfittable proposals are always rejected.
StepOutcome metropolis_step(ChainState& state, ModelScorer& scorer, const MoveGenerator& moves);

struct TraceRow {
    std::size_t step = 0;
    std::string model;
    double h = 0.0;
    double model_complexity = 0.0;
    std::size_t params = 0;
    bool accepted = false;
};

struct SampleTrace {
    std::vector<TraceRow> rows;
    std::optional<ExprTree> mdl_tree;
    std::string mdl_model;
    std::string mdl_key;
    std::vector<double> mdl_theta;
    DescriptionLength mdl_dl;
    FitResult mdl_fit;
    double acceptance_rate = 0.0;
    std::size_t null_proposals = 0;
    /// Swap acceptance over all attempted swaps; 0 without tempering.
    double swap_rate = 0.0;
    std::size_t distinct_models = 0;
    /// Canonical key -> post burn-in visits of the T = 1 chain.
    std::map<std::string, std::size_t> visits;

    double mdl_h() const { return mdl_dl.total(); }
};

/// Runs the chain(s) from "_c0" for `options.steps` steps. The trace follows
/// the T = 1 chain of the first restart and visit counts pool the T = 1 chains
/// of all restarts; the MDL model is the best model scored by any chain. Deterministic given `seed` and the cache contents.
SampleTrace sample(const Dataset& data, const PriorConfig& prior, const SamplerOptions& options,
                   std::uint64_t seed, std::shared_ptr<FitCache> cache = nullptr);

/// Parallel tempering over `temperatures` (ascending, first = 1), adjacent
/// swaps attempted after every sweep of single-chain steps.
SampleTrace tempered_sample(const Dataset& data, const PriorConfig& prior, std::vector<double> temperatures,
                            SamplerOptions options, std::uint64_t seed, std::shared_ptr<FitCache> cache = nullptr);

/// Header `step,H,H_M,k,accepted,model`.
void write_trace_csv(std::ostream& out, const SampleTrace& trace);

struct EnumeratedModel {
    ExprTree tree;
    std::string key;
    std::vector<double> theta;
    DescriptionLength dl;
    double posterior = 0.0;

    double h() const { return dl.total(); }
};

struct EnumerationBounds {
    std::size_t max_nodes = 3;
    std::size_t max_models = 100000;
};

/// Every canonical model with at most `max_nodes` nodes over the prior's
/// vocabulary and the data's dimension, one slot per parameter leaf, sorted
/// by H then key, with posterior exp(-H)/Σexp(-H). Throws std::length_error
/// when the space exceeds `max_models`.
std::vector<EnumeratedModel> enumerate_models(const Dataset& data, const PriorConfig& prior,
                                              const EnumerationBounds& bounds, const FitOptions& fit,
                                              std::uint64_t seed, std::shared_ptr<FitCache> cache = nullptr);

/// Canonical structures only (no data); same order as generated.
std::vector<ExprTree> enumerate_structures(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension,
                                           const EnumerationBounds& bounds);

/// Fit seed used by sample() for a chain seed; shared with callers that
/// prefill the cache.
std::uint64_t fit_seed_for(std::uint64_t seed);

} // namespace mdlsr
