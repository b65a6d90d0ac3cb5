#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mdlsr/ops.hpp"

namespace mdlsr {

/// Default cap on tree size used by generators and the sampler.
inline constexpr std::size_t kDefaultMaxNodes = 50;

enum class NodeKind : std::uint8_t { Op, Variable, Param, Constant };

/// One node of a tree stored in prefix order. `index` is the operation id,
/// the 0-based variable index, or the parameter slot depending on `kind`.
struct Node {
    NodeKind kind = NodeKind::Param;
    std::uint16_t index = 0;
    double value = 0.0;

    static Node op(OpId id) { return {NodeKind::Op, id, 0.0}; }
    static Node variable(std::size_t j) { return {NodeKind::Variable, static_cast<std::uint16_t>(j), 0.0}; }
    static Node param(std::size_t slot) { return {NodeKind::Param, static_cast<std::uint16_t>(slot), 0.0}; }
    static Node constant(double v) { return {NodeKind::Constant, 0, v}; }

    bool is_leaf() const { return kind != NodeKind::Op; }

    friend bool operator==(const Node&, const Node&) = default;
};

/// A closed-form model m(x, theta): an immutable expression tree over a
/// vocabulary, with variables x1..xd and parameter slots _c0.._c(k-1).
/// Slots may be shared by several leaves; slot indices are contiguous.
class ExprTree {
public:
    /// Validates arity, variable range and slot contiguity; throws
    /// std::invalid_argument otherwise.
    ExprTree(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension, std::vector<Node> prefix);

    /// The single-parameter constant model "_c0".
    static ExprTree constant_model(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension);

    const OpVocabulary& vocabulary() const { return *vocab_; }
    const std::shared_ptr<const OpVocabulary>& vocabulary_ptr() const { return vocab_; }
    std::size_t dimension() const { return dimension_; }

    std::span<const Node> nodes() const { return nodes_; }
    const Node& node(std::size_t pos) const { return nodes_[pos]; }
    std::size_t size() const { return nodes_.size(); }

    /// Number of distinct parameter slots k.
    std::size_t param_count() const { return param_count_; }

    int arity(std::size_t pos) const;
    /// One past the last prefix index of the subtree rooted at `pos`.
    std::size_t subtree_end(std::size_t pos) const;
    /// Height of the subtree rooted at `pos`; leaves have depth 0.
    int depth(std::size_t pos) const;
    std::span<const Node> subtree(std::size_t pos) const;

    /// Replaces the subtree at `pos`. Parameter slots inside `replacement` are
    /// fresh (never shared with the rest of the tree); slots are renumbered by
    /// first occurrence afterwards.
    ExprTree splice(std::size_t pos, std::span<const Node> replacement) const;

    /// Gives every parameter leaf its own slot, numbered in prefix order.
    ExprTree with_distinct_params() const;

    /// Renumbers slots by order of first occurrence in prefix order.
    ExprTree with_ordered_params() const;

    /// Structural equality (nodes and input dimension).
    bool operator==(const ExprTree& other) const
    {
        return dimension_ == other.dimension_ && nodes_ == other.nodes_;
    }

private:
    std::shared_ptr<const OpVocabulary> vocab_;
    std::size_t dimension_ = 0;
    std::vector<Node> nodes_;
    std::size_t param_count_ = 0;
};

/// Renumbers parameter slots by first occurrence; the input need not be contiguous.
std::vector<Node> order_params(std::vector<Node> prefix);

/// Evaluates the tree at a single point. Returns std::nullopt ("NonFinite")
/// for any domain violation, pole or overflow anywhere in the evaluation.
std::optional<double> evaluate(const ExprTree& tree, std::span<const double> params, std::span<const double> x);

/// Occurrences of each vocabulary operation, indexed by OpId.
std::vector<std::size_t> op_counts(const ExprTree& tree);

/// Occurrences keyed by operation token; every vocabulary op is present.
std::map<std::string, std::size_t> count_ops(const ExprTree& tree);

inline std::size_t param_count(const ExprTree& tree) { return tree.param_count(); }

} // namespace mdlsr
