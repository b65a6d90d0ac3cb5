#include "mdlsr/expr_tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mdlsr {

namespace {

constexpr std::uint16_t kUnassigned = 0xffff;

struct PointEvaluator {
    const ExprTree& tree;
    std::span<const double> params;
    std::span<const double> x;
    std::size_t pos = 0;
    bool finite = true;

    double next()
    {
        const Node& n = tree.node(pos++);
        switch (n.kind) {
        case NodeKind::Variable: return x[n.index];
        case NodeKind::Param: return params[n.index];
        case NodeKind::Constant: return n.value;
        case NodeKind::Op: break;
        }
        const OpInfo& info = tree.vocabulary().op(n.index);
        double out = 0.0;
        if (info.arity == 1) {
            out = apply_unary(info.kind, next());
        } else {
            const double a = next();
            const double b = next();
            out = apply_binary(info.kind, a, b);
        }
        if (!std::isfinite(out)) {
            finite = false;
        }
        return out;
    }
};

} // namespace

ExprTree::ExprTree(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension, std::vector<Node> prefix)
    : vocab_(std::move(vocab)), dimension_(dimension), nodes_(std::move(prefix))
{
    if (!vocab_) {
        throw std::invalid_argument("expression tree needs a vocabulary");
    }
    if (nodes_.empty()) {
        throw std::invalid_argument("empty expression tree");
    }
    // Prefix well-formedness: running count of open operand positions.
    std::size_t open = 1;
    std::vector<bool> seen;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (open == 0) {
            throw std::invalid_argument("trailing nodes after a complete expression");
        }
        const Node& n = nodes_[i];
        --open;
        switch (n.kind) {
        case NodeKind::Op:
            if (n.index >= vocab_->size()) {
                throw std::invalid_argument("operation id outside the vocabulary");
            }
            open += static_cast<std::size_t>(vocab_->op(n.index).arity);
            break;
        case NodeKind::Variable:
            if (n.index >= dimension_) {
                throw std::invalid_argument("variable x" + std::to_string(n.index + 1) + " exceeds input dimension " +
                                            std::to_string(dimension_));
            }
            break;
        case NodeKind::Param:
            if (seen.size() <= n.index) {
                seen.resize(n.index + 1U, false);
            }
            seen[n.index] = true;
            break;
        case NodeKind::Constant:
            if (!std::isfinite(n.value)) {
                throw std::invalid_argument("non-finite literal constant");
            }
            break;
        }
    }
    if (open != 0) {
        throw std::invalid_argument("incomplete expression: missing operands");
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
        throw std::invalid_argument("parameter slots must be contiguous from _c0");
    }
    param_count_ = seen.size();
}

ExprTree ExprTree::constant_model(std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension)
{
    return ExprTree(std::move(vocab), dimension, {Node::param(0)});
}

int ExprTree::arity(std::size_t pos) const
{
    const Node& n = nodes_[pos];
    return n.kind == NodeKind::Op ? vocab_->op(n.index).arity : 0;
}

std::size_t ExprTree::subtree_end(std::size_t pos) const
{
    std::size_t open = 1;
    while (open > 0) {
        open = open - 1 + static_cast<std::size_t>(arity(pos));
        ++pos;
    }
    return pos;
}

int ExprTree::depth(std::size_t pos) const
{
    // Walk the subtree keeping a stack of remaining-children counters.
    const std::size_t end = subtree_end(pos);
    int best = 0;
    std::vector<int> pending;
    for (std::size_t i = pos; i < end; ++i) {
        const int level = static_cast<int>(pending.size());
        best = std::max(best, level);
        const int a = arity(i);
        if (a > 0) {
            pending.push_back(a);
        } else {
            while (!pending.empty() && --pending.back() == 0) {
                pending.pop_back();
            }
        }
    }
    return best;
}

std::span<const Node> ExprTree::subtree(std::size_t pos) const
{
    return std::span<const Node>(nodes_).subspan(pos, subtree_end(pos) - pos);
}

ExprTree ExprTree::splice(std::size_t pos, std::span<const Node> replacement) const
{
    const std::size_t end = subtree_end(pos);
    std::vector<Node> out;
    out.reserve(nodes_.size() - (end - pos) + replacement.size());
    out.insert(out.end(), nodes_.begin(), nodes_.begin() + static_cast<std::ptrdiff_t>(pos));
    // Offset fresh slots past every existing one; order_params compacts them.
    const auto fresh_base = static_cast<std::uint16_t>(param_count_);
    for (Node n : replacement) {
        if (n.kind == NodeKind::Param) {
            n.index = static_cast<std::uint16_t>(fresh_base + n.index);
        }
        out.push_back(n);
    }
    out.insert(out.end(), nodes_.begin() + static_cast<std::ptrdiff_t>(end), nodes_.end());
    return ExprTree(vocab_, dimension_, order_params(std::move(out)));
}

ExprTree ExprTree::with_distinct_params() const
{
    std::vector<Node> out = nodes_;
    std::uint16_t next = 0;
    for (Node& n : out) {
        if (n.kind == NodeKind::Param) {
            n.index = next++;
        }
    }
    return ExprTree(vocab_, dimension_, std::move(out));
}

ExprTree ExprTree::with_ordered_params() const { return ExprTree(vocab_, dimension_, order_params(nodes_)); }

std::vector<Node> order_params(std::vector<Node> prefix)
{
    std::vector<std::uint16_t> mapping;
    std::uint16_t next = 0;
    for (Node& n : prefix) {
        if (n.kind != NodeKind::Param) {
            continue;
        }
        if (mapping.size() <= n.index) {
            mapping.resize(n.index + 1U, kUnassigned);
        }
        if (mapping[n.index] == kUnassigned) {
            mapping[n.index] = next++;
        }
        n.index = mapping[n.index];
    }
    return prefix;
}

std::optional<double> evaluate(const ExprTree& tree, std::span<const double> params, std::span<const double> x)
{
    if (params.size() != tree.param_count()) {
        throw std::invalid_argument("evaluate: expected " + std::to_string(tree.param_count()) + " parameters, got " +
                                    std::to_string(params.size()));
    }
    if (x.size() != tree.dimension()) {
        throw std::invalid_argument("evaluate: input has dimension " + std::to_string(x.size()) + ", tree expects " +
                                    std::to_string(tree.dimension()));
    }
    PointEvaluator ev{tree, params, x};
    const double v = ev.next();
    if (!ev.finite || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::vector<std::size_t> op_counts(const ExprTree& tree)
{
    std::vector<std::size_t> counts(tree.vocabulary().size(), 0);
    for (const Node& n : tree.nodes()) {
        if (n.kind == NodeKind::Op) {
            ++counts[n.index];
        }
    }
    return counts;
}

std::map<std::string, std::size_t> count_ops(const ExprTree& tree)
{
    const auto counts = op_counts(tree);
    std::map<std::string, std::size_t> out;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out.emplace(std::string(tree.vocabulary().op(static_cast<OpId>(i)).name), counts[i]);
    }
    return out;
}

} // namespace mdlsr
