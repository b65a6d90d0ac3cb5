#include "mdlsr/canonical.hpp"

#include <algorithm>
#include <optional>

#include "mdlsr/text.hpp"

namespace mdlsr {

namespace {

// Ties between structurally equal operands only matter when slots are shared;
// beyond this many tie nodes we keep the first arrangement found.
constexpr std::size_t kMaxTieNodes = 16;

struct ShapeNode {
    Node node;
    int first = -1;
    int second = -1;
    std::string shape;
    bool tie = false;
};

class ShapeBuilder {
public:
    explicit ShapeBuilder(const ExprTree& tree) : tree_(tree) { nodes_.reserve(tree.size()); }

    int build()
    {
        const std::size_t pos = pos_++;
        const Node& n = tree_.node(pos);
        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(ShapeNode{n, -1, -1, {}, false});
        switch (n.kind) {
        case NodeKind::Variable: nodes_[id].shape = "x" + std::to_string(n.index + 1U); return id;
        case NodeKind::Param: nodes_[id].shape = "_c"; return id;
        case NodeKind::Constant: nodes_[id].shape = format_double(n.value); return id;
        case NodeKind::Op: break;
        }
        const OpInfo& info = tree_.vocabulary().op(n.index);
        if (info.arity == 1) {
            const int child = build();
            nodes_[id].first = child;
            nodes_[id].shape = std::string(info.name) + "(" + nodes_[child].shape + ")";
            return id;
        }
        int a = build();
        int b = build();
        if (info.commutative) {
            const int cmp = nodes_[a].shape.compare(nodes_[b].shape);
            if (cmp > 0) {
                std::swap(a, b);
            } else if (cmp == 0) {
                nodes_[id].tie = true;
                ties_.push_back(id);
            }
        }
        nodes_[id].first = a;
        nodes_[id].second = b;
        nodes_[id].shape = "(" + nodes_[a].shape + " " + std::string(info.name) + " " + nodes_[b].shape + ")";
        return id;
    }

    void emit(int id, std::uint32_t mask, std::vector<Node>& out) const
    {
        const ShapeNode& s = nodes_[id];
        out.push_back(s.node);
        if (s.first < 0) {
            return;
        }
        if (s.second < 0) {
            emit(s.first, mask, out);
            return;
        }
        bool flip = false;
        if (s.tie) {
            const auto it = std::find(ties_.begin(), ties_.end(), id);
            const auto bit = static_cast<std::size_t>(it - ties_.begin());
            flip = bit < kMaxTieNodes && ((mask >> bit) & 1U) != 0;
        }
        emit(flip ? s.second : s.first, mask, out);
        emit(flip ? s.first : s.second, mask, out);
    }

    const std::vector<int>& ties() const { return ties_; }
    const std::vector<ShapeNode>& nodes() const { return nodes_; }

private:
    const ExprTree& tree_;
    std::size_t pos_ = 0;
    std::vector<ShapeNode> nodes_;
    std::vector<int> ties_;
};

bool has_shared_slots(const ExprTree& tree)
{
    std::size_t leaves = 0;
    for (const Node& n : tree.nodes()) {
        leaves += n.kind == NodeKind::Param ? 1U : 0U;
    }
    return leaves != tree.param_count();
}

} // namespace

Canonicalized canonicalize(const ExprTree& tree)
{
    ShapeBuilder builder(tree);
    const int root = builder.build();

    const std::size_t tie_count = has_shared_slots(tree) ? std::min(builder.ties().size(), kMaxTieNodes) : 0;
    std::optional<Canonicalized> best;
    for (std::uint32_t mask = 0; mask < (1U << tie_count); ++mask) {
        std::vector<Node> prefix;
        prefix.reserve(tree.size());
        builder.emit(root, mask, prefix);
        std::vector<std::size_t> slot_map(tree.param_count(), 0);
        std::vector<bool> assigned(tree.param_count(), false);
        std::size_t next = 0;
        for (Node& n : prefix) {
            if (n.kind != NodeKind::Param) {
                continue;
            }
            if (!assigned[n.index]) {
                assigned[n.index] = true;
                slot_map[n.index] = next++;
            }
            n.index = static_cast<std::uint16_t>(slot_map[n.index]);
        }
        ExprTree candidate(tree.vocabulary_ptr(), tree.dimension(), std::move(prefix));
        std::string text = to_text(candidate);
        if (!best || text < best->key) {
            best = Canonicalized{std::move(candidate), std::move(text), std::move(slot_map)};
        }
    }
    return std::move(*best);
}

ExprTree canonical_form(const ExprTree& tree) { return canonicalize(tree).tree; }

std::string canonical_key(const ExprTree& tree) { return canonicalize(tree).key; }

std::uint64_t commutative_arrangements(const ExprTree& tree)
{
    ShapeBuilder builder(tree);
    builder.build();
    std::uint64_t count = 1;
    for (const ShapeNode& s : builder.nodes()) {
        if (s.second >= 0 && !s.tie && tree.vocabulary().op(s.node.index).commutative) {
            count *= 2;
        }
    }
    return count;
}

} // namespace mdlsr
