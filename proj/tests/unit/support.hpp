#pragma once

#include <memory>
#include <string>
#include <vector>

#include "mdlsr/dataset.hpp"
#include "mdlsr/expr_tree.hpp"
#include "mdlsr/rng.hpp"
#include "mdlsr/text.hpp"

namespace mdlsr::testing {

inline std::shared_ptr<const OpVocabulary> default_vocab()
{
    static const auto vocab = std::make_shared<const OpVocabulary>(OpVocabulary::default_set());
    return vocab;
}

inline std::shared_ptr<const OpVocabulary> vocab_of(const std::vector<std::string>& names)
{
    return std::make_shared<const OpVocabulary>(names);
}

inline ExprTree parse(const std::string& text, std::size_t dimension = 2,
                      std::shared_ptr<const OpVocabulary> vocab = default_vocab())
{
    return parse_text(text, std::move(vocab), dimension);
}

/// Random valid tree with up to `max_nodes` nodes. Parameter leaves reuse an
/// existing slot with probability `share`.
inline ExprTree random_tree(const std::shared_ptr<const OpVocabulary>& vocab, std::size_t dimension,
                            std::size_t max_nodes, Rng& rng, double share = 0.2)
{
    std::vector<Node> prefix;
    std::size_t open = 1;
    std::size_t slots = 0;
    while (open > 0) {
        const std::size_t budget = max_nodes - prefix.size();
        const bool can_unary = budget >= open + 1 && !vocab->of_arity(1).empty();
        const bool can_binary = budget >= open + 2 && !vocab->of_arity(2).empty();
        const double u = uniform01(rng);
        if (can_binary && u < 0.3) {
            const auto ops = vocab->of_arity(2);
            prefix.push_back(Node::op(ops[uniform_index(rng, ops.size())]));
            open += 1;
        } else if (can_unary && u < 0.45) {
            const auto ops = vocab->of_arity(1);
            prefix.push_back(Node::op(ops[uniform_index(rng, ops.size())]));
        } else {
            const std::size_t label = uniform_index(rng, dimension + 1);
            if (label < dimension) {
                prefix.push_back(Node::variable(label));
            } else if (slots > 0 && uniform01(rng) < share) {
                prefix.push_back(Node::param(uniform_index(rng, slots)));
            } else {
                prefix.push_back(Node::param(slots++));
            }
            open -= 1;
        }
    }
    return ExprTree(vocab, dimension, order_params(std::move(prefix)));
}

inline Dataset make_dataset(std::size_t dimension, const std::vector<std::vector<double>>& rows,
                            std::vector<double> y)
{
    std::vector<double> flat;
    for (const auto& r : rows) {
        flat.insert(flat.end(), r.begin(), r.end());
    }
    return Dataset(dimension, flat, std::move(y));
}

} // namespace mdlsr::testing
