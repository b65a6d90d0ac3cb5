#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdlsr/expr_tree.hpp"

namespace mdlsr {

struct Canonicalized {
    ExprTree tree;
    std::string key;
    /// slot_map[s] is the canonical slot of the input tree's slot s.
    std::vector<std::size_t> slot_map;
};

Canonicalized canonicalize(const ExprTree& tree);

/// Representative of the tree's equivalence class under argument reordering
/// of commutative operations (+, *) and parameter-slot renumbering. Slots are
/// numbered by first occurrence in the returned tree.
ExprTree canonical_form(const ExprTree& tree);

/// to_text of canonical_form: equal for equivalent trees, distinct otherwise.
std::string canonical_key(const ExprTree& tree);

/// Number of distinct ordered trees in the tree's commutative class, treating
/// parameter leaves as interchangeable: 2 per commutative node whose operands
/// differ structurally. Intended for trees with one slot per parameter leaf.
std::uint64_t commutative_arrangements(const ExprTree& tree);

} // namespace mdlsr
