#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mdlsr {

/// Built-in operation semantics. A vocabulary selects a subset of these.
enum class OpKind : std::uint8_t {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Tan,
    Sinh,
    Cosh,
    Tanh,
    Square,
    Cube,
};

struct OpInfo {
    std::string_view name;
    OpKind kind;
    int arity;
    bool commutative;
};

/// Looks up a built-in operation by its textual token ("+", "exp", ...).
std::optional<OpInfo> find_builtin_op(std::string_view name);

/// All built-in operations, binary first.
std::span<const OpInfo> builtin_ops();

double apply_unary(OpKind kind, double a);
double apply_binary(OpKind kind, double a, double b);

using OpId = std::uint16_t;

/// The operation set available to trees, the prior and the sampler. Fixed for
/// the lifetime of a run; trees refer to operations by their index here.
class OpVocabulary {
public:
    /// Throws std::invalid_argument on unknown or duplicated names.
    explicit OpVocabulary(const std::vector<std::string>& names);

    /// Binary {+, -, *, /, **}, unary {exp, log, sin, cos, sqrt, abs}.
    static OpVocabulary default_set();

    std::size_t size() const { return ops_.size(); }
    const OpInfo& op(OpId id) const { return ops_.at(id); }
    std::optional<OpId> find(std::string_view name) const;

    /// Ids of all operations with the given arity, in vocabulary order.
    std::span<const OpId> of_arity(int arity) const { return arity == 1 ? unary_ : binary_; }

    std::vector<std::string> names() const;

    bool operator==(const OpVocabulary& other) const { return names() == other.names(); }

private:
    std::vector<OpInfo> ops_;
    std::vector<OpId> unary_;
    std::vector<OpId> binary_;
};

} // namespace mdlsr
