#include "mdlsr/ops.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mdlsr {

namespace {

constexpr std::array kBuiltins{
    OpInfo{"+", OpKind::Add, 2, true},      OpInfo{"-", OpKind::Sub, 2, false},
    OpInfo{"*", OpKind::Mul, 2, true},      OpInfo{"/", OpKind::Div, 2, false},
    OpInfo{"**", OpKind::Pow, 2, false},    OpInfo{"exp", OpKind::Exp, 1, false},
    OpInfo{"log", OpKind::Log, 1, false},   OpInfo{"sin", OpKind::Sin, 1, false},
    OpInfo{"cos", OpKind::Cos, 1, false},   OpInfo{"sqrt", OpKind::Sqrt, 1, false},
    OpInfo{"abs", OpKind::Abs, 1, false},   OpInfo{"tan", OpKind::Tan, 1, false},
    OpInfo{"sinh", OpKind::Sinh, 1, false}, OpInfo{"cosh", OpKind::Cosh, 1, false},
    OpInfo{"tanh", OpKind::Tanh, 1, false}, OpInfo{"pow2", OpKind::Square, 1, false},
    OpInfo{"pow3", OpKind::Cube, 1, false},
};

} // namespace

std::optional<OpInfo> find_builtin_op(std::string_view name)
{
    for (const auto& info : kBuiltins) {
        if (info.name == name) {
            return info;
        }
    }
    return std::nullopt;
}

std::span<const OpInfo> builtin_ops() { return kBuiltins; }

double apply_unary(OpKind kind, double a)
{
    switch (kind) {
    case OpKind::Exp: return std::exp(a);
    case OpKind::Log: return a > 0.0 ? std::log(a) : std::numeric_limits<double>::quiet_NaN();
    case OpKind::Sin: return std::sin(a);
    case OpKind::Cos: return std::cos(a);
    case OpKind::Sqrt: return a >= 0.0 ? std::sqrt(a) : std::numeric_limits<double>::quiet_NaN();
    case OpKind::Abs: return std::fabs(a);
    case OpKind::Tan: return std::tan(a);
    case OpKind::Sinh: return std::sinh(a);
    case OpKind::Cosh: return std::cosh(a);
    case OpKind::Tanh: return std::tanh(a);
    case OpKind::Square: return a * a;
    case OpKind::Cube: return a * a * a;
    default: break;
    }
    throw std::logic_error("apply_unary: binary operation");
}

double apply_binary(OpKind kind, double a, double b)
{
    switch (kind) {
    case OpKind::Add: return a + b;
    case OpKind::Sub: return a - b;
    case OpKind::Mul: return a * b;
    case OpKind::Div: return b != 0.0 ? a / b : std::numeric_limits<double>::quiet_NaN();
    case OpKind::Pow:
        // 0 ** negative is a pole; pow() would return inf, which we also reject later.
        if (a == 0.0 && b < 0.0) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        return std::pow(a, b);
    default: break;
    }
    throw std::logic_error("apply_binary: unary operation");
}

OpVocabulary::OpVocabulary(const std::vector<std::string>& names)
{
    for (const auto& name : names) {
        auto info = find_builtin_op(name);
        if (!info) {
            throw std::invalid_argument("unknown operation '" + name + "'");
        }
        if (find(name)) {
            throw std::invalid_argument("duplicate operation '" + name + "'");
        }
        const auto id = static_cast<OpId>(ops_.size());
        ops_.push_back(*info);
        (info->arity == 1 ? unary_ : binary_).push_back(id);
    }
}

OpVocabulary OpVocabulary::default_set()
{
    return OpVocabulary({"+", "-", "*", "/", "**", "exp", "log", "sin", "cos", "sqrt", "abs"});
}

std::optional<OpId> OpVocabulary::find(std::string_view name) const
{
    for (std::size_t i = 0; i < ops_.size(); ++i) {
        if (ops_[i].name == name) {
            return static_cast<OpId>(i);
        }
    }
    return std::nullopt;
}

std::vector<std::string> OpVocabulary::names() const
{
    std::vector<std::string> out;
    out.reserve(ops_.size());
    for (const auto& op : ops_) {
        out.emplace_back(op.name);
    }
    return out;
}

} // namespace mdlsr
