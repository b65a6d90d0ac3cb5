#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>

#include "mdlsr/expr_tree.hpp"

namespace mdlsr {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t position, const std::string& reason)
        : std::runtime_error("parse error at position " + std::to_string(position) + ": " + reason),
          position_(position), reason_(reason)
    {
    }

    std::size_t position() const { return position_; }
    const std::string& reason() const { return reason_; }

private:
    std::size_t position_;
    std::string reason_;
};

/// Fully parenthesized infix: "(a op b)" with single spaces around binary
/// operators, "name(arg)" for unary ones, "x1".. for variables, "_c0".. for
/// slots and shortest round-trip decimals for literal constants.
std::string to_text(const ExprTree& tree);

/// Inverse of to_text. Whitespace is insignificant. Throws ParseError.
ExprTree parse_text(std::string_view text, std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension);

/// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

} // namespace mdlsr
