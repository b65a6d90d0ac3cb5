#include "mdlsr/text.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <system_error>

namespace mdlsr {

namespace {

void write_node(const ExprTree& tree, std::size_t& pos, std::string& out)
{
    const Node& n = tree.node(pos++);
    switch (n.kind) {
    case NodeKind::Variable:
        out += 'x';
        out += std::to_string(n.index + 1U);
        return;
    case NodeKind::Param:
        out += "_c";
        out += std::to_string(n.index);
        return;
    case NodeKind::Constant: out += format_double(n.value); return;
    case NodeKind::Op: break;
    }
    const OpInfo& info = tree.vocabulary().op(n.index);
    if (info.arity == 1) {
        out += info.name;
        out += '(';
        write_node(tree, pos, out);
        out += ')';
        return;
    }
    out += '(';
    write_node(tree, pos, out);
    out += ' ';
    out += info.name;
    out += ' ';
    write_node(tree, pos, out);
    out += ')';
}

class Parser {
public:
    Parser(std::string_view text, const OpVocabulary& vocab, std::size_t dimension)
        : text_(text), vocab_(vocab), dimension_(dimension)
    {
    }

    std::vector<Node> run()
    {
        parse_expr();
        skip_ws();
        if (pos_ != text_.size()) {
            fail("unexpected trailing input");
        }
        return std::move(nodes_);
    }

private:
    [[noreturn]] void fail(const std::string& reason) const { throw ParseError(pos_, reason); }
    [[noreturn]] void fail_at(std::size_t at, const std::string& reason) const { throw ParseError(at, reason); }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])) != 0) {
            ++pos_;
        }
    }

    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    void expect(char c)
    {
        skip_ws();
        if (peek() != c) {
            fail(std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    void parse_expr()
    {
        skip_ws();
        if (at_end()) {
            fail("unexpected end of input");
        }
        const char c = peek();
        if (c == '(') {
            ++pos_;
            const std::size_t op_slot = nodes_.size();
            nodes_.push_back(Node{});
            parse_expr();
            nodes_[op_slot] = Node::op(parse_binop());
            parse_expr();
            expect(')');
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_') {
            parse_name();
            return;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) != 0 || c == '.' || c == '-' || c == '+') {
            parse_number();
            return;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    OpId parse_binop()
    {
        skip_ws();
        const std::size_t start = pos_;
        std::string token;
        if (peek() == '*' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '*') {
            token = "**";
        } else if (peek() == '+' || peek() == '-' || peek() == '*' || peek() == '/') {
            token = std::string(1, peek());
        } else if (at_end()) {
            fail("expected a binary operator, found end of input");
        } else {
            fail(std::string("expected a binary operator, found '") + peek() + "'");
        }
        pos_ += token.size();
        auto id = vocab_.find(token);
        if (!id) {
            fail_at(start, "unknown operation '" + token + "'");
        }
        return *id;
    }

    static bool all_digits(std::string_view s)
    {
        if (s.empty()) {
            return false;
        }
        for (char ch : s) {
            if (std::isdigit(static_cast<unsigned char>(ch)) == 0) {
                return false;
            }
        }
        return true;
    }

    std::size_t parse_index(std::string_view digits, std::size_t at) const
    {
        std::size_t value = 0;
        auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || value > 4096) {
            fail_at(at, "index out of range");
        }
        return value;
    }

    void parse_name()
    {
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) != 0 || peek() == '_')) {
            ++pos_;
        }
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name.size() > 1 && name[0] == 'x' && all_digits(name.substr(1))) {
            const std::size_t j = parse_index(name.substr(1), start);
            if (j == 0) {
                fail_at(start, "variables are numbered from x1");
            }
            if (j > dimension_) {
                fail_at(start, "variable " + std::string(name) + " exceeds input dimension " + std::to_string(dimension_));
            }
            nodes_.push_back(Node::variable(j - 1));
            return;
        }
        if (name.size() > 2 && name.substr(0, 2) == "_c" && all_digits(name.substr(2))) {
            nodes_.push_back(Node::param(parse_index(name.substr(2), start)));
            return;
        }
        auto id = vocab_.find(name);
        if (!id) {
            fail_at(start, "unknown operation '" + std::string(name) + "'");
        }
        if (vocab_.op(*id).arity != 1) {
            fail_at(start, "binary operation '" + std::string(name) + "' used as a function");
        }
        nodes_.push_back(Node::op(*id));
        expect('(');
        parse_expr();
        expect(')');
    }

    void parse_number()
    {
        const std::size_t start = pos_;
        if (peek() == '+' || peek() == '-') {
            ++pos_;
        }
        while (!at_end()) {
            const char ch = peek();
            const bool exponent_sign = (ch == '+' || ch == '-') && pos_ > start &&
                                       (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E');
            if (std::isdigit(static_cast<unsigned char>(ch)) != 0 || ch == '.' || ch == 'e' || ch == 'E' ||
                exponent_sign) {
                ++pos_;
            } else {
                break;
            }
        }
        std::string_view literal = text_.substr(start, pos_ - start);
        if (!literal.empty() && literal[0] == '+') {
            literal.remove_prefix(1);
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(literal.data(), literal.data() + literal.size(), value);
        if (ec != std::errc{} || ptr != literal.data() + literal.size() || !std::isfinite(value)) {
            fail_at(start, "malformed number '" + std::string(text_.substr(start, pos_ - start)) + "'");
        }
        nodes_.push_back(Node::constant(value));
    }

    std::string_view text_;
    const OpVocabulary& vocab_;
    std::size_t dimension_;
    std::size_t pos_ = 0;
    std::vector<Node> nodes_;
};

} // namespace

std::string format_double(double value)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) {
        return "nan";
    }
    return std::string(buf, ptr);
}

std::string to_text(const ExprTree& tree)
{
    std::string out;
    std::size_t pos = 0;
    write_node(tree, pos, out);
    return out;
}

ExprTree parse_text(std::string_view text, std::shared_ptr<const OpVocabulary> vocab, std::size_t dimension)
{
    Parser parser(text, *vocab, dimension);
    std::vector<Node> nodes = parser.run();
    try {
        return ExprTree(std::move(vocab), dimension, std::move(nodes));
    } catch (const std::invalid_argument& e) {
        throw ParseError(0, e.what());
    }
}

} // namespace mdlsr
