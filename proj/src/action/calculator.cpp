#include "tipwise/action/calculator.hpp"

#include <charconv>
#include <cmath>
#include <memory>
#include <vector>

#include "tipwise/core/error.hpp"

namespace tipwise {

namespace {

constexpr int kMaxDepth = 200;

struct Node {
    char op = 0;  // 0 literal, 'n' negate, else binary operator
    double value = 0.0;
    std::unique_ptr<Node> lhs;
    std::unique_ptr<Node> rhs;
};

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    std::unique_ptr<Node> parse() {
        skip_ws();
        if (pos_ >= src_.size()) fail("empty expression");
        auto node = parse_sum(0);
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected trailing input");
        return node;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::ParseError, "calculate: " + what, "offset " + std::to_string(pos_));
    }

    void skip_ws() {
        while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n')) {
            ++pos_;
        }
    }

    // Returns the normalized operator at the cursor without consuming it.
    char peek_op(std::size_t* width) const {
        if (pos_ >= src_.size()) return 0;
        char c = src_[pos_];
        *width = 1;
        if (c == '+' || c == '-' || c == '*' || c == '/') return c;
        if (static_cast<unsigned char>(c) == 0xC3 && pos_ + 1 < src_.size()) {
            auto next = static_cast<unsigned char>(src_[pos_ + 1]);
            *width = 2;
            if (next == 0x97) return '*';  // ×
            if (next == 0xB7) return '/';  // ÷
        }
        return 0;
    }

    std::unique_ptr<Node> parse_sum(int depth) {
        auto lhs = parse_product(depth);
        for (;;) {
            skip_ws();
            std::size_t w = 0;
            char op = peek_op(&w);
            if (op != '+' && op != '-') return lhs;
            pos_ += w;
            auto node = std::make_unique<Node>();
            node->op = op;
            node->lhs = std::move(lhs);
            node->rhs = parse_product(depth);
            lhs = std::move(node);
        }
    }

    std::unique_ptr<Node> parse_product(int depth) {
        auto lhs = parse_unary(depth);
        for (;;) {
            skip_ws();
            std::size_t w = 0;
            char op = peek_op(&w);
            if (op != '*' && op != '/') return lhs;
            pos_ += w;
            auto node = std::make_unique<Node>();
            node->op = op;
            node->lhs = std::move(lhs);
            node->rhs = parse_unary(depth);
            lhs = std::move(node);
        }
    }

    std::unique_ptr<Node> parse_unary(int depth) {
        if (depth > kMaxDepth) fail("expression nested too deeply");
        skip_ws();
        if (pos_ < src_.size() && (src_[pos_] == '-' || src_[pos_] == '+')) {
            char sign = src_[pos_++];
            auto operand = parse_unary(depth + 1);
            if (sign == '+') return operand;
            auto node = std::make_unique<Node>();
            node->op = 'n';
            node->lhs = std::move(operand);
            return node;
        }
        return parse_primary(depth);
    }

    std::unique_ptr<Node> parse_primary(int depth) {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of expression");
        if (src_[pos_] == '(') {
            ++pos_;
            auto inner = parse_sum(depth + 1);
            skip_ws();
            if (pos_ >= src_.size() || src_[pos_] != ')') fail("expected ')'");
            ++pos_;
            return inner;
        }
        return parse_number();
    }

    std::unique_ptr<Node> parse_number() {
        std::size_t start = pos_;
        std::size_t digits = 0;
        while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
            ++pos_;
            ++digits;
        }
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') {
                ++pos_;
                ++digits;
            }
        }
        if (digits == 0) {
            pos_ = start;
            fail("expected a number");
        }
        auto node = std::make_unique<Node>();
        auto res = std::from_chars(src_.data() + start, src_.data() + pos_, node->value);
        if (res.ec == std::errc::result_out_of_range) {
            node->value = HUGE_VAL;
        } else if (res.ec != std::errc()) {
            pos_ = start;
            fail("bad number literal");
        }
        return node;
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

double evaluate(const Node& n) {
    switch (n.op) {
        case 0: return n.value;
        case 'n': return -evaluate(*n.lhs);
        case '+': return evaluate(*n.lhs) + evaluate(*n.rhs);
        case '-': return evaluate(*n.lhs) - evaluate(*n.rhs);
        case '*': return evaluate(*n.lhs) * evaluate(*n.rhs);
        case '/': {
            double num = evaluate(*n.lhs);
            double den = evaluate(*n.rhs);
            if (den == 0.0) throw Error(ErrorCode::DivisionByZero, "calculate: division by zero");
            return num / den;
        }
    }
    return 0.0;
}

}  // namespace

double eval_calculate(std::string_view expr) {
    return evaluate(*Parser(expr).parse());
}

void validate_expression(std::string_view expr) {
    Parser(expr).parse();
}

std::string format_number(double value) {
    if (value == 0.0) return "0";  // folds -0
    if (std::isfinite(value) && std::trunc(value) == value && std::fabs(value) < 1e15) {
        return std::to_string(static_cast<long long>(value));
    }
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

}  // namespace tipwise
