#include "driftfit/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>

#include "driftfit/errors.hpp"

namespace driftfit::harness {

struct Expression::Node {
    enum class Kind { Number, Variable, Unary, Binary, Call };

    Kind kind;
    double value = 0.0;     // Number
    int var_index = 0;      // Variable, zero-based
    char op = 0;            // Binary: one of + - * / ^
    std::string fn;         // Call
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

NodePtr make_number(double v) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Number;
    n->value = v;
    return n;
}

NodePtr make_variable(int index) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Variable;
    n->var_index = index;
    return n;
}

NodePtr make_unary(NodePtr operand) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Unary;
    n->op = '-';
    n->lhs = std::move(operand);
    return n;
}

NodePtr make_binary(char op, NodePtr lhs, NodePtr rhs) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Binary;
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
}

NodePtr make_call(std::string fn, NodePtr arg) {
    auto n = std::make_shared<Node>();
    n->kind = Node::Kind::Call;
    n->fn = std::move(fn);
    n->lhs = std::move(arg);
    return n;
}

bool is_function_name(const std::string& name) {
    return name == "sin" || name == "cos" || name == "exp";
}

/// Integer powers by repeated squaring, so expressions like cos(x1)^2 avoid
/// pow() and stay exact for small exponents.
double integer_power(double base, long long e) {
    if (e < 0)
        return 1.0 / integer_power(base, -e);
    double result = 1.0;
    double factor = base;
    while (e > 0) {
        if (e & 1)
            result *= factor;
        factor *= factor;
        e >>= 1;
    }
    return result;
}

class Parser {
public:
    Parser(const std::string& text, int dim) : text_(text), dim_(dim) {}

    NodePtr parse() {
        NodePtr root = parse_sum();
        skip_ws();
        if (pos_ != text_.size())
            throw ParseError("unexpected trailing input", pos_);
        return root;
    }

private:
    const std::string& text_;
    int dim_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool peek_is(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    bool consume(char c) {
        if (peek_is(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr parse_sum() {
        NodePtr lhs = parse_product();
        for (;;) {
            if (consume('+'))
                lhs = make_binary('+', lhs, parse_product());
            else if (consume('-'))
                lhs = make_binary('-', lhs, parse_product());
            else
                return lhs;
        }
    }

    NodePtr parse_product() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (consume('*'))
                lhs = make_binary('*', lhs, parse_unary());
            else if (consume('/'))
                lhs = make_binary('/', lhs, parse_unary());
            else
                return lhs;
        }
    }

    NodePtr parse_unary() {
        if (consume('-'))
            return make_unary(parse_unary());
        return parse_power();
    }

    // Right-associative, binding tighter than unary minus: -2^2 is -(2^2).
    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (consume('^'))
            return make_binary('^', base, parse_unary());
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size())
            throw ParseError("unexpected end of expression", pos_);
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_sum();
            if (!consume(')'))
                throw ParseError("expected ')'", pos_);
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
            return parse_identifier();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    NodePtr parse_number() {
        const char* begin = text_.c_str() + pos_;
        char* end = nullptr;
        const double value = std::strtod(begin, &end);
        if (end == begin)
            throw ParseError("malformed number", pos_);
        pos_ += static_cast<std::size_t>(end - begin);
        return make_number(value);
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        const std::string name = text_.substr(start, pos_ - start);

        if (is_function_name(name)) {
            if (!consume('('))
                throw ArityError("function '" + name + "' needs a parenthesized argument", start);
            NodePtr arg = parse_sum();
            if (peek_is(','))
                throw ArityError("function '" + name + "' takes exactly one argument", pos_);
            if (!consume(')'))
                throw ParseError("expected ')'", pos_);
            return make_call(name, std::move(arg));
        }

        // Variables are x1..xd, with no leading zeros.
        if (name.size() >= 2 && name[0] == 'x' && name[1] != '0') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits) {
                const long index = std::strtol(name.c_str() + 1, nullptr, 10);
                if (index >= 1 && index <= dim_)
                    return make_variable(static_cast<int>(index) - 1);
                throw UnknownIdentifierError(
                    "variable '" + name + "' exceeds dimension " + std::to_string(dim_), start);
            }
        }
        throw UnknownIdentifierError("unknown identifier '" + name + "'", start);
    }
};

double eval_node(const Node& node, const Vector& x) {
    switch (node.kind) {
    case Node::Kind::Number:
        return node.value;
    case Node::Kind::Variable:
        return x(node.var_index);
    case Node::Kind::Unary:
        return -eval_node(*node.lhs, x);
    case Node::Kind::Call: {
        const double a = eval_node(*node.lhs, x);
        if (node.fn == "sin")
            return std::sin(a);
        if (node.fn == "cos")
            return std::cos(a);
        return std::exp(a);
    }
    case Node::Kind::Binary:
    default: {
        const double a = eval_node(*node.lhs, x);
        const double b = eval_node(*node.rhs, x);
        switch (node.op) {
        case '+':
            return a + b;
        case '-':
            return a - b;
        case '*':
            return a * b;
        case '/':
            return a / b;
        default: {
            const double rounded = std::nearbyint(b);
            if (rounded == b && std::abs(b) <= 1024.0)
                return integer_power(a, static_cast<long long>(rounded));
            return std::pow(a, b);
        }
        }
    }
    }
}

void print_node(const Node& node, std::string& out) {
    switch (node.kind) {
    case Node::Kind::Number: {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", node.value);
        out += buf;
        break;
    }
    case Node::Kind::Variable:
        out += "x" + std::to_string(node.var_index + 1);
        break;
    case Node::Kind::Unary:
        out += "(-";
        print_node(*node.lhs, out);
        out += ")";
        break;
    case Node::Kind::Call:
        out += node.fn;
        out += "(";
        print_node(*node.lhs, out);
        out += ")";
        break;
    case Node::Kind::Binary:
        out += "(";
        print_node(*node.lhs, out);
        out += node.op;
        print_node(*node.rhs, out);
        out += ")";
        break;
    }
}

bool nodes_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind)
        return false;
    switch (a.kind) {
    case Node::Kind::Number:
        // Bit-level comparison so round-tripped literals compare cleanly.
        return a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
    case Node::Kind::Variable:
        return a.var_index == b.var_index;
    case Node::Kind::Unary:
        return nodes_equal(*a.lhs, *b.lhs);
    case Node::Kind::Call:
        return a.fn == b.fn && nodes_equal(*a.lhs, *b.lhs);
    case Node::Kind::Binary:
    default:
        return a.op == b.op && nodes_equal(*a.lhs, *b.lhs) && nodes_equal(*a.rhs, *b.rhs);
    }
}

} // namespace

Expression Expression::parse(const std::string& text, int dim) {
    if (dim < 1)
        throw Error("expression dimension must be positive");
    Parser parser(text, dim);
    return Expression(parser.parse(), dim);
}

double Expression::eval(const Vector& x) const {
    return eval_node(*root_, x);
}

std::string Expression::str() const {
    std::string out;
    print_node(*root_, out);
    return out;
}

bool Expression::equals(const Expression& other) const {
    return dim_ == other.dim_ && nodes_equal(*root_, *other.root_);
}

dynamics::DriftPtr expression_drift(const std::vector<std::string>& expressions) {
    if (expressions.empty())
        throw Error("a drift needs at least one component expression");
    const int d = static_cast<int>(expressions.size());
    std::vector<Expression> parsed;
    parsed.reserve(expressions.size());
    for (const auto& text : expressions)
        parsed.push_back(Expression::parse(text, d));
    return dynamics::make_drift(d, [parsed](const Vector& x, Vector& out) {
        for (std::size_t k = 0; k < parsed.size(); ++k)
            out(static_cast<Eigen::Index>(k)) = parsed[k].eval(x);
    });
}

} // namespace driftfit::harness
