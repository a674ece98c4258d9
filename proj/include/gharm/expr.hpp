#ifndef GHARM_EXPR_HPP
#define GHARM_EXPR_HPP

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "gharm/common.hpp"

namespace gharm::expr {

// Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := ('-')? atom ('^' integer)?
//   atom   := number | identifier | func '(' expr {',' expr} ')' | '(' expr ')'
// Functions: abs, exp, log, sqrt, sin, cos, tanh, min, max.
// '^' binds tighter than unary minus; no implicit multiplication.

enum class NodeKind { Constant, Variable, Unary, Binary, Call };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    NodeKind kind;
    double value = 0.0;        // Constant
    std::string name;          // Variable or Call
    char op = 0;               // Unary ('-') or Binary ('+','-','*','/','^')
    int exponent = 0;          // Binary '^' right side (integer literal)
    std::vector<NodePtr> args;
};

struct Expression {
    std::string source;
    NodePtr ast;
    std::vector<std::string> free_variables;
};

namespace detail {

struct FuncInfo {
    int arity;
};

inline const std::map<std::string, FuncInfo>& functions() {
    static const std::map<std::string, FuncInfo> table = {
        {"abs", {1}}, {"exp", {1}},  {"log", {1}}, {"sqrt", {1}},
        {"sin", {1}}, {"cos", {1}},  {"tanh", {1}}, {"min", {2}},
        {"max", {2}},
    };
    return table;
}

class Parser {
public:
    explicit Parser(const std::string& src) : src_(src) {}

    NodePtr parse() {
        skip_ws();
        if (pos_ >= src_.size()) throw ConfigError("empty expression");
        NodePtr e = parse_expr();
        skip_ws();
        if (pos_ < src_.size())
            fail("unexpected trailing input");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream os;
        os << "expression syntax error at column " << (pos_ + 1) << ": " << what
           << " in \"" << src_ << "\"";
        throw ConfigError(os.str());
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            char c = peek();
            if (c != '+' && c != '-') break;
            ++pos_;
            NodePtr rhs = parse_term();
            auto node = std::make_shared<Node>();
            node->kind = NodeKind::Binary;
            node->op = c;
            node->args = {lhs, rhs};
            lhs = node;
        }
        return lhs;
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        for (;;) {
            char c = peek();
            if (c != '*' && c != '/') break;
            ++pos_;
            NodePtr rhs = parse_factor();
            auto node = std::make_shared<Node>();
            node->kind = NodeKind::Binary;
            node->op = c;
            node->args = {lhs, rhs};
            lhs = node;
        }
        return lhs;
    }

    NodePtr parse_factor() {
        bool negate = false;
        if (peek() == '-') {
            ++pos_;
            negate = true;
        }
        NodePtr base = parse_atom();
        if (peek() == '^') {
            ++pos_;
            int expo = parse_integer();
            auto node = std::make_shared<Node>();
            node->kind = NodeKind::Binary;
            node->op = '^';
            node->exponent = expo;
            node->args = {base};
            base = node;
        }
        if (negate) {
            auto node = std::make_shared<Node>();
            node->kind = NodeKind::Unary;
            node->op = '-';
            node->args = {base};
            base = node;
        }
        return base;
    }

    int parse_integer() {
        skip_ws();
        std::size_t start = pos_;
        if (pos_ < src_.size() && src_[pos_] == '-') ++pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ == start || (src_[start] == '-' && pos_ == start + 1))
            fail("expected integer exponent after '^'");
        return std::stoi(src_.substr(start, pos_ - start));
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) fail("expected operand");
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        fail("unexpected character");
    }

    NodePtr parse_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
            ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_++;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_])))
                    ++pos_;
            } else {
                pos_ = mark;  // 'e' was an identifier start, not an exponent
            }
        }
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(src_.substr(start, pos_ - start), &used);
        } catch (const std::exception&) {
            fail("malformed number");
        }
        if (used != pos_ - start) fail("malformed number");
        auto node = std::make_shared<Node>();
        node->kind = NodeKind::Constant;
        node->value = v;
        return node;
    }

    NodePtr parse_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name = src_.substr(start, pos_ - start);
        if (peek() == '(') {
            auto it = functions().find(name);
            if (it == functions().end()) {
                pos_ = start;
                fail("unknown function '" + name + "'");
            }
            ++pos_;  // '('
            auto node = std::make_shared<Node>();
            node->kind = NodeKind::Call;
            node->name = name;
            node->args.push_back(parse_expr());
            while (eat(',')) node->args.push_back(parse_expr());
            if (!eat(')')) fail("expected ')' in call to '" + name + "'");
            if (static_cast<int>(node->args.size()) != it->second.arity)
                fail("function '" + name + "' expects " + std::to_string(it->second.arity) +
                     " argument(s)");
            return node;
        }
        auto node = std::make_shared<Node>();
        node->kind = NodeKind::Variable;
        node->name = name;
        return node;
    }

    const std::string& src_;
    std::size_t pos_ = 0;
};

inline void collect_vars(const NodePtr& n, std::vector<std::string>& out) {
    if (n->kind == NodeKind::Variable) {
        for (const auto& v : out)
            if (v == n->name) return;
        out.push_back(n->name);
        return;
    }
    for (const auto& a : n->args) collect_vars(a, out);
}

}  // namespace detail

inline Expression parse(const std::string& source) {
    detail::Parser p(source);
    Expression e;
    e.source = source;
    e.ast = p.parse();
    detail::collect_vars(e.ast, e.free_variables);
    return e;
}

inline std::string serialize(const NodePtr& n) {
    std::ostringstream os;
    switch (n->kind) {
        case NodeKind::Constant: {
            os.precision(17);
            os << n->value;
            break;
        }
        case NodeKind::Variable:
            os << n->name;
            break;
        case NodeKind::Unary:
            os << "(-" << serialize(n->args[0]) << ")";
            break;
        case NodeKind::Binary:
            if (n->op == '^') {
                os << "(" << serialize(n->args[0]) << ")^" << n->exponent;
            } else {
                os << "(" << serialize(n->args[0]) << n->op << serialize(n->args[1]) << ")";
            }
            break;
        case NodeKind::Call: {
            os << n->name << "(";
            for (std::size_t i = 0; i < n->args.size(); ++i) {
                if (i) os << ",";
                os << serialize(n->args[i]);
            }
            os << ")";
            break;
        }
    }
    return os.str();
}

inline bool ast_equal(const NodePtr& a, const NodePtr& b) {
    if (a->kind != b->kind || a->op != b->op || a->name != b->name ||
        a->exponent != b->exponent || a->args.size() != b->args.size())
        return false;
    if (a->kind == NodeKind::Constant && a->value != b->value) return false;
    for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!ast_equal(a->args[i], b->args[i])) return false;
    return true;
}

inline double evaluate(const NodePtr& n, const std::map<std::string, double>& bindings) {
    switch (n->kind) {
        case NodeKind::Constant:
            return n->value;
        case NodeKind::Variable: {
            auto it = bindings.find(n->name);
            if (it == bindings.end())
                throw EvaluationError("unbound variable '" + n->name + "'");
            return it->second;
        }
        case NodeKind::Unary:
            return -evaluate(n->args[0], bindings);
        case NodeKind::Binary: {
            double a = evaluate(n->args[0], bindings);
            switch (n->op) {
                case '+': return a + evaluate(n->args[1], bindings);
                case '-': return a - evaluate(n->args[1], bindings);
                case '*': return a * evaluate(n->args[1], bindings);
                case '/': return a / evaluate(n->args[1], bindings);
                case '^': {
                    return std::pow(a, n->exponent);
                }
            }
            throw EvaluationError("bad operator");
        }
        case NodeKind::Call: {
            double a = evaluate(n->args[0], bindings);
            if (n->name == "abs") return std::fabs(a);
            if (n->name == "exp") return std::exp(a);
            if (n->name == "log") {
                if (a <= 0.0) throw EvaluationError("log of nonpositive value " + std::to_string(a));
                return std::log(a);
            }
            if (n->name == "sqrt") {
                if (a < 0.0) throw EvaluationError("sqrt of negative value " + std::to_string(a));
                return std::sqrt(a);
            }
            if (n->name == "sin") return std::sin(a);
            if (n->name == "cos") return std::cos(a);
            if (n->name == "tanh") return std::tanh(a);
            double b = evaluate(n->args[1], bindings);
            if (n->name == "min") return std::min(a, b);
            if (n->name == "max") return std::max(a, b);
            throw EvaluationError("unknown function '" + n->name + "'");
        }
    }
    throw EvaluationError("bad node");
}

inline double evaluate(const Expression& e, const std::map<std::string, double>& bindings) {
    return evaluate(e.ast, bindings);
}

// Slot-compiled evaluator: variables resolved to indices once, so repeated
// evaluation inside simulation loops avoids map lookups.
class Compiled {
public:
    Compiled(const Expression& e, const std::vector<std::string>& slot_names,
             const std::map<std::string, double>& params = {})
        : ast_(e.ast) {
        for (const auto& v : e.free_variables) {
            bool found = false;
            for (std::size_t i = 0; i < slot_names.size(); ++i) {
                if (slot_names[i] == v) {
                    found = true;
                    break;
                }
            }
            if (!found && !params.count(v))
                throw ConfigError("expression variable '" + v + "' is neither a slot nor a parameter");
        }
        slots_ = slot_names;
        params_ = params;
    }

    double operator()(std::span<const double> slot_values) const {
        return eval(ast_, slot_values);
    }

private:
    double eval(const NodePtr& n, std::span<const double> sv) const {
        switch (n->kind) {
            case NodeKind::Constant:
                return n->value;
            case NodeKind::Variable: {
                for (std::size_t i = 0; i < slots_.size(); ++i)
                    if (slots_[i] == n->name) return sv[i];
                auto it = params_.find(n->name);
                if (it == params_.end())
                    throw EvaluationError("unbound variable '" + n->name + "'");
                return it->second;
            }
            case NodeKind::Unary:
                return -eval(n->args[0], sv);
            case NodeKind::Binary: {
                double a = eval(n->args[0], sv);
                switch (n->op) {
                    case '+': return a + eval(n->args[1], sv);
                    case '-': return a - eval(n->args[1], sv);
                    case '*': return a * eval(n->args[1], sv);
                    case '/': return a / eval(n->args[1], sv);
                    case '^': return std::pow(a, n->exponent);
                }
                throw EvaluationError("bad operator");
            }
            case NodeKind::Call: {
                double a = eval(n->args[0], sv);
                if (n->name == "abs") return std::fabs(a);
                if (n->name == "exp") return std::exp(a);
                if (n->name == "log") {
                    if (a <= 0.0) throw EvaluationError("log of nonpositive value");
                    return std::log(a);
                }
                if (n->name == "sqrt") {
                    if (a < 0.0) throw EvaluationError("sqrt of negative value");
                    return std::sqrt(a);
                }
                if (n->name == "sin") return std::sin(a);
                if (n->name == "cos") return std::cos(a);
                if (n->name == "tanh") return std::tanh(a);
                double b = eval(n->args[1], sv);
                if (n->name == "min") return std::min(a, b);
                return std::max(a, b);
            }
        }
        throw EvaluationError("bad node");
    }

    NodePtr ast_;
    std::vector<std::string> slots_;
    std::map<std::string, double> params_;
};

}  // namespace gharm::expr

#endif
