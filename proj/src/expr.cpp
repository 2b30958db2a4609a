#include "tripost/expr.hpp"

#include <cctype>

#include "tripost/errors.hpp"

namespace tripost::arith {

Expr Expr::number(Integer v) {
    Expr e;
    e.kind = Kind::Number;
    e.value = v;
    return e;
}

Expr Expr::variable(char name) {
    Expr e;
    e.kind = Kind::Var;
    e.var = name;
    return e;
}

Expr Expr::group(std::vector<Expr> operands, std::vector<char> ops) {
    Expr e;
    e.kind = Kind::Group;
    e.operands = std::move(operands);
    e.ops = std::move(ops);
    return e;
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    Expr parse_all() {
        Expr e = sequence();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        if (e.is_group() && e.operands.size() == 1 && !e.parens) return e.operands.front();
        return e;
    }

private:
    Expr sequence() {
        std::vector<Expr> operands;
        std::vector<char> ops;
        operands.push_back(operand());
        while (true) {
            skip_space();
            if (pos_ >= text_.size() || text_[pos_] == ')') break;
            const char c = text_[pos_];
            if (c != '+' && c != '-' && c != '*') fail("expected operator");
            ++pos_;
            ops.push_back(c);
            operands.push_back(operand());
        }
        Expr g = Expr::group(std::move(operands), std::move(ops));
        g.parens = false;
        return g;
    }

    Expr operand() {
        skip_space();
        if (pos_ >= text_.size()) fail("expected operand");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            Expr inner = sequence();
            skip_space();
            if (pos_ >= text_.size() || text_[pos_] != ')') fail("missing ')'");
            ++pos_;
            inner.parens = true;
            return inner;
        }
        if (c >= 'A' && c <= 'Z') {
            ++pos_;
            return Expr::variable(c);
        }
        if (c == '-' || std::isdigit(static_cast<unsigned char>(c))) {
            const std::size_t start = pos_;
            if (c == '-') ++pos_;
            const std::size_t digits = pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
            if (pos_ == digits) fail("expected digits");
            auto v = parse_integer(text_.substr(start, pos_ - start));
            if (!v) fail("integer out of range");
            return Expr::number(*v);
        }
        fail("unexpected character");
    }

    void skip_space() {
        while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
    }

    [[noreturn]] void fail(const char* what) const {
        throw ParseError("expression \"" + std::string(text_) + "\": " + what + " at offset " +
                         std::to_string(pos_));
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void render_into(const Expr& e, std::string& out) {
    switch (e.kind) {
    case Expr::Kind::Number:
        out += to_string(e.value);
        return;
    case Expr::Kind::Var:
        out.push_back(e.var);
        return;
    case Expr::Kind::Group:
        if (e.parens) out.push_back('(');
        for (std::size_t i = 0; i < e.operands.size(); ++i) {
            if (i > 0) {
                out.push_back(' ');
                out.push_back(e.ops[i - 1]);
                out.push_back(' ');
            }
            render_into(e.operands[i], out);
        }
        if (e.parens) out.push_back(')');
        return;
    }
}

Integer apply(char op, Integer a, Integer b) {
    switch (op) {
    case '+': return a + b;
    case '-': return a - b;
    default: return a * b;
    }
}

Expr binary(Expr lhs, char op, Expr rhs) {
    std::vector<Expr> operands;
    operands.push_back(std::move(lhs));
    operands.push_back(std::move(rhs));
    return Expr::group(std::move(operands), {op});
}

bool all_numbers(const Expr& e) {
    for (const auto& o : e.operands) {
        if (!o.is_number()) return false;
    }
    return true;
}

void collect_leaves(const Expr& e, std::vector<std::string>& out) {
    if (e.is_group()) {
        for (const auto& o : e.operands) collect_leaves(o, out);
    } else {
        out.push_back(render(e));
    }
}

}  // namespace

Expr parse(std::string_view text) {
    return Parser(text).parse_all();
}

std::optional<Expr> try_parse(std::string_view text) {
    try {
        return parse(text);
    } catch (const ParseError&) {
        return std::nullopt;
    }
}

std::string render(const Expr& e) {
    std::string out;
    render_into(e, out);
    return out;
}

std::optional<Integer> evaluate(const Expr& e, const Bindings& bindings) {
    switch (e.kind) {
    case Expr::Kind::Number:
        return e.value;
    case Expr::Kind::Var: {
        auto it = bindings.find(e.var);
        if (it == bindings.end()) return std::nullopt;
        return it->second;
    }
    case Expr::Kind::Group:
        break;
    }
    if (e.operands.empty()) return std::nullopt;
    auto first = evaluate(e.operands[0], bindings);
    if (!first) return std::nullopt;
    Integer total = 0;
    char sign = '+';
    Integer term = *first;
    for (std::size_t i = 0; i < e.ops.size(); ++i) {
        auto v = evaluate(e.operands[i + 1], bindings);
        if (!v) return std::nullopt;
        if (e.ops[i] == '*') {
            term *= *v;
        } else {
            total = apply(sign, total, term);
            sign = e.ops[i];
            term = *v;
        }
    }
    return apply(sign, total, term);
}

Expr parenthesize(const Expr& e) {
    if (!e.is_group()) return e;
    std::vector<Expr> children;
    children.reserve(e.operands.size());
    for (const auto& o : e.operands) children.push_back(parenthesize(o));
    if (children.size() <= 2) {
        Expr g = Expr::group(std::move(children), e.ops);
        g.parens = e.parens;
        return g;
    }
    // Multiplication runs first, left-nested.
    std::vector<Expr> terms;
    std::vector<char> additive;
    terms.push_back(std::move(children[0]));
    for (std::size_t i = 0; i < e.ops.size(); ++i) {
        if (e.ops[i] == '*') {
            Expr lhs = std::move(terms.back());
            terms.back() = binary(std::move(lhs), '*', std::move(children[i + 1]));
        } else {
            additive.push_back(e.ops[i]);
            terms.push_back(std::move(children[i + 1]));
        }
    }
    Expr acc = std::move(terms[0]);
    for (std::size_t i = 0; i < additive.size(); ++i) {
        acc = binary(std::move(acc), additive[i], std::move(terms[i + 1]));
    }
    if (acc.is_group()) acc.parens = e.parens;
    return acc;
}

std::optional<Expr> next_redex(const Expr& e) {
    if (!e.is_group()) return std::nullopt;
    if (e.operands.size() <= 2 && all_numbers(e)) return e;
    for (const auto& o : e.operands) {
        if (auto r = next_redex(o)) return r;
    }
    return std::nullopt;
}

std::optional<Expr> reduce_once(const Expr& e, std::optional<Integer> forced) {
    if (!e.is_group()) return std::nullopt;
    if (e.operands.size() <= 2 && all_numbers(e)) {
        return Expr::number(forced ? *forced : *evaluate(e));
    }
    for (std::size_t i = 0; i < e.operands.size(); ++i) {
        if (auto r = reduce_once(e.operands[i], forced)) {
            Expr copy = e;
            copy.operands[i] = std::move(*r);
            return copy;
        }
    }
    return std::nullopt;
}

Expr substitute(const Expr& e, const Bindings& bindings) {
    if (e.kind == Expr::Kind::Var) {
        auto it = bindings.find(e.var);
        return it == bindings.end() ? e : Expr::number(it->second);
    }
    if (!e.is_group()) return e;
    Expr copy = e;
    for (auto& o : copy.operands) o = substitute(o, bindings);
    return copy;
}

bool is_leaf_group(const Expr& e) {
    return e.is_group() && !e.operands.empty() && all_numbers(e);
}

int depth(const Expr& e) {
    if (!e.is_group()) return 0;
    int d = 0;
    for (const auto& o : e.operands) d = std::max(d, depth(o));
    return d + 1;
}

std::vector<std::string> leaves(const Expr& e) {
    std::vector<std::string> out;
    collect_leaves(e, out);
    return out;
}

std::optional<Expr> single_reduction_site(const Expr& before, const Expr& after) {
    if (is_leaf_group(before) && after.is_number()) return before;
    if (!before.is_group() || !after.is_group()) return std::nullopt;
    if (before.operands.size() != after.operands.size() || before.ops != after.ops) {
        return std::nullopt;
    }
    std::optional<std::size_t> differing;
    for (std::size_t i = 0; i < before.operands.size(); ++i) {
        if (!(before.operands[i] == after.operands[i])) {
            if (differing) return std::nullopt;
            differing = i;
        }
    }
    if (!differing) return std::nullopt;
    return single_reduction_site(before.operands[*differing], after.operands[*differing]);
}

}  // namespace tripost::arith
