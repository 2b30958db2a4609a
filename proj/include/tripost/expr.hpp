#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tripost/integer.hpp"

namespace tripost::arith {

// Expression tree as written: groups keep their flat operand lists so that
// "(4 - 0 * -1 * 8 + 6)" renders back unchanged. Precedence is applied only
// when evaluating or parenthesizing.
struct Expr {
    enum class Kind { Number, Var, Group };

    Kind kind = Kind::Number;
    Integer value = 0;
    char var = 0;
    std::vector<Expr> operands;
    std::vector<char> ops;  // operands.size() - 1 entries of '+', '-', '*'
    bool parens = true;     // false only for a bare top-level sequence

    static Expr number(Integer v);
    static Expr variable(char name);
    static Expr group(std::vector<Expr> operands, std::vector<char> ops);

    bool is_number() const { return kind == Kind::Number; }
    bool is_group() const { return kind == Kind::Group; }
    bool operator==(const Expr&) const = default;
};

using Bindings = std::map<char, Integer>;

Expr parse(std::string_view text);
std::optional<Expr> try_parse(std::string_view text);
std::string render(const Expr& e);

// Unbound variables yield nullopt.
std::optional<Integer> evaluate(const Expr& e, const Bindings& bindings = {});

// Fully binary form honoring precedence: * first, then +/- left to right.
Expr parenthesize(const Expr& e);

// Rewrites the leftmost group whose two operands are both numbers. When
// `forced` is set, that value is written instead of the true result.
std::optional<Expr> reduce_once(const Expr& e, std::optional<Integer> forced = std::nullopt);

// The group reduce_once would rewrite.
std::optional<Expr> next_redex(const Expr& e);

Expr substitute(const Expr& e, const Bindings& bindings);

// True when every operand is a Number (an innermost group).
bool is_leaf_group(const Expr& e);
int depth(const Expr& e);

// Numbers and variables in document order, rendered.
std::vector<std::string> leaves(const Expr& e);

// If `after` equals `before` with exactly one all-number group replaced by a
// number, returns that group.
std::optional<Expr> single_reduction_site(const Expr& before, const Expr& after);

}  // namespace tripost::arith
