#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "tripost/expr.hpp"
#include "tripost/task.hpp"

namespace tripost {

inline constexpr std::string_view kFinalResponseLabel = "Final response";

// Dotted numeric path ("1", "3.2.1") or "Final response".
bool is_valid_label(std::string_view label);
// Path ordering; "Final response" sorts after every numbered label.
int compare_labels(std::string_view a, std::string_view b);

enum class StepKind {
    Decomposition,
    Calculation,
    LetterIndex,
    Ordering,
    Subsort,
    Combine,
    FinalEquation,
    FinalResponse
};

std::string_view to_string(StepKind kind);

struct Decomposition {
    std::string skeleton;                                   // "(A - B)"
    std::vector<std::pair<std::string, std::string>> defs;  // letter, expression text

    bool operator==(const Decomposition&) const = default;
};

// "Let's calculate A = e0 = e1 = ... = v." or the final equation.
struct EquationChain {
    std::string subject;  // letter, empty for the final equation
    std::vector<std::string> terms;

    bool operator==(const EquationChain&) const = default;
};

struct LetterEntry {
    std::string word;
    std::string letter;  // empty when the word is exhausted
    int index = 0;
    std::string text;    // verbatim `"word"="l" (n)`

    bool operator==(const LetterEntry&) const = default;
};

// Step (1) listing or a "Now sort this subpart" step.
struct LetterListing {
    std::vector<std::string> group;  // empty for the top-level listing
    int position = 0;                // 0-based letter position inspected
    std::vector<LetterEntry> entries;

    bool operator==(const LetterListing&) const = default;
};

struct OrderItem {
    int number = 0;
    std::vector<std::string> words;  // more than one word means a tie group
    std::string text;

    bool operator==(const OrderItem&) const = default;
};

struct Ordering {
    std::vector<OrderItem> items;
    std::string text;  // the listing after "We now have: "

    bool operator==(const Ordering&) const = default;
};

struct Combine {
    std::vector<std::string> words;
    std::string text;

    bool operator==(const Combine&) const = default;
};

struct FinalResponse {
    std::string answer;
    std::string segment;  // "the answer is ..."

    bool operator==(const FinalResponse&) const = default;
};

using StepPayload = std::variant<std::monostate, Decomposition, EquationChain, LetterListing,
                                 Ordering, Combine, FinalResponse>;

struct Step {
    std::string label;
    std::string raw_text;  // full line(s) including the "(label) " prefix
    StepKind kind = StepKind::Calculation;
    StepPayload payload;

    bool has_payload() const { return !std::holds_alternative<std::monostate>(payload); }
    // raw_text without the "(label) " prefix.
    std::string_view body() const;
    bool operator==(const Step&) const = default;
};

struct Attempt {
    std::string preamble;
    std::vector<Step> steps;
    std::optional<std::string> final_answer;

    std::string text() const;
    const Step* find(std::string_view label) const;
    std::optional<std::size_t> index_of(std::string_view label) const;
    // Label of the last numbered step, if any.
    std::optional<std::string> last_numbered_label() const;
    bool operator==(const Attempt&) const = default;
};

// Line-based step grammar. Lines before the first "(label)" form the
// preamble; lines without a label continue the current step. In strict
// mode every step must match its task grammar.
Attempt parse_attempt(TaskKind kind, std::string_view text, bool strict = false);

// Strips a trailing "[END]" sentinel and surrounding whitespace.
std::string strip_end_marker(std::string_view text);

struct ChainVerdict {
    bool valid = true;
    std::size_t link = 0;    // index of the first bad link: terms[link] = terms[link + 1]
    std::string segment;     // verbatim "lhs = rhs"
};

ChainVerdict evaluate_chain(const Step& step, const arith::Bindings& bindings = {});
// Link `link` of a chain step as written in raw_text ("lhs = rhs").
std::string chain_link_text(const Step& step, std::size_t link);
ChainVerdict evaluate_chain(const EquationChain& chain, const arith::Bindings& bindings = {},
                            std::size_t first_link = 0);

inline constexpr std::string_view kArithmeticPreamble =
    "Let's think step by step. Recall that the order of operations in mathematics is as "
    "follows: (1) Parentheses, (2) exponents, (3) multiplication and division (from left to "
    "right), (4) addition and multiplication (from left to right). So, remember to always "
    "compute the expressions inside parentheses or brackets first.";
inline constexpr std::string_view kWordSortPreamble = "Let's think step by step.";

std::string ordinal(int position);  // 0 -> "first"
int ordinal_position(std::string_view word);  // "second" -> 1, -1 if unknown

// ---------------------------------------------------------------------------
// Arithmetic rationales.

struct ArithmeticPlan {
    arith::Expr question;
    arith::Expr skeleton;                // letters in place of innermost groups
    std::vector<char> letters;
    std::vector<arith::Expr> definitions;
};

ArithmeticPlan plan_arithmetic(const arith::Expr& question);

// Defects the student simulator can inject. Sites are chosen against the
// gold layout; the generator carries the effect forward into later steps.
struct ArithmeticDefect {
    enum class Type {
        Calculation,      // wrong value at reduction `link` of `step`
        CopyDefinition,   // letter step starts from a corrupted copy of its definition
        CopyChain,        // parenthesization link drops an operand
        CopySubstitution, // final equation substitutes a wrong letter value
        Decomposition,    // wrong operator in the skeleton
        FinalInconsistent // final response disagrees with the last step
    };
    Type type = Type::Calculation;
    std::size_t step = 0;   // 0-based index into the numbered steps
    std::size_t link = 0;   // reduction index (Calculation) or operand/letter index
    int delta = 1;
};

Attempt render_arithmetic(const TaskInstance& inst,
                          const std::vector<ArithmeticDefect>& defects = {});
Attempt gold_rationale_arithmetic(const TaskInstance& inst);

// ---------------------------------------------------------------------------
// Word-sort rationales.

struct WordSortDefect {
    enum class Type {
        LetterIndex,      // (word, position) shown with a different letter/index
        SortOrder,        // adjacent items swapped in the ordering at `label`
        MissingItem,      // `word` dropped from the ordering at `label`
        Copy,             // `word` misspelled as `replacement` from `label` onward
        FinalInconsistent // two answer words swapped
    };
    Type type = Type::LetterIndex;
    std::string label;
    std::string word;
    int position = 0;
    std::string letter;
    int index = 0;
    std::size_t swap_at = 0;
    std::string replacement;
};

Attempt render_wordsort(const TaskInstance& inst, const std::vector<WordSortDefect>& defects = {});
Attempt gold_rationale_wordsort(const TaskInstance& inst);

int alphabet_index(char c);  // 'a' -> 1

// Gold rationale for either scriptable task.
Attempt gold_rationale(const TaskInstance& inst);

}  // namespace tripost
