#include "tripost/rationale.hpp"

#include <algorithm>
#include <charconv>
#include <climits>
#include <map>
#include <sstream>

#include "tripost/errors.hpp"

namespace tripost {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r' || s.front() == '\n')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n')) {
        s.remove_suffix(1);
    }
    return s;
}

std::string_view strip_period(std::string_view s) {
    s = trim(s);
    if (s.ends_with('.')) s.remove_suffix(1);
    return trim(s);
}

std::vector<int> label_path(std::string_view label) {
    if (label == kFinalResponseLabel) return {INT_MAX};
    std::vector<int> path;
    std::size_t start = 0;
    while (start <= label.size()) {
        const std::size_t dot = label.find('.', start);
        const std::string_view part =
            label.substr(start, dot == std::string_view::npos ? std::string_view::npos : dot - start);
        int v = 0;
        std::from_chars(part.data(), part.data() + part.size(), v);
        path.push_back(v);
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    return path;
}

std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string dq(std::string_view w) {
    return "\"" + std::string(w) + "\"";
}

template <typename T, typename F>
std::string join_map(const std::vector<T>& items, std::string_view sep, F f) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) out += sep;
        out += f(items[i]);
    }
    return out;
}

std::string join_words(const std::vector<std::string>& words, std::string_view sep) {
    return join_map(words, sep, [](const std::string& w) { return w; });
}

// ---------------------------------------------------------------------------
// Step payload grammars.

std::optional<Decomposition> parse_decomposition(std::string_view body) {
    constexpr std::string_view prefix = "This equation can be written as \"";
    if (!body.starts_with(prefix)) return std::nullopt;
    body.remove_prefix(prefix.size());
    const auto close = body.find("\", where ");
    if (close == std::string_view::npos) return std::nullopt;
    Decomposition d;
    d.skeleton = std::string(body.substr(0, close));
    std::string_view rest = strip_period(body.substr(close + 9));
    // Letter definitions start at "X = " preceded by the start, ", " or " and ".
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i + 3 < rest.size(); ++i) {
        if (rest[i] < 'A' || rest[i] > 'Z' || rest.substr(i + 1, 3) != " = ") continue;
        if (i == 0 || (i >= 2 && rest.substr(i - 2, 2) == ", ") ||
            (i >= 5 && rest.substr(i - 5, 5) == " and ")) {
            starts.push_back(i);
        }
    }
    if (starts.empty() || starts.front() != 0) return std::nullopt;
    for (std::size_t k = 0; k < starts.size(); ++k) {
        std::size_t end = rest.size();
        if (k + 1 < starts.size()) {
            end = starts[k + 1];
            if (rest.substr(0, end).ends_with(" and ")) {
                end -= 5;
            } else {
                end -= 2;
            }
        }
        const std::size_t s = starts[k];
        d.defs.emplace_back(std::string(1, rest[s]), std::string(trim(rest.substr(s + 4, end - s - 4))));
    }
    return d;
}

std::optional<EquationChain> parse_chain(std::string_view text, bool with_subject) {
    std::vector<std::string> pieces;
    std::size_t start = 0;
    text = strip_period(text);
    while (true) {
        const auto eq = text.find('=', start);
        const auto piece = trim(text.substr(start, eq == std::string_view::npos ? std::string_view::npos : eq - start));
        if (piece.empty()) return std::nullopt;
        pieces.emplace_back(piece);
        if (eq == std::string_view::npos) break;
        start = eq + 1;
    }
    EquationChain chain;
    if (with_subject) {
        if (pieces.size() < 2 || pieces[0].size() != 1 || pieces[0][0] < 'A' || pieces[0][0] > 'Z') {
            return std::nullopt;
        }
        chain.subject = pieces[0];
        pieces.erase(pieces.begin());
    }
    chain.terms = std::move(pieces);
    return chain;
}

std::optional<FinalResponse> parse_final_response(std::string_view body) {
    constexpr std::string_view marker = "the answer is";
    auto at = body.find("So the answer is");
    if (at != std::string_view::npos) {
        at += 3;
    } else {
        at = body.find(marker);
        if (at == std::string_view::npos) return std::nullopt;
    }
    std::string_view rest = body.substr(at + marker.size());
    std::string_view answer = rest;
    if (answer.starts_with(':')) answer.remove_prefix(1);
    answer = trim(answer);
    if (answer.ends_with("[END]")) answer = trim(answer.substr(0, answer.size() - 5));
    if (answer.ends_with('.')) answer.remove_suffix(1);
    answer = trim(answer);
    if (answer.empty()) return std::nullopt;
    FinalResponse fr;
    fr.answer = std::string(answer);
    const std::size_t seg_end = static_cast<std::size_t>(answer.data() + answer.size() - body.data());
    fr.segment = std::string(body.substr(at, seg_end - at));
    return fr;
}

// `"word"="l" (n)` entries separated by ", ".
std::optional<std::vector<LetterEntry>> parse_entries(std::string_view text) {
    std::vector<LetterEntry> entries;
    std::size_t i = 0;
    auto expect = [&](char c) {
        if (i < text.size() && text[i] == c) {
            ++i;
            return true;
        }
        return false;
    };
    auto read_quoted = [&](std::string& out) {
        if (!expect('"')) return false;
        const auto close = text.find('"', i);
        if (close == std::string_view::npos) return false;
        out = std::string(text.substr(i, close - i));
        i = close + 1;
        return true;
    };
    while (i < text.size()) {
        LetterEntry e;
        const std::size_t start = i;
        if (!read_quoted(e.word) || !expect('=') || !read_quoted(e.letter)) return std::nullopt;
        if (text.substr(i, 2) == " (") {
            const auto close = text.find(')', i);
            if (close == std::string_view::npos) return std::nullopt;
            auto v = parse_int(text.substr(i + 2, close - i - 2));
            if (!v) return std::nullopt;
            e.index = *v;
            i = close + 1;
        } else {
            e.index = -1;
        }
        e.text = std::string(text.substr(start, i - start));
        entries.push_back(std::move(e));
        if (i == text.size()) break;
        if (text.substr(i, 2) != ", ") return std::nullopt;
        i += 2;
    }
    if (entries.empty()) return std::nullopt;
    return entries;
}

std::optional<std::vector<std::string>> parse_quoted_list(std::string_view text, std::string_view sep) {
    std::vector<std::string> words;
    std::size_t start = 0;
    while (true) {
        const auto at = text.find(sep, start);
        auto w = trim(text.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        if (w.size() < 2 || w.front() != '"' || w.back() != '"') return std::nullopt;
        words.emplace_back(w.substr(1, w.size() - 2));
        if (at == std::string_view::npos) break;
        start = at + sep.size();
    }
    return words;
}

std::optional<LetterListing> parse_listing(std::string_view body) {
    constexpr std::string_view top = "The first letter: ";
    constexpr std::string_view sub = "Now sort this subpart [";
    LetterListing listing;
    std::string_view entries;
    if (body.starts_with(top)) {
        entries = body.substr(top.size());
    } else if (body.starts_with(sub)) {
        body.remove_prefix(sub.size());
        const auto close = body.find("] by looking at their ");
        if (close == std::string_view::npos) return std::nullopt;
        auto group = parse_quoted_list(body.substr(0, close), " ? ");
        if (!group) return std::nullopt;
        listing.group = std::move(*group);
        body.remove_prefix(close + 22);
        const auto sp = body.find(" letters:");
        if (sp == std::string_view::npos) return std::nullopt;
        listing.position = ordinal_position(body.substr(0, sp));
        if (listing.position < 0) return std::nullopt;
        entries = body.substr(sp + 9);
    } else {
        return std::nullopt;
    }
    auto parsed = parse_entries(strip_period(entries));
    if (!parsed) return std::nullopt;
    listing.entries = std::move(*parsed);
    return listing;
}

std::optional<Ordering> parse_ordering(std::string_view body) {
    constexpr std::string_view prefix = "We now have: ";
    if (!body.starts_with(prefix)) return std::nullopt;
    Ordering ord;
    const std::string_view text = strip_period(body.substr(prefix.size()));
    ord.text = std::string(text);
    std::size_t start = 0;
    while (true) {
        const auto at = text.find(" < ", start);
        const std::string_view item_text =
            trim(text.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start));
        OrderItem item;
        item.text = std::string(item_text);
        if (!item_text.starts_with('(')) return std::nullopt;
        const auto close = item_text.find(") ");
        if (close == std::string_view::npos) return std::nullopt;
        auto n = parse_int(item_text.substr(1, close - 1));
        if (!n) return std::nullopt;
        item.number = *n;
        std::string_view words = trim(item_text.substr(close + 2));
        if (words.starts_with('[') && words.ends_with(']')) words = words.substr(1, words.size() - 2);
        auto list = parse_quoted_list(words, " ? ");
        if (!list) return std::nullopt;
        item.words = std::move(*list);
        ord.items.push_back(std::move(item));
        if (at == std::string_view::npos) break;
        start = at + 3;
    }
    return ord;
}

std::optional<Combine> parse_combine(std::string_view body) {
    constexpr std::string_view prefix = "Hence, we have ";
    if (!body.starts_with(prefix)) return std::nullopt;
    Combine c;
    c.text = std::string(strip_period(body.substr(prefix.size())));
    auto words = parse_quoted_list(c.text, " < ");
    if (!words) return std::nullopt;
    c.words = std::move(*words);
    return c;
}

void parse_payload(TaskKind kind, Step& step) {
    const std::string body_text = [&] {
        std::string b(step.body());
        if (kind == TaskKind::MultistepArithmetic) std::replace(b.begin(), b.end(), '\n', ' ');
        return b;
    }();
    const std::string_view body = body_text;
    if (step.label == kFinalResponseLabel) {
        step.kind = StepKind::FinalResponse;
        if (auto fr = parse_final_response(body)) step.payload = std::move(*fr);
        return;
    }
    step.kind = StepKind::Calculation;
    if (kind == TaskKind::MultistepArithmetic) {
        if (auto d = parse_decomposition(body)) {
            step.kind = StepKind::Decomposition;
            step.payload = std::move(*d);
            return;
        }
        constexpr std::string_view calc = "Let's calculate ";
        if (body.starts_with(calc)) {
            if (auto c = parse_chain(body.substr(calc.size()), true)) step.payload = std::move(*c);
            return;
        }
        for (std::string_view fin : {"Then, the final equation is ", "Then, the final eq is "}) {
            if (body.starts_with(fin)) {
                step.kind = StepKind::FinalEquation;
                if (auto c = parse_chain(body.substr(fin.size()), false)) step.payload = std::move(*c);
                return;
            }
        }
        return;
    }
    if (kind == TaskKind::WordSorting) {
        if (auto l = parse_listing(body)) {
            step.kind = l->group.empty() ? StepKind::LetterIndex : StepKind::Subsort;
            step.payload = std::move(*l);
        } else if (auto o = parse_ordering(body)) {
            step.kind = StepKind::Ordering;
            step.payload = std::move(*o);
        } else if (auto c = parse_combine(body)) {
            step.kind = StepKind::Combine;
            step.payload = std::move(*c);
        }
    }
}

std::optional<std::string> leading_label(std::string_view line) {
    if (!line.starts_with('(')) return std::nullopt;
    const auto close = line.find(')');
    if (close == std::string_view::npos) return std::nullopt;
    std::string label(line.substr(1, close - 1));
    if (!is_valid_label(label)) return std::nullopt;
    if (close + 1 < line.size() && line[close + 1] != ' ') return std::nullopt;
    return label;
}

}  // namespace

bool is_valid_label(std::string_view label) {
    if (label == kFinalResponseLabel) return true;
    if (label.empty() || label.front() == '.' || label.back() == '.') return false;
    bool prev_dot = false;
    for (char c : label) {
        if (c == '.') {
            if (prev_dot) return false;
            prev_dot = true;
        } else if (c >= '0' && c <= '9') {
            prev_dot = false;
        } else {
            return false;
        }
    }
    return true;
}

int compare_labels(std::string_view a, std::string_view b) {
    const auto pa = label_path(a);
    const auto pb = label_path(b);
    if (pa < pb) return -1;
    if (pb < pa) return 1;
    return 0;
}

std::string_view to_string(StepKind kind) {
    switch (kind) {
    case StepKind::Decomposition: return "decomposition";
    case StepKind::Calculation: return "calculation";
    case StepKind::LetterIndex: return "letter_index";
    case StepKind::Ordering: return "ordering";
    case StepKind::Subsort: return "subsort";
    case StepKind::Combine: return "combine";
    case StepKind::FinalEquation: return "final_equation";
    case StepKind::FinalResponse: return "final_response";
    }
    return "calculation";
}

std::string_view Step::body() const {
    std::string_view raw = raw_text;
    const std::size_t prefix = label.size() + 2;
    if (raw.size() <= prefix) return {};
    raw.remove_prefix(prefix);
    if (raw.starts_with(' ')) raw.remove_prefix(1);
    return raw;
}

std::string Attempt::text() const {
    std::string out = preamble;
    for (const auto& s : steps) {
        if (!out.empty()) out.push_back('\n');
        out += s.raw_text;
    }
    return out;
}

const Step* Attempt::find(std::string_view label) const {
    for (const auto& s : steps) {
        if (s.label == label) return &s;
    }
    return nullptr;
}

std::optional<std::size_t> Attempt::index_of(std::string_view label) const {
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].label == label) return i;
    }
    return std::nullopt;
}

std::optional<std::string> Attempt::last_numbered_label() const {
    for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
        if (it->label != kFinalResponseLabel) return it->label;
    }
    return std::nullopt;
}

std::string strip_end_marker(std::string_view text) {
    text = trim(text);
    if (text.ends_with("[END]")) text = trim(text.substr(0, text.size() - 5));
    return std::string(text);
}

Attempt parse_attempt(TaskKind kind, std::string_view text, bool strict) {
    const std::string cleaned = strip_end_marker(text);
    std::string_view body = cleaned;
    for (std::string_view cue : {"Updated Answer:", "Answer:"}) {
        if (body.starts_with(cue)) {
            body = trim(body.substr(cue.size()));
            break;
        }
    }
    Attempt attempt;
    std::vector<std::string> preamble_lines;
    std::size_t start = 0;
    while (start <= body.size()) {
        const auto nl = body.find('\n', start);
        std::string_view line =
            body.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (line.ends_with('\r')) line.remove_suffix(1);
        if (auto label = leading_label(line)) {
            Step step;
            step.label = *label;
            step.raw_text = std::string(line);
            attempt.steps.push_back(std::move(step));
        } else if (attempt.steps.empty()) {
            if (!trim(line).empty()) preamble_lines.emplace_back(line);
        } else {
            attempt.steps.back().raw_text += "\n";
            attempt.steps.back().raw_text += line;
        }
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    if (attempt.steps.empty()) throw ParseError("no labelled steps in attempt");
    for (std::size_t i = 0; i < preamble_lines.size(); ++i) {
        if (i > 0) attempt.preamble += "\n";
        attempt.preamble += preamble_lines[i];
    }
    for (auto& step : attempt.steps) {
        while (!step.raw_text.empty() && (step.raw_text.back() == '\n' || step.raw_text.back() == ' ')) {
            step.raw_text.pop_back();
        }
        parse_payload(kind, step);
    }
    const Step& last = attempt.steps.back();
    if (const auto* fr = std::get_if<FinalResponse>(&last.payload)) attempt.final_answer = fr->answer;

    if (strict) {
        for (std::size_t i = 0; i < attempt.steps.size(); ++i) {
            const Step& s = attempt.steps[i];
            if (!s.has_payload()) throw ParseError("step (" + s.label + ") does not match the step grammar");
            if (i > 0 && compare_labels(attempt.steps[i - 1].label, s.label) >= 0) {
                throw ParseError("step (" + s.label + ") is out of order");
            }
            if (s.label == kFinalResponseLabel && i + 1 != attempt.steps.size()) {
                throw ParseError("final response is not the last step");
            }
            if (const auto* c = std::get_if<EquationChain>(&s.payload)) {
                for (const auto& t : c->terms) {
                    if (!arith::try_parse(t)) throw ParseError("unparsable term \"" + t + "\" in step (" + s.label + ")");
                }
            }
        }
        if (!attempt.final_answer) throw ParseError("attempt has no final response");
    }
    return attempt;
}

namespace {

// A link can keep its value while a product with zero hides a slip, so every
// all-number group rewritten into a number must carry its own true value.
bool rewrites_hold(const arith::Expr& lhs, const arith::Expr& rhs) {
    if (lhs == rhs) return true;
    if (lhs.is_group() && rhs.is_number() && arith::is_leaf_group(lhs)) {
        const auto v = arith::evaluate(lhs);
        return v && *v == rhs.value;
    }
    if (lhs.is_group() && rhs.is_group() && lhs.ops == rhs.ops && lhs.operands.size() == rhs.operands.size()) {
        for (std::size_t i = 0; i < lhs.operands.size(); ++i) {
            if (!rewrites_hold(lhs.operands[i], rhs.operands[i])) return false;
        }
    }
    return true;
}

}  // namespace

ChainVerdict evaluate_chain(const EquationChain& chain, const arith::Bindings& bindings,
                            std::size_t first_link) {
    ChainVerdict v;
    for (std::size_t i = first_link; i + 1 < chain.terms.size(); ++i) {
        const auto lhs = arith::try_parse(chain.terms[i]);
        const auto rhs = arith::try_parse(chain.terms[i + 1]);
        std::optional<Integer> a, b;
        if (lhs) a = arith::evaluate(*lhs, bindings);
        if (rhs) b = arith::evaluate(*rhs, bindings);
        if (!a || !b || *a != *b || !rewrites_hold(*lhs, *rhs)) {
            v.valid = false;
            v.link = i;
            v.segment = chain.terms[i] + " = " + chain.terms[i + 1];
            return v;
        }
    }
    return v;
}

ChainVerdict evaluate_chain(const Step& step, const arith::Bindings& bindings) {
    const auto* chain = std::get_if<EquationChain>(&step.payload);
    if (!chain) {
        ChainVerdict v;
        v.valid = false;
        v.segment = std::string(step.body());
        return v;
    }
    ChainVerdict v = evaluate_chain(*chain, bindings);
    if (!v.valid) v.segment = chain_link_text(step, v.link);
    return v;
}

std::string chain_link_text(const Step& step, std::size_t link) {
    const auto* chain = std::get_if<EquationChain>(&step.payload);
    if (!chain || link + 1 >= chain->terms.size()) return std::string(step.body());
    const std::string joined = chain->terms[link] + " = " + chain->terms[link + 1];
    // Walk the terms in order so repeated sub-expressions resolve to the right link.
    const std::string_view raw = step.raw_text;
    std::size_t cursor = step.label.size() + 2;
    if (!chain->subject.empty()) cursor = raw.find('=', cursor);
    std::size_t lhs_at = std::string_view::npos;
    for (std::size_t i = 0; i <= link + 1; ++i) {
        if (cursor == std::string_view::npos) return joined;
        const auto at = raw.find(chain->terms[i], cursor);
        if (at == std::string_view::npos) return joined;
        if (i == link) lhs_at = at;
        cursor = at + chain->terms[i].size();
    }
    return std::string(raw.substr(lhs_at, cursor - lhs_at));
}

std::string ordinal(int position) {
    static constexpr std::string_view names[] = {
        "first",      "second",     "third",       "fourth",     "fifth",
        "sixth",      "seventh",    "eighth",      "ninth",      "tenth",
        "eleventh",   "twelfth",    "thirteenth",  "fourteenth", "fifteenth",
        "sixteenth",  "seventeenth", "eighteenth", "nineteenth", "twentieth",
        "twenty-first", "twenty-second", "twenty-third", "twenty-fourth", "twenty-fifth",
        "twenty-sixth", "twenty-seventh", "twenty-eighth", "twenty-ninth", "thirtieth"};
    if (position >= 0 && position < static_cast<int>(std::size(names))) return std::string(names[position]);
    const int n = position + 1;
    const char* suffix = (n % 100 >= 11 && n % 100 <= 13) ? "th"
                         : n % 10 == 1                    ? "st"
                         : n % 10 == 2                    ? "nd"
                         : n % 10 == 3                    ? "rd"
                                                          : "th";
    return std::to_string(n) + suffix;
}

int ordinal_position(std::string_view word) {
    for (int i = 0; i < 64; ++i) {
        if (ordinal(i) == word) return i;
    }
    return -1;
}

int alphabet_index(char c) {
    return c >= 'a' && c <= 'z' ? c - 'a' + 1 : 0;
}

// ---------------------------------------------------------------------------
// Arithmetic.

namespace {

void replace_leaf_groups(arith::Expr& e, ArithmeticPlan& plan) {
    if (!e.is_group()) return;
    if (arith::is_leaf_group(e)) {
        const char letter = static_cast<char>('A' + plan.letters.size());
        plan.letters.push_back(letter);
        plan.definitions.push_back(e);
        e = arith::Expr::variable(letter);
        return;
    }
    for (auto& o : e.operands) replace_leaf_groups(o, plan);
}

int count_groups(const arith::Expr& e) {
    if (!e.is_group()) return 0;
    int n = 1;
    for (const auto& o : e.operands) n += count_groups(o);
    return n;
}

// Pre-order list of pointers to group operator slots.
void collect_ops(arith::Expr& e, std::vector<char*>& out) {
    if (!e.is_group()) return;
    for (std::size_t i = 0; i < e.operands.size(); ++i) {
        collect_ops(e.operands[i], out);
        if (i < e.ops.size()) out.push_back(&e.ops[i]);
    }
}

struct ChainBuilder {
    std::vector<std::string> terms;
    arith::Expr cur;

    // One reduction per link; `bad_link`/`delta` inject a wrong value.
    void reduce_all(std::optional<std::size_t> bad_link, int delta) {
        const int total = count_groups(cur);
        std::size_t r = 0;
        if (bad_link && total > 0) bad_link = std::min<std::size_t>(*bad_link, static_cast<std::size_t>(total - 1));
        while (!cur.is_number()) {
            std::optional<Integer> forced;
            if (bad_link && *bad_link == r) {
                auto redex = arith::next_redex(cur);
                if (redex) forced = *arith::evaluate(*redex) + delta;
            }
            auto next = arith::reduce_once(cur, forced);
            if (!next) break;
            cur = std::move(*next);
            terms.push_back(arith::render(cur));
            ++r;
        }
    }
};

const ArithmeticDefect* find_defect(const std::vector<ArithmeticDefect>& defects,
                                    ArithmeticDefect::Type type, std::size_t step) {
    for (const auto& d : defects) {
        if (d.type == type && (type == ArithmeticDefect::Type::FinalInconsistent || d.step == step)) return &d;
    }
    return nullptr;
}

std::string definitions_text(const std::vector<char>& letters, const std::vector<std::string>& defs) {
    std::string out;
    for (std::size_t i = 0; i < letters.size(); ++i) {
        if (i > 0) out += (i + 1 == letters.size()) ? " and " : ", ";
        out += std::string(1, letters[i]) + " = " + defs[i];
    }
    return out;
}

}  // namespace

ArithmeticPlan plan_arithmetic(const arith::Expr& question) {
    ArithmeticPlan plan;
    plan.question = question;
    plan.skeleton = question;
    replace_leaf_groups(plan.skeleton, plan);
    return plan;
}

Attempt render_arithmetic(const TaskInstance& inst, const std::vector<ArithmeticDefect>& defects) {
    using Type = ArithmeticDefect::Type;
    if (inst.kind != TaskKind::MultistepArithmetic) {
        throw KindError("arithmetic rationale requested for " + std::string(to_string(inst.kind)));
    }
    const arith::Expr question = arith::parse(arithmetic_expression_of(inst.question));
    const ArithmeticPlan plan = plan_arithmetic(question);
    const std::size_t n = plan.letters.size();

    std::vector<std::string> lines;
    lines.emplace_back(kArithmeticPreamble);

    arith::Expr skeleton = plan.skeleton;
    if (const auto* d = find_defect(defects, Type::Decomposition, 0)) {
        std::vector<char*> ops;
        collect_ops(skeleton, ops);
        if (!ops.empty()) {
            static constexpr char cycle[] = {'+', '-', '*'};
            char& op = *ops[d->link % ops.size()];
            const int at = op == '+' ? 0 : op == '-' ? 1 : 2;
            const int shift = d->delta % 3 == 0 ? 1 : ((d->delta % 3) + 3) % 3;
            op = cycle[(at + shift) % 3];
        }
    }
    std::vector<std::string> def_texts;
    for (const auto& def : plan.definitions) def_texts.push_back(arith::render(def));
    lines.push_back("(1) This equation can be written as \"" + arith::render(skeleton) + "\", where " +
                    definitions_text(plan.letters, def_texts) + ".");

    arith::Bindings values;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t step = i + 1;
        ChainBuilder chain;
        arith::Expr start = plan.definitions[i];
        if (const auto* d = find_defect(defects, Type::CopyDefinition, step)) {
            auto& operand = start.operands[d->link % start.operands.size()];
            operand.value += d->delta;
        }
        chain.cur = start;
        chain.terms.push_back(arith::render(start));
        arith::Expr grouped = arith::parenthesize(start);
        if (const auto* d = find_defect(defects, Type::CopyChain, step); d && start.operands.size() > 2) {
            arith::Expr dropped = start;
            const std::size_t k = 1 + d->link % (dropped.operands.size() - 1);
            dropped.operands.erase(dropped.operands.begin() + static_cast<std::ptrdiff_t>(k));
            dropped.ops.erase(dropped.ops.begin() + static_cast<std::ptrdiff_t>(k - 1));
            grouped = arith::parenthesize(dropped);
        }
        if (!(grouped == start)) {
            chain.cur = grouped;
            chain.terms.push_back(arith::render(grouped));
        }
        const auto* calc = find_defect(defects, Type::Calculation, step);
        chain.reduce_all(calc ? std::optional<std::size_t>(calc->link) : std::nullopt, calc ? calc->delta : 0);
        values[plan.letters[i]] = chain.cur.is_number() ? chain.cur.value : Integer{0};
        lines.push_back("(" + std::to_string(step + 1) + ") Let's calculate " + std::string(1, plan.letters[i]) +
                        " = " + join_words(chain.terms, " = ") + ".");
    }

    const std::size_t final_step = n + 1;
    ChainBuilder chain;
    chain.terms.push_back(arith::render(skeleton));
    arith::Bindings shown = values;
    if (const auto* d = find_defect(defects, Type::CopySubstitution, final_step); d && n > 0) {
        shown[plan.letters[d->link % n]] += d->delta;
    }
    chain.cur = arith::substitute(skeleton, shown);
    if (!(chain.cur == skeleton)) chain.terms.push_back(arith::render(chain.cur));
    const auto* calc = find_defect(defects, Type::Calculation, final_step);
    chain.reduce_all(calc ? std::optional<std::size_t>(calc->link) : std::nullopt, calc ? calc->delta : 0);
    Integer result = chain.cur.is_number() ? chain.cur.value : Integer{0};
    if (n > 0) {
        lines.push_back("(" + std::to_string(final_step + 1) + ") Then, the final equation is " +
                        join_words(chain.terms, " = ") + ".");
    }
    if (const auto* d = find_defect(defects, Type::FinalInconsistent, 0)) result += d->delta;
    lines.push_back("(Final response) So the answer is " + to_string(result) + ".");

    std::string text;
    for (const auto& l : lines) {
        if (!text.empty()) text.push_back('\n');
        text += l;
    }
    return parse_attempt(TaskKind::MultistepArithmetic, text, true);
}

Attempt gold_rationale_arithmetic(const TaskInstance& inst) {
    return render_arithmetic(inst, {});
}

// ---------------------------------------------------------------------------
// Word sorting.

namespace {

class WordSortRenderer {
public:
    WordSortRenderer(const std::vector<WordSortDefect>& defects) : defects_(defects) {}

    std::string run(const std::vector<std::string>& words) {
        lines_.emplace_back(kWordSortPreamble);
        activate("1");
        auto entries = listing(words, 0, "1");
        lines_.push_back("(1) The first letter: " + entries_text(entries) + ".");
        activate("2");
        auto items = ordering(entries, "2");
        lines_.push_back("(2) We now have: " + items_text(items) + ".");
        int next = 3;
        bool ties = false;
        std::vector<std::string> resolved;
        for (const auto& item : items) {
            if (item.size() > 1 && !all_exhausted(item, 1)) {
                ties = true;
                auto sub = subsort(item, 1, std::to_string(next++));
                resolved.insert(resolved.end(), sub.begin(), sub.end());
            } else {
                resolved.insert(resolved.end(), item.begin(), item.end());
            }
        }
        if (ties) {
            const std::string label = std::to_string(next);
            activate(label);
            lines_.push_back("(" + label + ") Hence, we have " + combine_text(resolved) + ".");
        }
        for (const auto& d : defects_) {
            if (d.type == WordSortDefect::Type::FinalInconsistent && resolved.size() > 1) {
                const std::size_t at = d.swap_at % (resolved.size() - 1);
                std::swap(resolved[at], resolved[at + 1]);
            }
        }
        std::vector<std::string> shown;
        for (const auto& w : resolved) shown.push_back(display(w));
        lines_.push_back("(Final response) So the answer is: " + join_words(shown, " ") + ".");
        std::string text;
        for (const auto& l : lines_) {
            if (!text.empty()) text.push_back('\n');
            text += l;
        }
        return text;
    }

private:
    struct Entry {
        std::string word;  // identity used for bookkeeping
        std::string letter;
        int index = 0;
    };
    using Item = std::vector<std::string>;

    std::vector<std::string> subsort(const Item& group, int pos, const std::string& label) {
        activate(label);
        std::vector<std::string> shown;
        for (const auto& w : group) shown.push_back(dq(display(w)));
        auto entries = listing(group, pos, label);
        lines_.push_back("(" + label + ") Now sort this subpart [" + join_words(shown, " ? ") +
                         "] by looking at their " + ordinal(pos) + " letters:\n" + entries_text(entries) + ".");
        const std::string order_label = label + ".1";
        activate(order_label);
        auto items = ordering(entries, order_label);
        lines_.push_back("(" + order_label + ") We now have: " + items_text(items) + ".");
        int next = 2;
        std::vector<std::string> resolved;
        for (const auto& item : items) {
            if (item.size() > 1 && !all_exhausted(item, pos + 1)) {
                auto sub = subsort(item, pos + 1, label + "." + std::to_string(next++));
                resolved.insert(resolved.end(), sub.begin(), sub.end());
            } else {
                resolved.insert(resolved.end(), item.begin(), item.end());
            }
        }
        const std::string hence = label + "." + std::to_string(next);
        activate(hence);
        lines_.push_back("(" + hence + ") Hence, we have " + combine_text(resolved) + ".");
        return resolved;
    }

    std::vector<Entry> listing(const std::vector<std::string>& words, int pos, const std::string& label) {
        std::vector<Entry> entries;
        for (const auto& w : words) {
            const std::string shown = display(w);
            Entry e{w, "", 0};
            if (pos < static_cast<int>(shown.size())) {
                e.letter = std::string(1, shown[pos]);
                e.index = alphabet_index(shown[pos]);
            }
            for (const auto& d : defects_) {
                if (d.type == WordSortDefect::Type::LetterIndex && d.label == label && d.word == w) {
                    e.letter = d.letter;
                    e.index = d.index;
                }
            }
            entries.push_back(std::move(e));
        }
        numbers_.clear();
        for (const auto& e : entries) numbers_[e.word] = e.index;
        return entries;
    }

    std::vector<Item> ordering(const std::vector<Entry>& entries, const std::string& label) {
        std::vector<int> keys;
        for (const auto& e : entries) keys.push_back(e.index);
        std::sort(keys.begin(), keys.end());
        keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
        std::vector<Item> items;
        for (int k : keys) {
            Item item;
            for (const auto& e : entries) {
                if (e.index == k) item.push_back(e.word);
            }
            items.push_back(std::move(item));
        }
        for (const auto& d : defects_) {
            if (d.label != label) continue;
            if (d.type == WordSortDefect::Type::MissingItem) {
                for (auto& item : items) std::erase(item, d.word);
                std::erase_if(items, [](const Item& i) { return i.empty(); });
            } else if (d.type == WordSortDefect::Type::SortOrder && items.size() > 1) {
                const std::size_t at = d.swap_at % (items.size() - 1);
                std::swap(items[at], items[at + 1]);
            }
        }
        return items;
    }

    bool all_exhausted(const Item& item, int pos) const {
        for (const auto& w : item) {
            if (pos < static_cast<int>(display(w).size())) return false;
        }
        return true;
    }

    void activate(const std::string& label) {
        for (const auto& d : defects_) {
            if (d.type == WordSortDefect::Type::Copy && d.label == label) renamed_[d.word] = d.replacement;
        }
    }

    std::string display(const std::string& w) const {
        auto it = renamed_.find(w);
        return it == renamed_.end() ? w : it->second;
    }

    std::string entries_text(const std::vector<Entry>& entries) const {
        return join_map(entries, ", ", [&](const Entry& e) {
            return dq(display(e.word)) + "=" + dq(e.letter) + " (" + std::to_string(e.index) + ")";
        });
    }

    std::string items_text(const std::vector<Item>& items) const {
        return join_map(items, " < ", [&](const Item& item) {
            const std::string number = "(" + std::to_string(numbers_.at(item.front())) + ") ";
            if (item.size() == 1) return number + dq(display(item.front()));
            return number + "[" + join_map(item, " ? ", [&](const std::string& w) { return dq(display(w)); }) + "]";
        });
    }

    std::string combine_text(const std::vector<std::string>& words) const {
        return join_map(words, " < ", [&](const std::string& w) { return dq(display(w)); });
    }

    const std::vector<WordSortDefect>& defects_;
    std::vector<std::string> lines_;
    std::map<std::string, std::string> renamed_;
    std::map<std::string, int> numbers_;
};

}  // namespace

Attempt render_wordsort(const TaskInstance& inst, const std::vector<WordSortDefect>& defects) {
    if (inst.kind != TaskKind::WordSorting) {
        throw KindError("word-sort rationale requested for " + std::string(to_string(inst.kind)));
    }
    const auto words = wordsort_words_of(inst.question);
    if (words.empty()) throw ParseError("word-sort question without words");
    WordSortRenderer renderer(defects);
    return parse_attempt(TaskKind::WordSorting, renderer.run(words), true);
}

Attempt gold_rationale_wordsort(const TaskInstance& inst) {
    return render_wordsort(inst, {});
}

Attempt gold_rationale(const TaskInstance& inst) {
    switch (inst.kind) {
    case TaskKind::MultistepArithmetic: return gold_rationale_arithmetic(inst);
    case TaskKind::WordSorting: return gold_rationale_wordsort(inst);
    default: throw KindError(std::string(to_string(inst.kind)) + " has no scripted rationale");
    }
}

}  // namespace tripost
