#include "tripost/feedback.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "tripost/errors.hpp"

namespace tripost {

namespace {

constexpr std::string_view kErrorKindNames[] = {"calculation",   "copy",
                                                "sort_order",    "letter_index",
                                                "decomposition", "final_inconsistent",
                                                "missing_item"};

std::string dq(std::string_view w) {
    return "\"" + std::string(w) + "\"";
}

std::string join(const std::vector<std::string>& words, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i > 0) out += sep;
        out += words[i];
    }
    return out;
}

// Thrown inside the checkers to stop at the first failing step.
struct Found {
    Feedback fb;
};

class CheckerBase {
public:
    explicit CheckerBase(const Attempt& attempt) : attempt_(attempt) {}

protected:
    [[noreturn]] void fail(const Step& step, std::string segment, ErrorKind kind, std::string reason) {
        throw Found{error_feedback(attempt_, step.label, std::move(segment), kind, std::move(reason))};
    }

    // Next step must carry `label`; structural mismatches are reported at the
    // step found in its place.
    const Step& expect(const std::string& label) {
        if (idx_ < attempt_.steps.size() && attempt_.steps[idx_].label == label) return attempt_.steps[idx_++];
        const Step& at = idx_ < attempt_.steps.size() ? attempt_.steps[idx_] : attempt_.steps.back();
        fail(at, std::string(at.body()), ErrorKind::Decomposition,
             "the expected step (" + label + ") is missing");
    }

    const Attempt& attempt_;
    std::size_t idx_ = 0;
};

// ---------------------------------------------------------------------------

class ArithmeticChecker : CheckerBase {
public:
    ArithmeticChecker(const TaskInstance& inst, const Attempt& attempt)
        : CheckerBase(attempt),
          inst_(inst),
          plan_(plan_arithmetic(arith::parse(arithmetic_expression_of(inst.question)))) {}

    void run() {
        const std::size_t n = plan_.letters.size();
        check_decomposition(expect("1"));
        arith::Bindings values;
        for (std::size_t i = 0; i < n; ++i) {
            values[plan_.letters[i]] = check_letter(expect(std::to_string(i + 2)), i);
        }
        Integer result = 0;
        std::string result_label;
        if (n > 0) {
            result_label = std::to_string(n + 2);
            result = check_final_equation(expect(result_label), values);
        }
        const Step& fr_step = expect(std::string(kFinalResponseLabel));
        const auto* fr = std::get_if<FinalResponse>(&fr_step.payload);
        if (!fr) fail(fr_step, std::string(fr_step.body()), ErrorKind::FinalInconsistent, "the final response has no answer");
        const auto answer = parse_integer(fr->answer);
        if (!answer || *answer != result) {
            fail(fr_step, fr->segment, ErrorKind::FinalInconsistent,
                 fr->answer + " is inconsistent with the result " + to_string(result) + " in step (" +
                     result_label + ")");
        }
        if (fr->answer != inst_.gold_answer) {
            fail(fr_step, fr->segment, ErrorKind::FinalInconsistent, "the answer should be " + inst_.gold_answer);
        }
    }

private:
    void check_decomposition(const Step& step) {
        const auto* d = std::get_if<Decomposition>(&step.payload);
        const std::string gold_skeleton = arith::render(plan_.skeleton);
        if (!d) {
            fail(step, std::string(step.body()), ErrorKind::Decomposition,
                 "the equation should be written as \"" + gold_skeleton + "\"");
        }
        const auto skel = arith::try_parse(d->skeleton);
        if (!skel || arith::render(*skel) != gold_skeleton) {
            fail(step, "This equation can be written as \"" + d->skeleton + "\"", ErrorKind::Decomposition,
                 "the equation should be written as \"" + gold_skeleton + "\"");
        }
        if (d->defs.size() != plan_.letters.size()) {
            fail(step, std::string(step.body()), ErrorKind::Decomposition,
                 "the equation should be split into " + std::to_string(plan_.letters.size()) + " parts");
        }
        for (std::size_t i = 0; i < d->defs.size(); ++i) {
            const auto& [letter, text] = d->defs[i];
            const std::string gold = arith::render(plan_.definitions[i]);
            const auto parsed = arith::try_parse(text);
            if (letter != std::string(1, plan_.letters[i]) || !parsed || arith::render(*parsed) != gold) {
                fail(step, letter + " = " + text, ErrorKind::Copy,
                     "there is a copy error, since " + std::string(1, plan_.letters[i]) + " should be " + gold);
            }
        }
    }

    Integer check_letter(const Step& step, std::size_t i) {
        const std::string letter(1, plan_.letters[i]);
        const auto* chain = std::get_if<EquationChain>(&step.payload);
        if (!chain || step.kind != StepKind::Calculation || chain->subject != letter) {
            fail(step, std::string(step.body()), ErrorKind::Decomposition,
                 "step (" + step.label + ") should calculate " + letter);
        }
        const std::string def = arith::render(plan_.definitions[i]);
        const auto first = arith::try_parse(chain->terms.front());
        if (!first || arith::render(*first) != def) {
            fail(step, letter + " = " + chain->terms.front(), ErrorKind::Copy,
                 "there is a copy error, since " + letter + " should be " + def);
        }
        check_links(step, *chain, 0);
        return finished_value(step, *chain);
    }

    Integer check_final_equation(const Step& step, const arith::Bindings& values) {
        const auto* chain = std::get_if<EquationChain>(&step.payload);
        const std::string skel = arith::render(plan_.skeleton);
        if (!chain || step.kind != StepKind::FinalEquation) {
            fail(step, std::string(step.body()), ErrorKind::Decomposition,
                 "step (" + step.label + ") should give the final equation " + skel);
        }
        const auto first = arith::try_parse(chain->terms.front());
        if (!first || arith::render(*first) != skel) {
            fail(step, chain->terms.front(), ErrorKind::Copy,
                 "there is a copy error, since the final equation should be " + skel);
        }
        if (chain->terms.size() < 2) {
            fail(step, chain->terms.front(), ErrorKind::Calculation, "the final equation is not calculated");
        }
        const arith::Expr expected = arith::substitute(plan_.skeleton, values);
        const auto sub = arith::try_parse(chain->terms[1]);
        if (!sub || !(*sub == expected)) {
            const std::string segment = chain_link_text(step, 0);
            const auto shown = sub ? arith::leaves(*sub) : std::vector<std::string>{};
            const auto slots = arith::leaves(plan_.skeleton);
            if (sub && shown.size() == slots.size()) {
                for (std::size_t k = 0; k < slots.size(); ++k) {
                    const char v = slots[k].size() == 1 ? slots[k][0] : 0;
                    if (values.count(v) && shown[k] != to_string(values.at(v))) {
                        fail(step, segment, ErrorKind::Copy,
                             "there is a copy error, since " + slots[k] + " should be " + to_string(values.at(v)));
                    }
                }
            }
            fail(step, segment, ErrorKind::Copy,
                 "there is a copy error, since " + chain->terms[1] + " does not match " + chain->terms[0]);
        }
        check_links(step, *chain, 1);
        return finished_value(step, *chain);
    }

    Integer finished_value(const Step& step, const EquationChain& chain) {
        const auto last = arith::try_parse(chain.terms.back());
        if (!last || !last->is_number()) {
            fail(step, chain.terms.back(), ErrorKind::Calculation,
                 "there is a calculation error, since " + chain.terms.back() + " is not fully calculated");
        }
        return last->value;
    }

    void check_links(const Step& step, const EquationChain& chain, std::size_t first_link) {
        ChainVerdict v = evaluate_chain(chain, {}, first_link);
        if (v.valid) return;
        std::string segment = chain_link_text(step, v.link);
        if (step.raw_text.find(segment) == std::string::npos) segment = chain.terms[v.link + 1];
        const std::string& lhs_text = chain.terms[v.link];
        const std::string& rhs_text = chain.terms[v.link + 1];
        const auto lhs = arith::try_parse(lhs_text);
        const auto rhs = arith::try_parse(rhs_text);
        if (lhs && rhs) {
            if (auto site = arith::single_reduction_site(*lhs, *rhs); site && site->operands.size() <= 2) {
                fail(step, segment, ErrorKind::Calculation,
                     "there is a calculation error, since " + arith::render(*site) + " should be " +
                         to_string(*arith::evaluate(*site)));
            }
            auto a = arith::leaves(*lhs);
            auto b = arith::leaves(*rhs);
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            if (rhs->is_number() || a == b) {
                fail(step, segment, ErrorKind::Calculation,
                     "there is a calculation error, since " + lhs_text + " is not equal to " + rhs_text);
            }
        }
        fail(step, segment, ErrorKind::Copy,
             "there is a copy error, since " + rhs_text + " does not match " + lhs_text);
    }

    const TaskInstance& inst_;
    ArithmeticPlan plan_;
};

// ---------------------------------------------------------------------------

class WordSortChecker : CheckerBase {
public:
    WordSortChecker(const TaskInstance& inst, const Attempt& attempt) : CheckerBase(attempt), inst_(inst) {}

    void run() {
        const auto words = wordsort_words_of(inst_.question);
        const Step& first = expect("1");
        const auto* listing = std::get_if<LetterListing>(&first.payload);
        if (!listing || first.kind != StepKind::LetterIndex) {
            fail(first, std::string(first.body()), ErrorKind::LetterIndex, "step (1) should list the first letters");
        }
        const auto numbers = check_listing(first, *listing, words, 0, "the question");
        auto resolved = resolve_level(numbers, "1", 0, "", 2);
        std::string result_label = resolved.second;
        const Step& fr_step = expect(std::string(kFinalResponseLabel));
        const auto* fr = std::get_if<FinalResponse>(&fr_step.payload);
        if (!fr) fail(fr_step, std::string(fr_step.body()), ErrorKind::FinalInconsistent, "the final response has no answer");
        const std::string expected = join(resolved.first, " ");
        if (fr->answer != expected) {
            fail(fr_step, fr->segment, ErrorKind::FinalInconsistent,
                 dq(fr->answer) + " is inconsistent with the result in step (" + result_label + ")");
        }
        if (fr->answer != inst_.gold_answer) {
            fail(fr_step, fr->segment, ErrorKind::FinalInconsistent, "the answer should be: " + inst_.gold_answer);
        }
    }

private:
    using Numbers = std::vector<std::pair<std::string, int>>;  // listing order

    // Ordering at prefix.`first_child` (or "2" at top level), nested sub-sorts,
    // and the closing "Hence". Returns the resolved order and the label holding it.
    std::pair<std::vector<std::string>, std::string> resolve_level(const Numbers& numbers,
                                                                   const std::string& src,
                                                                   int pos, const std::string& prefix,
                                                                   int first_child) {
        auto label_of = [&](int k) { return prefix.empty() ? std::to_string(k) : prefix + "." + std::to_string(k); };
        const std::string order_label = label_of(first_child - (prefix.empty() ? 0 : 1));
        const Step& step = expect(order_label);
        const auto* ord = std::get_if<Ordering>(&step.payload);
        if (!ord) {
            fail(step, std::string(step.body()), ErrorKind::SortOrder,
                 "step (" + step.label + ") should order the words by their numbers");
        }
        check_ordering(step, *ord, numbers, src);
        int next = prefix.empty() ? first_child + 1 : first_child;
        bool ties = false;
        std::vector<std::string> resolved;
        for (const auto& item : ord->items) {
            if (item.words.size() == 1) {
                resolved.push_back(item.words.front());
                continue;
            }
            ties = true;
            const std::string label = label_of(next++);
            const Step& sub = expect(label);
            const auto* listing = std::get_if<LetterListing>(&sub.payload);
            if (!listing || sub.kind != StepKind::Subsort) {
                fail(sub, std::string(sub.body()), ErrorKind::SortOrder,
                     "step (" + label + ") should sort the subpart " + group_text(item.words));
            }
            if (listing->group != item.words) {
                fail(sub, group_text(listing->group), ErrorKind::Copy,
                     "the subpart should be " + group_text(item.words) + " from step (" + step.label + ")");
            }
            if (listing->position != pos + 1) {
                fail(sub, "their " + ordinal(listing->position) + " letters", ErrorKind::LetterIndex,
                     "it should look at their " + ordinal(pos + 1) + " letters");
            }
            const auto sub_numbers = check_listing(sub, *listing, item.words, pos + 1, "step (" + step.label + ")");
            auto inner = resolve_level(sub_numbers, label, pos + 1, label, 2);
            resolved.insert(resolved.end(), inner.first.begin(), inner.first.end());
        }
        if (!ties && prefix.empty()) return {resolved, step.label};
        const std::string hence_label = label_of(next);
        const Step& hence = expect(hence_label);
        const auto* combine = std::get_if<Combine>(&hence.payload);
        if (!combine) {
            fail(hence, std::string(hence.body()), ErrorKind::SortOrder,
                 "step (" + hence_label + ") should combine the sorted words");
        }
        if (combine->words != resolved) {
            fail(hence, combine->text, ErrorKind::SortOrder,
                 "the order should be " + quoted_chain(resolved));
        }
        return {resolved, hence_label};
    }

    Numbers check_listing(const Step& step, const LetterListing& listing,
                          const std::vector<std::string>& expected, int pos, const std::string& src) {
        const std::set<std::string> allowed(expected.begin(), expected.end());
        std::set<std::string> seen;
        for (const auto& e : listing.entries) {
            if (!allowed.count(e.word)) {
                fail(step, e.text, ErrorKind::Copy,
                     "there is a copy error, since " + dq(e.word) + " does not appear in " + src);
            }
            seen.insert(e.word);
        }
        for (const auto& w : expected) {
            if (!seen.count(w)) {
                fail(step, listing.entries.front().text, ErrorKind::MissingItem,
                     dq(w) + " from " + src + " is missing");
            }
        }
        Numbers numbers;
        for (const auto& e : listing.entries) {
            const bool has = pos < static_cast<int>(e.word.size());
            const std::string letter = has ? std::string(1, e.word[pos]) : std::string();
            const int index = has ? alphabet_index(e.word[pos]) : 0;
            if (e.letter != letter) {
                fail(step, e.text, ErrorKind::LetterIndex,
                     has ? "the " + ordinal(pos) + " letter of " + dq(e.word) + " should be " + dq(letter)
                         : dq(e.word) + " has no " + ordinal(pos) + " letter");
            }
            if (e.index != index) {
                fail(step, e.text, ErrorKind::LetterIndex,
                     "the alphabet index of " + dq(letter) + " should be " + std::to_string(index));
            }
            numbers.emplace_back(e.word, e.index);
        }
        return numbers;
    }

    void check_ordering(const Step& step, const Ordering& ord, const Numbers& numbers, const std::string& src) {
        std::map<std::string, int> lookup(numbers.begin(), numbers.end());
        std::set<std::string> present;
        for (const auto& item : ord.items) {
            for (const auto& w : item.words) {
                if (!lookup.count(w)) {
                    fail(step, item.text, ErrorKind::Copy,
                         "there is a copy error, since " + dq(w) + " does not appear in step (" + src + ")");
                }
                present.insert(w);
            }
        }
        for (const auto& [w, n] : numbers) {
            if (!present.count(w)) {
                fail(step, ord.text, ErrorKind::MissingItem, dq(w) + " from step (" + src + ") is missing");
            }
        }
        for (const auto& item : ord.items) {
            for (const auto& w : item.words) {
                if (lookup.at(w) != item.number) {
                    fail(step, item.text, ErrorKind::Copy,
                         "there is a copy error, since " + dq(w) + " has number " +
                             std::to_string(lookup.at(w)) + " in step (" + src + ")");
                }
            }
        }
        std::vector<int> shown;
        for (const auto& item : ord.items) shown.push_back(item.number);
        std::vector<int> sorted = shown;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k < shown.size(); ++k) {
            if (shown[k] != sorted[k]) {
                const std::string which =
                    k == 0 ? "the first and smallest number" : "the " + ordinal(static_cast<int>(k)) + " smallest number";
                fail(step, ord.text, ErrorKind::SortOrder,
                     "words are not sorted in ascending order. Using results from step (" + src + "), " + which +
                         " should be " + std::to_string(sorted[k]));
            }
        }
        for (std::size_t k = 1; k < shown.size(); ++k) {
            if (shown[k] == shown[k - 1]) {
                fail(step, ord.text, ErrorKind::SortOrder,
                     "words with the same number " + std::to_string(shown[k]) + " should be grouped together");
            }
        }
    }

    static std::string group_text(const std::vector<std::string>& words) {
        std::vector<std::string> q;
        for (const auto& w : words) q.push_back(dq(w));
        return "[" + join(q, " ? ") + "]";
    }

    static std::string quoted_chain(const std::vector<std::string>& words) {
        std::vector<std::string> q;
        for (const auto& w : words) q.push_back(dq(w));
        return join(q, " < ");
    }

    const TaskInstance& inst_;
};

std::optional<ErrorKind> infer_kind(std::string_view reason, std::string_view step) {
    if (reason.find("calculation error") != std::string_view::npos) return ErrorKind::Calculation;
    if (reason.find("copy error") != std::string_view::npos) return ErrorKind::Copy;
    if (reason.find("not sorted") != std::string_view::npos) return ErrorKind::SortOrder;
    if (reason.find(" letter of ") != std::string_view::npos) return ErrorKind::LetterIndex;
    if (reason.find("is inconsistent with the result") != std::string_view::npos ||
        (step == kFinalResponseLabel && reason.find("inconsistent") != std::string_view::npos)) {
        return ErrorKind::FinalInconsistent;
    }
    if (reason.find("is missing") != std::string_view::npos) return ErrorKind::MissingItem;
    return std::nullopt;
}

}  // namespace

std::string_view to_string(ErrorKind kind) {
    return kErrorKindNames[static_cast<int>(kind)];
}

ErrorKind error_kind_from_string(std::string_view name) {
    for (int i = 0; i < 7; ++i) {
        if (kErrorKindNames[i] == name) return static_cast<ErrorKind>(i);
    }
    throw ParseError("unknown error kind \"" + std::string(name) + "\"");
}

std::string render_feedback(const Feedback& fb) {
    if (fb.terminal) {
        return "Step 1 to step " + fb.last_correct_step.value_or("1") +
               " is correct, and the final response is also correct.";
    }
    std::string out;
    if (fb.last_correct_step) out = "Step (1) to step (" + *fb.last_correct_step + ") are correct. ";
    out += "In step (" + fb.error_step.value_or("1") + ") the part \"" + fb.error_segment +
           "\" is incorrect. This is because " + fb.reason_text + ".";
    return out;
}

Feedback terminal_feedback(const Attempt& attempt) {
    Feedback fb;
    fb.terminal = true;
    fb.last_correct_step = attempt.last_numbered_label().value_or("1");
    fb.rendered = render_feedback(fb);
    return fb;
}

Feedback error_feedback(const Attempt& attempt, std::string_view error_step, std::string segment,
                        std::optional<ErrorKind> kind, std::string reason) {
    Feedback fb;
    fb.error_step = std::string(error_step);
    if (auto at = attempt.index_of(error_step); at && *at > 0) {
        fb.last_correct_step = attempt.steps[*at - 1].label;
    }
    fb.error_segment = std::move(segment);
    fb.reason_kind = kind;
    while (!reason.empty() && (reason.back() == '.' || reason.back() == ' ')) reason.pop_back();
    fb.reason_text = std::move(reason);
    fb.rendered = render_feedback(fb);
    return fb;
}

bool signals_terminal(std::string_view text) {
    return text.find(kTerminalPhrase) != std::string_view::npos ||
           text.find(kTerminalPhraseAlso) != std::string_view::npos;
}

Feedback parse_feedback_text(std::string_view text) {
    std::string_view t = text;
    while (!t.empty() && (t.front() == ' ' || t.front() == '\n')) t.remove_prefix(1);
    if (t.starts_with("Feedback:")) t.remove_prefix(9);
    const std::string cleaned = strip_end_marker(t);
    t = cleaned;
    Feedback fb;
    if (signals_terminal(t)) {
        fb.terminal = true;
        constexpr std::string_view head = "Step 1 to step ";
        if (t.starts_with(head)) {
            const auto end = t.find(' ', head.size());
            fb.last_correct_step = std::string(t.substr(head.size(), end - head.size()));
        }
        fb.rendered = std::string(t);
        return fb;
    }
    const auto in_step = t.find("In step (");
    const auto part = t.find(") the part \"", in_step);
    const auto tail = t.rfind("\" is incorrect. This is because ");
    if (in_step == std::string_view::npos || part == std::string_view::npos || tail == std::string_view::npos ||
        tail < part) {
        throw ParseError("feedback text does not follow the feedback format");
    }
    if (in_step > 0) {
        const auto to = t.rfind("(", in_step);
        const auto close = t.find(')', to);
        if (to != std::string_view::npos && close != std::string_view::npos && close < in_step) {
            fb.last_correct_step = std::string(t.substr(to + 1, close - to - 1));
        }
    }
    fb.error_step = std::string(t.substr(in_step + 9, part - in_step - 9));
    fb.error_segment = std::string(t.substr(part + 12, tail - part - 12));
    std::string_view reason = t.substr(tail + 32);
    while (!reason.empty() && (reason.back() == '.' || reason.back() == ' ')) reason.remove_suffix(1);
    fb.reason_text = std::string(reason);
    fb.reason_kind = infer_kind(fb.reason_text, *fb.error_step);
    fb.rendered = render_feedback(fb);
    return fb;
}

bool same_judgement(const Feedback& a, const Feedback& b) {
    if (a.terminal != b.terminal) return false;
    if (a.terminal) return true;
    return a.error_step == b.error_step && a.error_segment == b.error_segment;
}

Feedback scripted_feedback(const TaskInstance& inst, const Attempt& attempt) {
    if (!is_scriptable(inst.kind)) {
        throw KindError("no scripted feedback for " + std::string(to_string(inst.kind)));
    }
    if (attempt.steps.empty()) {
        Feedback fb;
        fb.error_step = "1";
        fb.reason_kind = ErrorKind::Decomposition;
        fb.reason_text = "the attempt has no steps";
        fb.rendered = render_feedback(fb);
        return fb;
    }
    try {
        if (inst.kind == TaskKind::MultistepArithmetic) {
            ArithmeticChecker(inst, attempt).run();
        } else {
            WordSortChecker(inst, attempt).run();
        }
    } catch (Found& found) {
        return std::move(found.fb);
    }
    return terminal_feedback(attempt);
}

nlohmann::ordered_json to_json(const Feedback& fb) {
    nlohmann::ordered_json j;
    j["terminal"] = fb.terminal;
    j["last_correct_step"] = fb.last_correct_step ? nlohmann::ordered_json(*fb.last_correct_step) : nullptr;
    j["error_step"] = fb.error_step ? nlohmann::ordered_json(*fb.error_step) : nullptr;
    j["error_segment"] = fb.error_segment;
    j["reason_kind"] = fb.reason_kind ? nlohmann::ordered_json(to_string(*fb.reason_kind)) : nullptr;
    j["reason_text"] = fb.reason_text;
    j["rendered"] = fb.rendered;
    return j;
}

Feedback feedback_from_json(const nlohmann::json& j) {
    Feedback fb;
    try {
        fb.terminal = j.at("terminal").get<bool>();
        auto opt = [&](const char* key) -> std::optional<std::string> {
            if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
            return j.at(key).get<std::string>();
        };
        fb.last_correct_step = opt("last_correct_step");
        fb.error_step = opt("error_step");
        fb.error_segment = j.value("error_segment", std::string());
        if (auto k = opt("reason_kind")) fb.reason_kind = error_kind_from_string(*k);
        fb.reason_text = j.value("reason_text", std::string());
        fb.rendered = j.at("rendered").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("feedback record: ") + e.what());
    }
    return fb;
}

}  // namespace tripost
