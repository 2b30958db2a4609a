#include "tripost/improve.hpp"

#include "tripost/errors.hpp"

namespace tripost {

namespace {

std::string trim_copy(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
    return std::string(s);
}

std::size_t error_index(const Attempt& prev, const Feedback& fb) {
    if (fb.terminal || !fb.error_step) throw ImprovementImpossible("feedback is terminal; nothing to improve");
    auto idx = prev.index_of(*fb.error_step);
    if (!idx) throw ImprovementImpossible("feedback names step (" + *fb.error_step + ") which is not in the attempt");
    return *idx;
}

}  // namespace

Attempt scripted_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb) {
    if (!is_scriptable(inst.kind)) {
        throw KindError("no scripted improvement for " + std::string(to_string(inst.kind)));
    }
    const std::size_t idx = error_index(prev, fb);
    const Feedback check = scripted_feedback(inst, prev);
    if (!check.terminal && check.error_step && compare_labels(*check.error_step, *fb.error_step) < 0) {
        throw ImprovementImpossible("step (" + *check.error_step + ") before the reported error is already wrong");
    }
    const Attempt gold = gold_rationale(inst);
    if (idx > gold.steps.size()) throw ImprovementImpossible("attempt has more steps than the solution");
    for (std::size_t i = 0; i < idx; ++i) {
        if (prev.steps[i].label != gold.steps[i].label) {
            throw ImprovementImpossible("kept step (" + prev.steps[i].label + ") does not line up with the solution");
        }
    }
    Attempt out;
    out.preamble = prev.preamble;
    out.steps.assign(prev.steps.begin(), prev.steps.begin() + static_cast<std::ptrdiff_t>(idx));
    out.steps.insert(out.steps.end(), gold.steps.begin() + static_cast<std::ptrdiff_t>(idx), gold.steps.end());
    out.final_answer = gold.final_answer;
    return out;
}

std::string feedback_prompt(const TaskInstance& inst, const Attempt& attempt) {
    return fill_template(prompt_template(inst.kind, "feedback"),
                         {{"question", inst.question}, {"attempt", attempt.text()}});
}

std::string improve_prefix(const Attempt& prev, const Feedback& fb) {
    const std::size_t idx = error_index(prev, fb);
    std::string out = prev.preamble;
    for (std::size_t i = 0; i < idx; ++i) {
        if (!out.empty()) out.push_back('\n');
        out += prev.steps[i].raw_text;
    }
    return out;
}

std::string improve_prompt(const TaskInstance& inst, const Attempt& prev, const Feedback& fb) {
    return fill_template(prompt_template(inst.kind, "improve"), {{"question", inst.question},
                                                                 {"attempt", prev.text()},
                                                                 {"feedback", fb.rendered},
                                                                 {"prefix", improve_prefix(prev, fb)}});
}

std::string improve_completion_text(const Attempt& prev, const Feedback& fb, const Attempt& updated) {
    const std::size_t idx = error_index(prev, fb);
    std::string out;
    for (std::size_t i = idx; i < updated.steps.size(); ++i) {
        if (!out.empty()) out.push_back('\n');
        out += updated.steps[i].raw_text;
    }
    return out + " [END]";
}

Feedback parse_feedback_completion(const Attempt& attempt, std::string_view completion) {
    std::string text = strip_end_marker(completion);
    constexpr std::string_view cue = "Earliest error step:";
    if (std::string_view(text).starts_with(cue)) text = trim_copy(std::string_view(text).substr(cue.size()));
    if (text.empty()) throw ProviderFormatError("empty feedback completion");
    const auto nl = text.find('\n');
    const std::string first = trim_copy(std::string_view(text).substr(0, nl));
    if (first == "None" || first == "None." || signals_terminal(text)) {
        return terminal_feedback(attempt);
    }
    if (first.size() < 3 || first.front() != '(' || first.back() != ')') {
        throw ProviderFormatError("feedback completion does not start with an error step: " + first);
    }
    const std::string label = first.substr(1, first.size() - 2);
    const Step* step = attempt.find(label);
    if (!step) throw ProviderFormatError("feedback names unknown step (" + label + ")");

    std::optional<std::string> segment;
    std::optional<std::string> reason;
    std::size_t at = nl == std::string::npos ? text.size() : nl + 1;
    while (at < text.size()) {
        const auto end = text.find('\n', at);
        const std::string line = trim_copy(std::string_view(text).substr(at, end == std::string::npos ? std::string::npos : end - at));
        at = end == std::string::npos ? text.size() : end + 1;
        if (line.starts_with("Error segment:")) {
            const auto open = line.find('"');
            const auto close = line.rfind('"');
            if (open == std::string::npos || close <= open) throw ProviderFormatError("unquoted error segment");
            segment = line.substr(open + 1, close - open - 1);
        } else if (line.starts_with("Error reason:")) {
            reason = trim_copy(std::string_view(line).substr(13));
        } else if (reason && !line.empty()) {
            *reason += " " + line;
        }
    }
    if (!segment || !reason || reason->empty()) throw ProviderFormatError("feedback completion lacks segment or reason");
    if (step->raw_text.find(*segment) == std::string::npos) {
        throw ProviderFormatError("error segment does not occur in step (" + label + ")");
    }
    while (!reason->empty() && (reason->back() == '.' || reason->back() == ' ')) reason->pop_back();
    if (reason->starts_with("It ")) (*reason)[0] = 'i';
    Feedback fb = error_feedback(attempt, label, *segment, std::nullopt, *reason);
    fb.reason_kind = parse_feedback_text(fb.rendered).reason_kind;
    return fb;
}

Attempt parse_improve_completion(const TaskInstance& inst, const Attempt& prev, const Feedback& fb,
                                 std::string_view completion) {
    const std::string body = strip_end_marker(completion);
    if (body.empty()) throw ProviderFormatError("empty improvement completion");
    const std::string prefix = improve_prefix(prev, fb);
    std::string full;
    const std::string head = prev.preamble.substr(0, prev.preamble.find('\n'));
    if (!head.empty() && body.starts_with(head)) {
        full = body;
    } else {
        full = prefix.empty() ? body : prefix + "\n" + body;
    }
    Attempt out;
    try {
        out = parse_attempt(inst.kind, full);
    } catch (const ParseError& e) {
        throw ProviderFormatError(std::string("improvement completion: ") + e.what());
    }
    if (!out.final_answer) throw ProviderFormatError("improvement completion lacks a final response");
    return out;
}

Feedback remote_feedback(const TaskInstance& inst, const Attempt& attempt, ProviderClient& provider) {
    CompletionRequest req;
    req.prompt = feedback_prompt(inst, attempt);
    return parse_feedback_completion(attempt, provider.complete(req));
}

Attempt remote_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb, ProviderClient& provider) {
    CompletionRequest req;
    req.prompt = improve_prompt(inst, prev, fb);
    return parse_improve_completion(inst, prev, fb, provider.complete(req));
}

Feedback RoutedFeedback::feedback(const TaskInstance& inst, const Attempt& attempt) {
    if (is_scriptable(inst.kind)) return scripted_feedback(inst, attempt);
    if (!remote_) throw KindError(std::string(to_string(inst.kind)) + " needs a remote feedback provider");
    return remote_feedback(inst, attempt, *remote_);
}

Attempt RoutedImprovement::improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb) {
    if (is_scriptable(inst.kind)) return scripted_improve(inst, prev, fb);
    if (!remote_) throw KindError(std::string(to_string(inst.kind)) + " needs a remote improvement provider");
    return remote_improve(inst, prev, fb, *remote_);
}

}  // namespace tripost
