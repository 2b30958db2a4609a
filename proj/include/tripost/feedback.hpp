#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tripost/rationale.hpp"
#include "tripost/task.hpp"

namespace tripost {

enum class ErrorKind {
    Calculation,
    Copy,
    SortOrder,
    LetterIndex,
    Decomposition,
    FinalInconsistent,
    MissingItem
};

inline constexpr ErrorKind kAllErrorKinds[] = {
    ErrorKind::Calculation,   ErrorKind::Copy,
    ErrorKind::SortOrder,     ErrorKind::LetterIndex,
    ErrorKind::Decomposition, ErrorKind::FinalInconsistent,
    ErrorKind::MissingItem};

std::string_view to_string(ErrorKind kind);
ErrorKind error_kind_from_string(std::string_view name);

// Detection substring for a terminal feedback. The canonical rendering says
// "the final response is also correct", so detection goes through
// signals_terminal, which accepts both.
inline constexpr std::string_view kTerminalPhrase = "the final response is correct";
inline constexpr std::string_view kTerminalPhraseAlso = "the final response is also correct";

bool signals_terminal(std::string_view text);

struct Feedback {
    bool terminal = false;
    std::optional<std::string> last_correct_step;
    std::optional<std::string> error_step;
    std::string error_segment;
    std::optional<ErrorKind> reason_kind;
    std::string reason_text;
    std::string rendered;

    bool operator==(const Feedback&) const = default;
};

std::string render_feedback(const Feedback& fb);

Feedback terminal_feedback(const Attempt& attempt);
// Fills last_correct_step from the step preceding `error_step` and renders.
Feedback error_feedback(const Attempt& attempt, std::string_view error_step,
                        std::string segment, std::optional<ErrorKind> kind,
                        std::string reason);

// Inverse of render_feedback for text produced by a model.
Feedback parse_feedback_text(std::string_view text);

// Structural equality used by trajectory editing.
bool same_judgement(const Feedback& a, const Feedback& b);

// Verifies steps in order and reports the first failing one.
Feedback scripted_feedback(const TaskInstance& inst, const Attempt& attempt);

nlohmann::ordered_json to_json(const Feedback& fb);
Feedback feedback_from_json(const nlohmann::json& j);

}  // namespace tripost
