#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tripost/feedback.hpp"
#include "tripost/task.hpp"

namespace tripost {

enum class SpanRole { Question, InitAttempt, Feedback, UpdatedAttempt, TerminalFeedback };

std::string_view to_string(SpanRole role);
SpanRole span_role_from_string(std::string_view name);

struct Span {
    SpanRole role = SpanRole::Question;
    std::string text;
    double weight = 1.0;

    bool operator==(const Span&) const = default;
};

struct TrainingExample {
    std::string id;
    TaskKind task = TaskKind::MultistepArithmetic;
    Split split = Split::Seen;
    std::string subtask;                    // subtask_key of the source instance
    std::optional<ErrorKind> reason_kind;   // set for improvement examples
    std::vector<Span> spans;

    bool is_improvement() const;
    std::string text() const;  // concatenation of span texts
    bool operator==(const TrainingExample&) const = default;
};

nlohmann::ordered_json to_json(const TrainingExample& ex);
TrainingExample training_example_from_json(const nlohmann::json& j);

// Exact text of one dataset line (no trailing newline).
std::string serialize_example(const TrainingExample& ex);
void write_dataset(const std::string& path, const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> read_dataset(const std::string& path);
std::vector<TrainingExample> parse_dataset(std::string_view text);

}  // namespace tripost
