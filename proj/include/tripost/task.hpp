#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace tripost {

enum class TaskKind { MultistepArithmetic, WordSorting, DateUnderstanding, LogicalDeduction };

std::string_view to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view name);
bool is_scriptable(TaskKind kind);

struct SubtaskParams {
    int l = 0;
    std::optional<int> d;  // nesting depth, arithmetic only

    bool operator==(const SubtaskParams&) const = default;
};

enum class Split { Seen, Unseen };

std::string_view to_string(Split split);
Split split_from_string(std::string_view name);

struct TaskInstance {
    std::string id;
    TaskKind kind = TaskKind::MultistepArithmetic;
    SubtaskParams params;
    std::string question;
    std::string gold_answer;
    Split split = Split::Seen;

    bool operator==(const TaskInstance&) const = default;
};

// "l=3/d=2" style key naming the subtask cell.
std::string subtask_key(TaskKind kind, const SubtaskParams& params);

void validate_params(TaskKind kind, const SubtaskParams& params);
Split classify_split(TaskKind kind, const SubtaskParams& params);

TaskInstance gen_arithmetic(const SubtaskParams& params, std::uint64_t seed);
TaskInstance gen_wordsort(const SubtaskParams& params, std::uint64_t seed);

// Generate `count` instances with seeds seed, seed+1, ...
std::vector<TaskInstance> generate_instances(TaskKind kind, const SubtaskParams& params,
                                             std::size_t count, std::uint64_t seed);

// Length/depth grid cells of a task for one split.
std::vector<SubtaskParams> grid_cells(TaskKind kind, Split split);

// Question text helpers.
std::string arithmetic_question(std::string_view expr);
std::string arithmetic_expression_of(std::string_view question);
std::string wordsort_question(const std::vector<std::string>& words);
std::vector<std::string> wordsort_words_of(std::string_view question);

const std::vector<std::string>& lexicon();

// Fixture / instance files: one JSON object per line.
nlohmann::ordered_json to_json(const TaskInstance& inst);
TaskInstance instance_from_json(const nlohmann::json& j);
std::vector<TaskInstance> load_fixture_instances(const std::string& path);
std::vector<TaskInstance> parse_fixture_instances(std::string_view text);
void write_instances(const std::string& path, const std::vector<TaskInstance>& instances);

}  // namespace tripost
