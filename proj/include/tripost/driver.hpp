#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripost/metrics.hpp"
#include "tripost/postprocess.hpp"
#include "tripost/student.hpp"

namespace tripost {

struct TaskPlan {
    TaskKind kind = TaskKind::MultistepArithmetic;
    std::size_t train_per_cell = 20;  // seen cells only
    std::size_t test_per_cell = 10;   // seen and unseen cells
    std::string fixture;              // instance file for unscriptable tasks
};

struct RunConfig {
    int t = 3;
    std::optional<double> p = 0.43;  // nullopt means auto
    double w = 1.5;
    int max_rounds = 3;
    double eta = 1.0;
    std::uint64_t seed = 0;
    std::vector<TaskPlan> tasks;
    std::string student = "simulated";  // or a provider URL
    std::string fbk = "scripted";
    std::string imp = "scripted";
    std::string output_dir = "run";
    std::size_t min_ximp = 10;
    bool fresh_buffer = false;
    int threads = 0;
    StudentProfile initial_profile;

    void validate() const;
};

RunConfig default_run_config();
nlohmann::ordered_json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

enum class Stage { Edit, Postprocess, Train, Evaluate };
std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

struct IterationSummary {
    int iteration = 0;
    std::size_t trajectories = 0;
    std::size_t edited = 0;
    std::size_t rejected = 0;
    std::size_t ximp_collected = 0;  // triplets from this iteration's trajectories
    std::size_t buffer_size = 0;
    std::size_t dataset_size = 0;
    double effective_p = 0.0;
    bool early_stopped = false;
    FilterStats filter;
    Report report;
    StudentProfile profile;
};

struct RunSummary {
    std::vector<IterationSummary> iterations;
    bool completed = false;
    std::vector<std::string> warnings;
};

struct RunOptions {
    // Stop (as if killed) once this stage of this iteration is checkpointed.
    std::optional<std::pair<int, Stage>> halt_after;
};

// Writes config.json, instance files and per-iteration directories
// iter_<k>/{buffer.jsonl, dataset.jsonl, profile.json, report.csv}.
RunSummary run(const RunConfig& config, const RunOptions& options = {});
RunSummary resume(const std::string& run_dir, const RunOptions& options = {});

// One run per p under <out>/p_<p>; returns the final-iteration report of each.
std::vector<Report> sweep(const RunConfig& base, const std::vector<double>& ps,
                          const std::string& out_dir);

// Reports for every completed iteration of a run directory.
std::vector<Report> run_reports(const std::string& run_dir);

std::string sha256_file(const std::string& path);

}  // namespace tripost
