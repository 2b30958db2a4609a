#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripost/trajectory.hpp"
#include "tripost/training_example.hpp"

namespace tripost {

struct ImprovementTriplet {
    std::string id;
    std::string source_id;
    TaskKind task = TaskKind::MultistepArithmetic;
    Split split = Split::Seen;
    std::string subtask;
    std::string question;
    Attempt attempt;
    Feedback feedback;
    Attempt update;
    bool trajectory_correct = false;  // source trajectory's final answer equals gold

    bool operator==(const ImprovementTriplet&) const = default;
};

struct TerminalPair {
    std::string id;
    std::string source_id;
    TaskKind task = TaskKind::MultistepArithmetic;
    Split split = Split::Seen;
    std::string subtask;
    std::string question;
    Attempt attempt;
    Feedback feedback;

    bool operator==(const TerminalPair&) const = default;
};

struct SplitResult {
    std::vector<ImprovementTriplet> triplets;
    std::vector<TerminalPair> pairs;
};

using InstanceIndex = std::map<std::string, TaskInstance>;
InstanceIndex index_instances(const std::vector<TaskInstance>& instances);

// Non-terminal feedbacks become triplets, terminal ones pairs.
SplitResult split(const std::vector<Trajectory>& trajectories, const InstanceIndex& instances);

// Final-response agreement with the step before it.
bool final_consistent(TaskKind kind, std::string_view question, const Attempt& attempt);

struct FilterStats {
    std::size_t input = 0;
    std::size_t kept = 0;
    std::size_t dropped_incorrect_final = 0;  // check 1
    std::size_t dropped_no_difference = 0;    // check 2
    std::size_t dropped_inconsistent = 0;     // check 3

    bool operator==(const FilterStats&) const = default;
};

std::vector<ImprovementTriplet> filter(const std::vector<ImprovementTriplet>& triplets,
                                       FilterStats* stats = nullptr);

struct Dataset {
    std::vector<ImprovementTriplet> triplets;
    std::vector<TerminalPair> pairs;
    double effective_p = 0.0;

    std::size_t size() const { return triplets.size() + pairs.size(); }
};

// Downsamples exactly one side so the triplet share is within one sample
// of p, keeping the largest such dataset.
Dataset rebalance(const std::vector<ImprovementTriplet>& triplets,
                  const std::vector<TerminalPair>& pairs, double p, std::uint64_t seed);
// Keeps everything; effective_p is the natural triplet share.
Dataset rebalance_auto(const std::vector<ImprovementTriplet>& triplets,
                       const std::vector<TerminalPair>& pairs);

std::vector<TrainingExample> build_examples(const Dataset& dataset, double w);
void emit(const Dataset& dataset, double w, const std::string& path);

nlohmann::ordered_json to_json(const ImprovementTriplet& t);
nlohmann::ordered_json to_json(const TerminalPair& p);
ImprovementTriplet triplet_from_json(const nlohmann::json& j);
TerminalPair pair_from_json(const nlohmann::json& j);

// Post-processed items file, one JSON object per line with "type" = triplet|pair.
void write_dataset_items(const std::string& path, const Dataset& dataset);
Dataset read_dataset_items(const std::string& path);

}  // namespace tripost
