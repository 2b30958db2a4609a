#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tripost/feedback.hpp"
#include "tripost/improve.hpp"
#include "tripost/student.hpp"

namespace tripost {

enum class Provenance { Gold, DirectlyCorrect, Edited };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view name);

using TrajectoryElement = std::variant<Attempt, Feedback>;

// (x_init, fb_1, up_1, ..., fb_m): attempts at even indices, feedbacks at odd.
struct Trajectory {
    std::string instance_id;
    TaskKind task = TaskKind::MultistepArithmetic;
    int iteration = 0;
    std::vector<TrajectoryElement> elements;
    Provenance provenance = Provenance::DirectlyCorrect;
    bool accepted = false;
    std::string reject_reason;

    std::vector<const Attempt*> attempts() const;
    std::vector<const Feedback*> feedbacks() const;
    const Attempt& final_attempt() const;
    const Feedback& last_feedback() const;
    bool operator==(const Trajectory&) const = default;
};

// Throws DataError naming the trajectory when attempts and feedbacks do not
// alternate or the sequence does not end with a feedback.
void validate_alternation(const Trajectory& t);

nlohmann::ordered_json to_json(const Trajectory& t);
Trajectory trajectory_from_json(const nlohmann::json& j);
std::string serialize_trajectory(const Trajectory& t);
void write_trajectories(const std::string& path, const std::vector<Trajectory>& ts);
void append_trajectories(const std::string& path, const std::vector<Trajectory>& ts);
std::vector<Trajectory> read_trajectories(const std::string& path);

bool answer_correct(const TaskInstance& inst, const Attempt& attempt);

// The gold rationale closed by its terminal feedback.
Trajectory gold_trajectory(const TaskInstance& inst);

// Inference mode: the student attempts, critiques itself and revises until
// its own feedback is terminal or `max_rounds` revisions were made.
Trajectory student_trajectory(const TaskInstance& inst, StudentModel& student, int max_rounds);

// First position where the two feedback lists disagree on terminality,
// error step or error segment. A missing entry on either side disagrees.
std::optional<std::size_t> disagreement_index(const std::vector<Feedback>& student_fbs,
                                              const std::vector<Feedback>& fbk_fbs);

struct EditConfig {
    int max_rounds = 3;
};

// Interactive trajectory editing: splice FBK feedback at the first
// disagreement, then alternate IMP and FBK until FBK is terminal or the
// round budget runs out. Rejections carry a reason code; provider
// transport failures propagate.
Trajectory edit_trajectory(const TaskInstance& inst, StudentModel& student, FeedbackModule& fbk,
                           ImprovementModule& imp, const EditConfig& config = {});

// Same, starting from an already generated student trajectory.
Trajectory edit_student_trajectory(const TaskInstance& inst, const Trajectory& student_traj,
                                   FeedbackModule& fbk, ImprovementModule& imp,
                                   const EditConfig& config = {});

}  // namespace tripost
