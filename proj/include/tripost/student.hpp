#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tripost/feedback.hpp"
#include "tripost/provider.hpp"
#include "tripost/rng.hpp"
#include "tripost/training_example.hpp"

namespace tripost {

// Parametric stand-in for the small model being trained.
struct StudentProfile {
    int version = 1;
    int iteration = 0;
    std::uint64_t rng_seed = 0;
    std::map<ErrorKind, double> error_rate;
    double si_propensity = 0.0;
    std::map<std::string, double> competence;  // keyed by "<task>/<subtask_key>"
    double default_competence = 0.3;

    double competence_for(const TaskInstance& inst) const;
    double rate(ErrorKind kind) const;
    bool operator==(const StudentProfile&) const = default;
};

// Untrained starting point used when a run has no explicit profile.
StudentProfile initial_student_profile(std::uint64_t seed);

std::string competence_key(const TaskInstance& inst);
void validate(const StudentProfile& profile);

nlohmann::ordered_json to_json(const StudentProfile& profile);
StudentProfile profile_from_json(const nlohmann::json& j);
void save_profile(const std::string& path, const StudentProfile& profile);
StudentProfile load_profile(const std::string& path);

// Kinds the simulator can inject for a task.
std::vector<ErrorKind> applicable_error_kinds(TaskKind kind);

struct DefectSite {
    std::string step_label;
    ErrorKind kind = ErrorKind::Calculation;

    bool operator==(const DefectSite&) const = default;
};

struct InjectedAttempt {
    Attempt attempt;
    std::vector<DefectSite> sites;  // hidden metadata for test oracles, in step order
};

// Gold rationale with one defect per entry of `kinds`, each at a distinct
// step. Kinds with no usable site on this instance are skipped.
InjectedAttempt inject_defects(const TaskInstance& inst, const std::vector<ErrorKind>& kinds,
                               Rng& rng);

InjectedAttempt simulate_attempt(const TaskInstance& inst, const StudentProfile& profile);
Attempt attempt(const TaskInstance& inst, const StudentProfile& profile);
Feedback self_feedback(const TaskInstance& inst, const Attempt& attempt,
                       const StudentProfile& profile, int round = 1);
Attempt self_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb,
                     const StudentProfile& profile, int round = 1);

struct TrainConfig {
    double eta = 1.0;
    double si_momentum = 0.5;
};

StudentProfile train_update(const StudentProfile& profile,
                            const std::vector<TrainingExample>& dataset,
                            const TrainConfig& config = {});

Attempt remote_attempt(const TaskInstance& inst, ProviderClient& provider);
Feedback remote_self_feedback(const TaskInstance& inst, const Attempt& attempt,
                              ProviderClient& provider);
Attempt remote_self_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb,
                            ProviderClient& provider);

class StudentModel {
public:
    virtual ~StudentModel() = default;
    virtual Attempt attempt(const TaskInstance& inst) = 0;
    virtual Feedback self_feedback(const TaskInstance& inst, const Attempt& attempt,
                                   int round) = 0;
    virtual Attempt self_improve(const TaskInstance& inst, const Attempt& prev,
                                 const Feedback& fb, int round) = 0;
};

class SimulatedStudent : public StudentModel {
public:
    explicit SimulatedStudent(StudentProfile profile) : profile_(std::move(profile)) {}
    const StudentProfile& profile() const { return profile_; }

    Attempt attempt(const TaskInstance& inst) override {
        return tripost::attempt(inst, profile_);
    }
    Feedback self_feedback(const TaskInstance& inst, const Attempt& a, int round) override {
        return tripost::self_feedback(inst, a, profile_, round);
    }
    Attempt self_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb,
                         int round) override {
        return tripost::self_improve(inst, prev, fb, profile_, round);
    }

private:
    StudentProfile profile_;
};

class RemoteStudent : public StudentModel {
public:
    explicit RemoteStudent(std::shared_ptr<ProviderClient> provider)
        : provider_(std::move(provider)) {}

    Attempt attempt(const TaskInstance& inst) override {
        return remote_attempt(inst, *provider_);
    }
    Feedback self_feedback(const TaskInstance& inst, const Attempt& a, int) override {
        return remote_self_feedback(inst, a, *provider_);
    }
    Attempt self_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb,
                         int) override {
        return remote_self_improve(inst, prev, fb, *provider_);
    }

private:
    std::shared_ptr<ProviderClient> provider_;
};

}  // namespace tripost
