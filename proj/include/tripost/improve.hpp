#pragma once

#include <memory>

#include "tripost/feedback.hpp"
#include "tripost/provider.hpp"

namespace tripost {

// Keeps every step before fb.error_step and regenerates the rest with the
// gold algorithm. Throws ImprovementImpossible when the kept prefix does not
// line up with a correct solution.
Attempt scripted_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb);

// Prompt building and completion parsing for the remote modules.
std::string feedback_prompt(const TaskInstance& inst, const Attempt& attempt);
std::string improve_prompt(const TaskInstance& inst, const Attempt& prev, const Feedback& fb);
// Preamble plus the steps before the error step, as shown after "Updated Answer:".
std::string improve_prefix(const Attempt& prev, const Feedback& fb);
// The completion a provider is expected to return for `updated`.
std::string improve_completion_text(const Attempt& prev, const Feedback& fb,
                                    const Attempt& updated);

Feedback parse_feedback_completion(const Attempt& attempt, std::string_view completion);
Attempt parse_improve_completion(const TaskInstance& inst, const Attempt& prev,
                                 const Feedback& fb, std::string_view completion);

Feedback remote_feedback(const TaskInstance& inst, const Attempt& attempt,
                         ProviderClient& provider);
Attempt remote_improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb,
                       ProviderClient& provider);

// FBK module.
class FeedbackModule {
public:
    virtual ~FeedbackModule() = default;
    virtual Feedback feedback(const TaskInstance& inst, const Attempt& attempt) = 0;
};

// IMP module.
class ImprovementModule {
public:
    virtual ~ImprovementModule() = default;
    virtual Attempt improve(const TaskInstance& inst, const Attempt& prev,
                            const Feedback& fb) = 0;
};

// Scripted for scriptable tasks; remote otherwise when a provider is given.
class RoutedFeedback : public FeedbackModule {
public:
    explicit RoutedFeedback(std::shared_ptr<ProviderClient> remote = nullptr)
        : remote_(std::move(remote)) {}
    Feedback feedback(const TaskInstance& inst, const Attempt& attempt) override;

private:
    std::shared_ptr<ProviderClient> remote_;
};

class RoutedImprovement : public ImprovementModule {
public:
    explicit RoutedImprovement(std::shared_ptr<ProviderClient> remote = nullptr)
        : remote_(std::move(remote)) {}
    Attempt improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb) override;

private:
    std::shared_ptr<ProviderClient> remote_;
};

// Always remote, for every task.
class RemoteFeedback : public FeedbackModule {
public:
    explicit RemoteFeedback(std::shared_ptr<ProviderClient> provider)
        : provider_(std::move(provider)) {}
    Feedback feedback(const TaskInstance& inst, const Attempt& attempt) override {
        return remote_feedback(inst, attempt, *provider_);
    }

private:
    std::shared_ptr<ProviderClient> provider_;
};

class RemoteImprovement : public ImprovementModule {
public:
    explicit RemoteImprovement(std::shared_ptr<ProviderClient> provider)
        : provider_(std::move(provider)) {}
    Attempt improve(const TaskInstance& inst, const Attempt& prev, const Feedback& fb) override {
        return remote_improve(inst, prev, fb, *provider_);
    }

private:
    std::shared_ptr<ProviderClient> provider_;
};

}  // namespace tripost
