#include <doctest.h>

#include <cmath>

#include "../support.hpp"
#include "tripost/errors.hpp"
#include "tripost/student.hpp"
#include "tripost/trajectory.hpp"

using namespace tripost;

namespace {

std::vector<TaskInstance> mixed_instances(std::size_t per_cell) {
    std::vector<TaskInstance> out;
    for (TaskKind k : {TaskKind::MultistepArithmetic, TaskKind::WordSorting}) {
        for (Split s : {Split::Seen, Split::Unseen}) {
            for (const auto& cell : grid_cells(k, s)) {
                auto v = generate_instances(k, cell, per_cell, 71);
                out.insert(out.end(), v.begin(), v.end());
            }
        }
    }
    return out;
}

TrainingExample example(bool improvement, std::optional<ErrorKind> kind, std::string subtask, double w = 1.5) {
    TrainingExample ex;
    ex.id = "x";
    ex.task = TaskKind::MultistepArithmetic;
    ex.subtask = std::move(subtask);
    ex.reason_kind = kind;
    ex.spans = {{SpanRole::Question, "q\n", 1.0}, {SpanRole::InitAttempt, "a\n", 1.0}};
    if (improvement) {
        ex.spans.push_back({SpanRole::Feedback, "f\n", w});
        ex.spans.push_back({SpanRole::UpdatedAttempt, "u", w});
    } else {
        ex.spans.push_back({SpanRole::TerminalFeedback, "t", 1.0});
    }
    return ex;
}

}  // namespace

TEST_CASE("profile JSON round-trips and validates") {
    auto p = initial_student_profile(42);
    p.competence["MultistepArithmetic/l=3/d=2"] = 0.123456789012345678;
    p.si_propensity = 1.0 / 3.0;
    CHECK(profile_from_json(nlohmann::json::parse(to_json(p).dump())) == p);
    const auto dir = testsupport::temp_dir("profile");
    save_profile(dir + "/p.json", p);
    CHECK(load_profile(dir + "/p.json") == p);
    p.error_rate[ErrorKind::Copy] = 1.5;
    CHECK_THROWS_AS(validate(p), ParameterError);
    CHECK_THROWS_AS(profile_from_json(nlohmann::json::parse("{\"error_rate\":{}}")), ParseError);
    CHECK_THROWS_AS(load_profile(dir + "/missing.json"), IoError);
}

TEST_CASE("applicable error kinds per task") {
    CHECK(applicable_error_kinds(TaskKind::MultistepArithmetic).size() == 4);
    CHECK(applicable_error_kinds(TaskKind::WordSorting).size() == 5);
    CHECK(applicable_error_kinds(TaskKind::DateUnderstanding).empty());
}

TEST_CASE("simulated attempts are deterministic and extreme profiles behave") {
    const auto insts = mixed_instances(3);
    auto perfect = initial_student_profile(1);
    perfect.default_competence = 1.0;
    auto hopeless = initial_student_profile(1);
    hopeless.default_competence = 0.0;
    for (auto& [k, r] : hopeless.error_rate) r = 1.0;
    for (const auto& inst : insts) {
        CHECK(simulate_attempt(inst, perfect).attempt == gold_rationale(inst));
        const auto a = simulate_attempt(inst, hopeless);
        CHECK(a.attempt == simulate_attempt(inst, hopeless).attempt);
        REQUIRE_FALSE(a.sites.empty());
        CHECK(a.sites.size() <= 3);
        const auto fb = scripted_feedback(inst, a.attempt);
        REQUIRE_FALSE(fb.terminal);
        CHECK(*fb.error_step == a.sites.front().step_label);
    }
}

TEST_CASE("a better profile never adds defects to a clean attempt") {
    const auto insts = mixed_instances(4);
    auto worse = initial_student_profile(9);
    auto better = worse;
    for (auto& [k, r] : better.error_rate) r *= 0.7;
    better.default_competence = 0.45;
    for (const auto& inst : insts) {
        // Answers can still flip, since two defects occasionally cancel out.
        if (simulate_attempt(inst, worse).sites.empty()) CHECK(simulate_attempt(inst, better).sites.empty());
    }
}

TEST_CASE("self-feedback and self-improvement at the extremes") {
    const auto insts = mixed_instances(2);
    auto quiet = initial_student_profile(3);
    quiet.si_propensity = 0.0;
    auto sharp = initial_student_profile(3);
    sharp.si_propensity = 1.0;
    sharp.default_competence = 1.0;
    for (auto& [k, r] : sharp.error_rate) r = 1.0;
    for (const auto& inst : insts) {
        auto hopeless = sharp;
        hopeless.default_competence = 0.0;
        const auto a = attempt(inst, hopeless);
        CHECK(self_feedback(inst, a, quiet).terminal);
        const auto fb = self_feedback(inst, a, sharp);
        CHECK(fb == scripted_feedback(inst, a));
        CHECK(answer_correct(inst, self_improve(inst, a, fb, sharp)));
    }
}

TEST_CASE("train_update follows its update rules") {
    auto p = initial_student_profile(0);
    p.si_propensity = 0.2;
    const std::vector<TrainingExample> d = {example(true, ErrorKind::Calculation, "l=3/d=2"),
                                            example(true, ErrorKind::Calculation, "l=3/d=2"),
                                            example(true, ErrorKind::Copy, "l=3/d=2", 2.0),
                                            example(false, std::nullopt, "l=3/d=2"),
                                            example(false, std::nullopt, "l=4/d=2")};
    const auto next = train_update(p, d, TrainConfig{1.0, 0.5});
    CHECK(next.iteration == 1);
    CHECK(next.rate(ErrorKind::Calculation) == doctest::Approx(0.45 * std::exp(-3.0 / 5.0)));
    CHECK(next.rate(ErrorKind::Copy) == doctest::Approx(0.30 * std::exp(-2.0 / 5.0)));
    CHECK(next.rate(ErrorKind::SortOrder) == p.rate(ErrorKind::SortOrder));
    CHECK(next.competence.at("MultistepArithmetic/l=3/d=2") == doctest::Approx(0.3 + 0.7 * 0.2));
    CHECK(next.si_propensity == doctest::Approx(0.5 * 0.2 + 0.5 * 0.6));
    CHECK_THROWS_AS(train_update(p, {}), UpdateError);
}

TEST_CASE("train_update is monotone on random datasets") {
    Rng rng(5);
    auto p = initial_student_profile(0);
    for (int round = 0; round < 50; ++round) {
        std::vector<TrainingExample> d;
        const auto n = 1 + rng.below(30);
        for (std::uint64_t i = 0; i < n; ++i) {
            const bool imp = rng.bernoulli(0.5);
            d.push_back(example(imp, imp ? std::optional(kAllErrorKinds[rng.below(7)]) : std::nullopt,
                                "l=" + std::to_string(3 + rng.below(2)) + "/d=2", 1.0 + rng.uniform()));
        }
        const auto next = train_update(p, d);
        for (ErrorKind k : kAllErrorKinds) CHECK(next.rate(k) <= p.rate(k));
        for (const auto& [key, c] : next.competence) {
            const auto it = p.competence.find(key);
            CHECK(c >= (it == p.competence.end() ? p.default_competence : it->second));
            CHECK(c <= 1.0);
        }
        CHECK(next.si_propensity >= 0.0);
        CHECK(next.si_propensity <= 1.0);
        p = next;
    }
}

TEST_CASE("remote student parses provider completions") {
    auto inst = load_fixture_instances(testsupport::data_path("remote_instances.jsonl")).at(0);
    const auto parsed = parse_attempt(inst.kind, testsupport::data("du_attempt.txt"));
    FixtureProvider fp({testsupport::data("du_attempt.txt") + " [END]", terminal_feedback(parsed).rendered,
                        "garbage without steps"});
    RemoteStudent student(std::shared_ptr<ProviderClient>(&fp, [](ProviderClient*) {}));
    const auto a = student.attempt(inst);
    CHECK(*a.final_answer == "(F)");
    CHECK(fp.requests()[0].prompt.find(inst.question) != std::string::npos);
    CHECK(student.self_feedback(inst, a, 1).terminal);
    CHECK_THROWS_AS(student.self_improve(inst, a, terminal_feedback(a), 1), ProviderFormatError);
}
