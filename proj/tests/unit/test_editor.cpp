#include <doctest.h>

#include "../support.hpp"
#include "tripost/errors.hpp"
#include "tripost/trajectory.hpp"

using namespace tripost;

namespace {

// Replays a fixed first attempt and never critiques itself.
class CannedStudent : public StudentModel {
public:
    explicit CannedStudent(Attempt a) : a_(std::move(a)) {}
    Attempt attempt(const TaskInstance&) override { return a_; }
    Feedback self_feedback(const TaskInstance&, const Attempt& a, int) override { return terminal_feedback(a); }
    Attempt self_improve(const TaskInstance&, const Attempt& prev, const Feedback&, int) override { return prev; }

private:
    Attempt a_;
};

// Repairs only the flagged defect, leaving any later one in place.
class OneAtATime : public ImprovementModule {
public:
    OneAtATime(TaskInstance inst, std::vector<ArithmeticDefect> remaining)
        : inst_(std::move(inst)), remaining_(std::move(remaining)) {}
    Attempt improve(const TaskInstance&, const Attempt&, const Feedback&) override {
        remaining_.erase(remaining_.begin());
        return render_arithmetic(inst_, remaining_);
    }

private:
    TaskInstance inst_;
    std::vector<ArithmeticDefect> remaining_;
};

class Throwing : public ImprovementModule {
public:
    Attempt improve(const TaskInstance&, const Attempt&, const Feedback&) override {
        throw ProviderTransportError("down");
    }
};

Feedback fb_at(const std::string& step, const std::string& seg) {
    Feedback f;
    f.error_step = step;
    f.error_segment = seg;
    return f;
}

TaskInstance msa() {
    return testsupport::arithmetic_instance("((7 - -1 + -1 + -4) - (-7 + 7 * 3 * -9))", 4, 2);
}

ArithmeticDefect calc(std::size_t step) {
    ArithmeticDefect d;
    d.type = ArithmeticDefect::Type::Calculation;
    d.step = step;
    d.delta = 2;
    return d;
}

}  // namespace

TEST_CASE("disagreement index compares structure, not wording") {
    Feedback term;
    term.terminal = true;
    CHECK(disagreement_index({term}, {fb_at("2", "x")}) == 0u);
    CHECK_FALSE(disagreement_index({fb_at("2", "x")}, {fb_at("2", "x")}).has_value());
    auto reworded = fb_at("2", "x");
    reworded.reason_text = "different words";
    CHECK_FALSE(disagreement_index({fb_at("2", "x")}, {reworded}).has_value());
    CHECK(disagreement_index({fb_at("2", "x")}, {fb_at("2", "x"), term}) == 1u);
    CHECK(disagreement_index({fb_at("2", "x")}, {fb_at("3", "x")}) == 0u);
    CHECK(disagreement_index({fb_at("2", "x")}, {fb_at("2", "y")}) == 0u);
    CHECK(disagreement_index({}, {term}) == 0u);
}

TEST_CASE("single calculation error edits into attempt, feedback, update, terminal") {
    const auto inst = msa();
    const auto bad = render_arithmetic(inst, {calc(2)});
    CannedStudent student(bad);
    RoutedFeedback fbk;
    RoutedImprovement imp;
    const auto t = edit_trajectory(inst, student, fbk, imp, {1});
    CHECK(t.accepted);
    CHECK(t.provenance == Provenance::Edited);
    REQUIRE(t.elements.size() == 4);
    CHECK(std::get<Attempt>(t.elements[0]) == bad);
    CHECK(std::get<Attempt>(t.elements[0]).text() == bad.text());
    CHECK(*std::get<Feedback>(t.elements[1]).error_step == "3");
    CHECK(signals_terminal(t.last_feedback().rendered));
    CHECK(answer_correct(inst, t.final_attempt()));
}

TEST_CASE("directly correct attempts are kept without editing") {
    const auto inst = msa();
    CannedStudent student(gold_rationale(inst));
    RoutedFeedback fbk;
    Throwing imp;
    const auto t = edit_trajectory(inst, student, fbk, imp);
    CHECK(t.accepted);
    CHECK(t.provenance == Provenance::DirectlyCorrect);
    CHECK(t.elements.size() == 2);
}

TEST_CASE("a repair that leaves a second defect is rejected when rounds run out") {
    const auto inst = msa();
    const std::vector<ArithmeticDefect> defects = {calc(1), calc(2)};
    CannedStudent student(render_arithmetic(inst, defects));
    RoutedFeedback fbk;
    OneAtATime one(inst, defects);
    const auto t = edit_trajectory(inst, student, fbk, one, {1});
    CHECK_FALSE(t.accepted);
    CHECK(t.reject_reason == "round_budget");
    validate_alternation(t);
    OneAtATime two(inst, defects);
    CHECK(edit_trajectory(inst, student, fbk, two, {2}).accepted);
}

TEST_CASE("impossible improvements are rejected, transport errors propagate") {
    const auto inst = msa();
    CannedStudent student(render_arithmetic(inst, {calc(2)}));
    RoutedFeedback fbk;
    Throwing imp;
    CHECK_THROWS_AS(edit_trajectory(inst, student, fbk, imp), ProviderTransportError);
    CHECK_THROWS_AS(edit_trajectory(inst, student, fbk, imp, {0}), ParameterError);

    class Blind : public FeedbackModule {
    public:
        Feedback feedback(const TaskInstance& i, const Attempt& a) override {
            auto fb = scripted_feedback(i, a);
            if (!fb.terminal) return error_feedback(a, "Final response", "the answer is", std::nullopt, "x");
            return fb;
        }
    } blind;
    RoutedImprovement scripted;
    const auto t = edit_trajectory(inst, student, blind, scripted);
    CHECK_FALSE(t.accepted);
    CHECK(t.reject_reason == "improvement_impossible");
}

TEST_CASE("single-defect attempts always edit to accepted trajectories") {
    RoutedFeedback fbk;
    RoutedImprovement imp;
    std::size_t n = 0;
    for (TaskKind kind : {TaskKind::MultistepArithmetic, TaskKind::WordSorting}) {
        for (const auto& cell : grid_cells(kind, Split::Seen)) {
            for (const auto& inst : generate_instances(kind, cell, 10, 55)) {
                for (ErrorKind e : applicable_error_kinds(kind)) {
                    Rng rng(n++);
                    const auto injected = inject_defects(inst, {e}, rng);
                    CannedStudent student(injected.attempt);
                    const auto t = edit_trajectory(inst, student, fbk, imp, {1});
                    CHECK(t.accepted);
                    CHECK(std::get<Attempt>(t.elements.front()) == injected.attempt);
                    CHECK(signals_terminal(t.last_feedback().rendered));
                }
            }
        }
    }
}

TEST_CASE("student trajectories respect the round cap and alternate") {
    auto p = initial_student_profile(4);
    p.si_propensity = 1.0;
    p.default_competence = 0.0;
    SimulatedStudent student(p);
    for (const auto& inst : generate_instances(TaskKind::WordSorting, {9, std::nullopt}, 20, 8)) {
        const auto t = student_trajectory(inst, student, 2);
        validate_alternation(t);
        CHECK(t.attempts().size() <= 3);
    }
}

TEST_CASE("trajectory files round-trip and malformed ones are rejected") {
    const auto inst = msa();
    CannedStudent student(render_arithmetic(inst, {calc(3)}));
    RoutedFeedback fbk;
    RoutedImprovement imp;
    auto t = edit_trajectory(inst, student, fbk, imp);
    t.iteration = 2;
    const auto g = gold_trajectory(inst);
    const auto dir = testsupport::temp_dir("traj");
    write_trajectories(dir + "/b.jsonl", {t});
    append_trajectories(dir + "/b.jsonl", {g});
    const auto back = read_trajectories(dir + "/b.jsonl");
    REQUIRE(back.size() == 2);
    CHECK(back[0] == t);
    CHECK(back[1] == g);

    Trajectory broken = t;
    broken.elements.pop_back();
    CHECK_THROWS_AS(validate_alternation(broken), DataError);
    std::swap(broken.elements[0], broken.elements[1]);
    CHECK_THROWS_WITH_AS(validate_alternation(broken), doctest::Contains(inst.id.c_str()), DataError);
}
