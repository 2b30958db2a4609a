// Runs every acceptance criterion and prints one PASS/FAIL line each.
// Exit status is the number of failing criteria.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "../support.hpp"
#include "tripost/driver.hpp"
#include "tripost/errors.hpp"
#include "tripost/parallel.hpp"

using namespace tripost;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects the first few failure messages of a criterion.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (ok) return;
        ++failures_;
        if (failures_ <= 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    Outcome done(const std::string& summary) const {
        if (failures_ == 0) return {true, summary};
        return {false, std::to_string(failures_) + " failure(s): " + notes_};
    }

private:
    std::size_t failures_ = 0;
    std::string notes_;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 2) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::vector<SubtaskParams> all_cells(TaskKind kind) {
    auto cells = grid_cells(kind, Split::Seen);
    for (const auto& c : grid_cells(kind, Split::Unseen)) cells.push_back(c);
    return cells;
}

// `total` instances spread as evenly as possible over every grid cell.
std::vector<TaskInstance> spread(TaskKind kind, std::size_t total, std::uint64_t seed) {
    const auto cells = all_cells(kind);
    std::vector<TaskInstance> out;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::size_t n = total / cells.size() + (i < total % cells.size() ? 1 : 0);
        auto v = generate_instances(kind, cells[i], n, seed + 100000 * i);
        out.insert(out.end(), v.begin(), v.end());
    }
    return out;
}

Outcome gold_validity() {
    const auto t0 = Clock::now();
    const auto insts = spread(TaskKind::MultistepArithmetic, 10000, 1);
    Check c;
    const auto verdicts = parallel_map(insts.size(), [&](std::size_t i) {
        const auto& inst = insts[i];
        const auto gold = gold_rationale(inst);
        const auto expected = testsupport::brute_force_value(inst.question);
        const bool value_ok = gold.final_answer && *gold.final_answer == to_string(expected) &&
                              inst.gold_answer == to_string(expected);
        return std::pair{value_ok, scripted_feedback(inst, gold).terminal};
    });
    std::size_t value_ok = 0, terminal = 0;
    for (const auto& [v, t] : verdicts) {
        value_ok += v;
        terminal += t;
    }
    const double secs = seconds_since(t0);
    c.expect(insts.size() == 10000, "instance count " + std::to_string(insts.size()));
    c.expect(value_ok == insts.size(), "answer mismatches " + std::to_string(insts.size() - value_ok));
    c.expect(terminal == insts.size(), "non-terminal gold " + std::to_string(insts.size() - terminal));
    c.expect(secs < 30.0, "runtime " + fmt(secs) + " s");
    return c.done(std::to_string(value_ok) + "/10000 answers, " + std::to_string(terminal) +
                  "/10000 terminal, " + fmt(secs) + " s");
}

Outcome golden_files() {
    using testsupport::data;
    Check c;
    const auto msa = testsupport::arithmetic_instance("((7 - -1 + -1 + -4) - (-7 + 7 * 3 * -9))", 4, 2);
    const auto msa_gold = gold_rationale(msa).text();
    c.expect(msa_gold == data("msa_gold_rationale.txt"), "arithmetic rationale differs");
    c.expect(msa_gold.find("So the answer is 199") != std::string::npos, "missing 'So the answer is 199'");

    const auto ws = testsupport::wordsort_instance({"sioux", "fortescue", "purloin", "percept", "helmsman"});
    const auto ws_gold = gold_rationale(ws).text();
    c.expect(ws_gold == data("ws_gold_rationale.txt"), "word-sort rationale differs");
    c.expect(ws_gold.find("fortescue helmsman percept purloin sioux") != std::string::npos, "word-sort answer");

    const auto imp_inst = testsupport::arithmetic_instance(
        "(((-9 * 3 + -6) * (-2 + 7 * -6)) - ((-4 - -6 + 6) * (4 * -4 + 8)))", 3, 3);
    const auto prev = parse_attempt(imp_inst.kind, data("msa_improve_attempt.txt"));
    const auto fb = scripted_feedback(imp_inst, prev);
    c.expect(fb.rendered == data("msa_improve_feedback.txt"), "arithmetic feedback differs");
    c.expect(fb.rendered.find("should be 1452") != std::string::npos, "missing 'should be 1452'");
    try {
        const auto up = scripted_improve(imp_inst, prev, fb);
        c.expect(improve_completion_text(prev, fb, up) == data("msa_improve_completion.txt"), "improvement differs");
    } catch (const Error& e) {
        c.expect(false, std::string("improvement threw: ") + e.what());
    }

    const auto sort_inst = testsupport::wordsort_instance({"cole", "estonia", "brian", "redneck", "coda"});
    WordSortDefect d;
    d.type = WordSortDefect::Type::SortOrder;
    d.label = "3.2.1";
    d.swap_at = 0;
    const auto sort_fb = scripted_feedback(sort_inst, render_wordsort(sort_inst, {d}));
    c.expect(sort_fb.rendered == data("ws_sort_feedback.txt"), "sort feedback differs");
    c.expect(sort_fb.rendered.find("smallest number should be 4") != std::string::npos, "missing 'smallest number should be 4'");

    const auto remote = load_fixture_instances(testsupport::data_path("remote_instances.jsonl"));
    for (const auto& [idx, stem] : {std::pair<std::size_t, std::string>{0, "du"}, {1, "ld"}}) {
        const auto& inst = remote.at(idx);
        const auto att = parse_attempt(inst.kind, data(stem + "_attempt.txt"));
        FixtureProvider fp({data(stem + "_feedback_completion.txt"), data(stem + "_improve_completion.txt")});
        try {
            const auto rfb = remote_feedback(inst, att, fp);
            const auto up = remote_improve(inst, att, rfb, fp);
            const auto completion = improve_completion_text(att, rfb, up);
            c.expect(completion == data(stem + "_improve_completion.txt"), stem + " improvement differs");
            c.expect(completion.find("the answer is (B). [END]") != std::string::npos, stem + " missing '(B). [END]'");
        } catch (const Error& e) {
            c.expect(false, stem + " threw: " + e.what());
        }
    }
    return c.done("all golden segments byte-identical");
}

struct SingleDefect {
    TaskInstance inst;
    InjectedAttempt injected;
};

// Exactly `n` single-defect attempts for a task, cycling through cells and kinds.
std::vector<SingleDefect> single_defects(TaskKind kind, std::size_t n, std::uint64_t seed) {
    const auto kinds = applicable_error_kinds(kind);
    std::vector<SingleDefect> out;
    Rng rng(seed);
    for (const auto& inst : spread(kind, 4 * n, seed)) {
        if (out.size() == n) break;
        auto injected = inject_defects(inst, {kinds[rng.below(kinds.size())]}, rng);
        if (injected.sites.size() != 1) continue;
        out.push_back({inst, std::move(injected)});
    }
    return out;
}

Outcome localization() {
    Check c;
    std::string summary;
    for (TaskKind kind : {TaskKind::MultistepArithmetic, TaskKind::WordSorting}) {
        const auto cases = single_defects(kind, 1000, 17);
        c.expect(cases.size() == 1000, std::string(to_string(kind)) + " produced " + std::to_string(cases.size()));
        std::size_t hit = 0;
        for (const auto& sd : cases) {
            const auto fb = scripted_feedback(sd.inst, sd.injected.attempt);
            const bool ok = !fb.terminal && fb.error_step == sd.injected.sites[0].step_label;
            hit += ok;
            c.expect(ok, std::string(to_string(kind)) + " " + sd.inst.id + " expected " + sd.injected.sites[0].step_label);
        }
        std::size_t false_pos = 0;
        for (const auto& inst : spread(kind, 1000, 23)) false_pos += !scripted_feedback(inst, gold_rationale(inst)).terminal;
        c.expect(false_pos == 0, std::string(to_string(kind)) + " false positives " + std::to_string(false_pos));
        summary += std::string(summary.empty() ? "" : ", ") + std::string(to_string(kind)) + " " +
                   std::to_string(hit) + "/" + std::to_string(cases.size()) + " located, " +
                   std::to_string(false_pos) + " false positives";
    }
    return c.done(summary);
}

// Replays a fixed attempt and never critiques itself.
class Replay : public StudentModel {
public:
    explicit Replay(Attempt a) : a_(std::move(a)) {}
    Attempt attempt(const TaskInstance&) override { return a_; }
    Feedback self_feedback(const TaskInstance&, const Attempt& a, int) override { return terminal_feedback(a); }
    Attempt self_improve(const TaskInstance&, const Attempt& prev, const Feedback&, int) override { return prev; }

private:
    Attempt a_;
};

Outcome editing_loop() {
    Check c;
    std::size_t accepted = 0, total = 0;
    for (TaskKind kind : {TaskKind::MultistepArithmetic, TaskKind::WordSorting}) {
        for (const auto& sd : single_defects(kind, 1000, 29)) {
            Replay student(sd.injected.attempt);
            RoutedFeedback fbk;
            RoutedImprovement imp;
            const auto t = edit_trajectory(sd.inst, student, fbk, imp, {1});
            ++total;
            accepted += t.accepted;
            c.expect(t.accepted, sd.inst.id + " rejected: " + t.reject_reason);
            if (!t.accepted) continue;
            c.expect(t.last_feedback().rendered.find(kTerminalPhraseAlso) != std::string::npos &&
                         signals_terminal(t.last_feedback().rendered),
                     sd.inst.id + " last feedback lacks the terminal phrase");
            c.expect(std::get<Attempt>(t.elements.front()).text() == sd.injected.attempt.text(),
                     sd.inst.id + " x_init changed");
            c.expect(answer_correct(sd.inst, t.final_attempt()), sd.inst.id + " final answer wrong");
        }
    }
    return c.done(std::to_string(accepted) + "/" + std::to_string(total) + " accepted, x_init preserved");
}

std::vector<ImprovementTriplet> clean_triplets(TaskKind kind, std::size_t n, std::uint64_t seed) {
    std::vector<Trajectory> ts;
    std::vector<TaskInstance> insts;
    for (const auto& sd : single_defects(kind, n, seed)) {
        Replay student(sd.injected.attempt);
        RoutedFeedback fbk;
        RoutedImprovement imp;
        auto t = edit_trajectory(sd.inst, student, fbk, imp, {1});
        if (!t.accepted) continue;
        t.iteration = 1;
        ts.push_back(std::move(t));
        insts.push_back(sd.inst);
    }
    return split(ts, index_instances(insts)).triplets;
}

Outcome filter_soundness() {
    Check c;
    std::vector<ImprovementTriplet> corpus;
    FilterStats expected;
    Rng rng(31);
    for (TaskKind kind : {TaskKind::MultistepArithmetic, TaskKind::WordSorting}) {
        for (auto t : clean_triplets(kind, 400, 37)) {
            const auto roll = rng.below(8);
            if (roll == 0) {
                t.trajectory_correct = false;
                ++expected.dropped_incorrect_final;
            } else if (roll == 1) {
                t.update = t.attempt;
                ++expected.dropped_no_difference;
            } else if (roll == 2) {
                // Rewrite only the final response so it contradicts the step before it.
                const auto gold_ans = *t.update.final_answer;
                std::string text = t.update.text();
                const auto at = text.rfind(gold_ans);
                const std::string wrong = kind == TaskKind::MultistepArithmetic ? gold_ans + "1" : "zzz " + gold_ans;
                text.replace(at, gold_ans.size(), wrong);
                t.update = parse_attempt(kind, text);
                ++expected.dropped_inconsistent;
            }
            corpus.push_back(std::move(t));
        }
    }
    expected.input = corpus.size();
    expected.kept = corpus.size() - expected.dropped_incorrect_final - expected.dropped_no_difference -
                    expected.dropped_inconsistent;
    FilterStats got;
    const auto kept = filter(corpus, &got);
    c.expect(got == expected, "tallies " + std::to_string(got.dropped_incorrect_final) + "/" +
                                  std::to_string(got.dropped_no_difference) + "/" +
                                  std::to_string(got.dropped_inconsistent) + " vs " +
                                  std::to_string(expected.dropped_incorrect_final) + "/" +
                                  std::to_string(expected.dropped_no_difference) + "/" +
                                  std::to_string(expected.dropped_inconsistent));
    FilterStats again;
    c.expect(filter(kept, &again) == kept && again.kept == kept.size(), "filter not idempotent");
    return c.done(std::to_string(got.input) + " in, drops " + std::to_string(got.dropped_incorrect_final) + "/" +
                  std::to_string(got.dropped_no_difference) + "/" + std::to_string(got.dropped_inconsistent) +
                  " as constructed, idempotent");
}

Outcome rebalance_criterion() {
    Check c;
    const auto triplets = clean_triplets(TaskKind::MultistepArithmetic, 400, 41);
    std::vector<TerminalPair> pairs;
    {
        std::vector<Trajectory> ts;
        const auto insts = spread(TaskKind::MultistepArithmetic, 400, 43);
        for (const auto& inst : insts) {
            auto t = gold_trajectory(inst);
            t.iteration = 1;
            ts.push_back(std::move(t));
        }
        pairs = split(ts, index_instances(insts)).pairs;
    }
    Rng rng(47);
    double worst = 0.0;
    std::size_t runs = 0;
    for (double p : {0.0, 0.05, 0.20, 0.43, 0.56, 0.70, 1.0}) {
        for (int trial = 0; trial < 50; ++trial) {
            const auto nt = 1 + rng.below(triplets.size());
            const auto nn = 1 + rng.below(pairs.size());
            const std::vector<ImprovementTriplet> t(triplets.begin(), triplets.begin() + static_cast<long>(nt));
            const std::vector<TerminalPair> n(pairs.begin(), pairs.begin() + static_cast<long>(nn));
            const auto d = rebalance(t, n, p, derive_seed(trial, "acceptance"));
            ++runs;
            const double total = static_cast<double>(d.size());
            const double got = static_cast<double>(d.triplets.size()) / total;
            worst = std::max(worst, std::abs(got - p) * total);
            c.expect(total > 0 && std::abs(got - p) <= 1.0 / total + 1e-12,
                     "p=" + fmt(p) + " sizes " + std::to_string(nt) + "+" + std::to_string(nn) + " got " + fmt(got, 4));
            c.expect(d.effective_p == got, "effective_p mismatch");
        }
    }
    const auto a = rebalance_auto(triplets, pairs);
    c.expect(a.triplets == triplets && a.pairs == pairs, "auto mode dropped items");
    c.expect(a.effective_p == static_cast<double>(triplets.size()) / static_cast<double>(triplets.size() + pairs.size()),
             "auto fraction inexact");
    return c.done(std::to_string(runs) + " rebalances, worst |kept - p*total| = " + fmt(worst, 3) + " samples");
}

Outcome emission() {
    Check c;
    const auto triplets = clean_triplets(TaskKind::WordSorting, 600, 53);
    std::vector<TerminalPair> pairs;
    {
        std::vector<Trajectory> ts;
        const auto insts = spread(TaskKind::WordSorting, 700, 59);
        for (const auto& inst : insts) {
            auto t = gold_trajectory(inst);
            t.iteration = 1;
            ts.push_back(std::move(t));
        }
        pairs = split(ts, index_instances(insts)).pairs;
    }
    const double p = 0.43;
    const auto dir = testsupport::temp_dir("acceptance_emit");
    auto d = rebalance(triplets, pairs, p, 61);
    const std::size_t need = 1000;
    // Top up to exactly 1000 examples with the remaining pairs.
    for (std::size_t i = 0; d.size() < need && i < pairs.size(); ++i) {
        bool present = false;
        for (const auto& q : d.pairs) present = present || q.id == pairs[i].id;
        if (!present) d.pairs.push_back(pairs[i]);
    }
    while (d.size() > need) d.pairs.pop_back();
    c.expect(d.size() == need, "could not assemble 1000 examples");
    emit(d, 1.5, dir + "/a.jsonl");
    emit(d, 1.5, dir + "/b.jsonl");
    c.expect(slurp(dir + "/a.jsonl") == slurp(dir + "/b.jsonl"), "bytes differ between identical emissions");
    const auto back = read_dataset(dir + "/a.jsonl");
    c.expect(back == build_examples(d, 1.5), "round-trip lost information");
    for (const auto& ex : back) {
        for (const auto& sp : ex.spans) {
            const bool weighted = sp.role == SpanRole::Feedback || sp.role == SpanRole::UpdatedAttempt;
            c.expect(sp.weight == (weighted ? 1.5 : 1.0), ex.id + " span weight " + fmt(sp.weight));
        }
    }
    for (const auto& ex : build_examples(d, 1.0)) {
        for (const auto& sp : ex.spans) c.expect(sp.weight == 1.0, ex.id + " non-uniform at w=1");
    }
    const auto again = rebalance(triplets, pairs, p, 61);
    emit(again, 1.5, dir + "/c.jsonl");
    emit(rebalance(triplets, pairs, p, 61), 1.5, dir + "/d.jsonl");
    c.expect(slurp(dir + "/c.jsonl") == slurp(dir + "/d.jsonl"), "seeded rebalance+emit not byte-stable");
    return c.done(std::to_string(back.size()) + " examples round-tripped, weights on fb/up only");
}

Outcome metrics_identities() {
    Check c;
    auto test = spread(TaskKind::MultistepArithmetic, 120, 67);
    auto ws = spread(TaskKind::WordSorting, 80, 71);
    test.insert(test.end(), ws.begin(), ws.end());
    auto profile = initial_student_profile(3);
    profile.si_propensity = 0.6;
    SimulatedStudent student(profile);
    std::vector<Trajectory> trajs;
    for (const auto& inst : test) trajs.push_back(student_trajectory(inst, student, 3));
    const auto r = evaluate(test, trajs, "acceptance");
    c.expect(r.total() == 200, "test size " + std::to_string(r.total()));
    c.expect(r.correct_seen + r.correct_unseen == r.direct_correct + r.si_success_seen + r.si_success_unseen,
             "Total != DirectlyCorrect + SI_Contrib (counts)");
    c.expect(std::abs(r.accuracy_total() - (r.directly_correct() + r.si_contribution())) < 1e-12,
             "Total != DirectlyCorrect + SI_Contrib (rates)");
    c.expect(r.si_contribution() <= r.si_frequency(), "SI_Contrib > SI_Freq");
    const double weighted = (*r.accuracy_seen() * static_cast<double>(r.n_seen) +
                             *r.accuracy_unseen() * static_cast<double>(r.n_unseen)) /
                            static_cast<double>(r.total());
    c.expect(std::abs(weighted - r.accuracy_total()) < 1e-12, "Total is not the weighted seen/unseen mean");
    c.expect(r.si_attempts > 0 && r.si_success_seen + r.si_success_unseen > 0, "degenerate fixture");
    const auto table = render_report({r});
    const auto header = table.substr(0, table.find('\n'));
    std::size_t at = 0;
    for (const char* col : {"Method", "p", "Seen", "Unseen", "Total", "SI Freq", "SI Contrib", "Directly Correct"}) {
        const auto pos = header.find(col, at);
        c.expect(pos != std::string::npos, std::string("column ") + col + " missing or out of order");
        if (pos != std::string::npos) at = pos;
    }
    c.expect(parse_report_csv(report_csv({r})) == std::vector<Report>{r}, "CSV round-trip");
    return c.done("Total " + fmt(100 * r.accuracy_total()) + " = DC " + fmt(100 * r.directly_correct()) +
                  " + SI " + fmt(100 * r.si_contribution()) + ", SI Freq " + fmt(100 * r.si_frequency()));
}

Outcome closed_loop() {
    Check c;
    const auto t0 = Clock::now();
    auto config = default_run_config();
    config.t = 3;
    config.p = 0.43;
    config.w = 1.5;
    config.output_dir = testsupport::temp_dir("acceptance_loop");
    const auto s = run(config);
    c.expect(s.completed && s.iterations.size() == 3, "run did not finish three iterations");
    std::string dc, ximp;
    StudentProfile prev = config.initial_profile;
    for (std::size_t i = 0; i < s.iterations.size(); ++i) {
        const auto& it = s.iterations[i];
        for (ErrorKind k : kAllErrorKinds) {
            c.expect(it.profile.rate(k) <= prev.rate(k), "error rate rose at iteration " + std::to_string(it.iteration));
        }
        prev = it.profile;
        dc += (dc.empty() ? "" : " -> ") + fmt(100 * it.report.directly_correct());
        ximp += (ximp.empty() ? "" : " -> ") + std::to_string(it.ximp_collected);
        if (i > 0) {
            c.expect(it.report.directly_correct() >= s.iterations[i - 1].report.directly_correct(),
                     "DirectlyCorrect fell at iteration " + std::to_string(it.iteration));
            c.expect(it.ximp_collected <= s.iterations[i - 1].ximp_collected,
                     "x_imp rose at iteration " + std::to_string(it.iteration));
        }
    }
    const std::vector<double> ps = {0.05, 0.20, 0.43, 0.56, 0.70};
    const auto reports = sweep(config, ps, testsupport::temp_dir("acceptance_sweep"));
    std::string freq;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        freq += (freq.empty() ? "" : " ") + fmt(100 * reports[i].si_frequency());
        if (i > 0) c.expect(reports[i].si_frequency() >= reports[i - 1].si_frequency(), "SI_Freq fell at p=" + fmt(ps[i]));
    }
    const double secs = seconds_since(t0);
    c.expect(secs < 300.0, "runtime " + fmt(secs) + " s");
    return c.done("DC " + dc + ", x_imp " + ximp + ", SI_Freq over p " + freq + ", " + fmt(secs) + " s");
}

Outcome determinism_resume() {
    Check c;
    auto config = default_run_config();
    config.t = 3;
    const auto ref = testsupport::temp_dir("acceptance_ref");
    config.output_dir = ref;
    run(config);
    std::size_t compared = 0;
    for (int k = 1; k <= 3; ++k) {
        for (Stage stage : {Stage::Edit, Stage::Postprocess, Stage::Train, Stage::Evaluate}) {
            const auto dir = testsupport::temp_dir("acceptance_halt_" + std::to_string(k) + std::string(to_string(stage)));
            config.output_dir = dir;
            RunOptions halt;
            halt.halt_after = std::pair{k, stage};
            run(config, halt);
            const auto s = resume(dir);
            c.expect(s.completed, "resume did not complete");
            for (int j = 1; j <= 3; ++j) {
                for (const char* f : {"dataset.jsonl", "report.csv"}) {
                    const auto rel = fs::path("iter_" + std::to_string(j)) / f;
                    ++compared;
                    c.expect(slurp(fs::path(dir) / rel) == slurp(fs::path(ref) / rel),
                             "halt " + std::to_string(k) + ":" + std::string(to_string(stage)) + " " + rel.string());
                }
            }
        }
    }
    return c.done(std::to_string(compared) + " files byte-identical across 12 halt points");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gold-rationale validity", gold_validity},
        {"golden files", golden_files},
        {"error localization", localization},
        {"editing loop", editing_loop},
        {"filter soundness", filter_soundness},
        {"rebalance", rebalance_criterion},
        {"emission", emission},
        {"metrics identities", metrics_identities},
        {"closed-loop trends", closed_loop},
        {"determinism/resume", determinism_resume},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << name << ": " << o.detail << std::endl;
    }
    return failed;
}
