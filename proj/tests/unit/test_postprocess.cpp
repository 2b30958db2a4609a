#include <doctest.h>

#include <cmath>
#include <set>

#include "../support.hpp"
#include "tripost/errors.hpp"
#include "tripost/postprocess.hpp"

using namespace tripost;

namespace {

ArithmeticDefect defect(ArithmeticDefect::Type type, std::size_t step, std::size_t link = 0, int delta = 2) {
    ArithmeticDefect d;
    d.type = type;
    d.step = step;
    d.link = link;
    d.delta = delta;
    return d;
}

Trajectory make(const TaskInstance& inst, std::vector<Attempt> attempts, Provenance prov) {
    Trajectory t;
    t.instance_id = inst.id;
    t.task = inst.kind;
    t.iteration = 1;
    t.provenance = prov;
    t.accepted = true;
    for (const auto& a : attempts) {
        t.elements.push_back(a);
        auto fb = scripted_feedback(inst, a);
        t.elements.push_back(fb);
    }
    return t;
}

const auto kCalc = ArithmeticDefect::Type::Calculation;

std::vector<TaskInstance> pool_instances(std::size_t n) {
    return generate_instances(TaskKind::MultistepArithmetic, {4, 2}, n, 300);
}

// One triplet and one pair per instance.
SplitResult pool(std::size_t n) {
    std::vector<Trajectory> ts;
    const auto insts = pool_instances(n);
    for (const auto& inst : insts) {
        ts.push_back(make(inst, {render_arithmetic(inst, {defect(kCalc, 2)}), gold_rationale(inst)},
                          Provenance::Edited));
    }
    return split(ts, index_instances(insts));
}

}  // namespace

TEST_CASE("split turns feedbacks into triplets and pairs") {
    const auto inst = testsupport::arithmetic_instance("((7 - -1 + -1 + -4) - (-7 + 7 * 3 * -9))", 4, 2);
    const auto idx = index_instances({inst});
    const auto gold = gold_rationale(inst);
    const auto one = render_arithmetic(inst, {defect(kCalc, 3)});
    const auto two = render_arithmetic(inst, {defect(kCalc, 1), defect(kCalc, 2)});

    auto s = split({make(inst, {one, gold}, Provenance::Edited)}, idx);
    CHECK(s.triplets.size() == 1);
    CHECK(s.pairs.size() == 1);
    CHECK(s.triplets[0].id == inst.id + "@1/i0");
    CHECK(s.pairs[0].id == inst.id + "@1/t1");
    CHECK(s.triplets[0].update == gold);
    CHECK(s.triplets[0].trajectory_correct);

    s = split({make(inst, {gold}, Provenance::DirectlyCorrect)}, idx);
    CHECK(s.triplets.empty());
    CHECK(s.pairs.size() == 1);

    s = split({make(inst, {two, one, gold}, Provenance::Edited)}, idx);
    CHECK(s.triplets.size() == 2);
    CHECK(s.pairs.size() == 1);
    CHECK(s.triplets[1].attempt == one);

    Trajectory lying = make(inst, {one}, Provenance::Edited);
    lying.elements[1] = terminal_feedback(one);
    CHECK_THROWS_AS(split({lying}, idx), DataError);
    Trajectory open = make(inst, {one}, Provenance::Edited);
    CHECK_THROWS_AS(split({open}, idx), DataError);
    CHECK_THROWS_AS(split({make(inst, {gold}, Provenance::Gold)}, {}), DataError);
}

TEST_CASE("filter applies its three checks in order") {
    const auto inst = testsupport::arithmetic_instance("((7 - -1 + -1 + -4) - (-7 + 7 * 3 * -9))", 4, 2);
    const auto idx = index_instances({inst});
    const auto gold = gold_rationale(inst);
    const auto bad = render_arithmetic(inst, {defect(kCalc, 3)});
    auto good = split({make(inst, {bad, gold}, Provenance::Edited)}, idx).triplets.at(0);

    auto wrong_end = good;
    wrong_end.trajectory_correct = false;
    auto same = good;
    same.update = same.attempt;
    // The update still ends on the gold value but its final response says otherwise.
    auto inconsistent = good;
    inconsistent.update = render_arithmetic(inst, {defect(ArithmeticDefect::Type::FinalInconsistent, 6, 0, 2)});

    FilterStats stats;
    const auto kept = filter({good, wrong_end, same, inconsistent, good}, &stats);
    CHECK(kept.size() == 2);
    CHECK(stats == FilterStats{5, 2, 1, 1, 1});
    CHECK(filter(kept) == kept);
}

TEST_CASE("final consistency on hand-built attempts") {
    const auto inst = testsupport::arithmetic_instance("((3 * 5 + 0) + (4 - 2))", 3, 2);
    const auto base = gold_rationale(inst);
    REQUIRE(final_consistent(inst.kind, inst.question, base));
    auto text = base.text();
    const auto pos = text.rfind("the answer is ");
    REQUIRE(pos != std::string::npos);
    const auto mismatched = text.substr(0, pos) + "the answer is 15.";
    CHECK_FALSE(final_consistent(inst.kind, inst.question, parse_attempt(inst.kind, mismatched)));

    const auto ws = testsupport::wordsort_instance({"pear", "apple", "fig"});
    CHECK(final_consistent(ws.kind, ws.question, gold_rationale(ws)));
    auto wtext = gold_rationale(ws).text();
    const auto wpos = wtext.rfind("the answer is ");
    const auto swapped = wtext.substr(0, wpos) + "the answer is apple pear fig.";
    CHECK_FALSE(final_consistent(ws.kind, ws.question, parse_attempt(ws.kind, swapped)));
}

TEST_CASE("rebalance downsamples one side to reach p") {
    auto big = pool(600);
    REQUIRE(big.triplets.size() >= 43);
    REQUIRE(big.pairs.size() >= 570);
    std::vector<ImprovementTriplet> t(big.triplets.begin(), big.triplets.begin() + 43);
    std::vector<TerminalPair> n(big.pairs.begin(), big.pairs.begin() + 570);
    const auto d = rebalance(t, n, 0.43, 7);
    CHECK(d.triplets.size() == 43);
    CHECK(d.pairs.size() == 57);
    CHECK(d.effective_p == doctest::Approx(0.43));
    CHECK(rebalance(t, n, 0.43, 7).pairs == d.pairs);

    const auto none = rebalance(t, n, 0.0, 1);
    CHECK(none.triplets.empty());
    CHECK(none.pairs.size() == 570);
    const auto all = rebalance(t, n, 1.0, 1);
    CHECK(all.triplets.size() == 43);
    CHECK(all.pairs.empty());

    CHECK_THROWS_AS(rebalance(t, n, 1.2, 1), ParameterError);
    CHECK_THROWS_AS(rebalance(t, n, -0.1, 1), ParameterError);
    CHECK_THROWS_AS(rebalance({}, n, 0.3, 1), BalanceError);
    CHECK_THROWS_AS(rebalance(t, {}, 0.3, 1), BalanceError);
    CHECK_NOTHROW(rebalance({}, n, 0.0, 1));

    const auto a = rebalance_auto(t, n);
    CHECK(a.size() == 613);
    CHECK(a.effective_p == doctest::Approx(43.0 / 613.0));
}

TEST_CASE("rebalance keeps one side whole and lands within one sample") {
    auto big = pool(400);
    Rng rng(99);
    for (int trial = 0; trial < 60; ++trial) {
        const auto nt = 1 + rng.below(big.triplets.size()), nn = 1 + rng.below(big.pairs.size());
        std::vector<ImprovementTriplet> t(big.triplets.begin(), big.triplets.begin() + static_cast<long>(nt));
        std::vector<TerminalPair> n(big.pairs.begin(), big.pairs.begin() + static_cast<long>(nn));
        const double p = 0.05 + 0.9 * rng.uniform();
        const auto d = rebalance(t, n, p, trial);
        CHECK((d.triplets.size() == nt || d.pairs.size() == nn));
        CHECK(std::abs(static_cast<double>(d.triplets.size()) - p * static_cast<double>(d.size())) <= 1.0);
        std::set<std::string> ids;
        for (const auto& x : t) ids.insert(x.id);
        for (const auto& x : d.triplets) CHECK(ids.count(x.id) == 1);
    }
}

TEST_CASE("emitted examples carry weighted spans and round-trip") {
    const auto s = pool(500);
    auto d = rebalance_auto(s.triplets, s.pairs);
    d.pairs.resize(1000 - d.triplets.size());
    const auto dir = testsupport::temp_dir("emit");
    emit(d, 1.5, dir + "/dataset.jsonl");
    const auto back = read_dataset(dir + "/dataset.jsonl");
    REQUIRE(back.size() == 1000);
    CHECK(back == build_examples(d, 1.5));

    for (const auto& ex : back) {
        std::string joined;
        for (const auto& sp : ex.spans) {
            joined += sp.text;
            const bool weighted = sp.role == SpanRole::Feedback || sp.role == SpanRole::UpdatedAttempt;
            CHECK(sp.weight == (weighted ? 1.5 : 1.0));
        }
        CHECK(joined == ex.text());
        CHECK(ex.spans.size() == (ex.is_improvement() ? 4u : 3u));
        if (ex.is_improvement()) CHECK(ex.reason_kind == ErrorKind::Calculation);
    }
    for (const auto& ex : build_examples(d, 1.0)) {
        for (const auto& sp : ex.spans) CHECK(sp.weight == 1.0);
    }
    CHECK_THROWS_AS(build_examples(d, 0.5), ParameterError);

    write_dataset_items(dir + "/items.jsonl", d);
    const auto items = read_dataset_items(dir + "/items.jsonl");
    CHECK(items.triplets == d.triplets);
    CHECK(items.pairs == d.pairs);
    CHECK(items.effective_p == d.effective_p);
}
