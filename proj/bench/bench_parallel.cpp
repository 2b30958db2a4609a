#include <benchmark/benchmark.h>

#include "tripost/parallel.hpp"
#include "tripost/trajectory.hpp"

using namespace tripost;

namespace {

std::vector<TaskInstance> instances() {
    static const auto v = [] {
        auto a = generate_instances(TaskKind::MultistepArithmetic, {4, 2}, 200, 1);
        auto w = generate_instances(TaskKind::WordSorting, {7, std::nullopt}, 200, 1);
        a.insert(a.end(), w.begin(), w.end());
        return a;
    }();
    return v;
}

auto editor(const std::vector<TaskInstance>& insts, const StudentProfile& profile) {
    return [&insts, &profile](std::size_t i) {
        SimulatedStudent student(profile);
        RoutedFeedback fbk;
        RoutedImprovement imp;
        return edit_trajectory(insts[i], student, fbk, imp);
    };
}

void BM_EditSerial(benchmark::State& state) {
    const auto insts = instances();
    const auto profile = initial_student_profile(0);
    for (auto _ : state) benchmark::DoNotOptimize(serial_map(insts.size(), editor(insts, profile)));
    state.SetItemsProcessed(state.iterations() * static_cast<long>(insts.size()));
}

void BM_EditParallel(benchmark::State& state) {
    const auto insts = instances();
    const auto profile = initial_student_profile(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(parallel_map(insts.size(), editor(insts, profile), static_cast<int>(state.range(0))));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<long>(insts.size()));
}

void BM_GoldSerial(benchmark::State& state) {
    const auto insts = instances();
    for (auto _ : state) {
        benchmark::DoNotOptimize(serial_map(insts.size(), [&](std::size_t i) { return gold_rationale(insts[i]).text(); }));
    }
}

void BM_GoldParallel(benchmark::State& state) {
    const auto insts = instances();
    for (auto _ : state) {
        benchmark::DoNotOptimize(parallel_map(
            insts.size(), [&](std::size_t i) { return gold_rationale(insts[i]).text(); }, static_cast<int>(state.range(0))));
    }
}

}  // namespace

BENCHMARK(BM_EditSerial)->UseRealTime();
BENCHMARK(BM_EditParallel)->Arg(2)->Arg(4)->Arg(0)->UseRealTime();
BENCHMARK(BM_GoldSerial)->UseRealTime();
BENCHMARK(BM_GoldParallel)->Arg(2)->Arg(4)->Arg(0)->UseRealTime();

BENCHMARK_MAIN();
