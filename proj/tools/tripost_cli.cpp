#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "tripost/driver.hpp"
#include "tripost/errors.hpp"
#include "tripost/parallel.hpp"

using namespace tripost;

namespace {

std::optional<double> parse_p(const std::string& s) {
    if (s == "auto") return std::nullopt;
    try {
        return std::stod(s);
    } catch (const std::exception&) {
        throw ParameterError("p must be a number or \"auto\": " + s);
    }
}

std::pair<int, Stage> parse_halt(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw ParameterError("--halt-after expects <iteration>:<stage>");
    return {std::stoi(s.substr(0, colon)), stage_from_string(s.substr(colon + 1))};
}

void print_summary(const RunSummary& s) {
    std::vector<Report> rows;
    for (const auto& it : s.iterations) {
        std::cout << "iteration " << it.iteration << ": trajectories=" << it.trajectories << " edited=" << it.edited
                  << " rejected=" << it.rejected << " x_imp=" << it.ximp_collected << " dataset=" << it.dataset_size
                  << " effective_p=" << it.effective_p << '\n';
        if (it.report.total() > 0) rows.push_back(it.report);
    }
    for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
    if (!rows.empty()) std::cout << render_report(rows);
    if (!s.completed) std::cout << "run halted before completion\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Self-improvement data pipeline: generate, edit, post-process, emit, train, evaluate"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "Generate task instances");
    std::string gen_task = "MultistepArithmetic", gen_out;
    int gen_l = 3;
    std::optional<int> gen_d;
    std::size_t gen_count = 10;
    std::uint64_t gen_seed = 0;
    gen->add_option("--task", gen_task, "Task kind");
    gen->add_option("--l", gen_l, "Length parameter");
    gen->add_option("--d", gen_d, "Nesting depth (arithmetic)");
    gen->add_option("--count", gen_count, "Number of instances");
    gen->add_option("--seed", gen_seed, "Base seed");
    gen->add_option("--out", gen_out, "Output file")->required();

    // edit
    auto* edit = app.add_subcommand("edit", "Edit student trajectories into a buffer file");
    std::string edit_instances, edit_profile, edit_out, edit_fbk = "scripted", edit_imp = "scripted";
    int edit_rounds = 3, edit_iter = 1, threads = 0;
    edit->add_option("--instances", edit_instances)->required();
    edit->add_option("--profile", edit_profile, "Student profile (default: untrained)");
    edit->add_option("--fbk", edit_fbk);
    edit->add_option("--imp", edit_imp);
    edit->add_option("--max-rounds", edit_rounds);
    edit->add_option("--iteration", edit_iter);
    edit->add_option("--threads", threads);
    edit->add_option("--out", edit_out)->required();

    // postprocess
    auto* post = app.add_subcommand("postprocess", "Split, filter and rebalance buffers");
    std::vector<std::string> post_buffers;
    std::string post_instances, post_p = "0.43", post_out;
    std::uint64_t post_seed = 0;
    bool post_gold = true;
    post->add_option("--buffer", post_buffers)->required();
    post->add_option("--instances", post_instances)->required();
    post->add_option("--p", post_p, "Proportion of improvement triplets or \"auto\"");
    post->add_option("--seed", post_seed);
    post->add_flag("!--no-gold", post_gold, "Leave out gold rationales");
    post->add_option("--out", post_out)->required();

    // emit
    auto* emit_cmd = app.add_subcommand("emit", "Write weighted training examples");
    std::string emit_items, emit_out;
    double emit_w = 1.5;
    emit_cmd->add_option("--items", emit_items)->required();
    emit_cmd->add_option("--w", emit_w);
    emit_cmd->add_option("--out", emit_out)->required();

    // metrics
    auto* metrics = app.add_subcommand("metrics", "Report accuracy and self-improvement metrics");
    std::string metrics_run, metrics_out;
    metrics->add_option("--run", metrics_run)->required();
    metrics->add_option("--out", metrics_out);

    // run / resume / sweep
    auto* run_cmd = app.add_subcommand("run", "Run the full loop");
    std::string run_config, halt;
    run_cmd->add_option("--config", run_config, "JSON config (default settings otherwise)");
    std::string run_out;
    run_cmd->add_option("--out", run_out, "Override output_dir");
    run_cmd->add_option("--halt-after", halt, "Stop after <iteration>:<stage>");

    auto* resume_cmd = app.add_subcommand("resume", "Continue an interrupted run");
    std::string resume_dir;
    resume_cmd->add_option("dir", resume_dir)->required();
    resume_cmd->add_option("--halt-after", halt);

    auto* sweep_cmd = app.add_subcommand("sweep", "One run per p");
    std::string sweep_config, sweep_out = "sweep";
    std::vector<double> sweep_ps{0.05, 0.20, 0.43, 0.56, 0.70};
    sweep_cmd->add_option("--config", sweep_config);
    sweep_cmd->add_option("--p", sweep_ps);
    sweep_cmd->add_option("--out", sweep_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            SubtaskParams params{gen_l, gen_d};
            write_instances(gen_out, generate_instances(task_kind_from_string(gen_task), params, gen_count, gen_seed));
        } else if (edit->parsed()) {
            const auto instances = load_fixture_instances(edit_instances);
            StudentProfile profile = edit_profile.empty() ? initial_student_profile(0) : load_profile(edit_profile);
            SimulatedStudent student(profile);
            RunConfig c = default_run_config();
            c.fbk = edit_fbk;
            c.imp = edit_imp;
            std::unique_ptr<FeedbackModule> fbk;
            std::unique_ptr<ImprovementModule> imp;
            auto provider = [](const std::string& spec, bool force) -> std::shared_ptr<ProviderClient> {
                HttpProviderConfig hc;
                hc.url = force ? spec.substr(7) : spec;
                return std::make_shared<HttpProviderClient>(hc);
            };
            if (edit_fbk == "scripted") {
                fbk = std::make_unique<RoutedFeedback>();
            } else if (edit_fbk.rfind("remote:", 0) == 0) {
                fbk = std::make_unique<RemoteFeedback>(provider(edit_fbk, true));
            } else {
                fbk = std::make_unique<RoutedFeedback>(provider(edit_fbk, false));
            }
            if (edit_imp == "scripted") {
                imp = std::make_unique<RoutedImprovement>();
            } else if (edit_imp.rfind("remote:", 0) == 0) {
                imp = std::make_unique<RemoteImprovement>(provider(edit_imp, true));
            } else {
                imp = std::make_unique<RoutedImprovement>(provider(edit_imp, false));
            }
            auto trajs = parallel_map(
                instances.size(),
                [&](std::size_t i) {
                    Trajectory t = edit_trajectory(instances[i], student, *fbk, *imp, EditConfig{edit_rounds});
                    t.iteration = edit_iter;
                    return t;
                },
                threads);
            write_trajectories(edit_out, trajs);
            std::size_t accepted = 0;
            for (const auto& t : trajs) accepted += t.accepted;
            std::cout << accepted << " of " << trajs.size() << " trajectories accepted\n";
        } else if (post->parsed()) {
            const auto instances = load_fixture_instances(post_instances);
            std::vector<Trajectory> buffer;
            if (post_gold) {
                for (const auto& inst : instances) {
                    if (is_scriptable(inst.kind)) buffer.push_back(gold_trajectory(inst));
                }
            }
            for (const auto& path : post_buffers) {
                for (auto& t : read_trajectories(path)) {
                    if (t.accepted) buffer.push_back(std::move(t));
                }
            }
            auto parts = split(buffer, index_instances(instances));
            FilterStats stats;
            auto kept = filter(parts.triplets, &stats);
            const auto p = parse_p(post_p);
            Dataset ds = p ? rebalance(kept, parts.pairs, *p, post_seed) : rebalance_auto(kept, parts.pairs);
            write_dataset_items(post_out, ds);
            std::cout << "triplets " << parts.triplets.size() << " (kept " << stats.kept << "), pairs "
                      << parts.pairs.size() << ", dataset " << ds.size() << ", effective p " << ds.effective_p << '\n';
        } else if (emit_cmd->parsed()) {
            emit(read_dataset_items(emit_items), emit_w, emit_out);
        } else if (metrics->parsed()) {
            const auto rows = run_reports(metrics_run);
            std::cout << render_report(rows);
            if (!metrics_out.empty()) {
                std::ofstream out(metrics_out, std::ios::binary | std::ios::trunc);
                out << report_csv(rows);
                if (!out) throw IoError("cannot write " + metrics_out);
            }
        } else if (run_cmd->parsed()) {
            RunConfig c = run_config.empty() ? default_run_config() : load_run_config(run_config);
            if (!run_out.empty()) c.output_dir = run_out;
            RunOptions o;
            if (!halt.empty()) o.halt_after = parse_halt(halt);
            print_summary(run(c, o));
        } else if (resume_cmd->parsed()) {
            RunOptions o;
            if (!halt.empty()) o.halt_after = parse_halt(halt);
            print_summary(resume(resume_dir, o));
        } else if (sweep_cmd->parsed()) {
            RunConfig c = sweep_config.empty() ? default_run_config() : load_run_config(sweep_config);
            std::cout << render_report(sweep(c, sweep_ps, sweep_out));
        }
    } catch (const ProviderTransportError& e) {
        std::cerr << "provider unavailable: " << e.what() << "\nthe run can be continued with `resume`\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
