#include "tripost/driver.hpp"

#include <openssl/evp.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tripost/errors.hpp"
#include "tripost/parallel.hpp"

namespace tripost {

namespace fs = std::filesystem;

namespace {

constexpr Stage kStages[] = {Stage::Edit, Stage::Postprocess, Stage::Train, Stage::Evaluate};

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

bool is_url(std::string_view s) {
    return s.rfind("http://", 0) == 0 || s.rfind("https://", 0) == 0;
}

std::shared_ptr<ProviderClient> http_provider(const std::string& url) {
    HttpProviderConfig c;
    c.url = url;
    return std::make_shared<HttpProviderClient>(std::move(c));
}

// "scripted", "<url>" (scripted where possible, remote otherwise) or
// "remote:<url>" (remote for every task).
std::unique_ptr<FeedbackModule> make_fbk(const std::string& spec) {
    if (spec == "scripted") return std::make_unique<RoutedFeedback>();
    if (spec.rfind("remote:", 0) == 0) return std::make_unique<RemoteFeedback>(http_provider(spec.substr(7)));
    return std::make_unique<RoutedFeedback>(http_provider(spec));
}

std::unique_ptr<ImprovementModule> make_imp(const std::string& spec) {
    if (spec == "scripted") return std::make_unique<RoutedImprovement>();
    if (spec.rfind("remote:", 0) == 0) return std::make_unique<RemoteImprovement>(http_provider(spec.substr(7)));
    return std::make_unique<RoutedImprovement>(http_provider(spec));
}

std::unique_ptr<StudentModel> make_student(const RunConfig& config, const StudentProfile& profile) {
    if (config.student == "simulated") return std::make_unique<SimulatedStudent>(profile);
    return std::make_unique<RemoteStudent>(http_provider(config.student));
}

void validate_module_spec(const std::string& spec, const std::string& what) {
    if (spec == "scripted") return;
    const std::string url = spec.rfind("remote:", 0) == 0 ? spec.substr(7) : spec;
    if (!is_url(url)) throw ParameterError(what + " must be \"scripted\", a URL or \"remote:<url>\"");
}

std::string iter_dir(int k) {
    return "iter_" + std::to_string(k);
}

nlohmann::ordered_json to_json(const FilterStats& s) {
    return {{"input", s.input},
            {"kept", s.kept},
            {"dropped_incorrect_final", s.dropped_incorrect_final},
            {"dropped_no_difference", s.dropped_no_difference},
            {"dropped_inconsistent", s.dropped_inconsistent}};
}

FilterStats filter_stats_from_json(const nlohmann::json& j) {
    FilterStats s;
    s.input = j.at("input").get<std::size_t>();
    s.kept = j.at("kept").get<std::size_t>();
    s.dropped_incorrect_final = j.at("dropped_incorrect_final").get<std::size_t>();
    s.dropped_no_difference = j.at("dropped_no_difference").get<std::size_t>();
    s.dropped_inconsistent = j.at("dropped_inconsistent").get<std::size_t>();
    return s;
}

nlohmann::ordered_json summary_json(const IterationSummary& s) {
    return {{"iteration", s.iteration},         {"trajectories", s.trajectories},
            {"edited", s.edited},               {"rejected", s.rejected},
            {"ximp_collected", s.ximp_collected}, {"buffer_size", s.buffer_size},
            {"dataset_size", s.dataset_size},   {"effective_p", s.effective_p},
            {"early_stopped", s.early_stopped}, {"filter", to_json(s.filter)}};
}

void summary_from_json(const nlohmann::json& j, IterationSummary& s) {
    s.iteration = j.at("iteration").get<int>();
    s.trajectories = j.at("trajectories").get<std::size_t>();
    s.edited = j.at("edited").get<std::size_t>();
    s.rejected = j.at("rejected").get<std::size_t>();
    s.ximp_collected = j.at("ximp_collected").get<std::size_t>();
    s.buffer_size = j.at("buffer_size").get<std::size_t>();
    s.dataset_size = j.at("dataset_size").get<std::size_t>();
    s.effective_p = j.at("effective_p").get<double>();
    s.early_stopped = j.at("early_stopped").get<bool>();
    s.filter = filter_stats_from_json(j.at("filter"));
}

// Instances of one task plan, split into training and test lists.
void plan_instances(const TaskPlan& plan, std::uint64_t seed, std::vector<TaskInstance>& train,
                    std::vector<TaskInstance>& test) {
    const std::string kind(to_string(plan.kind));
    if (!plan.fixture.empty()) {
        // Fixture tasks: the first train_per_cell seen instances of each cell train, the rest test.
        std::map<std::string, std::size_t> used;
        for (auto& inst : load_fixture_instances(plan.fixture)) {
            if (inst.kind != plan.kind) continue;
            auto& n = used[subtask_key(inst.kind, inst.params)];
            if (inst.split == Split::Seen && n < plan.train_per_cell) {
                ++n;
                train.push_back(std::move(inst));
            } else {
                test.push_back(std::move(inst));
            }
        }
        return;
    }
    for (const auto& cell : grid_cells(plan.kind, Split::Seen)) {
        const std::string key = subtask_key(plan.kind, cell);
        auto v = generate_instances(plan.kind, cell, plan.train_per_cell, derive_seed(seed, "train/" + kind + "/" + key));
        train.insert(train.end(), v.begin(), v.end());
    }
    for (Split split : {Split::Seen, Split::Unseen}) {
        for (const auto& cell : grid_cells(plan.kind, split)) {
            const std::string key = subtask_key(plan.kind, cell);
            auto v =
                generate_instances(plan.kind, cell, plan.test_per_cell, derive_seed(seed, "test/" + kind + "/" + key));
            test.insert(test.end(), v.begin(), v.end());
        }
    }
}

class Runner {
public:
    Runner(RunConfig config, fs::path dir) : config_(std::move(config)), dir_(std::move(dir)) {}

    RunSummary start(const RunOptions& options) {
        if (fs::exists(dir_ / "state.json")) {
            throw IoError(dir_.string() + " already holds a run; use resume");
        }
        fs::create_directories(dir_);
        write_text(dir_ / "config.json", tripost::to_json(config_).dump(2) + "\n");
        std::vector<TaskInstance> train, test;
        for (const auto& plan : config_.tasks) plan_instances(plan, config_.seed, train, test);
        index_instances(train);
        index_instances(test);
        write_instances((dir_ / "train.jsonl").string(), train);
        write_instances((dir_ / "test.jsonl").string(), test);
        std::vector<Trajectory> gold;
        for (const auto& inst : train) {
            if (is_scriptable(inst.kind)) gold.push_back(gold_trajectory(inst));
        }
        write_trajectories((dir_ / "gold.jsonl").string(), gold);
        state_ = nlohmann::ordered_json::object();
        state_["version"] = 1;
        state_["inputs"] = {{"config.json", sha256_file((dir_ / "config.json").string())},
                            {"train.jsonl", sha256_file((dir_ / "train.jsonl").string())},
                            {"test.jsonl", sha256_file((dir_ / "test.jsonl").string())},
                            {"gold.jsonl", sha256_file((dir_ / "gold.jsonl").string())}};
        state_["checkpoints"] = nlohmann::ordered_json::array();
        state_["warnings"] = nlohmann::ordered_json::array();
        state_["completed"] = false;
        save_state();
        load_inputs();
        profile_ = config_.initial_profile;
        return loop(1, 0, options);
    }

    RunSummary resume(const RunOptions& options) {
        try {
            state_ = nlohmann::ordered_json::parse(read_text(dir_ / "state.json"));
        } catch (const nlohmann::json::exception& e) {
            throw IntegrityError("state.json is corrupt: " + std::string(e.what()));
        }
        for (const auto& [file, hash] : state_.at("inputs").items()) verify(file, hash.get<std::string>());
        for (const auto& cp : state_.at("checkpoints")) {
            for (const auto& [file, hash] : cp.at("files").items()) verify(file, hash.get<std::string>());
        }
        load_inputs();
        profile_ = config_.initial_profile;
        int next_iter = 1;
        std::size_t next_stage = 0;
        for (const auto& cp : state_.at("checkpoints")) {
            const int k = cp.at("iteration").get<int>();
            const Stage stage = stage_from_string(cp.at("stage").get<std::string>());
            if (summary_.iterations.empty() || summary_.iterations.back().iteration != k) {
                summary_.iterations.emplace_back();
            }
            auto& it = summary_.iterations.back();
            summary_from_json(cp.at("summary"), it);
            if (stage == Stage::Train || (stage == Stage::Evaluate && it.early_stopped)) {
                profile_ = load_profile((dir_ / iter_dir(k) / "profile.json").string());
            }
            it.profile = profile_;
            if (stage == Stage::Evaluate) {
                it.report = parse_report_csv(read_text(dir_ / iter_dir(k) / "report.csv")).at(0);
            }
            const std::size_t idx = static_cast<std::size_t>(stage) + 1;
            next_iter = idx == 4 ? k + 1 : k;
            next_stage = idx == 4 ? 0 : idx;
        }
        for (const auto& w : state_.at("warnings")) summary_.warnings.push_back(w.get<std::string>());
        if (state_.at("completed").get<bool>()) {
            summary_.completed = true;
            return summary_;
        }
        return loop(next_iter, next_stage, options);
    }

private:
    void verify(const std::string& file, const std::string& hash) {
        const fs::path p = dir_ / file;
        if (!fs::exists(p)) throw IntegrityError("checkpoint file missing: " + file);
        if (sha256_file(p.string()) != hash) throw IntegrityError("checkpoint file was modified: " + file);
    }

    void load_inputs() {
        config_ = load_run_config((dir_ / "config.json").string());
        train_ = load_fixture_instances((dir_ / "train.jsonl").string());
        test_ = load_fixture_instances((dir_ / "test.jsonl").string());
        gold_ = read_trajectories((dir_ / "gold.jsonl").string());
        index_ = index_instances(train_);
    }

    void save_state() {
        const fs::path tmp = dir_ / "state.json.tmp";
        write_text(tmp, state_.dump(2) + "\n");
        fs::rename(tmp, dir_ / "state.json");
    }

    void checkpoint(int k, Stage stage, const std::vector<std::string>& files) {
        nlohmann::ordered_json cp;
        cp["iteration"] = k;
        cp["stage"] = std::string(to_string(stage));
        nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
        for (const auto& f : files) hashes[f] = sha256_file((dir_ / f).string());
        cp["files"] = std::move(hashes);
        cp["summary"] = summary_json(summary_.iterations.back());
        state_["checkpoints"].push_back(std::move(cp));
        save_state();
    }

    void warn(const std::string& message) {
        summary_.warnings.push_back(message);
        state_["warnings"].push_back(message);
    }

    RunSummary loop(int first_iter, std::size_t first_stage, const RunOptions& options) {
        for (int k = first_iter; k <= config_.t; ++k) {
            if (first_stage == 0) {
                summary_.iterations.emplace_back();
                summary_.iterations.back().iteration = k;
            }
            fs::create_directories(dir_ / iter_dir(k));
            for (std::size_t s = first_stage; s < 4; ++s) {
                const Stage stage = kStages[s];
                auto& it = summary_.iterations.back();
                if (it.early_stopped && (stage == Stage::Postprocess || stage == Stage::Train)) continue;
                run_stage(k, stage);
                if (options.halt_after && options.halt_after->first == k && options.halt_after->second == stage) {
                    return summary_;
                }
            }
            first_stage = 0;
            if (summary_.iterations.back().early_stopped) break;
        }
        state_["completed"] = true;
        save_state();
        summary_.completed = true;
        return summary_;
    }

    void run_stage(int k, Stage stage) {
        auto& it = summary_.iterations.back();
        const std::string d = iter_dir(k);
        switch (stage) {
        case Stage::Edit: {
            auto student = make_student(config_, profile_);
            auto fbk = make_fbk(config_.fbk);
            auto imp = make_imp(config_.imp);
            const EditConfig ec{config_.max_rounds};
            auto trajs = parallel_map(
                train_.size(),
                [&](std::size_t i) {
                    Trajectory t = edit_trajectory(train_[i], *student, *fbk, *imp, ec);
                    t.iteration = k;
                    return t;
                },
                config_.threads);
            it.trajectories = trajs.size();
            for (const auto& t : trajs) {
                if (!t.accepted) {
                    ++it.rejected;
                    continue;
                }
                if (t.provenance == Provenance::Edited) ++it.edited;
                it.ximp_collected += t.attempts().size() - 1;
            }
            write_trajectories((dir_ / d / "buffer.jsonl").string(), trajs);
            if (it.ximp_collected < config_.min_ximp) {
                it.early_stopped = true;
                warn("iteration " + std::to_string(k) + ": only " + std::to_string(it.ximp_collected) +
                     " improvement triplets collected (minimum " + std::to_string(config_.min_ximp) +
                     "); training skipped and the run stops here");
            }
            checkpoint(k, stage, {d + "/buffer.jsonl"});
            break;
        }
        case Stage::Postprocess: {
            std::vector<Trajectory> buffer = gold_;
            for (int j = config_.fresh_buffer ? k : 1; j <= k; ++j) {
                for (auto& t : read_trajectories((dir_ / iter_dir(j) / "buffer.jsonl").string())) {
                    if (t.accepted) buffer.push_back(std::move(t));
                }
            }
            it.buffer_size = buffer.size();
            auto parts = split(buffer, index_);
            auto kept = filter(parts.triplets, &it.filter);
            Dataset ds = config_.p ? rebalance(kept, parts.pairs, *config_.p,
                                               derive_seed(config_.seed, "rebalance/" + std::to_string(k)))
                                   : rebalance_auto(kept, parts.pairs);
            it.dataset_size = ds.size();
            it.effective_p = ds.effective_p;
            write_dataset_items((dir_ / d / "items.jsonl").string(), ds);
            emit(ds, config_.w, (dir_ / d / "dataset.jsonl").string());
            checkpoint(k, stage, {d + "/items.jsonl", d + "/dataset.jsonl"});
            break;
        }
        case Stage::Train: {
            const auto examples = read_dataset((dir_ / d / "dataset.jsonl").string());
            profile_ = train_update(profile_, examples, TrainConfig{config_.eta, 0.5});
            save_profile((dir_ / d / "profile.json").string(), profile_);
            it.profile = profile_;
            checkpoint(k, stage, {d + "/profile.json"});
            break;
        }
        case Stage::Evaluate: {
            std::vector<std::string> files;
            if (it.early_stopped) {
                save_profile((dir_ / d / "profile.json").string(), profile_);
                files.push_back(d + "/profile.json");
            }
            it.profile = profile_;
            auto student = make_student(config_, profile_);
            auto trajs = parallel_map(
                test_.size(),
                [&](std::size_t i) {
                    Trajectory t = student_trajectory(test_[i], *student, config_.max_rounds);
                    t.iteration = k;
                    return t;
                },
                config_.threads);
            write_trajectories((dir_ / d / "eval.jsonl").string(), trajs);
            it.report = evaluate(test_, trajs, "iter " + std::to_string(k));
            it.report.p = config_.p ? *config_.p : it.effective_p;
            write_text(dir_ / d / "report.csv", report_csv({it.report}));
            files.push_back(d + "/eval.jsonl");
            files.push_back(d + "/report.csv");
            checkpoint(k, stage, files);
            break;
        }
        }
    }

    RunConfig config_;
    fs::path dir_;
    nlohmann::ordered_json state_;
    std::vector<TaskInstance> train_, test_;
    std::vector<Trajectory> gold_;
    InstanceIndex index_;
    StudentProfile profile_;
    RunSummary summary_;
};

std::string p_dir_name(double p) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << p;
    return "p_" + ss.str();
}

}  // namespace

void RunConfig::validate() const {
    if (t < 1) throw ParameterError("t must be at least 1");
    if (p && !(*p >= 0.0 && *p <= 1.0)) throw ParameterError("p must be in [0, 1] or auto");
    if (!(w >= 1.0)) throw ParameterError("w must be at least 1");
    if (max_rounds < 1) throw ParameterError("max_rounds must be at least 1");
    if (!(eta > 0.0)) throw ParameterError("eta must be positive");
    if (tasks.empty()) throw ParameterError("at least one task is required");
    if (output_dir.empty()) throw ParameterError("output_dir is empty");
    if (student != "simulated" && !is_url(student)) throw ParameterError("student must be \"simulated\" or a URL");
    validate_module_spec(fbk, "fbk");
    validate_module_spec(imp, "imp");
    for (const auto& plan : tasks) {
        if (!is_scriptable(plan.kind)) {
            if (plan.fixture.empty()) {
                throw ParameterError(std::string(to_string(plan.kind)) + " needs an instance fixture");
            }
            if (student == "simulated") {
                throw ParameterError(std::string(to_string(plan.kind)) + " needs a remote student");
            }
            if (fbk == "scripted" || imp == "scripted") {
                throw ParameterError(std::string(to_string(plan.kind)) + " needs remote FBK and IMP");
            }
        }
    }
    tripost::validate(initial_profile);
}

RunConfig default_run_config() {
    RunConfig c;
    c.tasks = {TaskPlan{TaskKind::MultistepArithmetic, 40, 20, ""}, TaskPlan{TaskKind::WordSorting, 20, 10, ""}};
    c.initial_profile = initial_student_profile(c.seed);
    return c;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["t"] = c.t;
    if (c.p) {
        j["p"] = *c.p;
    } else {
        j["p"] = "auto";
    }
    j["w"] = c.w;
    j["max_rounds"] = c.max_rounds;
    j["eta"] = c.eta;
    j["seed"] = c.seed;
    nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
    for (const auto& plan : c.tasks) {
        nlohmann::ordered_json tj;
        tj["kind"] = std::string(to_string(plan.kind));
        tj["train_per_cell"] = plan.train_per_cell;
        tj["test_per_cell"] = plan.test_per_cell;
        if (!plan.fixture.empty()) tj["fixture"] = plan.fixture;
        tasks.push_back(std::move(tj));
    }
    j["tasks"] = std::move(tasks);
    j["student"] = c.student;
    j["fbk"] = c.fbk;
    j["imp"] = c.imp;
    j["output_dir"] = c.output_dir;
    j["min_ximp"] = c.min_ximp;
    j["fresh_buffer"] = c.fresh_buffer;
    j["threads"] = c.threads;
    j["initial_profile"] = to_json(c.initial_profile);
    return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c = default_run_config();
    try {
        c.t = j.value("t", c.t);
        if (j.contains("p")) {
            const auto& p = j.at("p");
            if (p.is_string()) {
                if (p.get<std::string>() != "auto") throw ParameterError("p must be a number or \"auto\"");
                c.p = std::nullopt;
            } else {
                c.p = p.get<double>();
            }
        }
        c.w = j.value("w", c.w);
        c.max_rounds = j.value("max_rounds", c.max_rounds);
        c.eta = j.value("eta", c.eta);
        c.seed = j.value("seed", c.seed);
        if (j.contains("tasks")) {
            c.tasks.clear();
            for (const auto& tj : j.at("tasks")) {
                TaskPlan plan;
                plan.kind = task_kind_from_string(tj.at("kind").get<std::string>());
                plan.train_per_cell = tj.value("train_per_cell", plan.train_per_cell);
                plan.test_per_cell = tj.value("test_per_cell", plan.test_per_cell);
                plan.fixture = tj.value("fixture", "");
                c.tasks.push_back(std::move(plan));
            }
        }
        c.student = j.value("student", c.student);
        c.fbk = j.value("fbk", c.fbk);
        c.imp = j.value("imp", c.imp);
        c.output_dir = j.value("output_dir", c.output_dir);
        c.min_ximp = j.value("min_ximp", c.min_ximp);
        c.fresh_buffer = j.value("fresh_buffer", c.fresh_buffer);
        c.threads = j.value("threads", c.threads);
        c.initial_profile =
            j.contains("initial_profile") ? profile_from_json(j.at("initial_profile")) : initial_student_profile(c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("run config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::string& path) {
    try {
        return run_config_from_json(nlohmann::json::parse(read_text(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string_view to_string(Stage stage) {
    switch (stage) {
    case Stage::Edit: return "edit";
    case Stage::Postprocess: return "postprocess";
    case Stage::Train: return "train";
    case Stage::Evaluate: return "evaluate";
    }
    return "?";
}

Stage stage_from_string(std::string_view name) {
    for (Stage s : kStages) {
        if (to_string(s) == name) return s;
    }
    throw ParseError("unknown stage: " + std::string(name));
}

RunSummary run(const RunConfig& config, const RunOptions& options) {
    config.validate();
    return Runner(config, config.output_dir).start(options);
}

RunSummary resume(const std::string& run_dir, const RunOptions& options) {
    if (!fs::exists(fs::path(run_dir) / "state.json")) throw IntegrityError("no checkpoint in " + run_dir);
    RunConfig placeholder = default_run_config();
    return Runner(placeholder, run_dir).resume(options);
}

std::vector<Report> sweep(const RunConfig& base, const std::vector<double>& ps, const std::string& out_dir) {
    std::vector<Report> rows;
    for (double p : ps) {
        RunConfig c = base;
        c.p = p;
        c.output_dir = (fs::path(out_dir) / p_dir_name(p)).string();
        const RunSummary s = run(c);
        if (s.iterations.empty()) throw EvaluationError("sweep run for p=" + std::to_string(p) + " produced nothing");
        Report r = s.iterations.back().report;
        r.label = "p=" + p_dir_name(p).substr(2);
        r.p = p;
        rows.push_back(std::move(r));
    }
    fs::create_directories(out_dir);
    write_text(fs::path(out_dir) / "sweep.csv", report_csv(rows));
    return rows;
}

std::vector<Report> run_reports(const std::string& run_dir) {
    std::vector<Report> rows;
    for (int k = 1;; ++k) {
        const fs::path p = fs::path(run_dir) / iter_dir(k) / "report.csv";
        if (!fs::exists(p)) break;
        for (auto& r : parse_report_csv(read_text(p))) rows.push_back(std::move(r));
    }
    if (rows.empty()) throw EvaluationError("no iteration reports under " + run_dir);
    return rows;
}

std::string sha256_file(const std::string& path) {
    const std::string data = read_text(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw IoError("sha256 failed for " + path);
    }
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
    return out.str();
}

}  // namespace tripost
