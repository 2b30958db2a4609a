#include "tripost/postprocess.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include "tripost/errors.hpp"
#include "tripost/rng.hpp"

namespace tripost {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string strip_period(std::string s) {
    s = trim(s);
    while (!s.empty() && s.back() == '.') s.pop_back();
    return trim(s);
}

std::vector<std::string> split_words(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

// Lower-cased alphanumeric tokens ("01/02/1930" stays one token).
std::set<std::string> tokens(std::string_view s) {
    std::set<std::string> out;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.insert(cur);
        cur.clear();
    };
    for (char c : s) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '/' || c == '-') {
            cur += static_cast<char>(std::tolower(u));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

// "(A) text" lines of a multiple-choice question.
std::map<char, std::string> options_of(std::string_view question) {
    std::map<char, std::string> out;
    std::size_t pos = 0;
    while (pos <= question.size()) {
        auto nl = question.find('\n', pos);
        if (nl == std::string_view::npos) nl = question.size();
        const std::string line = trim(question.substr(pos, nl - pos));
        if (line.size() >= 3 && line[0] == '(' && line[2] == ')' && std::isupper(static_cast<unsigned char>(line[1]))) {
            out[line[1]] = trim(std::string_view(line).substr(3));
        }
        pos = nl + 1;
    }
    return out;
}

std::optional<char> option_letter(std::string_view answer) {
    const std::string a = trim(answer);
    if (a.size() >= 3 && a[0] == '(' && a[2] == ')' && std::isupper(static_cast<unsigned char>(a[1]))) return a[1];
    return std::nullopt;
}

bool choice_consistent(std::string_view question, const Step& before, std::string_view answer) {
    const auto letter = option_letter(answer);
    if (!letter) return false;
    const auto options = options_of(question);
    if (!options.count(*letter)) return false;
    // Score each option by how many of its distinguishing tokens the step mentions.
    std::map<char, std::set<std::string>> own;
    for (const auto& [k, text] : options) own[k] = tokens(text);
    std::map<std::string, int> freq;
    for (const auto& [k, ts] : own) {
        for (const auto& t : ts) ++freq[t];
    }
    const auto step_tokens = tokens(before.body());
    std::map<char, double> score;
    double best = 0.0;
    for (const auto& [k, ts] : own) {
        int unique = 0, hit = 0;
        for (const auto& t : ts) {
            if (freq[t] != 1) continue;
            ++unique;
            if (step_tokens.count(t)) ++hit;
        }
        score[k] = unique ? static_cast<double>(hit) / unique : 0.0;
        best = std::max(best, score[k]);
    }
    if (best == 0.0) return true;  // the step names no option; nothing to contradict
    return score[*letter] == best;
}

std::string source_name(const Trajectory& t) {
    return t.instance_id + "@" + std::to_string(t.iteration);
}

nlohmann::ordered_json common_json(std::string_view type, const std::string& id, const std::string& source,
                                   TaskKind task, Split split, const std::string& subtask, const std::string& question) {
    nlohmann::ordered_json j;
    j["type"] = std::string(type);
    j["id"] = id;
    j["source_id"] = source;
    j["task"] = std::string(to_string(task));
    j["split"] = std::string(to_string(split));
    j["subtask"] = subtask;
    j["question"] = question;
    return j;
}

std::size_t rounded(double v) {
    return static_cast<std::size_t>(std::llround(v));
}

std::vector<std::size_t> keep_indices(std::size_t n, std::size_t k, std::uint64_t seed, std::string_view side) {
    Rng rng(derive_seed(seed, std::string("rebalance/") + std::string(side)));
    return sample_indices(rng, n, k);
}

}  // namespace

InstanceIndex index_instances(const std::vector<TaskInstance>& instances) {
    InstanceIndex out;
    for (const auto& inst : instances) {
        if (!out.emplace(inst.id, inst).second) throw DataError("duplicate instance id " + inst.id);
    }
    return out;
}

SplitResult split(const std::vector<Trajectory>& trajectories, const InstanceIndex& instances) {
    SplitResult out;
    for (const auto& t : trajectories) {
        validate_alternation(t);
        auto it = instances.find(t.instance_id);
        if (it == instances.end()) throw DataError("trajectory " + source_name(t) + " names an unknown instance");
        const TaskInstance& inst = it->second;
        const std::string source = source_name(t);
        const std::string subtask = subtask_key(inst.kind, inst.params);
        const bool correct = answer_correct(inst, t.final_attempt());
        for (std::size_t i = 0; i + 1 < t.elements.size(); i += 2) {
            const Attempt& att = std::get<Attempt>(t.elements[i]);
            const Feedback& fb = std::get<Feedback>(t.elements[i + 1]);
            const std::size_t k = i / 2;
            if (fb.terminal) {
                if (!answer_correct(inst, att)) {
                    throw DataError("trajectory " + source + " closes on an incorrect attempt");
                }
                out.pairs.push_back({source + "/t" + std::to_string(k), source, inst.kind, inst.split, subtask,
                                     inst.question, att, fb});
                continue;
            }
            if (i + 2 >= t.elements.size()) {
                throw DataError("trajectory " + source + " ends without a terminal feedback");
            }
            out.triplets.push_back({source + "/i" + std::to_string(k), source, inst.kind, inst.split, subtask,
                                    inst.question, att, fb, std::get<Attempt>(t.elements[i + 2]), correct});
        }
    }
    return out;
}

bool final_consistent(TaskKind kind, std::string_view question, const Attempt& attempt) {
    if (!attempt.final_answer || attempt.steps.size() < 2) return false;
    const Step& last = attempt.steps.back();
    if (last.label != kFinalResponseLabel) return false;
    const Step& before = attempt.steps[attempt.steps.size() - 2];
    const std::string answer = strip_period(*attempt.final_answer);
    switch (kind) {
    case TaskKind::MultistepArithmetic: {
        const auto* chain = std::get_if<EquationChain>(&before.payload);
        if (!chain || chain->terms.empty()) return false;
        try {
            const auto result = arith::parse(chain->terms.back());
            const auto given = arith::parse(answer);
            if (result.is_group() || given.is_group()) return false;
            const auto a = arith::evaluate(result), b = arith::evaluate(given);
            return a && b && *a == *b;
        } catch (const Error&) {
            return false;
        }
    }
    case TaskKind::WordSorting: {
        std::vector<std::string> words;
        if (const auto* o = std::get_if<Ordering>(&before.payload)) {
            for (const auto& item : o->items) {
                if (item.words.size() != 1) return false;
                words.push_back(item.words.front());
            }
        } else if (const auto* c = std::get_if<Combine>(&before.payload)) {
            words = c->words;
        } else {
            return false;
        }
        return words == split_words(answer);
    }
    default:
        return choice_consistent(question, before, answer);
    }
}

std::vector<ImprovementTriplet> filter(const std::vector<ImprovementTriplet>& triplets, FilterStats* stats) {
    FilterStats s;
    std::vector<ImprovementTriplet> kept;
    for (const auto& t : triplets) {
        ++s.input;
        if (!t.trajectory_correct) {
            ++s.dropped_incorrect_final;
            continue;
        }
        if (t.update.steps == t.attempt.steps) {
            ++s.dropped_no_difference;
            continue;
        }
        if (!final_consistent(t.task, t.question, t.update)) {
            ++s.dropped_inconsistent;
            continue;
        }
        kept.push_back(t);
    }
    s.kept = kept.size();
    if (stats) *stats = s;
    return kept;
}

Dataset rebalance(const std::vector<ImprovementTriplet>& triplets, const std::vector<TerminalPair>& pairs, double p,
                  std::uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) throw ParameterError("p must be in [0, 1]");
    const std::size_t t = triplets.size(), n = pairs.size();
    if (p > 0.0 && t == 0) throw BalanceError("p > 0 needs at least one improvement triplet");
    if (p < 1.0 && n == 0) throw BalanceError("p < 1 needs at least one terminal pair");

    std::size_t keep_t = t, keep_n = n;
    if (p == 0.0) {
        keep_t = 0;
    } else if (p == 1.0) {
        keep_n = 0;
    } else {
        // Either all triplets with fewer pairs, or all pairs with fewer triplets.
        const std::size_t want_n = rounded(static_cast<double>(t) * (1.0 - p) / p);
        const std::size_t want_t = rounded(static_cast<double>(n) * p / (1.0 - p));
        const bool a = want_n <= n, b = want_t <= t;
        if (a && (!b || t + want_n >= want_t + n)) {
            keep_n = want_n;
        } else if (b) {
            keep_t = want_t;
        }
    }

    Dataset out;
    for (std::size_t i : keep_indices(t, keep_t, seed, "triplets")) out.triplets.push_back(triplets[i]);
    for (std::size_t i : keep_indices(n, keep_n, seed, "pairs")) out.pairs.push_back(pairs[i]);
    out.effective_p = out.size() ? static_cast<double>(out.triplets.size()) / static_cast<double>(out.size()) : 0.0;
    return out;
}

Dataset rebalance_auto(const std::vector<ImprovementTriplet>& triplets, const std::vector<TerminalPair>& pairs) {
    Dataset out{triplets, pairs, 0.0};
    out.effective_p = out.size() ? static_cast<double>(triplets.size()) / static_cast<double>(out.size()) : 0.0;
    return out;
}

std::vector<TrainingExample> build_examples(const Dataset& dataset, double w) {
    if (!(w >= 1.0)) throw ParameterError("w must be at least 1");
    std::vector<TrainingExample> out;
    out.reserve(dataset.size());
    for (const auto& t : dataset.triplets) {
        TrainingExample ex;
        ex.id = t.id;
        ex.task = t.task;
        ex.split = t.split;
        ex.subtask = t.subtask;
        ex.reason_kind = t.feedback.reason_kind;
        ex.spans = {{SpanRole::Question, t.question + "\n", 1.0},
                    {SpanRole::InitAttempt, "Answer: " + t.attempt.text() + "\n", 1.0},
                    {SpanRole::Feedback, "Feedback: " + t.feedback.rendered + "\n", w},
                    {SpanRole::UpdatedAttempt, "Updated Answer: " + t.update.text(), w}};
        out.push_back(std::move(ex));
    }
    for (const auto& p : dataset.pairs) {
        TrainingExample ex;
        ex.id = p.id;
        ex.task = p.task;
        ex.split = p.split;
        ex.subtask = p.subtask;
        ex.spans = {{SpanRole::Question, p.question + "\n", 1.0},
                    {SpanRole::InitAttempt, "Answer: " + p.attempt.text() + "\n", 1.0},
                    {SpanRole::TerminalFeedback, "Feedback: " + p.feedback.rendered, 1.0}};
        out.push_back(std::move(ex));
    }
    return out;
}

void emit(const Dataset& dataset, double w, const std::string& path) {
    write_dataset(path, build_examples(dataset, w));
}

nlohmann::ordered_json to_json(const ImprovementTriplet& t) {
    auto j = common_json("triplet", t.id, t.source_id, t.task, t.split, t.subtask, t.question);
    j["attempt"] = t.attempt.text();
    j["feedback"] = to_json(t.feedback);
    j["update"] = t.update.text();
    j["trajectory_correct"] = t.trajectory_correct;
    return j;
}

nlohmann::ordered_json to_json(const TerminalPair& p) {
    auto j = common_json("pair", p.id, p.source_id, p.task, p.split, p.subtask, p.question);
    j["attempt"] = p.attempt.text();
    j["feedback"] = to_json(p.feedback);
    return j;
}

ImprovementTriplet triplet_from_json(const nlohmann::json& j) {
    try {
        ImprovementTriplet t;
        t.id = j.at("id").get<std::string>();
        t.source_id = j.at("source_id").get<std::string>();
        t.task = task_kind_from_string(j.at("task").get<std::string>());
        t.split = split_from_string(j.at("split").get<std::string>());
        t.subtask = j.at("subtask").get<std::string>();
        t.question = j.at("question").get<std::string>();
        t.attempt = parse_attempt(t.task, j.at("attempt").get<std::string>());
        t.feedback = feedback_from_json(j.at("feedback"));
        t.update = parse_attempt(t.task, j.at("update").get<std::string>());
        t.trajectory_correct = j.at("trajectory_correct").get<bool>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("triplet record: ") + e.what());
    }
}

TerminalPair pair_from_json(const nlohmann::json& j) {
    try {
        TerminalPair p;
        p.id = j.at("id").get<std::string>();
        p.source_id = j.at("source_id").get<std::string>();
        p.task = task_kind_from_string(j.at("task").get<std::string>());
        p.split = split_from_string(j.at("split").get<std::string>());
        p.subtask = j.at("subtask").get<std::string>();
        p.question = j.at("question").get<std::string>();
        p.attempt = parse_attempt(p.task, j.at("attempt").get<std::string>());
        p.feedback = feedback_from_json(j.at("feedback"));
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("pair record: ") + e.what());
    }
}

void write_dataset_items(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    nlohmann::ordered_json head;
    head["type"] = "meta";
    head["effective_p"] = dataset.effective_p;
    out << head.dump() << '\n';
    for (const auto& t : dataset.triplets) out << to_json(t).dump() << '\n';
    for (const auto& p : dataset.pairs) out << to_json(p).dump() << '\n';
    if (!out) throw IoError("write failed for " + path);
}

Dataset read_dataset_items(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Dataset d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const std::string type = j.at("type").get<std::string>();
            if (type == "meta") {
                d.effective_p = j.at("effective_p").get<double>();
            } else if (type == "triplet") {
                d.triplets.push_back(triplet_from_json(j));
            } else if (type == "pair") {
                d.pairs.push_back(pair_from_json(j));
            } else {
                throw ParseError("unknown item type " + type);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return d;
}

}  // namespace tripost
