#include "tripost/trajectory.hpp"

#include <fstream>
#include <sstream>

#include "tripost/errors.hpp"

namespace tripost {

namespace {

std::string trajectory_name(const Trajectory& t) {
    return t.instance_id + "@" + std::to_string(t.iteration);
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Answers compare after trimming, dropping a trailing period and folding
// whitespace runs; a multiple-choice answer reduces to its "(X)" tag.
std::string normalize_answer(std::string_view raw) {
    std::string s = trim(raw);
    while (!s.empty() && s.back() == '.') s.pop_back();
    std::string out;
    bool space = false;
    for (char c : s) {
        if (c == ' ' || c == '\t' || c == '\n') {
            space = true;
            continue;
        }
        if (space && !out.empty()) out += ' ';
        space = false;
        out += c;
    }
    if (out.size() >= 3 && out[0] == '(' && out[2] == ')' && out[1] >= 'A' && out[1] <= 'Z') return out.substr(0, 3);
    return out;
}

void write_lines(const std::string& path, const std::vector<Trajectory>& ts, std::ios::openmode mode) {
    std::ofstream out(path, std::ios::binary | mode);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& t : ts) out << serialize_trajectory(t) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace

std::string_view to_string(Provenance p) {
    switch (p) {
    case Provenance::Gold: return "gold";
    case Provenance::DirectlyCorrect: return "directly_correct";
    case Provenance::Edited: return "edited";
    }
    return "?";
}

Provenance provenance_from_string(std::string_view name) {
    if (name == "gold") return Provenance::Gold;
    if (name == "directly_correct") return Provenance::DirectlyCorrect;
    if (name == "edited") return Provenance::Edited;
    throw ParseError("unknown provenance: " + std::string(name));
}

std::vector<const Attempt*> Trajectory::attempts() const {
    std::vector<const Attempt*> out;
    for (const auto& e : elements) {
        if (const auto* a = std::get_if<Attempt>(&e)) out.push_back(a);
    }
    return out;
}

std::vector<const Feedback*> Trajectory::feedbacks() const {
    std::vector<const Feedback*> out;
    for (const auto& e : elements) {
        if (const auto* f = std::get_if<Feedback>(&e)) out.push_back(f);
    }
    return out;
}

const Attempt& Trajectory::final_attempt() const {
    for (auto it = elements.rbegin(); it != elements.rend(); ++it) {
        if (const auto* a = std::get_if<Attempt>(&*it)) return *a;
    }
    throw DataError("trajectory " + trajectory_name(*this) + " has no attempt");
}

const Feedback& Trajectory::last_feedback() const {
    if (elements.empty() || !std::holds_alternative<Feedback>(elements.back())) {
        throw DataError("trajectory " + trajectory_name(*this) + " does not end with a feedback");
    }
    return std::get<Feedback>(elements.back());
}

void validate_alternation(const Trajectory& t) {
    if (t.elements.size() < 2 || t.elements.size() % 2 != 0) {
        throw DataError("trajectory " + trajectory_name(t) + " has " + std::to_string(t.elements.size()) +
                        " elements; expected attempt/feedback pairs");
    }
    for (std::size_t i = 0; i < t.elements.size(); ++i) {
        const bool attempt = std::holds_alternative<Attempt>(t.elements[i]);
        if (attempt != (i % 2 == 0)) {
            throw DataError("trajectory " + trajectory_name(t) + " breaks alternation at element " + std::to_string(i));
        }
    }
}

nlohmann::ordered_json to_json(const Trajectory& t) {
    nlohmann::ordered_json j;
    j["instance_id"] = t.instance_id;
    j["task"] = std::string(to_string(t.task));
    j["iteration"] = t.iteration;
    j["provenance"] = std::string(to_string(t.provenance));
    j["accepted"] = t.accepted;
    if (!t.reject_reason.empty()) j["reject_reason"] = t.reject_reason;
    nlohmann::ordered_json elems = nlohmann::ordered_json::array();
    for (const auto& e : t.elements) {
        if (const auto* a = std::get_if<Attempt>(&e)) {
            nlohmann::ordered_json ja;
            ja["type"] = "attempt";
            ja["text"] = a->text();
            elems.push_back(std::move(ja));
        } else {
            nlohmann::ordered_json jf;
            jf["type"] = "feedback";
            jf["feedback"] = to_json(std::get<Feedback>(e));
            elems.push_back(std::move(jf));
        }
    }
    j["elements"] = std::move(elems);
    return j;
}

Trajectory trajectory_from_json(const nlohmann::json& j) {
    Trajectory t;
    try {
        t.instance_id = j.at("instance_id").get<std::string>();
        t.task = task_kind_from_string(j.at("task").get<std::string>());
        t.iteration = j.at("iteration").get<int>();
        t.provenance = provenance_from_string(j.at("provenance").get<std::string>());
        t.accepted = j.at("accepted").get<bool>();
        t.reject_reason = j.value("reject_reason", "");
        for (const auto& e : j.at("elements")) {
            const std::string type = e.at("type").get<std::string>();
            if (type == "attempt") {
                t.elements.emplace_back(parse_attempt(t.task, e.at("text").get<std::string>()));
            } else if (type == "feedback") {
                t.elements.emplace_back(feedback_from_json(e.at("feedback")));
            } else {
                throw ParseError("unknown element type: " + type);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("trajectory record: ") + e.what());
    }
    validate_alternation(t);
    return t;
}

std::string serialize_trajectory(const Trajectory& t) {
    return to_json(t).dump();
}

void write_trajectories(const std::string& path, const std::vector<Trajectory>& ts) {
    write_lines(path, ts, std::ios::trunc);
}

void append_trajectories(const std::string& path, const std::vector<Trajectory>& ts) {
    write_lines(path, ts, std::ios::app);
}

std::vector<Trajectory> read_trajectories(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Trajectory> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(trajectory_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const Error& e) {
            throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

bool answer_correct(const TaskInstance& inst, const Attempt& attempt) {
    return attempt.final_answer && normalize_answer(*attempt.final_answer) == normalize_answer(inst.gold_answer);
}

Trajectory gold_trajectory(const TaskInstance& inst) {
    Trajectory t;
    t.instance_id = inst.id;
    t.task = inst.kind;
    t.provenance = Provenance::Gold;
    t.accepted = true;
    Attempt gold = gold_rationale(inst);
    Feedback fb = terminal_feedback(gold);
    t.elements.emplace_back(std::move(gold));
    t.elements.emplace_back(std::move(fb));
    return t;
}

Trajectory student_trajectory(const TaskInstance& inst, StudentModel& student, int max_rounds) {
    Trajectory t;
    t.instance_id = inst.id;
    t.task = inst.kind;
    Attempt current = student.attempt(inst);
    for (int round = 1;; ++round) {
        Feedback fb = student.self_feedback(inst, current, round);
        const bool done = fb.terminal || round > max_rounds;
        Attempt next;
        if (!done) next = student.self_improve(inst, current, fb, round);
        t.elements.emplace_back(std::move(current));
        t.elements.emplace_back(std::move(fb));
        if (done) break;
        current = std::move(next);
    }
    t.accepted = answer_correct(inst, t.final_attempt());
    t.provenance = t.elements.size() == 2 && t.accepted ? Provenance::DirectlyCorrect : Provenance::Edited;
    return t;
}

std::optional<std::size_t> disagreement_index(const std::vector<Feedback>& student_fbs,
                                              const std::vector<Feedback>& fbk_fbs) {
    const std::size_t n = std::max(student_fbs.size(), fbk_fbs.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= student_fbs.size() || i >= fbk_fbs.size()) return i;
        if (!same_judgement(student_fbs[i], fbk_fbs[i])) return i;
    }
    return std::nullopt;
}

Trajectory edit_student_trajectory(const TaskInstance& inst, const Trajectory& student_traj, FeedbackModule& fbk,
                                   ImprovementModule& imp, const EditConfig& config) {
    if (config.max_rounds < 1) throw ParameterError("max_rounds must be at least 1");
    validate_alternation(student_traj);
    const auto attempts = student_traj.attempts();
    std::vector<Feedback> student_fbs;
    for (const auto* f : student_traj.feedbacks()) student_fbs.push_back(*f);

    // FBK judges the student's attempts in order until it first disagrees.
    std::vector<Feedback> fbk_fbs;
    std::optional<std::size_t> split_at;
    for (std::size_t i = 0; i < attempts.size(); ++i) {
        fbk_fbs.push_back(fbk.feedback(inst, *attempts[i]));
        if (!same_judgement(student_fbs[i], fbk_fbs[i])) {
            split_at = i;
            break;
        }
    }

    Trajectory t;
    t.instance_id = student_traj.instance_id;
    t.task = student_traj.task;
    t.iteration = student_traj.iteration;
    t.provenance = Provenance::Edited;

    if (!split_at && student_fbs.back().terminal) {
        t.elements = student_traj.elements;
    } else {
        // Full agreement on a trajectory cut off by its round cap: continue
        // editing from its last attempt.
        const std::size_t at = split_at.value_or(attempts.size() - 1);
        t.elements.assign(student_traj.elements.begin(),
                          student_traj.elements.begin() + static_cast<std::ptrdiff_t>(2 * at + 1));
        t.elements.emplace_back(fbk_fbs[at]);
        try {
            for (int round = 0; round < config.max_rounds; ++round) {
                const Feedback& fb = std::get<Feedback>(t.elements.back());
                if (fb.terminal) break;
                const Attempt& prev = std::get<Attempt>(t.elements[t.elements.size() - 2]);
                Attempt up = imp.improve(inst, prev, fb);
                Feedback next = fbk.feedback(inst, up);
                t.elements.emplace_back(std::move(up));
                t.elements.emplace_back(std::move(next));
            }
        } catch (const ImprovementImpossible& e) {
            t.accepted = false;
            t.reject_reason = "improvement_impossible";
            return t;
        } catch (const ProviderFormatError& e) {
            t.accepted = false;
            t.reject_reason = "provider_format";
            return t;
        }
    }

    if (t.elements.size() == 2 && std::get<Feedback>(t.elements.back()).terminal) {
        t.provenance = Provenance::DirectlyCorrect;
    }
    if (!std::get<Feedback>(t.elements.back()).terminal) {
        t.accepted = false;
        t.reject_reason = "round_budget";
    } else if (!answer_correct(inst, t.final_attempt())) {
        t.accepted = false;
        t.reject_reason = "wrong_answer";
    } else {
        t.accepted = true;
    }
    return t;
}

Trajectory edit_trajectory(const TaskInstance& inst, StudentModel& student, FeedbackModule& fbk,
                           ImprovementModule& imp, const EditConfig& config) {
    if (config.max_rounds < 1) throw ParameterError("max_rounds must be at least 1");
    return edit_student_trajectory(inst, student_trajectory(inst, student, config.max_rounds), fbk, imp, config);
}

}  // namespace tripost
