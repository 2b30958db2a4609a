#include "tripost/task.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "assets.hpp"
#include "tripost/errors.hpp"
#include "tripost/expr.hpp"
#include "tripost/rng.hpp"

namespace tripost {

namespace {

constexpr std::string_view kKindNames[] = {"MultistepArithmetic", "WordSorting",
                                           "DateUnderstanding", "LogicalDeduction"};
constexpr std::string_view kKindAliases[] = {"multistep_arithmetic", "word_sorting",
                                             "date_understanding", "logical_deduction"};

constexpr std::string_view kWordSortPrefix = "Q: Sort the following words alphabetically:\nList: ";

char random_op(Rng& rng) {
    static constexpr char ops[] = {'+', '-', '*'};
    return ops[rng.below(3)];
}

// Innermost groups carry l operands; every level above them is binary.
arith::Expr random_expr(Rng& rng, int l, int d) {
    std::vector<arith::Expr> operands;
    std::vector<char> ops;
    if (d == 1) {
        for (int i = 0; i < l; ++i) {
            operands.push_back(arith::Expr::number(rng.between(-9, 9)));
            if (i > 0) ops.push_back(random_op(rng));
        }
    } else {
        operands.push_back(random_expr(rng, l, d - 1));
        ops.push_back(random_op(rng));
        operands.push_back(random_expr(rng, l, d - 1));
    }
    return arith::Expr::group(std::move(operands), std::move(ops));
}

std::string join(const std::vector<std::string>& words) {
    std::string out;
    for (const auto& w : words) {
        if (!out.empty()) out.push_back(' ');
        out += w;
    }
    return out;
}

std::vector<std::string> load_lexicon() {
    std::vector<std::string> words;
    std::istringstream in{std::string(detail::asset("lexicon.txt"))};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    return words;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
    return kKindNames[static_cast<int>(kind)];
}

TaskKind task_kind_from_string(std::string_view name) {
    for (int i = 0; i < 4; ++i) {
        if (name == kKindNames[i] || name == kKindAliases[i]) return static_cast<TaskKind>(i);
    }
    throw ParameterError("unknown task kind \"" + std::string(name) + "\"");
}

bool is_scriptable(TaskKind kind) {
    return kind == TaskKind::MultistepArithmetic || kind == TaskKind::WordSorting;
}

std::string_view to_string(Split split) {
    return split == Split::Seen ? "seen" : "unseen";
}

Split split_from_string(std::string_view name) {
    if (name == "seen") return Split::Seen;
    if (name == "unseen") return Split::Unseen;
    throw ParameterError("unknown split \"" + std::string(name) + "\"");
}

std::string subtask_key(TaskKind kind, const SubtaskParams& params) {
    std::string key = "l=" + std::to_string(params.l);
    if (kind == TaskKind::MultistepArithmetic && params.d) key += "/d=" + std::to_string(*params.d);
    return key;
}

void validate_params(TaskKind kind, const SubtaskParams& params) {
    const std::string where = std::string(to_string(kind)) + " " + subtask_key(kind, params);
    if (params.l < 1) throw ParameterError(where + ": l must be positive");
    const bool arithmetic = kind == TaskKind::MultistepArithmetic;
    if (arithmetic != params.d.has_value()) {
        throw ParameterError(where + (arithmetic ? ": d is required" : ": d is only valid for arithmetic"));
    }
    if (arithmetic && *params.d < 1) throw ParameterError(where + ": d must be positive");
    if (kind == TaskKind::WordSorting && params.l < 2) throw ParameterError(where + ": l must be at least 2");
    if (kind == TaskKind::LogicalDeduction && params.l != 3 && params.l != 5 && params.l != 7) {
        throw ParameterError(where + ": l must be 3, 5 or 7");
    }
}

Split classify_split(TaskKind kind, const SubtaskParams& params) {
    validate_params(kind, params);
    const int l = params.l;
    switch (kind) {
    case TaskKind::MultistepArithmetic:
        return (l == 3 || l == 4) && *params.d == 2 ? Split::Seen : Split::Unseen;
    case TaskKind::WordSorting:
        return l <= 7 ? Split::Seen : Split::Unseen;
    case TaskKind::DateUnderstanding:
        return l <= 2 ? Split::Seen : Split::Unseen;
    case TaskKind::LogicalDeduction:
        return l == 7 ? Split::Unseen : Split::Seen;
    }
    throw ParameterError("unknown task kind");
}

std::string arithmetic_question(std::string_view expr) {
    return "Q: " + std::string(expr) + " =";
}

std::string arithmetic_expression_of(std::string_view question) {
    std::string_view s = question;
    if (s.starts_with("Q:")) s.remove_prefix(2);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\n')) s.remove_suffix(1);
    if (s.ends_with('=')) s.remove_suffix(1);
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return std::string(s);
}

std::string wordsort_question(const std::vector<std::string>& words) {
    return std::string(kWordSortPrefix) + join(words);
}

std::vector<std::string> wordsort_words_of(std::string_view question) {
    const auto at = question.find("List:");
    if (at == std::string_view::npos) throw ParseError("word-sort question without \"List:\"");
    std::istringstream in{std::string(question.substr(at + 5))};
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

const std::vector<std::string>& lexicon() {
    static const std::vector<std::string> words = load_lexicon();
    return words;
}

TaskInstance gen_arithmetic(const SubtaskParams& params, std::uint64_t seed) {
    if (!params.d || *params.d < 2 || *params.d > 3 || params.l < 3 || params.l > 6) {
        throw ParameterError("arithmetic generation needs 3 <= l <= 6 and 2 <= d <= 3");
    }
    Rng rng(derive_seed(seed, "arithmetic/" + subtask_key(TaskKind::MultistepArithmetic, params)));
    const arith::Expr e = random_expr(rng, params.l, *params.d);
    TaskInstance inst;
    inst.id = "msa-l" + std::to_string(params.l) + "-d" + std::to_string(*params.d) + "-" +
              std::to_string(seed);
    inst.kind = TaskKind::MultistepArithmetic;
    inst.params = params;
    inst.question = arithmetic_question(arith::render(e));
    inst.gold_answer = to_string(*arith::evaluate(e));
    inst.split = classify_split(inst.kind, params);
    return inst;
}

TaskInstance gen_wordsort(const SubtaskParams& params, std::uint64_t seed) {
    validate_params(TaskKind::WordSorting, params);
    const auto& words = lexicon();
    if (params.l > 16 || static_cast<std::size_t>(params.l) > words.size()) {
        throw ParameterError("word-sort generation needs 2 <= l <= 16");
    }
    Rng rng(derive_seed(seed, "wordsort/" + subtask_key(TaskKind::WordSorting, params)));
    std::vector<std::string> picked;
    for (std::size_t i : sample_indices(rng, words.size(), static_cast<std::size_t>(params.l))) {
        picked.push_back(words[i]);
    }
    rng.shuffle(picked);
    std::vector<std::string> sorted = picked;
    std::sort(sorted.begin(), sorted.end());

    TaskInstance inst;
    inst.id = "ws-l" + std::to_string(params.l) + "-" + std::to_string(seed);
    inst.kind = TaskKind::WordSorting;
    inst.params = params;
    inst.question = wordsort_question(picked);
    inst.gold_answer = join(sorted);
    inst.split = classify_split(inst.kind, params);
    return inst;
}

std::vector<TaskInstance> generate_instances(TaskKind kind, const SubtaskParams& params,
                                             std::size_t count, std::uint64_t seed) {
    std::vector<TaskInstance> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        switch (kind) {
        case TaskKind::MultistepArithmetic:
            out.push_back(gen_arithmetic(params, seed + i));
            break;
        case TaskKind::WordSorting:
            out.push_back(gen_wordsort(params, seed + i));
            break;
        default:
            throw KindError(std::string(to_string(kind)) + " instances come from fixture files");
        }
    }
    return out;
}

std::vector<SubtaskParams> grid_cells(TaskKind kind, Split split) {
    std::vector<SubtaskParams> cells;
    const bool seen = split == Split::Seen;
    switch (kind) {
    case TaskKind::MultistepArithmetic:
        if (seen) {
            cells = {{3, 2}, {4, 2}};
        } else {
            cells = {{3, 3}, {4, 3}, {5, 2}, {5, 3}, {6, 2}, {6, 3}};
        }
        break;
    case TaskKind::WordSorting:
        for (int l = seen ? 2 : 8; l <= (seen ? 7 : 16); ++l) cells.push_back({l, std::nullopt});
        break;
    case TaskKind::DateUnderstanding:
        for (int l = seen ? 1 : 3; l <= (seen ? 2 : 6); ++l) cells.push_back({l, std::nullopt});
        break;
    case TaskKind::LogicalDeduction:
        if (seen) {
            cells = {{3, std::nullopt}, {5, std::nullopt}};
        } else {
            cells = {{7, std::nullopt}};
        }
        break;
    }
    return cells;
}

nlohmann::ordered_json to_json(const TaskInstance& inst) {
    nlohmann::ordered_json j;
    j["id"] = inst.id;
    j["kind"] = to_string(inst.kind);
    j["l"] = inst.params.l;
    if (inst.params.d) j["d"] = *inst.params.d;
    j["question"] = inst.question;
    j["gold_answer"] = inst.gold_answer;
    j["split"] = to_string(inst.split);
    return j;
}

TaskInstance instance_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("instance record is not an object");
    for (const char* field : {"id", "kind", "l", "question", "gold_answer"}) {
        if (!j.contains(field)) throw ParseError(std::string("missing field \"") + field + "\"");
    }
    TaskInstance inst;
    try {
        inst.id = j.at("id").get<std::string>();
        inst.kind = task_kind_from_string(j.at("kind").get<std::string>());
        inst.params.l = j.at("l").get<int>();
        if (j.contains("d") && !j.at("d").is_null()) inst.params.d = j.at("d").get<int>();
        inst.question = j.at("question").get<std::string>();
        inst.gold_answer = j.at("gold_answer").get<std::string>();
        inst.split = classify_split(inst.kind, inst.params);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(e.what());
    } catch (const ParameterError& e) {
        throw ParseError(e.what());
    }
    if (inst.id.empty()) throw ParseError("empty id");
    return inst;
}

std::vector<TaskInstance> parse_fixture_instances(std::string_view text) {
    std::vector<TaskInstance> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(instance_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<TaskInstance> load_fixture_instances(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_fixture_instances(buf.str());
}

void write_instances(const std::string& path, const std::vector<TaskInstance>& instances) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& inst : instances) out << to_json(inst).dump() << '\n';
    if (!out) throw IoError("write failed for " + path);
}

}  // namespace tripost
