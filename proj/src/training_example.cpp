#include "tripost/training_example.hpp"

#include <fstream>
#include <sstream>

#include "tripost/errors.hpp"

namespace tripost {

namespace {

constexpr std::string_view kRoleNames[] = {"question", "init_attempt", "feedback", "updated_attempt",
                                           "terminal_feedback"};

}  // namespace

std::string_view to_string(SpanRole role) {
    return kRoleNames[static_cast<int>(role)];
}

SpanRole span_role_from_string(std::string_view name) {
    for (int i = 0; i < 5; ++i) {
        if (kRoleNames[i] == name) return static_cast<SpanRole>(i);
    }
    throw ParseError("unknown span role \"" + std::string(name) + "\"");
}

bool TrainingExample::is_improvement() const {
    for (const auto& s : spans) {
        if (s.role == SpanRole::UpdatedAttempt) return true;
    }
    return false;
}

std::string TrainingExample::text() const {
    std::string out;
    for (const auto& s : spans) out += s.text;
    return out;
}

nlohmann::ordered_json to_json(const TrainingExample& ex) {
    nlohmann::ordered_json j;
    j["id"] = ex.id;
    j["task"] = to_string(ex.task);
    j["split"] = to_string(ex.split);
    j["subtask"] = ex.subtask;
    if (ex.reason_kind) j["reason_kind"] = to_string(*ex.reason_kind);
    auto spans = nlohmann::ordered_json::array();
    for (const auto& s : ex.spans) {
        nlohmann::ordered_json span;
        span["role"] = to_string(s.role);
        span["text"] = s.text;
        span["weight"] = s.weight;
        spans.push_back(std::move(span));
    }
    j["spans"] = std::move(spans);
    return j;
}

TrainingExample training_example_from_json(const nlohmann::json& j) {
    TrainingExample ex;
    try {
        ex.id = j.at("id").get<std::string>();
        ex.task = task_kind_from_string(j.at("task").get<std::string>());
        ex.split = split_from_string(j.at("split").get<std::string>());
        ex.subtask = j.value("subtask", std::string());
        if (j.contains("reason_kind") && !j.at("reason_kind").is_null()) {
            ex.reason_kind = error_kind_from_string(j.at("reason_kind").get<std::string>());
        }
        for (const auto& s : j.at("spans")) {
            Span span;
            span.role = span_role_from_string(s.at("role").get<std::string>());
            span.text = s.at("text").get<std::string>();
            span.weight = s.at("weight").get<double>();
            if (!(span.weight > 0.0)) throw ParseError("span weight must be positive");
            ex.spans.push_back(std::move(span));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("training example: ") + e.what());
    } catch (const ParameterError& e) {
        throw ParseError(std::string("training example: ") + e.what());
    }
    return ex;
}

std::string serialize_example(const TrainingExample& ex) {
    return to_json(ex).dump();
}

void write_dataset(const std::string& path, const std::vector<TrainingExample>& examples) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& ex : examples) out << serialize_example(ex) << '\n';
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

std::vector<TrainingExample> parse_dataset(std::string_view text) {
    std::vector<TrainingExample> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            out.push_back(training_example_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
        } catch (const ParseError& e) {
            throw ParseError("dataset line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<TrainingExample> read_dataset(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_dataset(buf.str());
}

}  // namespace tripost
