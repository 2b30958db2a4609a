#include "tripost/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "tripost/errors.hpp"

namespace tripost {

namespace {

double ratio(std::size_t a, std::size_t b) {
    return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

std::string shortest(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string percent(std::optional<double> v) {
    if (!v) return "—";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", *v * 100.0);
    return buf;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> csv_split(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted) throw ParseError("unterminated quote in report CSV");
    out.push_back(std::move(cur));
    return out;
}

const char* const kCsvHeader =
    "label,p,n_seen,n_unseen,correct_seen,correct_unseen,direct_correct,si_attempts,si_success_seen,"
    "si_success_unseen,accuracy_seen,accuracy_unseen,accuracy_total,si_frequency,si_contribution,directly_correct";

std::size_t to_count(const std::string& s) {
    std::size_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad count in report CSV: " + s);
    return v;
}

double to_double(const std::string& s) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParseError("bad number in report CSV: " + s);
    return v;
}

}  // namespace

std::optional<double> Report::accuracy_seen() const {
    if (n_seen == 0) return std::nullopt;
    return ratio(correct_seen, n_seen);
}

std::optional<double> Report::accuracy_unseen() const {
    if (n_unseen == 0) return std::nullopt;
    return ratio(correct_unseen, n_unseen);
}

double Report::accuracy_total() const {
    return ratio(correct_seen + correct_unseen, total());
}

double Report::directly_correct() const {
    return ratio(direct_correct, total());
}

double Report::si_frequency() const {
    return ratio(si_attempts, total());
}

double Report::si_contribution() const {
    return ratio(si_success_seen + si_success_unseen, total());
}

std::optional<double> Report::si_contribution_seen() const {
    if (n_seen == 0) return std::nullopt;
    return ratio(si_success_seen, total());
}

std::optional<double> Report::si_contribution_unseen() const {
    if (n_unseen == 0) return std::nullopt;
    return ratio(si_success_unseen, total());
}

Report evaluate(const std::vector<TaskInstance>& test_instances, const std::vector<Trajectory>& trajectories,
                std::string label) {
    std::map<std::string, const Trajectory*> by_id;
    for (const auto& t : trajectories) by_id[t.instance_id] = &t;
    Report r;
    r.label = std::move(label);
    for (const auto& inst : test_instances) {
        auto it = by_id.find(inst.id);
        if (it == by_id.end()) throw EvaluationError("no trajectory for test instance " + inst.id);
        const Trajectory& t = *it->second;
        validate_alternation(t);
        bool si = false;
        for (const auto* fb : t.feedbacks()) si = si || !fb->terminal;
        const bool correct = answer_correct(inst, t.final_attempt());
        const bool seen = inst.split == Split::Seen;
        (seen ? r.n_seen : r.n_unseen) += 1;
        if (si) ++r.si_attempts;
        if (!correct) continue;
        (seen ? r.correct_seen : r.correct_unseen) += 1;
        if (!si) {
            ++r.direct_correct;
        } else {
            (seen ? r.si_success_seen : r.si_success_unseen) += 1;
        }
    }
    return r;
}

std::string render_report(const std::vector<Report>& rows) {
    std::vector<std::vector<std::string>> cells;
    cells.push_back({"Method", "p", "Seen", "Unseen", "Total", "SI Freq", "SI Contrib", "Directly Correct"});
    for (const auto& r : rows) {
        cells.push_back({r.label.empty() ? "-" : r.label, r.p ? shortest(*r.p) : "—", percent(r.accuracy_seen()),
                         percent(r.accuracy_unseen()), percent(r.accuracy_total()), percent(r.si_frequency()),
                         percent(r.si_contribution()), percent(r.directly_correct())});
    }
    // Display width counts code points so the dash placeholder lines up.
    auto width = [](const std::string& s) {
        std::size_t n = 0;
        for (unsigned char c : s) n += (c & 0xC0) != 0x80;
        return n;
    };
    std::vector<std::size_t> w(cells.front().size(), 0);
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) w[i] = std::max(w[i], width(row[i]));
    }
    std::ostringstream out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t i = 0; i < cells[r].size(); ++i) {
            if (i) out << " | ";
            const std::string pad(w[i] - width(cells[r][i]), ' ');
            out << (i == 0 ? cells[r][i] + pad : pad + cells[r][i]);
        }
        out << '\n';
        if (r == 0) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                if (i) out << "-|-";
                out << std::string(w[i], '-');
            }
            out << '\n';
        }
    }
    return out.str();
}

std::string report_csv(const std::vector<Report>& rows) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    auto opt = [](std::optional<double> v) { return v ? shortest(*v) : std::string(); };
    for (const auto& r : rows) {
        out << csv_field(r.label) << ',' << opt(r.p) << ',' << r.n_seen << ',' << r.n_unseen << ',' << r.correct_seen
            << ',' << r.correct_unseen << ',' << r.direct_correct << ',' << r.si_attempts << ',' << r.si_success_seen
            << ',' << r.si_success_unseen << ',' << opt(r.accuracy_seen()) << ',' << opt(r.accuracy_unseen()) << ','
            << shortest(r.accuracy_total()) << ',' << shortest(r.si_frequency()) << ','
            << shortest(r.si_contribution()) << ',' << shortest(r.directly_correct()) << '\n';
    }
    return out.str();
}

std::vector<Report> parse_report_csv(std::string_view text) {
    std::vector<Report> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("report CSV header mismatch");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv_split(line);
        if (f.size() != 16) throw ParseError("report CSV row has " + std::to_string(f.size()) + " fields");
        Report r;
        r.label = f[0];
        if (!f[1].empty()) r.p = to_double(f[1]);
        r.n_seen = to_count(f[2]);
        r.n_unseen = to_count(f[3]);
        r.correct_seen = to_count(f[4]);
        r.correct_unseen = to_count(f[5]);
        r.direct_correct = to_count(f[6]);
        r.si_attempts = to_count(f[7]);
        r.si_success_seen = to_count(f[8]);
        r.si_success_unseen = to_count(f[9]);
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace tripost
