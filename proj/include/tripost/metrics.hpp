#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "tripost/trajectory.hpp"

namespace tripost {

// Counts behind one evaluation row. Rates are derived, so a report parsed
// back from CSV compares equal to the original.
struct Report {
    std::string label;
    std::optional<double> p;  // proportion used for training, if known
    std::size_t n_seen = 0;
    std::size_t n_unseen = 0;
    std::size_t correct_seen = 0;
    std::size_t correct_unseen = 0;
    std::size_t direct_correct = 0;      // solved with no self-improvement attempt
    std::size_t si_attempts = 0;         // at least one non-terminal self-feedback
    std::size_t si_success_seen = 0;     // SI attempted and final answer correct
    std::size_t si_success_unseen = 0;

    std::size_t total() const { return n_seen + n_unseen; }
    std::optional<double> accuracy_seen() const;
    std::optional<double> accuracy_unseen() const;
    double accuracy_total() const;
    double directly_correct() const;
    double si_frequency() const;
    double si_contribution() const;
    std::optional<double> si_contribution_seen() const;    // share of the whole test set
    std::optional<double> si_contribution_unseen() const;

    bool operator==(const Report&) const = default;
};

// One inference trajectory per test instance.
Report evaluate(const std::vector<TaskInstance>& test_instances,
                const std::vector<Trajectory>& trajectories, std::string label = "");

std::string render_report(const std::vector<Report>& rows);
std::string report_csv(const std::vector<Report>& rows);
std::vector<Report> parse_report_csv(std::string_view text);

}  // namespace tripost
