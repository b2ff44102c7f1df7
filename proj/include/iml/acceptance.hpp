#pragma once

#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

namespace iml {

struct CriterionResult {
    int id = 0;
    std::string name;
    std::string status; // "pass", "warn" or "fail"
    std::string detail;
    nlohmann::json metrics; // deterministic for a fixed seed
    double seconds = 0.0;
};

struct AcceptanceSummary {
    std::vector<CriterionResult> criteria;
    bool all_pass = true; // warnings do not fail the suite
    bool any_warn = false;
};

/// Runs the acceptance battery (all criteria, or the subset whose names
/// contain one of the `only` keys), printing one line per criterion to
/// `log` when given.
AcceptanceSummary run_acceptance(const std::vector<std::string>& only = {},
                                 int threads = 0, std::ostream* log = nullptr);

nlohmann::json acceptance_summary_json(const AcceptanceSummary& summary);

} // namespace iml
