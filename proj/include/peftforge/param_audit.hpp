#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "peftforge/dims.hpp"
#include "peftforge/peft.hpp"

namespace peftforge {

/// Closed-form trainable-parameter count for one (config, dims) pair.
struct CountBreakdown {
    std::map<std::string, long long> per_point;  // attachment point -> count
    long long total = 0;
    double percent = 0.0;  // total / base_total * 100, reported to 3 decimals

    /// The 3-decimal rounding used for display and comparison.
    double percent_3dp() const;
};

/// Total backbone parameters of an instantiated model at these dims; the
/// enumeration cross-check and the toy base total both rest on it.
long long backbone_param_count(const ArchitectureDims& dims);

/// Deterministic closed-form count; agrees exactly with enumerating an
/// attached model at any dims. For fine-tuning the trainable set is the
/// whole model, so the total is base_total itself (the published model size
/// is an input, not re-derived).
CountBreakdown count_trainable(const PeftConfig& config, const ArchitectureDims& dims,
                               long long base_total);

/// One display row; a row may carry the two published settings of a method.
struct AuditRow {
    std::string method;
    std::string config_desc;
    std::vector<long long> totals;
    std::vector<double> percents;        // rounded to 3 decimals
    std::vector<double> published_percents;  // empty when no published figure exists
    bool assumption_flagged = false;     // computed under documented assumptions
};

struct AuditReport {
    std::string dims_label;
    long long base_total = 0;
    std::vector<AuditRow> rows;

    std::string to_text() const;
    nlohmann::json to_json() const;
};

struct AuditEntry {
    std::string label;
    std::vector<PeftConfig> configs;
    std::vector<double> published_percents;  // aligned with configs; empty if none
    bool assumption_flagged = false;
};

AuditReport audit_report(const std::vector<AuditEntry>& entries, const ArchitectureDims& dims,
                         long long base_total, const std::string& dims_label = "");

/// Convenience overload: one row per config.
AuditReport audit_report(const std::vector<PeftConfig>& configs, const ArchitectureDims& dims,
                         long long base_total, const std::string& dims_label = "");

/// The published method roster, one entry per method (9 rows); the rows with
/// two published settings carry both configs.
std::vector<AuditEntry> published_roster();

}  // namespace peftforge
