#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stla/config.hpp"
#include "stla/error.hpp"

namespace stla::cli {

struct Artifact {
    std::string filename;
    std::string content;
};

/// Outcome of one certification, as shown in the report.
struct CertSummary {
    std::string target;
    std::size_t point = 0;
    bool certified = false;
    /// Verdict failure (NoGroupQualifies, NotPositiveBasis, SideConditionFailed).
    std::optional<ErrorKind> failure;
    /// Set when certification stopped on an error instead of a verdict.
    std::optional<ErrorKind> error;
    std::string theorem;
    int k_bar = 0;
};

struct Report {
    /// 0: every requested certification succeeded; 2: some verdict failed; 1: an error occurred.
    int exit_code = 0;
    /// Machine-readable result document (report.json).
    std::string json;
    /// Human-readable summary (report.txt).
    std::string text;
    std::vector<Artifact> artifacts;
    std::vector<CertSummary> certificates;
};

/// Execute the configured tasks in order. Failures inside a task are recorded
/// as structured error entries; run itself only throws on programming errors.
Report run(const AnalysisConfig& config);
/// Same, with the task list replaced.
Report run(const AnalysisConfig& config, const std::vector<Task>& tasks);

/// Write report.json, report.txt and the CSV artifacts into out_dir (created if needed).
/// Errors: Error(Io).
void write_report(const Report& report, const std::string& out_dir);

}  // namespace stla::cli
