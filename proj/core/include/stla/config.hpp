#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "stla/engine.hpp"
#include "stla/expr.hpp"
#include "stla/system.hpp"
#include "stla/trajectory.hpp"

namespace stla::cli {

enum class Task { Certify, Search, Reach, Holder, Identities, Expansion };

const char* to_string(Task t) noexcept;
std::optional<Task> parse_task(std::string_view name) noexcept;

struct TargetConfig {
    std::string name;
    engine::TargetDef def;
    /// Source text of the functions, for reports.
    std::vector<std::string> function_text;
    std::optional<std::string> boundary_text;
    std::optional<std::string> comparison_text;
    std::vector<Eigen::VectorXd> points;
    std::vector<engine::GroupSpec> groups;
    /// False when groups come from search_groups.
    bool explicit_groups = false;
    engine::ManifoldVariant variant = engine::ManifoldVariant::Auto;
    std::vector<std::size_t> restricted_vars;
};

struct ReachConfig {
    std::size_t target = 0;
    std::size_t point = 0;
    std::vector<Eigen::VectorXd> starts;
    traj::ReachOptions options;
};

struct HolderConfig {
    std::size_t target = 0;
    std::size_t point = 0;
    traj::HolderOptions options;
};

struct ExpansionConfig {
    std::size_t target = 0;
    std::size_t point = 0;
    engine::GroupSpec group;
    expr::Expr function;
    std::string function_text;
    int order = 1;
};

struct AnalysisConfig {
    std::string name;
    std::string origin;
    std::uint64_t seed = 0;
    expr::Parameters parameters;
    ControlSystem system;
    std::vector<TargetConfig> targets;
    std::vector<Task> tasks;
    engine::Options options;
    engine::SearchLimits search;
    ReachConfig reach;
    HolderConfig holder;
    std::optional<ExpansionConfig> expansion;
};

/// Parse and validate a JSON configuration; every expression is parsed here.
/// Errors: Error(Config) with file position or JSON pointer, SyntaxError for
/// malformed expressions, Error(Io) when the file cannot be read.
AnalysisConfig load_config(const std::string& path);
AnalysisConfig parse_config(std::string_view text, const std::string& origin = "<string>");

}  // namespace stla::cli
