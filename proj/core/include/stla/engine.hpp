#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stla/error.hpp"
#include "stla/expr.hpp"
#include "stla/positive_span.hpp"
#include "stla/system.hpp"

namespace stla::engine {

/// Ordered fields of a switched balanced trajectory and the claimed order.
///
/// Field names are palette names ("fo+f1", "-f"), declared field names, or
/// linear combinations of declared fields in expression syntax. The first
/// name acts first. order == 0 asks for the smallest nonvanishing order.
struct GroupSpec {
    std::vector<std::string> fields;
    int order = 0;

    /// Canonical text "f1,f2|k" used for sorting and deduplication.
    std::string key() const;
};

/// Targets are described relative to the base point x_o:
///   Fat:      {u_i(x) <= u_i(x_o) for all i}
///   Point:    {x_o}
///   Manifold: {u(x) = u(x_o)}, intersected with {b(x) >= b(x_o)} when a
///             boundary function b is given (x_o then lies on the boundary).
enum class TargetKind { Fat, Point, Manifold };

struct TargetDef {
    TargetKind kind = TargetKind::Point;
    std::vector<expr::Expr> functions;
    std::optional<expr::Expr> boundary;
    /// Fat targets: smooth Phi with u - Phi locally maximal at x_o. When set,
    /// decrease rates are computed on Phi and `functions` holds the (possibly
    /// nonsmooth) u, used only for the sampled local-maximum check.
    std::optional<expr::Expr> comparison;
};

const char* to_string(TargetKind k) noexcept;

enum class ManifoldVariant { StrictExtra, RestrictedVars, BlockStructure, Auto };

const char* to_string(ManifoldVariant v) noexcept;

struct Options {
    /// Relative vanishing threshold; absolute tolerance is tol_rel * max(1, jet scale).
    double tol_rel = 1e-9;
    /// Largest order tried when a group does not claim one.
    int k_max = 6;
    std::uint64_t seed = 0;
    /// Fat comparison functions: sample 100 points of B_R(x_o) for the local max.
    bool spot_check_comparison = true;
    /// Restricted-variable corollary: declared coordinate indices. Empty means
    /// the smallest closed set is detected from the sampled dependence structure.
    std::vector<std::size_t> restricted_vars;
};

/// Outcome of checking one group against a vector of target functions.
struct GroupCheck {
    GroupSpec group;
    /// Verified order (max over components for fat targets).
    int order = 0;
    /// Raw boxplus values: raw[r - 1][c] for r = 1..order, one entry per function.
    std::vector<std::vector<double>> raw;
    /// First nonvanishing order of each component (fat targets).
    std::vector<int> component_orders;
    /// raw[order - 1] / order!, over the first h components.
    Eigen::VectorXd column;
    /// Boundary entry raw(u_{h+1}) / order!.
    std::optional<double> s;
    double tolerance = 0.0;
    /// Largest |value| among the orders claimed to vanish.
    double max_vanishing = 0.0;
};

/// Resolve group field names to field definitions.
std::vector<VectorFieldDef> resolve_group(const ControlSystem& sys, const GroupSpec& group);

/// Coordinate functions x_1..x_n of the system.
std::vector<expr::Expr> identity_functions(const ControlSystem& sys);

/// (B1)-style check: orders 1..k-1 vanish for every function and order k does not.
/// Errors: OrderClaimFailed (order and offending value), InsufficientOrder,
/// DegenerateInput for a multi-field group claiming order 1.
GroupCheck check_group(const ControlSystem& sys, const std::vector<expr::Expr>& functions,
                       const Eigen::VectorXd& x_o, const GroupSpec& group, const Options& opts = {});

enum class Theorem { Fat, Point, Manifold, ManifoldBoundary, CorollaryRestricted, CorollaryBlock };

const char* to_string(Theorem t) noexcept;

/// A side hypothesis of a theorem variant and how it was settled.
struct SideCondition {
    std::string name;
    bool holds = false;
    std::string how;
};

struct RejectedGroup {
    GroupSpec group;
    std::string reason;
};

struct StlaCertificate {
    bool certified = false;
    /// Set when the conditions fail (NoGroupQualifies, NotPositiveBasis, SideConditionFailed).
    std::optional<ErrorKind> failure;
    std::string detail;

    Theorem theorem = Theorem::Point;
    TargetKind target = TargetKind::Point;
    Eigen::VectorXd x_o;
    bool on_boundary = false;

    std::vector<GroupCheck> groups;
    std::vector<RejectedGroup> rejected;

    /// Columns A^o_i (factorial normalized).
    Eigen::MatrixXd A;
    std::optional<Eigen::VectorXd> s;
    std::optional<pspan::SpanCertificate> span;

    int k_bar = 0;
    /// Holder exponent 1 / k_bar of the minimum time estimate.
    double exponent = 0.0;

    double tolerance = 0.0;
    /// Smallest ratio tolerance / |value| over vanishing claims (inf when all are exactly 0).
    double worst_margin = 0.0;

    SystemBounds bounds;
    /// Petrov constant |b_o| + 1 + M for the unperturbed A (point and manifold targets).
    double K = 0.0;
    double eccentricity = 0.0;

    std::vector<SideCondition> side_conditions;
    std::vector<std::size_t> restricted_vars;
};

/// Fat target: some group has a decrease rate for every inequality.
/// Errors: GradientVanishes. A certificate without qualifying group carries
/// failure NoGroupQualifies.
StlaCertificate certify_fat(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                            const std::vector<GroupSpec>& groups, const Options& opts = {});

/// Point target x_o with u = identity; the columns must form a positive basis.
StlaCertificate certify_point(const ControlSystem& sys, const Eigen::VectorXd& x_o,
                              const std::vector<GroupSpec>& groups, const Options& opts = {});

/// Manifold target, possibly with boundary.
/// Errors: RankDeficientJacobian. Verdict failures: NotPositiveBasis, SideConditionFailed.
StlaCertificate certify_manifold(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                                 const std::vector<GroupSpec>& groups, ManifoldVariant variant = ManifoldVariant::Auto,
                                 const Options& opts = {});

/// Dispatch on target.kind.
StlaCertificate certify(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                        const std::vector<GroupSpec>& groups, ManifoldVariant variant = ManifoldVariant::Auto,
                        const Options& opts = {});

struct SearchLimits {
    /// Maximum number of groups returned (0 = no limit).
    std::size_t max_groups = 0;
    int k_max = 4;
    int length_max = 4;
    std::size_t budget = 100000;
};

struct SearchResult {
    std::vector<GroupSpec> groups;
    std::size_t evaluated = 0;
    bool budget_exhausted = false;
};

/// Enumerate ordered palette tuples, keep those with a usable rate of change
/// (negative for fat targets), deduplicate by direction (cosine > 0.999 at equal
/// order) and return them sorted by (order, length, key).
SearchResult search_groups(const ControlSystem& sys, const TargetDef& target, const Eigen::VectorXd& x_o,
                           const SearchLimits& limits = {}, const Options& opts = {});

/// Functions whose rate of change the certificate controls: the fat functions
/// (or Phi), the identity for points, u then b for manifolds.
std::vector<expr::Expr> certified_functions(const ControlSystem& sys, const TargetDef& target);

}  // namespace stla::engine
