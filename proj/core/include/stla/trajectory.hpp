#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stla/engine.hpp"
#include "stla/system.hpp"

namespace stla::traj {

struct Leg {
    std::string field;
    double duration = 0.0;
};

struct SwitchSchedule {
    std::vector<Leg> legs;

    double total() const noexcept;
};

struct SimOptions {
    int steps_per_leg = 1000;
    /// Keep every state visited (otherwise only the end state).
    bool record = false;
    /// Rerun with half steps and store the difference / 15.
    bool richardson = true;
    /// Locality ball; ExitedLocality when the state leaves it.
    std::optional<Eigen::VectorXd> center;
    double radius = 0.0;
};

struct SimResult {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
    std::vector<double> end;
    long steps = 0;
    /// Richardson estimate of the end-point error (0 when not requested).
    double error_estimate = 0.0;
};

/// Fixed-step classical RK4, switching exactly at leg boundaries.
/// Errors: ExitedLocality, StepUnderflow, DegenerateInput (negative duration).
SimResult integrate_switched(const ControlSystem& sys, const SwitchSchedule& schedule, std::span<const double> x0,
                             const SimOptions& opts = {});

/// Same integrator on precompiled fields; durations[i] applies to fields[i].
SimResult integrate(std::span<const CompiledField> fields, std::span<const double> durations,
                    std::span<const double> x0, const SimOptions& opts = {});

struct ResidualFit {
    double slope = 0.0;
    double intercept = 0.0;
    /// (t, |u(x_mt) - truncated series|) for every grid point.
    std::vector<std::pair<double, double>> table;
    /// Points at the rounding floor, left out of the fit.
    int dropped = 0;
};

/// Log-log slope of the remainder of the order-k expansion of u along the
/// balanced trajectory of `group` from x_o, over 16 geometric t in [1e-3, 1e-1].
/// Errors: DegenerateFit when fewer than 3 points sit above the rounding floor.
ResidualFit expansion_residual_order(const ControlSystem& sys, const engine::GroupSpec& group, const expr::Expr& u,
                                     const Eigen::VectorXd& x_o, int k, int points = 16);

struct ReachOptions {
    /// Absolute residual accepted as reaching the target.
    double tolerance = 1e-6;
    int steps_per_leg = 1000;
    /// Upper bound on the Petrov search radius.
    double delta_max = 1.0;
};

struct MinTimeEstimate {
    Eigen::VectorXd start;
    bool reached = false;
    double T_est = 0.0;
    double residual = 0.0;
    Eigen::VectorXd tau;
    /// Fat targets: the common leg length t*.
    double t_star = 0.0;
    std::string method;
    /// The switched control that was built, for replay and trajectory output.
    SwitchSchedule schedule;
    std::vector<std::string> warnings;
};

/// Build the switched control of the sufficiency proof for a certified target.
/// Errors: NotInBasin when |x - x_o| > R/2, NoConvergence from the Petrov solve.
MinTimeEstimate reach_target(const ControlSystem& sys, const engine::TargetDef& target,
                             const engine::StlaCertificate& cert, const Eigen::VectorXd& x,
                             const ReachOptions& opts = {});

struct HolderSample {
    double radius = 0.0;
    int direction = 0;
    double T_est = 0.0;
    bool reached = false;
};

struct HolderFit {
    double exponent = 0.0;
    double constant = 0.0;
    /// 1 / k_bar from the certificate.
    double theory = 0.0;
    std::vector<HolderSample> samples;
    /// (radius, max T_est over directions) for the radii used in the fit.
    std::vector<std::pair<double, double>> envelope;
};

struct HolderOptions {
    std::vector<double> radii;
    int directions = 16;
    /// Geometric radius grid used when radii is empty.
    double r_min = 1e-4;
    double r_max = 1e-2;
    int n_radii = 8;
    std::uint64_t seed = 0;
    ReachOptions reach;
};

/// Unit directions: equally spaced angles in the plane, a Fibonacci lattice on
/// the 2-sphere, normalized Halton points otherwise.
std::vector<Eigen::VectorXd> sample_directions(std::size_t n, int count, std::uint64_t seed = 0);

/// Fit log T_est = log C + e log |x - x_o| on the upper envelope (max over
/// directions, radii where every direction reached the target).
/// Errors: InsufficientSamples when fewer than 3 such radii have a positive T_est.
HolderFit holder_fit(const ControlSystem& sys, const engine::TargetDef& target, const engine::StlaCertificate& cert,
                     const HolderOptions& opts = {});

// CSV artifacts with fixed headers.
void write_trajectory_csv(std::ostream& os, const SimResult& sim, std::size_t n);
void write_holder_csv(std::ostream& os, const HolderFit& fit);
void write_residual_csv(std::ostream& os, const ResidualFit& fit);

}  // namespace stla::traj
