#include "stla/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

#include "stla/error.hpp"
#include "stla/hamiltonian.hpp"
#include "stla/petrov.hpp"

namespace stla::traj {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> as_vector(const Eigen::VectorXd& x) { return {x.data(), x.data() + x.size()}; }

std::vector<CompiledField> compile(const std::vector<VectorFieldDef>& defs) {
    std::vector<CompiledField> out;
    out.reserve(defs.size());
    for (const auto& d : defs) out.emplace_back(d);
    return out;
}

// Least-squares line y = a + b x.
std::pair<double, double> fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    return {(sy - b * sx) / n, b};
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) fn(i);
    };
    const std::size_t threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < std::min(threads, count); ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
}

class FunctionSet {
public:
    explicit FunctionSet(const std::vector<expr::Expr>& fs) {
        for (const auto& f : fs) progs_.emplace_back(f);
    }
    Eigen::VectorXd operator()(std::span<const double> x) const {
        Eigen::VectorXd v(static_cast<Eigen::Index>(progs_.size()));
        for (std::size_t i = 0; i < progs_.size(); ++i) v(static_cast<Eigen::Index>(i)) = progs_[i](x);
        return v;
    }
    std::size_t size() const noexcept { return progs_.size(); }

private:
    std::vector<expr::Program> progs_;
};

}  // namespace

double SwitchSchedule::total() const noexcept {
    double t = 0.0;
    for (const auto& l : legs) t += l.duration;
    return t;
}

SimResult integrate(std::span<const CompiledField> fields, std::span<const double> durations,
                    std::span<const double> x0, const SimOptions& opts) {
    if (fields.size() != durations.size()) raise(ErrorKind::DimensionMismatch, "one duration per field expected");
    if (opts.steps_per_leg < 1) raise(ErrorKind::DegenerateInput, "steps per leg must be positive");
    const std::size_t n = x0.size();
    for (const auto& f : fields)
        if (f.dim() != n) raise(ErrorKind::DimensionMismatch, "field dimension differs from the state dimension");

    SimResult res;
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> k1(n), k2(n), k3(n), k4(n), y(n);
    if (opts.record) {
        res.times.push_back(0.0);
        res.states.push_back(x);
    }
    double t0 = 0.0;
    for (std::size_t leg = 0; leg < fields.size(); ++leg) {
        const double T = durations[leg];
        if (!(T >= 0.0)) raise(ErrorKind::DegenerateInput, "negative leg duration");
        if (T == 0.0) continue;
        const auto& f = fields[leg];
        const double h = T / opts.steps_per_leg;
        if (t0 + h == t0) raise(ErrorKind::StepUnderflow, "step " + num(h) + " is below the time resolution");
        for (int s = 0; s < opts.steps_per_leg; ++s) {
            f.eval(x, k1);
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k1[i];
            f.eval(y, k2);
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + 0.5 * h * k2[i];
            f.eval(y, k3);
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + h * k3[i];
            f.eval(y, k4);
            for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            ++res.steps;
            if (opts.center) {
                double d2 = 0.0;
                for (std::size_t i = 0; i < n; ++i) d2 += (x[i] - (*opts.center)(static_cast<Eigen::Index>(i))) *
                                                        (x[i] - (*opts.center)(static_cast<Eigen::Index>(i)));
                if (std::sqrt(d2) > opts.radius)
                    raise(ErrorKind::ExitedLocality, "trajectory left B_R(x_o) at t = " + num(t0 + (s + 1) * h));
            }
            if (!std::isfinite(x[0])) raise(ErrorKind::NumericalBreakdown, "trajectory is not finite");
            if (opts.record) {
                res.times.push_back(t0 + (s + 1) * h);
                res.states.push_back(x);
            }
        }
        t0 += T;
    }
    res.end = x;
    if (opts.richardson) {
        SimOptions fine = opts;
        fine.steps_per_leg *= 2;
        fine.record = false;
        fine.richardson = false;
        const auto r2 = integrate(fields, durations, x0, fine);
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) e = std::max(e, std::fabs(r2.end[i] - x[i]));
        res.error_estimate = e / 15.0;
    }
    return res;
}

SimResult integrate_switched(const ControlSystem& sys, const SwitchSchedule& schedule, std::span<const double> x0,
                             const SimOptions& opts) {
    if (x0.size() != sys.dim()) raise(ErrorKind::DimensionMismatch, "start point has the wrong dimension");
    engine::GroupSpec names;
    std::vector<double> durations;
    for (const auto& l : schedule.legs) {
        names.fields.push_back(l.field);
        durations.push_back(l.duration);
    }
    const auto fields = compile(engine::resolve_group(sys, names));
    return integrate(fields, durations, x0, opts);
}

ResidualFit expansion_residual_order(const ControlSystem& sys, const engine::GroupSpec& group, const expr::Expr& u,
                                     const Eigen::VectorXd& x_o, int k, int points) {
    if (k < 1) raise(ErrorKind::InsufficientOrder, "expansion order must be positive");
    if (points < 3) raise(ErrorKind::DegenerateFit, "need at least 3 grid points");
    const auto x = as_vector(x_o);
    const auto defs = engine::resolve_group(sys, group);
    const auto fields = compile(defs);

    std::vector<jet::VectorGerm> germs;
    for (const auto& d : defs) germs.push_back(lift_field(d, x, k));
    const auto ug = jet::lift(u, x, k);
    const auto coeffs = ham::boxplus_sequence(germs, ug, k);
    const expr::Program up(u);

    ResidualFit fit;
    std::vector<double> lx, ly;
    SimOptions so;
    so.richardson = false;
    for (int j = 0; j < points; ++j) {
        const double t = 1e-3 * std::pow(100.0, static_cast<double>(j) / (points - 1));
        const std::vector<double> durations(fields.size(), t);
        const auto sim = integrate(fields, durations, x, so);
        const double value = up(sim.end);
        double series = ug.value();
        double tp = 1.0, fact = 1.0;
        for (int r = 1; r <= k; ++r) {
            tp *= t;
            fact *= r;
            series += coeffs.order(r)[0] * tp / fact;
        }
        const double residual = std::fabs(value - series);
        fit.table.emplace_back(t, residual);
        if (residual <= 1e-12 * std::max(1.0, std::fabs(value))) {
            ++fit.dropped;
            continue;
        }
        lx.push_back(std::log(t));
        ly.push_back(std::log(residual));
    }
    if (lx.size() < 3)
        raise(ErrorKind::DegenerateFit, "only " + std::to_string(lx.size()) +
                                            " residuals above the rounding floor; the expansion is exact to working precision");
    std::tie(fit.intercept, fit.slope) = fit_line(lx, ly);
    return fit;
}

namespace {

MinTimeEstimate reach_fat(const ControlSystem& sys, const engine::TargetDef& target,
                          const engine::StlaCertificate& cert, const Eigen::VectorXd& x, const ReachOptions& opts) {
    MinTimeEstimate est;
    est.start = x;
    est.method = "bisection";
    const auto& group = cert.groups.front();
    const auto defs = engine::resolve_group(sys, group.group);
    const auto fields = compile(defs);
    const FunctionSet fs(engine::certified_functions(sys, target));
    const Eigen::VectorXd level = fs(as_vector(cert.x_o));
    const auto start = as_vector(x);
    const double m = static_cast<double>(fields.size());

    SimOptions so;
    so.steps_per_leg = opts.steps_per_leg;
    so.richardson = false;
    auto excess = [&](double t) {
        const std::vector<double> durations(fields.size(), t);
        const auto sim = integrate(fields, durations, start, so);
        return (fs(sim.end) - level).maxCoeff();
    };

    est.tau = Eigen::VectorXd::Zero(1);
    const double g0 = (fs(start) - level).maxCoeff();
    if (g0 <= 0.0) {
        est.reached = true;
        return est;
    }
    const double sigma = std::isfinite(cert.bounds.sigma) ? cert.bounds.sigma : 1.0;
    const double t_max = std::min(1.0, sigma) / m;
    const double d = (x - cert.x_o).norm();
    double lo = 0.0;
    double hi = std::min(t_max, std::max(1e-3 * d, 1e-12));
    double g_hi = excess(hi);
    while (g_hi > 0.0 && hi < t_max) {
        lo = hi;
        hi = std::min(t_max, hi * 1.25);
        g_hi = excess(hi);
    }
    if (g_hi > 0.0) {
        est.residual = g_hi;
        est.warnings.push_back("no threshold t* found below the locality time bound");
        est.T_est = kNaN;
        return est;
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double g = excess(mid);
        if (g <= 0.0) {
            hi = mid;
            g_hi = g;
        } else {
            lo = mid;
        }
    }
    est.t_star = hi;
    est.tau(0) = hi;
    for (const auto& f : defs) est.schedule.legs.push_back({f.name, hi});
    est.T_est = m * hi;
    est.residual = std::max(0.0, g_hi);
    est.reached = true;
    return est;
}

MinTimeEstimate reach_petrov(const ControlSystem& sys, const engine::TargetDef& target,
                             const engine::StlaCertificate& cert, const Eigen::VectorXd& x, const ReachOptions& opts) {
    MinTimeEstimate est;
    est.start = x;
    est.method = "petrov";
    const std::size_t m = cert.groups.size();
    const FunctionSet fs(engine::certified_functions(sys, target));
    const auto x_o = as_vector(cert.x_o);
    const auto start = as_vector(x);
    const Eigen::VectorXd level = fs(x_o);

    // Flattened legs: group i contributes one leg per field, each tau_i^{1/k_i} long.
    std::vector<CompiledField> legs;
    std::vector<std::string> leg_names;
    std::vector<std::size_t> owner;
    for (std::size_t i = 0; i < m; ++i)
        for (const auto& def : engine::resolve_group(sys, cert.groups[i].group)) {
            legs.emplace_back(def);
            leg_names.push_back(def.name);
            owner.push_back(i);
        }
    auto durations = [&](const Eigen::VectorXd& tau) {
        std::vector<double> d(legs.size());
        for (std::size_t l = 0; l < legs.size(); ++l) {
            const auto i = owner[l];
            d[l] = std::pow(std::max(0.0, tau(static_cast<Eigen::Index>(i))), 1.0 / cert.groups[i].order);
        }
        return d;
    };

    Eigen::MatrixXd A = cert.A;
    if (cert.on_boundary) {
        A.conservativeResize(A.rows() + 1, Eigen::NoChange);
        A.row(A.rows() - 1) = cert.s->transpose();
    }

    SimOptions so;
    so.steps_per_leg = opts.steps_per_leg;
    so.richardson = false;
    struct Memo {
        Eigen::VectorXd tau;
        Eigen::VectorXd u_ref;
        Eigen::VectorXd u_act;
    };
    std::optional<Memo> memo;
    auto ends = [&](const Eigen::VectorXd& tau) -> const Memo& {
        if (!memo || memo->tau.size() != tau.size() || memo->tau != tau) {
            const auto d = durations(tau);
            Memo next{tau, fs(integrate(legs, d, x_o, so).end), fs(integrate(legs, d, start, so).end)};
            memo = std::move(next);
        }
        return *memo;
    };

    petrov::Problem p;
    p.A = cert.on_boundary ? cert.A : A;
    if (cert.on_boundary) p.s = *cert.s;
    p.rho = [&](const Eigen::VectorXd& tau) -> Eigen::VectorXd {
        const auto& e = ends(tau);
        return e.u_ref - e.u_act;
    };
    // Self-consistent perturbation: every column carries the measured expansion
    // residual divided by sum(tau), so (A + gamma) tau = u(x^o_T) - u(x_o) exactly.
    p.gamma = [&](const Eigen::VectorXd& tau) -> Eigen::MatrixXd {
        const Eigen::VectorXd clipped = tau.cwiseMax(0.0);
        const double S = clipped.sum();
        Eigen::MatrixXd g = Eigen::MatrixXd::Zero(A.rows(), A.cols());
        if (S <= 0.0) return g;
        const auto& e = ends(tau);
        const Eigen::VectorXd r = e.u_ref - level - A * clipped;
        g.colwise() = r / S;
        return g;
    };
    p.enforce_hypotheses = false;
    p.tol = 0.1 * opts.tolerance;
    p.max_iters = 2000;
    p.compass_budget = 4000;

    const double d = (x - cert.x_o).norm();
    const double K = std::isfinite(cert.K) && cert.K > 0.0 ? cert.K : 1e3;
    double delta = std::min(opts.delta_max, std::max(50.0 * K * d, 1e-12));
    petrov::Solution sol;
    for (int attempt = 0;; ++attempt) {
        p.delta = delta;
        try {
            sol = cert.on_boundary ? petrov::solve_boundary(p) : petrov::solve(p);
            break;
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NoConvergence || delta >= opts.delta_max || attempt >= 3) throw;
            est.warnings.push_back(std::string("retrying with a larger search radius: ") + e.what());
            delta = std::min(opts.delta_max, 4.0 * delta);
        }
    }
    for (const auto& w : sol.warnings) est.warnings.push_back(w);
    est.tau = sol.tau;
    {
        const auto d_final = durations(sol.tau);
        for (std::size_t l = 0; l < legs.size(); ++l) est.schedule.legs.push_back({leg_names[l], d_final[l]});
    }
    est.method = std::string("petrov/") + petrov::to_string(sol.branch);
    for (std::size_t i = 0; i < m; ++i)
        est.T_est += static_cast<double>(cert.groups[i].group.fields.size()) *
                     std::pow(std::max(0.0, sol.tau(static_cast<Eigen::Index>(i))), 1.0 / cert.groups[i].order);

    SimOptions check = so;
    check.center = cert.x_o;
    check.radius = sys.radius;
    Eigen::VectorXd end_values;
    try {
        end_values = fs(integrate(legs, durations(sol.tau), start, check).end);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ExitedLocality) throw;
        est.warnings.push_back(e.what());
        check.center.reset();
        end_values = fs(integrate(legs, durations(sol.tau), start, check).end);
    }
    const auto h = static_cast<Eigen::Index>(target.kind == engine::TargetKind::Point ? sys.dim() : target.functions.size());
    est.residual = (end_values.head(h) - level.head(h)).norm();
    bool inside = true;
    if (cert.on_boundary) inside = end_values(h) >= level(h) - opts.tolerance;
    est.reached = est.residual <= opts.tolerance && inside;
    return est;
}

}  // namespace

MinTimeEstimate reach_target(const ControlSystem& sys, const engine::TargetDef& target,
                             const engine::StlaCertificate& cert, const Eigen::VectorXd& x, const ReachOptions& opts) {
    if (!cert.certified || cert.groups.empty())
        raise(ErrorKind::DegenerateInput, "reach_target needs a successful certificate");
    if (x.size() != cert.x_o.size()) raise(ErrorKind::DimensionMismatch, "start point has the wrong dimension");
    const double d = (x - cert.x_o).norm();
    if (d > 0.5 * sys.radius)
        raise(ErrorKind::NotInBasin, "start point is " + num(d) + " away from x_o, beyond R/2 = " + num(0.5 * sys.radius));
    if (target.kind == engine::TargetKind::Fat) return reach_fat(sys, target, cert, x, opts);
    return reach_petrov(sys, target, cert, x, opts);
}

std::vector<Eigen::VectorXd> sample_directions(std::size_t n, int count, std::uint64_t seed) {
    std::vector<Eigen::VectorXd> out;
    if (n == 0 || count <= 0) return out;
    out.reserve(static_cast<std::size_t>(count));
    for (int j = 0; j < count; ++j) {
        Eigen::VectorXd v(static_cast<Eigen::Index>(n));
        if (n == 1) {
            v(0) = j % 2 == 0 ? 1.0 : -1.0;
        } else if (n == 2) {
            const double a = 2.0 * std::numbers::pi * (j + 0.5) / count;
            v << std::cos(a), std::sin(a);
        } else if (n == 3) {
            const double z = 1.0 - (2.0 * j + 1.0) / count;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            const double phi = j * std::numbers::pi * (3.0 - std::sqrt(5.0));
            v << r * std::cos(phi), r * std::sin(phi), z;
        } else {
            // Box-Muller on Halton pairs gives Gaussian coordinates.
            const std::size_t pairs = (n + 1) / 2;
            const auto h = halton(static_cast<std::uint64_t>(j), 2 * pairs, seed);
            for (std::size_t i = 0; i < n; ++i) {
                const double u1 = std::max(h[2 * (i / 2)], 1e-12);
                const double u2 = h[2 * (i / 2) + 1];
                const double rad = std::sqrt(-2.0 * std::log(u1));
                v(static_cast<Eigen::Index>(i)) = i % 2 == 0 ? rad * std::cos(2.0 * std::numbers::pi * u2)
                                                             : rad * std::sin(2.0 * std::numbers::pi * u2);
            }
        }
        out.push_back(v / v.norm());
    }
    return out;
}

HolderFit holder_fit(const ControlSystem& sys, const engine::TargetDef& target, const engine::StlaCertificate& cert,
                     const HolderOptions& opts) {
    std::vector<double> radii = opts.radii;
    if (radii.empty()) {
        if (opts.n_radii < 2) raise(ErrorKind::InsufficientSamples, "need at least two radii");
        for (int i = 0; i < opts.n_radii; ++i)
            radii.push_back(opts.r_min * std::pow(opts.r_max / opts.r_min, static_cast<double>(i) / (opts.n_radii - 1)));
    }
    const auto dirs = sample_directions(sys.dim(), opts.directions, opts.seed);

    HolderFit fit;
    fit.theory = cert.exponent;
    fit.samples.resize(radii.size() * dirs.size());
    parallel_for(fit.samples.size(), [&](std::size_t idx) {
        const std::size_t ri = idx / dirs.size();
        const std::size_t di = idx % dirs.size();
        HolderSample& s = fit.samples[idx];
        s.radius = radii[ri];
        s.direction = static_cast<int>(di);
        try {
            const auto est = reach_target(sys, target, cert, cert.x_o + radii[ri] * dirs[di], opts.reach);
            s.reached = est.reached;
            s.T_est = est.reached ? est.T_est : kNaN;
        } catch (const Error&) {
            s.reached = false;
            s.T_est = kNaN;
        }
    });

    std::vector<double> lx, ly;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        // The envelope is a sup over directions, so a radius with an unreached
        // sample has no valid value and is left out.
        double top = 0.0;
        bool complete = true;
        for (std::size_t di = 0; di < dirs.size(); ++di) {
            const auto& s = fit.samples[ri * dirs.size() + di];
            if (s.reached) top = std::max(top, s.T_est);
            else complete = false;
        }
        if (!complete || !(top > 0.0)) continue;
        fit.envelope.emplace_back(radii[ri], top);
        lx.push_back(std::log(radii[ri]));
        ly.push_back(std::log(top));
    }
    if (lx.size() < 3)
        raise(ErrorKind::InsufficientSamples,
              "only " + std::to_string(lx.size()) + " radii have every direction reaching the target in positive time");
    const auto [a, b] = fit_line(lx, ly);
    fit.exponent = b;
    fit.constant = std::exp(a);
    return fit;
}

void write_trajectory_csv(std::ostream& os, const SimResult& sim, std::size_t n) {
    os << "t";
    for (std::size_t i = 1; i <= n; ++i) os << ",x" << i;
    os << "\n";
    for (std::size_t r = 0; r < sim.states.size(); ++r) {
        os << num(sim.times[r]);
        for (double v : sim.states[r]) os << "," << num(v);
        os << "\n";
    }
}

void write_holder_csv(std::ostream& os, const HolderFit& fit) {
    os << "radius,direction,T_est\n";
    for (const auto& s : fit.samples) os << num(s.radius) << "," << s.direction << "," << num(s.T_est) << "\n";
}

void write_residual_csv(std::ostream& os, const ResidualFit& fit) {
    os << "t,residual\n";
    for (const auto& [t, r] : fit.table) os << num(t) << "," << num(r) << "\n";
}

}  // namespace stla::traj
