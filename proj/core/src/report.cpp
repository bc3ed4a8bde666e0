#include "stla/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "stla/identities.hpp"
#include "stla/trajectory.hpp"

namespace stla::cli {

using ojson = nlohmann::ordered_json;

namespace {

ojson number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

ojson vec(const Eigen::VectorXd& v) {
    ojson a = ojson::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
    return a;
}

ojson vec(const std::vector<double>& v) {
    ojson a = ojson::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

ojson mat(const Eigen::MatrixXd& m) {
    ojson a = ojson::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(Eigen::VectorXd(m.row(r).transpose())));
    return a;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt(const Eigen::VectorXd& v) {
    std::string s = "(";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v(i));
    return s + ")";
}

std::string group_text(const engine::GroupSpec& g) {
    std::string s = "(";
    for (std::size_t i = 0; i < g.fields.size(); ++i) s += (i ? ", " : "") + g.fields[i];
    return s + ")";
}

ojson group_json(const engine::GroupSpec& g) {
    return ojson{{"fields", g.fields}, {"order", g.order}};
}

ojson certificate_json(const engine::StlaCertificate& c) {
    ojson j;
    j["certified"] = c.certified;
    j["failure"] = c.failure ? ojson(std::string(to_string(*c.failure))) : ojson(nullptr);
    j["detail"] = c.detail;
    j["theorem"] = engine::to_string(c.theorem);
    j["x_o"] = vec(c.x_o);
    j["on_boundary"] = c.on_boundary;
    j["k_bar"] = c.k_bar;
    j["exponent"] = number(c.exponent);
    ojson groups = ojson::array();
    for (const auto& g : c.groups) {
        ojson gj = group_json(g.group);
        gj["order"] = g.order;
        gj["column"] = vec(g.column);
        if (g.s) gj["s"] = number(*g.s);
        if (!g.component_orders.empty()) gj["component_orders"] = g.component_orders;
        ojson raw = ojson::array();
        for (const auto& r : g.raw) raw.push_back(vec(r));
        gj["raw"] = std::move(raw);
        gj["tolerance"] = number(g.tolerance);
        gj["max_vanishing"] = number(g.max_vanishing);
        groups.push_back(std::move(gj));
    }
    j["groups"] = std::move(groups);
    ojson rejected = ojson::array();
    for (const auto& r : c.rejected) rejected.push_back({{"group", group_json(r.group)}, {"reason", r.reason}});
    j["rejected"] = std::move(rejected);
    j["A"] = mat(c.A);
    j["s"] = c.s ? vec(*c.s) : ojson(nullptr);
    if (c.span) {
        ojson sp;
        sp["verdict"] = c.span->verdict;
        sp["rank"] = c.span->rank;
        sp["lambda"] = vec(c.span->lambda);
        sp["margin"] = number(c.span->margin);
        sp["residual"] = number(c.span->residual);
        if (c.span->mu) sp["mu"] = vec(*c.span->mu);
        if (!c.span->reason.empty()) sp["reason"] = c.span->reason;
        j["span"] = std::move(sp);
    } else {
        j["span"] = nullptr;
    }
    j["tolerance"] = number(c.tolerance);
    j["worst_margin"] = number(c.worst_margin);
    j["bounds"] = {{"R", number(c.bounds.R)},
                   {"L", number(c.bounds.L)},
                   {"M", number(c.bounds.M)},
                   {"sigma", number(c.bounds.sigma)}};
    j["K"] = number(c.K);
    j["eccentricity"] = number(c.eccentricity);
    ojson sides = ojson::array();
    for (const auto& s : c.side_conditions) sides.push_back({{"name", s.name}, {"holds", s.holds}, {"how", s.how}});
    j["side_conditions"] = std::move(sides);
    j["restricted_vars"] = c.restricted_vars;
    return j;
}

struct CertEntry {
    std::optional<engine::StlaCertificate> cert;
    std::optional<engine::SearchResult> search;
    std::optional<ErrorKind> error;
    std::string message;
};

class Runner {
public:
    explicit Runner(const AnalysisConfig& cfg) : cfg_(cfg) {}

    Report execute(const std::vector<Task>& tasks) {
        ojson doc;
        doc["name"] = cfg_.name;
        doc["seed"] = cfg_.seed;
        ojson sys;
        sys["variables"] = cfg_.system.variables;
        sys["structure"] = to_string(cfg_.system.structure);
        sys["radius"] = number(cfg_.system.radius);
        ojson palette = ojson::array();
        for (const auto& f : expand_palette(cfg_.system)) palette.push_back(f.name);
        sys["palette"] = std::move(palette);
        doc["system"] = std::move(sys);
        ojson task_names = ojson::array();
        for (Task t : tasks) task_names.push_back(to_string(t));
        doc["tasks"] = std::move(task_names);

        text_ << "analysis " << cfg_.name << "\n";
        ojson results = ojson::array();
        for (Task t : tasks) {
            text_ << "\n[" << to_string(t) << "]\n";
            switch (t) {
                case Task::Certify: results.push_back(certify_task()); break;
                case Task::Search: results.push_back(search_task()); break;
                case Task::Reach: results.push_back(reach_task()); break;
                case Task::Holder: results.push_back(holder_task()); break;
                case Task::Identities: results.push_back(identities_task()); break;
                case Task::Expansion: results.push_back(expansion_task()); break;
            }
        }
        doc["results"] = std::move(results);
        doc["errors"] = errors_;
        report_.exit_code = has_error_ ? 1 : (has_failure_ ? 2 : 0);
        doc["exit_code"] = report_.exit_code;
        text_ << "\nexit code " << report_.exit_code << "\n";
        report_.json = doc.dump(2) + "\n";
        report_.text = text_.str();
        return std::move(report_);
    }

private:
    void error(const char* task, const std::string& where, ErrorKind kind, const std::string& message) {
        has_error_ = true;
        errors_.push_back({{"task", task}, {"where", where}, {"kind", std::string(to_string(kind))}, {"message", message}});
        text_ << "  error in " << where << ": " << to_string(kind) << ": " << message << "\n";
    }

    std::string where(std::size_t t, std::size_t p) const {
        return cfg_.targets[t].name + "[" + std::to_string(p) + "]";
    }

    const engine::SearchResult& search_for(std::size_t t, std::size_t p, CertEntry& e) {
        if (!e.search) {
            const auto& tc = cfg_.targets[t];
            e.search = engine::search_groups(cfg_.system, tc.def, tc.points[p], cfg_.search, cfg_.options);
        }
        return *e.search;
    }

    CertEntry& entry(std::size_t t, std::size_t p) { return cache_[{t, p}]; }

    CertEntry& certificate(std::size_t t, std::size_t p) {
        CertEntry& e = entry(t, p);
        if (e.cert || e.error) return e;
        const auto& tc = cfg_.targets[t];
        engine::Options opts = cfg_.options;
        opts.restricted_vars = tc.restricted_vars;
        try {
            const auto& groups = tc.explicit_groups ? tc.groups : search_for(t, p, e).groups;
            e.cert = engine::certify(cfg_.system, tc.def, tc.points[p], groups, tc.variant, opts);
        } catch (const Error& err) {
            e.error = err.kind();
            e.message = err.what();
        }
        return e;
    }

    ojson certify_task() {
        ojson out{{"task", "certify"}};
        ojson targets = ojson::array();
        for (std::size_t t = 0; t < cfg_.targets.size(); ++t) {
            const auto& tc = cfg_.targets[t];
            ojson tj{{"target", tc.name}, {"kind", engine::to_string(tc.def.kind)}};
            tj["functions"] = tc.function_text;
            if (tc.boundary_text) tj["boundary"] = *tc.boundary_text;
            if (tc.comparison_text) tj["comparison"] = *tc.comparison_text;
            tj["groups_from"] = tc.explicit_groups ? "config" : "search";
            ojson points = ojson::array();
            for (std::size_t p = 0; p < tc.points.size(); ++p) {
                auto& e = certificate(t, p);
                CertSummary sum;
                sum.target = tc.name;
                sum.point = p;
                if (e.error) {
                    sum.error = e.error;
                    error("certify", where(t, p), *e.error, e.message);
                    points.push_back({{"x_o", vec(tc.points[p])}, {"error", std::string(to_string(*e.error))},
                                      {"message", e.message}});
                } else {
                    const auto& c = *e.cert;
                    sum.certified = c.certified;
                    sum.failure = c.failure;
                    sum.theorem = engine::to_string(c.theorem);
                    sum.k_bar = c.k_bar;
                    if (!c.certified) has_failure_ = true;
                    points.push_back(certificate_json(c));
                    text_ << "  " << where(t, p) << " at " << fmt(tc.points[p]) << ": ";
                    if (c.certified) {
                        text_ << "certified (" << engine::to_string(c.theorem) << "), order " << c.k_bar
                              << ", exponent " << fmt(c.exponent) << "\n";
                        for (const auto& g : c.groups)
                            text_ << "    group " << group_text(g.group) << " order " << g.order << " column "
                                  << fmt(g.column) << "\n";
                    } else {
                        text_ << "not certified: " << to_string(*c.failure) << ": " << c.detail << "\n";
                    }
                }
                report_.certificates.push_back(std::move(sum));
            }
            tj["points"] = std::move(points);
            targets.push_back(std::move(tj));
        }
        out["targets"] = std::move(targets);
        return out;
    }

    ojson search_task() {
        ojson out{{"task", "search"}};
        ojson targets = ojson::array();
        for (std::size_t t = 0; t < cfg_.targets.size(); ++t) {
            const auto& tc = cfg_.targets[t];
            ojson points = ojson::array();
            for (std::size_t p = 0; p < tc.points.size(); ++p) {
                auto& e = entry(t, p);
                try {
                    const auto& s = search_for(t, p, e);
                    ojson groups = ojson::array();
                    for (const auto& g : s.groups) groups.push_back(group_json(g));
                    points.push_back({{"x_o", vec(tc.points[p])},
                                      {"groups", std::move(groups)},
                                      {"evaluated", s.evaluated},
                                      {"budget_exhausted", s.budget_exhausted}});
                    text_ << "  " << where(t, p) << ": " << s.groups.size() << " groups from " << s.evaluated
                          << " tuples" << (s.budget_exhausted ? " (budget exhausted)" : "") << "\n";
                    for (const auto& g : s.groups) text_ << "    " << group_text(g) << " order " << g.order << "\n";
                } catch (const Error& err) {
                    error("search", where(t, p), err.kind(), err.what());
                    points.push_back({{"x_o", vec(tc.points[p])}, {"error", std::string(to_string(err.kind()))},
                                      {"message", err.what()}});
                }
            }
            targets.push_back({{"target", tc.name}, {"points", std::move(points)}});
        }
        out["targets"] = std::move(targets);
        return out;
    }

    /// Certificate for a trajectory task, or nullptr after recording why not.
    const engine::StlaCertificate* certified(const char* task, std::size_t t, std::size_t p) {
        auto& e = certificate(t, p);
        if (e.error) {
            error(task, where(t, p), *e.error, e.message);
            return nullptr;
        }
        if (!e.cert->certified) {
            has_failure_ = true;
            text_ << "  " << where(t, p) << " is not certified (" << to_string(*e.cert->failure) << "); skipped\n";
            return nullptr;
        }
        return &*e.cert;
    }

    ojson reach_task() {
        const auto& rc = cfg_.reach;
        ojson out{{"task", "reach"}, {"target", cfg_.targets[rc.target].name}, {"point", rc.point}};
        const auto* cert = certified("reach", rc.target, rc.point);
        if (!cert) return out;
        const auto& def = cfg_.targets[rc.target].def;
        const std::size_t n = cfg_.system.dim();
        std::ostringstream table;
        table << "index";
        for (std::size_t i = 1; i <= n; ++i) table << ",x" << i;
        table << ",T_est,residual,reached\n";
        ojson starts = ojson::array();
        for (std::size_t s = 0; s < rc.starts.size(); ++s) {
            const std::string w = where(rc.target, rc.point) + " start " + std::to_string(s);
            try {
                const auto est = traj::reach_target(cfg_.system, def, *cert, rc.starts[s], rc.options);
                ojson legs = ojson::array();
                for (const auto& l : est.schedule.legs) legs.push_back({{"field", l.field}, {"duration", number(l.duration)}});
                starts.push_back({{"start", vec(est.start)},
                                  {"reached", est.reached},
                                  {"T_est", number(est.T_est)},
                                  {"residual", number(est.residual)},
                                  {"tau", vec(est.tau)},
                                  {"t_star", number(est.t_star)},
                                  {"method", est.method},
                                  {"schedule", std::move(legs)},
                                  {"warnings", est.warnings}});
                table << s;
                for (Eigen::Index i = 0; i < est.start.size(); ++i) table << "," << csv(est.start(i));
                table << "," << csv(est.T_est) << "," << csv(est.residual) << "," << (est.reached ? 1 : 0) << "\n";
                text_ << "  start " << fmt(est.start) << ": " << (est.reached ? "reached" : "not reached")
                      << ", T_est " << fmt(est.T_est) << ", residual " << fmt(est.residual) << " (" << est.method
                      << ")\n";
                if (!est.schedule.legs.empty()) {
                    traj::SimOptions so;
                    so.record = true;
                    so.richardson = false;
                    so.steps_per_leg = std::min(rc.options.steps_per_leg, 200);
                    std::vector<double> x0(est.start.data(), est.start.data() + est.start.size());
                    const auto sim = traj::integrate_switched(cfg_.system, est.schedule, x0, so);
                    std::ostringstream csv_out;
                    traj::write_trajectory_csv(csv_out, sim, n);
                    report_.artifacts.push_back({"reach_trajectory_" + std::to_string(s) + ".csv", csv_out.str()});
                }
            } catch (const Error& err) {
                error("reach", w, err.kind(), err.what());
                starts.push_back({{"start", vec(rc.starts[s])}, {"error", std::string(to_string(err.kind()))},
                                  {"message", err.what()}});
            }
        }
        report_.artifacts.push_back({"reach.csv", table.str()});
        out["starts"] = std::move(starts);
        return out;
    }

    ojson holder_task() {
        const auto& hc = cfg_.holder;
        ojson out{{"task", "holder"}, {"target", cfg_.targets[hc.target].name}, {"point", hc.point}};
        const auto* cert = certified("holder", hc.target, hc.point);
        if (!cert) return out;
        try {
            const auto fit = traj::holder_fit(cfg_.system, cfg_.targets[hc.target].def, *cert, hc.options);
            out["exponent"] = number(fit.exponent);
            out["constant"] = number(fit.constant);
            out["theory"] = number(fit.theory);
            ojson env = ojson::array();
            for (const auto& [r, T] : fit.envelope) env.push_back({number(r), number(T)});
            out["envelope"] = std::move(env);
            std::size_t reached = 0;
            for (const auto& s : fit.samples) reached += s.reached ? 1 : 0;
            out["samples"] = fit.samples.size();
            out["reached"] = reached;
            std::ostringstream os;
            traj::write_holder_csv(os, fit);
            report_.artifacts.push_back({"holder.csv", os.str()});
            text_ << "  fitted exponent " << fmt(fit.exponent) << " (theory " << fmt(fit.theory) << "), " << reached
                  << "/" << fit.samples.size() << " samples reached\n";
        } catch (const Error& err) {
            error("holder", where(hc.target, hc.point), err.kind(), err.what());
        }
        return out;
    }

    ojson identities_task() {
        ojson out{{"task", "identities"}};
        ojson targets = ojson::array();
        ham::IdentitySuiteOptions opts;
        opts.k_max = std::min(cfg_.options.k_max, 4);
        for (std::size_t t = 0; t < cfg_.targets.size(); ++t) {
            const auto& tc = cfg_.targets[t];
            try {
                const auto checks = ham::run_identity_suite(cfg_.system, engine::certified_functions(cfg_.system, tc.def),
                                                            tc.points.front(), opts);
                ojson cj = ojson::array();
                for (const auto& c : checks) {
                    cj.push_back({{"identity", c.name},
                                  {"instances", c.instances},
                                  {"max_error", number(c.max_error)},
                                  {"passed", c.passed},
                                  {"worst", c.worst}});
                    text_ << "  " << where(t, 0) << " " << c.name << ": " << (c.passed ? "pass" : "FAIL") << " ("
                          << c.instances << " instances, max relative error " << fmt(c.max_error) << ")\n";
                    if (!c.passed)
                        error("identities", where(t, 0), ErrorKind::NumericalBreakdown,
                              "identity '" + c.name + "' failed on " + c.worst);
                }
                targets.push_back({{"target", tc.name}, {"checks", std::move(cj)}});
            } catch (const Error& err) {
                error("identities", where(t, 0), err.kind(), err.what());
            }
        }
        out["targets"] = std::move(targets);
        return out;
    }

    ojson expansion_task() {
        const auto& ec = *cfg_.expansion;
        ojson out{{"task", "expansion"}, {"target", cfg_.targets[ec.target].name}, {"point", ec.point},
                  {"group", ec.group.fields}, {"function", ec.function_text}, {"order", ec.order}};
        try {
            const auto fit = traj::expansion_residual_order(cfg_.system, ec.group, ec.function,
                                                            cfg_.targets[ec.target].points[ec.point], ec.order);
            out["slope"] = number(fit.slope);
            out["intercept"] = number(fit.intercept);
            out["dropped"] = fit.dropped;
            std::ostringstream os;
            traj::write_residual_csv(os, fit);
            report_.artifacts.push_back({"expansion.csv", os.str()});
            text_ << "  residual slope " << fmt(fit.slope) << " for order " << ec.order << " (" << fit.dropped
                  << " points at the rounding floor)\n";
        } catch (const Error& err) {
            error("expansion", where(ec.target, ec.point), err.kind(), err.what());
        }
        return out;
    }

    static std::string csv(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    const AnalysisConfig& cfg_;
    Report report_;
    std::ostringstream text_;
    ojson errors_ = ojson::array();
    bool has_error_ = false;
    bool has_failure_ = false;
    std::map<std::pair<std::size_t, std::size_t>, CertEntry> cache_;
};

}  // namespace

Report run(const AnalysisConfig& config) { return run(config, config.tasks); }

Report run(const AnalysisConfig& config, const std::vector<Task>& tasks) { return Runner(config).execute(tasks); }

void write_report(const Report& report, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) raise(ErrorKind::Io, "cannot create output directory '" + out_dir + "': " + ec.message());
    auto put = [&](const std::string& name, const std::string& content) {
        const auto path = fs::path(out_dir) / name;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << content;
        out.close();
        if (!out) raise(ErrorKind::Io, "cannot write '" + path.string() + "'");
    };
    put("report.json", report.json);
    put("report.txt", report.text);
    for (const auto& a : report.artifacts) put(a.filename, a.content);
}

}  // namespace stla::cli
