#include "stla/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "stla/error.hpp"

namespace stla::cli {

using json = nlohmann::json;

const char* to_string(Task t) noexcept {
    switch (t) {
        case Task::Certify: return "certify";
        case Task::Search: return "search";
        case Task::Reach: return "reach";
        case Task::Holder: return "holder";
        case Task::Identities: return "identities";
        case Task::Expansion: return "expansion";
    }
    return "certify";
}

std::optional<Task> parse_task(std::string_view name) noexcept {
    for (Task t : {Task::Certify, Task::Search, Task::Reach, Task::Holder, Task::Identities, Task::Expansion})
        if (name == to_string(t)) return t;
    return std::nullopt;
}

namespace {

class Reader {
public:
    explicit Reader(std::string origin) : origin_(std::move(origin)) {}

    [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
        raise(ErrorKind::Config, origin_ + ": at " + (ptr.empty() ? "/" : ptr) + ": " + msg);
    }

    const json& object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) const {
        if (!j.is_object()) fail(ptr, "expected an object");
        for (auto it = j.begin(); it != j.end(); ++it)
            if (std::none_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }))
                fail(ptr + "/" + it.key(), "unknown key");
        return j;
    }

    std::string string(const json& j, const std::string& ptr) const {
        if (!j.is_string()) fail(ptr, "expected a string");
        return j.get<std::string>();
    }

    double number(const json& j, const std::string& ptr) const {
        if (!j.is_number()) fail(ptr, "expected a number");
        return j.get<double>();
    }

    long integer(const json& j, const std::string& ptr) const {
        if (!j.is_number_integer()) fail(ptr, "expected an integer");
        return j.get<long>();
    }

    std::size_t count(const json& j, const std::string& ptr) const {
        const long v = integer(j, ptr);
        if (v < 0) fail(ptr, "expected a nonnegative integer");
        return static_cast<std::size_t>(v);
    }

    const json& array(const json& j, const std::string& ptr) const {
        if (!j.is_array()) fail(ptr, "expected an array");
        return j;
    }

    std::vector<std::string> strings(const json& j, const std::string& ptr) const {
        std::vector<std::string> out;
        const auto& a = array(j, ptr);
        for (std::size_t i = 0; i < a.size(); ++i) out.push_back(string(a[i], ptr + "/" + std::to_string(i)));
        return out;
    }

    Eigen::VectorXd point(const json& j, const std::string& ptr, std::size_t dim) const {
        const auto& a = array(j, ptr);
        if (a.size() != dim)
            fail(ptr, "point has " + std::to_string(a.size()) + " coordinates, the state has " + std::to_string(dim));
        Eigen::VectorXd p(static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i) p(static_cast<Eigen::Index>(i)) = number(a[i], ptr + "/" + std::to_string(i));
        return p;
    }

    std::vector<double> numbers(const json& j, const std::string& ptr) const {
        std::vector<double> out;
        const auto& a = array(j, ptr);
        for (std::size_t i = 0; i < a.size(); ++i) out.push_back(number(a[i], ptr + "/" + std::to_string(i)));
        return out;
    }

    expr::Expr expression(const json& j, const std::string& ptr, const std::vector<std::string>& vars,
                          const expr::Parameters& params) const {
        const std::string text = string(j, ptr);
        try {
            return expr::parse(text, vars, params);
        } catch (const SyntaxError& e) {
            throw SyntaxError(e.offset(), origin_ + ": at " + ptr + ": " + e.what());
        } catch (const Error& e) {
            fail(ptr, std::string("expression '") + text + "': " + e.what());
        }
    }

    const std::string& origin() const noexcept { return origin_; }

private:
    std::string origin_;
};

std::string line_context(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return std::to_string(line) + ":" + std::to_string(col);
}

Structure parse_structure(const Reader& rd, const json& j, const std::string& ptr) {
    const auto s = rd.string(j, ptr);
    if (s == "general") return Structure::General;
    if (s == "symmetric") return Structure::Symmetric;
    if (s == "convex") return Structure::Convex;
    if (s == "affine") return Structure::Affine;
    rd.fail(ptr, "structure must be general, symmetric, convex or affine");
}

engine::ManifoldVariant parse_variant(const Reader& rd, const json& j, const std::string& ptr) {
    const auto s = rd.string(j, ptr);
    for (auto v : {engine::ManifoldVariant::Auto, engine::ManifoldVariant::StrictExtra,
                   engine::ManifoldVariant::RestrictedVars, engine::ManifoldVariant::BlockStructure})
        if (s == engine::to_string(v)) return v;
    rd.fail(ptr, "variant must be auto, strict-extra, restricted-vars or block-structure");
}

std::vector<engine::GroupSpec> parse_groups(const Reader& rd, const json& j, const std::string& ptr,
                                            const ControlSystem& sys) {
    std::vector<engine::GroupSpec> out;
    const auto& a = rd.array(j, ptr);
    for (std::size_t i = 0; i < a.size(); ++i) {
        const std::string gp = ptr + "/" + std::to_string(i);
        rd.object(a[i], gp, {"fields", "order"});
        if (!a[i].contains("fields")) rd.fail(gp, "group needs \"fields\"");
        engine::GroupSpec g;
        g.fields = rd.strings(a[i]["fields"], gp + "/fields");
        if (g.fields.empty()) rd.fail(gp + "/fields", "group has no fields");
        if (a[i].contains("order")) {
            const long k = rd.integer(a[i]["order"], gp + "/order");
            if (k < 0 || k > 12) rd.fail(gp + "/order", "order must be between 0 (detect) and 12");
            g.order = static_cast<int>(k);
        }
        try {
            engine::resolve_group(sys, g);
        } catch (const Error& e) {
            rd.fail(gp + "/fields", e.what());
        }
        out.push_back(std::move(g));
    }
    return out;
}

std::size_t variable_index(const Reader& rd, const ControlSystem& sys, const json& j, const std::string& ptr) {
    const auto name = rd.string(j, ptr);
    const auto it = std::find(sys.variables.begin(), sys.variables.end(), name);
    if (it == sys.variables.end()) rd.fail(ptr, "unknown variable '" + name + "'");
    return static_cast<std::size_t>(it - sys.variables.begin());
}

std::size_t target_index(const Reader& rd, const AnalysisConfig& cfg, const json& j, const std::string& ptr) {
    const auto name = rd.string(j, ptr);
    for (std::size_t i = 0; i < cfg.targets.size(); ++i)
        if (cfg.targets[i].name == name) return i;
    rd.fail(ptr, "unknown target '" + name + "'");
}

void check_point_index(const Reader& rd, const AnalysisConfig& cfg, std::size_t target, std::size_t point,
                       const std::string& ptr) {
    if (cfg.targets.empty()) rd.fail(ptr, "no targets declared");
    if (point >= cfg.targets[target].points.size()) rd.fail(ptr, "point index out of range");
}

}  // namespace

AnalysisConfig parse_config(std::string_view text, const std::string& origin) {
    Reader rd(origin);
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        raise(ErrorKind::Config, origin + ":" + line_context(text, e.byte > 0 ? e.byte - 1 : 0) + ": " + e.what());
    }
    rd.object(root, "", {"name", "description", "seed", "parameters", "system", "targets", "analysis"});

    AnalysisConfig cfg;
    cfg.origin = origin;
    cfg.name = root.contains("name") ? rd.string(root["name"], "/name")
                                     : std::filesystem::path(origin).stem().string();
    if (root.contains("seed")) cfg.seed = rd.count(root["seed"], "/seed");

    if (root.contains("parameters")) {
        const auto& p = root["parameters"];
        if (!p.is_object()) rd.fail("/parameters", "expected an object");
        for (auto it = p.begin(); it != p.end(); ++it) cfg.parameters[it.key()] = rd.number(*it, "/parameters/" + it.key());
    }

    // system
    if (!root.contains("system")) rd.fail("", "missing \"system\"");
    const auto& js = rd.object(root["system"], "/system", {"variables", "fields", "structure", "drift", "controls", "radius"});
    auto& sys = cfg.system;
    if (!js.contains("variables")) rd.fail("/system", "missing \"variables\"");
    sys.variables = rd.strings(js["variables"], "/system/variables");
    if (!js.contains("fields")) rd.fail("/system", "missing \"fields\"");
    const auto& jf = rd.array(js["fields"], "/system/fields");
    for (std::size_t i = 0; i < jf.size(); ++i) {
        const std::string fp = "/system/fields/" + std::to_string(i);
        rd.object(jf[i], fp, {"name", "components"});
        if (!jf[i].contains("name") || !jf[i].contains("components")) rd.fail(fp, "field needs \"name\" and \"components\"");
        VectorFieldDef f;
        f.name = rd.string(jf[i]["name"], fp + "/name");
        const auto& comps = rd.array(jf[i]["components"], fp + "/components");
        if (comps.size() != sys.variables.size())
            rd.fail(fp + "/components", "field '" + f.name + "' has " + std::to_string(comps.size()) +
                                            " components but there are " + std::to_string(sys.variables.size()) +
                                            " state variables");
        for (std::size_t c = 0; c < comps.size(); ++c)
            f.components.push_back(rd.expression(comps[c], fp + "/components/" + std::to_string(c), sys.variables,
                                                 cfg.parameters));
        sys.fields.push_back(std::move(f));
    }
    if (js.contains("structure")) sys.structure = parse_structure(rd, js["structure"], "/system/structure");
    if (js.contains("drift")) sys.drift = rd.string(js["drift"], "/system/drift");
    if (js.contains("controls")) sys.controls = rd.strings(js["controls"], "/system/controls");
    if (js.contains("radius")) sys.radius = rd.number(js["radius"], "/system/radius");
    try {
        sys.validate();
    } catch (const Error& e) {
        rd.fail("/system", e.what());
    }

    // analysis defaults needed by targets
    json ja = root.contains("analysis") ? root["analysis"] : json::object();
    rd.object(ja, "/analysis",
              {"tasks", "groups", "tolerance", "k_max", "search", "reach", "holder", "expansion", "spot_check"});
    std::vector<engine::GroupSpec> default_groups;
    bool default_given = false;
    if (ja.contains("groups")) {
        default_groups = parse_groups(rd, ja["groups"], "/analysis/groups", sys);
        default_given = true;
    }

    // targets
    if (!root.contains("targets")) rd.fail("", "missing \"targets\"");
    const auto& jt = rd.array(root["targets"], "/targets");
    if (jt.empty()) rd.fail("/targets", "no targets declared");
    std::set<std::string> names;
    for (std::size_t i = 0; i < jt.size(); ++i) {
        const std::string tp = "/targets/" + std::to_string(i);
        rd.object(jt[i], tp,
                  {"name", "kind", "functions", "boundary", "comparison", "points", "groups", "variant", "restricted_vars"});
        TargetConfig t;
        t.name = jt[i].contains("name") ? rd.string(jt[i]["name"], tp + "/name") : "target" + std::to_string(i + 1);
        if (!names.insert(t.name).second) rd.fail(tp + "/name", "duplicate target name '" + t.name + "'");
        if (!jt[i].contains("kind")) rd.fail(tp, "missing \"kind\"");
        const auto kind = rd.string(jt[i]["kind"], tp + "/kind");
        if (kind == "fat") t.def.kind = engine::TargetKind::Fat;
        else if (kind == "point") t.def.kind = engine::TargetKind::Point;
        else if (kind == "manifold") t.def.kind = engine::TargetKind::Manifold;
        else rd.fail(tp + "/kind", "kind must be fat, point or manifold");

        if (jt[i].contains("functions")) {
            const auto& fa = rd.array(jt[i]["functions"], tp + "/functions");
            for (std::size_t c = 0; c < fa.size(); ++c) {
                t.function_text.push_back(rd.string(fa[c], tp + "/functions/" + std::to_string(c)));
                t.def.functions.push_back(
                    rd.expression(fa[c], tp + "/functions/" + std::to_string(c), sys.variables, cfg.parameters));
            }
        }
        if (jt[i].contains("boundary")) {
            if (t.def.kind != engine::TargetKind::Manifold) rd.fail(tp + "/boundary", "only manifold targets have a boundary");
            t.boundary_text = rd.string(jt[i]["boundary"], tp + "/boundary");
            t.def.boundary = rd.expression(jt[i]["boundary"], tp + "/boundary", sys.variables, cfg.parameters);
        }
        if (jt[i].contains("comparison")) {
            if (t.def.kind != engine::TargetKind::Fat) rd.fail(tp + "/comparison", "only fat targets take a comparison function");
            t.comparison_text = rd.string(jt[i]["comparison"], tp + "/comparison");
            t.def.comparison = rd.expression(jt[i]["comparison"], tp + "/comparison", sys.variables, cfg.parameters);
        }
        if (t.def.kind == engine::TargetKind::Point && !t.def.functions.empty())
            rd.fail(tp + "/functions", "point targets take no functions");
        if (t.def.kind != engine::TargetKind::Point && t.def.functions.empty())
            rd.fail(tp + "/functions", "target needs at least one function");

        if (!jt[i].contains("points")) rd.fail(tp, "missing \"points\"");
        const auto& pts = rd.array(jt[i]["points"], tp + "/points");
        if (pts.empty()) rd.fail(tp + "/points", "no base points");
        for (std::size_t p = 0; p < pts.size(); ++p)
            t.points.push_back(rd.point(pts[p], tp + "/points/" + std::to_string(p), sys.dim()));

        if (jt[i].contains("groups")) {
            t.groups = parse_groups(rd, jt[i]["groups"], tp + "/groups", sys);
            t.explicit_groups = true;
        } else {
            t.groups = default_groups;
            t.explicit_groups = default_given;
        }
        if (jt[i].contains("variant")) t.variant = parse_variant(rd, jt[i]["variant"], tp + "/variant");
        if (jt[i].contains("restricted_vars")) {
            const auto& rv = rd.array(jt[i]["restricted_vars"], tp + "/restricted_vars");
            for (std::size_t r = 0; r < rv.size(); ++r)
                t.restricted_vars.push_back(variable_index(rd, sys, rv[r], tp + "/restricted_vars/" + std::to_string(r)));
        }
        cfg.targets.push_back(std::move(t));
    }

    // analysis
    if (!ja.contains("tasks")) rd.fail("/analysis", "missing \"tasks\"");
    for (const auto& name : rd.strings(ja["tasks"], "/analysis/tasks")) {
        const auto t = parse_task(name);
        if (!t) rd.fail("/analysis/tasks", "unknown task '" + name + "'");
        cfg.tasks.push_back(*t);
    }
    if (cfg.tasks.empty()) rd.fail("/analysis/tasks", "task list is empty");

    cfg.options.seed = cfg.seed;
    if (ja.contains("tolerance")) {
        cfg.options.tol_rel = rd.number(ja["tolerance"], "/analysis/tolerance");
        if (!(cfg.options.tol_rel > 0.0)) rd.fail("/analysis/tolerance", "tolerance must be positive");
    }
    if (ja.contains("k_max")) cfg.options.k_max = static_cast<int>(rd.count(ja["k_max"], "/analysis/k_max"));
    if (ja.contains("spot_check")) {
        if (!ja["spot_check"].is_boolean()) rd.fail("/analysis/spot_check", "expected a boolean");
        cfg.options.spot_check_comparison = ja["spot_check"].get<bool>();
    }

    if (ja.contains("search")) {
        const auto& s = rd.object(ja["search"], "/analysis/search", {"k_max", "length_max", "max_groups", "budget"});
        if (s.contains("k_max")) cfg.search.k_max = static_cast<int>(rd.count(s["k_max"], "/analysis/search/k_max"));
        if (s.contains("length_max"))
            cfg.search.length_max = static_cast<int>(rd.count(s["length_max"], "/analysis/search/length_max"));
        if (s.contains("max_groups")) cfg.search.max_groups = rd.count(s["max_groups"], "/analysis/search/max_groups");
        if (s.contains("budget")) cfg.search.budget = rd.count(s["budget"], "/analysis/search/budget");
    }

    auto where = [&](const json& j, const std::string& ptr, std::size_t& target, std::size_t& point) {
        if (j.contains("target")) target = target_index(rd, cfg, j["target"], ptr + "/target");
        if (j.contains("point")) point = rd.count(j["point"], ptr + "/point");
        check_point_index(rd, cfg, target, point, ptr + "/point");
    };

    const bool wants_reach = std::find(cfg.tasks.begin(), cfg.tasks.end(), Task::Reach) != cfg.tasks.end();
    if (ja.contains("reach")) {
        const std::string rp = "/analysis/reach";
        const auto& r = rd.object(ja["reach"], rp, {"target", "point", "starts", "tolerance", "steps_per_leg"});
        where(r, rp, cfg.reach.target, cfg.reach.point);
        if (r.contains("starts")) {
            const auto& st = rd.array(r["starts"], rp + "/starts");
            for (std::size_t i = 0; i < st.size(); ++i)
                cfg.reach.starts.push_back(rd.point(st[i], rp + "/starts/" + std::to_string(i), sys.dim()));
        }
        if (r.contains("tolerance")) cfg.reach.options.tolerance = rd.number(r["tolerance"], rp + "/tolerance");
        if (r.contains("steps_per_leg"))
            cfg.reach.options.steps_per_leg = static_cast<int>(rd.count(r["steps_per_leg"], rp + "/steps_per_leg"));
    }
    if (wants_reach && cfg.reach.starts.empty()) rd.fail("/analysis/reach", "reach task needs \"starts\"");

    if (ja.contains("holder")) {
        const std::string hp = "/analysis/holder";
        const auto& h = rd.object(ja["holder"], hp, {"target", "point", "radii", "r_min", "r_max", "n_radii", "directions"});
        where(h, hp, cfg.holder.target, cfg.holder.point);
        auto& o = cfg.holder.options;
        if (h.contains("radii")) o.radii = rd.numbers(h["radii"], hp + "/radii");
        if (h.contains("r_min")) o.r_min = rd.number(h["r_min"], hp + "/r_min");
        if (h.contains("r_max")) o.r_max = rd.number(h["r_max"], hp + "/r_max");
        if (h.contains("n_radii")) o.n_radii = static_cast<int>(rd.count(h["n_radii"], hp + "/n_radii"));
        if (h.contains("directions")) o.directions = static_cast<int>(rd.count(h["directions"], hp + "/directions"));
        if (!(o.r_min > 0.0 && o.r_max > o.r_min)) rd.fail(hp, "need 0 < r_min < r_max");
    }
    cfg.holder.options.seed = cfg.seed;

    const bool wants_expansion = std::find(cfg.tasks.begin(), cfg.tasks.end(), Task::Expansion) != cfg.tasks.end();
    if (ja.contains("expansion")) {
        const std::string ep = "/analysis/expansion";
        const auto& e = rd.object(ja["expansion"], ep, {"target", "point", "group", "function", "order"});
        ExpansionConfig ex;
        where(e, ep, ex.target, ex.point);
        if (!e.contains("group") || !e.contains("function") || !e.contains("order"))
            rd.fail(ep, "expansion needs \"group\", \"function\" and \"order\"");
        ex.group.fields = rd.strings(e["group"], ep + "/group");
        try {
            engine::resolve_group(sys, ex.group);
        } catch (const Error& err) {
            rd.fail(ep + "/group", err.what());
        }
        ex.function_text = rd.string(e["function"], ep + "/function");
        ex.function = rd.expression(e["function"], ep + "/function", sys.variables, cfg.parameters);
        ex.order = static_cast<int>(rd.count(e["order"], ep + "/order"));
        if (ex.order < 1) rd.fail(ep + "/order", "order must be positive");
        ex.group.order = ex.order;
        cfg.expansion = std::move(ex);
    }
    if (wants_expansion && !cfg.expansion) rd.fail("/analysis", "expansion task needs an \"expansion\" block");
    return cfg;
}

AnalysisConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::Io, "cannot read config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace stla::cli
