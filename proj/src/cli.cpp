#include "hbm/cli.hpp"

#include "hbm/harness.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace hbm {

namespace {

const double kInf = std::numeric_limits<double>::infinity();

bool one_of(const std::string& v, std::initializer_list<const char*> set) {
    return std::any_of(set.begin(), set.end(), [&](const char* s) { return v == s; });
}

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw std::invalid_argument("field '" + field + "' " + why);
}

nlohmann::json number_json(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

double number_from_json(const nlohmann::json& j, const std::string& field) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return parse_number_list(j.get<std::string>(), field).at(0);
    bad_field(field, "must be a number");
}

template <class T>
T typed(const nlohmann::json& j, const std::string& field) {
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception&) {
        bad_field(field, "has the wrong type (" + std::string(j.type_name()) + ")");
    }
}

/// File path or inline JSON.
nlohmann::json load_json(const std::string& spec, const std::string& field) {
    try {
        if (!spec.empty() && spec.front() == '{') return nlohmann::json::parse(spec);
        std::ifstream in(spec);
        if (!in) bad_field(field, "names an unreadable file: " + spec);
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        bad_field(field, std::string("is not valid JSON: ") + e.what());
    }
}

SupportBody load_body(const RunConfig& c, std::size_t i, const std::string& field) {
    if (i >= c.bodies.size() || c.bodies[i].empty()) bad_field(field, "is required");
    const nlohmann::json j = load_json(c.bodies[i], field);
    try {
        return body_from_json(j);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(field + ": " + e.what());
    }
}

Field load_field(const RunConfig& c, std::size_t i, const std::string& field) {
    const nlohmann::json j = load_json(c.fields.at(i), field);
    try {
        return field_from_json(j);
    } catch (const std::exception& e) {
        throw std::invalid_argument(field + ": " + e.what());
    }
}

HarnessOptions harness_options(const RunConfig& c) {
    HarnessOptions o;
    o.resolution = c.resolution;
    o.jobs = c.jobs;
    o.c_tol = c.c_tol;
    o.refine = c.refine;
    o.seed = c.seed;
    o.pl_samples = c.pl_samples;
    o.solver.residual_rtol = c.residual_rtol;
    return o;
}

nlohmann::json meta(const RunConfig& c) { return {{"command", c.subcommand}, {"config", c.to_json()}}; }

int emit(const RunConfig& c, const std::vector<InequalityReport>& reports, std::ostream& out) {
    write_reports(c.out_dir, c.subcommand, reports, meta(c), c.timing);
    write_csv(out, reports, c.timing);
    for (const auto& r : reports)
        if (!verdict_ok(r.verdict)) return 2;
    return 0;
}

int emit_info(const RunConfig& c, nlohmann::json result, std::ostream& out) {
    std::filesystem::create_directories(c.out_dir);
    result["config"] = c.to_json();
    std::ofstream(std::filesystem::path(c.out_dir) / (c.subcommand + ".json")) << result.dump(2) << '\n';
    out << result.dump(2) << '\n';
    return 0;
}

void save_field(const RunConfig& c, const std::string& name, const Field& f) {
    std::ofstream(std::filesystem::path(c.out_dir) / (name + ".field.json")) << field_to_json(f).dump() << '\n';
}

struct Pair {
    std::string name;
    SupportBody b0, b1;
};

std::vector<Pair> pairs(const RunConfig& c) {
    std::vector<Pair> out;
    if (c.battery) {
        for (auto& p : pair_battery(c.seed)) out.push_back({p.name, p.body0, p.body1});
    } else {
        out.push_back({"", load_body(c, 0, "body0"), load_body(c, 1, "body1")});
    }
    return out;
}

void tag(std::vector<InequalityReport>& rs, const std::string& pair) {
    if (pair.empty()) return;
    for (auto& r : rs) {
        r.id += "@" + pair;
        r.instance["pair"] = pair;
    }
}

// --- subcommands ---

int cmd_body(const RunConfig& c, std::ostream& out) {
    const SupportBody b = load_body(c, 0, "body");
    const SurfaceArea sa = surface_area(b);
    const ReferenceBalls rb = reference_balls(b);
    const AxisBox box = bounding_box(b);
    const Vec3 s = steiner_point(b);
    const GridPtr g = build_grid(b, c.resolution);
    nlohmann::json j = {
        {"body", body_to_json(b)},
        {"description", describe(b)},
        {"mean_width", mean_width(b)},
        {"steiner_point", {s[0], s[1], s[2]}},
        {"surface_area", sa.area},
        {"min_principal_radius", sa.min_radius},
        {"curvature_proxy_ok", curvature_proxy_ok(b)},
        {"sharp_radius", rb.sharp_radius},
        {"star_radius", rb.star_radius},
        {"bounding_box", {{"lo", {box.lo[0], box.lo[1], box.lo[2]}}, {"hi", {box.hi[0], box.hi[1], box.hi[2]}}}},
        {"diameter_bound", diameter_bound(b)},
        {"grid", {{"resolution", c.resolution}, {"h", g->h()}, {"domain_nodes", g->domain_nodes().size()}}},
    };
    return emit_info(c, j, out);
}

int cmd_solve(const RunConfig& c, std::ostream& out) {
    const SupportBody b = load_body(c, 0, "body");
    SolverOptions so;
    so.residual_rtol = c.residual_rtol;
    SolveReport r;
    TransformForm tf = TransformForm::sqrt();
    if (c.problem == "torsion") {
        r = solve_torsion(b, c.resolution, so);
    } else if (c.problem == "eigen") {
        r = solve_eigen(b, c.resolution, so);
        tf = TransformForm::log();
    } else {
        if (c.p_list.size() != 1) bad_field("p_list", "must hold exactly one exponent for the power problem");
        r = solve_power(b, c.resolution, c.p_list[0], so);
        tf = TransformForm::power(c.p_list[0]);
    }
    if (!r.converged) throw std::runtime_error("solve did not converge: " + r.message);
    nlohmann::json j = {{"report", r.to_json()}};
    double u0;
    if (trilinear(r.solution, Vec3::Zero(), u0)) j["u_origin"] = u0;
    j["u_min"] = *std::min_element(r.solution.values.begin(), r.solution.values.end());
    const ConvexityCertificate cert = convexity_certificate(r, tf, c.c_tol);
    j["certificate"] = cert.to_json();
    std::filesystem::create_directories(c.out_dir);
    save_field(c, "solution", r.solution);
    emit_info(c, j, out);
    return cert.pass ? 0 : 2;
}

Field torsion_or_field(const RunConfig& c, std::size_t i, const std::string& field) {
    if (i < c.fields.size()) return load_field(c, i, field);
    SolverOptions so;
    so.residual_rtol = c.residual_rtol;
    const SolveReport r = solve_torsion(load_body(c, i, field), c.resolution, so);
    if (!r.converged) throw std::runtime_error("torsion solve did not converge: " + r.message);
    return r.solution;
}

int cmd_envelope(const RunConfig& c, std::ostream& out) {
    const Field f = torsion_or_field(c, 0, c.fields.empty() ? "body" : "field");
    const Field env = convex_envelope(f);
    const std::vector<bool> contact = contact_set(f, env);
    double gap = 0;
    std::size_t touching = 0;
    for (std::size_t idx : f.grid->domain_nodes()) {
        gap = std::max(gap, f[idx] - env[idx]);
        touching += contact[idx];
    }
    std::filesystem::create_directories(c.out_dir);
    save_field(c, "envelope", env);
    return emit_info(c,
                     {{"max_gap", gap},
                      {"contact_fraction", double(touching) / f.grid->domain_nodes().size()},
                      {"interpolation_unit", interpolation_unit(f)}},
                     out);
}

int cmd_combine(const RunConfig& c, std::ostream& out) {
    const bool from_fields = !c.fields.empty();
    if (from_fields && c.fields.size() != 2) bad_field("fields", "must name two snapshots");
    const Field f0 = torsion_or_field(c, 0, from_fields ? "field0" : "body0");
    const Field f1 = torsion_or_field(c, 1, from_fields ? "field1" : "body1");
    std::filesystem::create_directories(c.out_dir);
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < c.t_list.size(); ++k) {
        const double t = c.t_list[k];
        const Field m = minkowski_combine_functions({{1 - t, f0}, {t, f1}});
        double lo = 0;
        for (std::size_t idx : m.grid->domain_nodes()) lo = std::min(lo, m[idx]);
        save_field(c, "combine_" + std::to_string(k), m);
        rows.push_back({{"t", t},
                        {"min", lo},
                        {"integral", integrate(m.with_exterior(0))},
                        {"domain_nodes", m.grid->domain_nodes().size()},
                        {"snapshot", "combine_" + std::to_string(k) + ".field.json"}});
    }
    return emit_info(c, {{"combinations", rows}}, out);
}

int cmd_bm(const RunConfig& c, std::ostream& out) {
    const HarnessOptions o = harness_options(c);
    std::vector<BmTarget> targets;
    if (c.functional == "tau2p") {
        for (double p : c.p_list) targets.push_back(BmTarget::parse("tau2p", p));
    } else {
        targets.push_back(BmTarget::parse(c.functional));
    }
    std::vector<InequalityReport> all;
    for (const Pair& pr : pairs(c))
        for (const BmTarget& f : targets) {
            auto rs = bm_check(f, pr.b0, pr.b1, c.t_list, o);
            tag(rs, pr.name);
            all.insert(all.end(), rs.begin(), rs.end());
        }
    return emit(c, all, out);
}

int cmd_dominate(const RunConfig& c, std::ostream& out) {
    const HarnessOptions o = harness_options(c);
    std::vector<InequalityReport> all;
    for (const Pair& pr : pairs(c))
        for (double t : c.t_list) {
            std::vector<InequalityReport> rs{domination_check(pr.b0, pr.b1, t, o)};
            tag(rs, pr.name);
            all.push_back(rs[0]);
        }
    return emit(c, all, out);
}

int cmd_rearrange(const RunConfig& c, std::ostream& out) {
    return emit(c, urysohn_rearrangement(load_body(c, 0, "body"), c.n_max, c.p_list, harness_options(c)), out);
}

int cmd_iso(const RunConfig& c, std::ostream& out) {
    return emit(c, isoperimetric_check(load_body(c, 0, "body"), harness_options(c)), out);
}

int cmd_probe(const RunConfig& c, std::ostream& out) {
    SymMat3 p = SymMat3::identity();
    nlohmann::json pj = "identity";
    if (c.p_kind == "pg") {
        SplitMix64 rng(c.seed);
        const Vec3 g(rng.normal(), rng.normal(), rng.normal());
        p = p_matrix(g);
        pj = {g[0], g[1], g[2]};
    }
    std::vector<InequalityReport> rs;
    for (const char* w : {"f", "g"}) {
        if (c.which != "all" && c.which != w) continue;
        const LmxFunction fn = std::string(w) == "f" ? LmxFunction::F : LmxFunction::G;
        const ConcavityReport cr = concavity_probe(fn, p, c.trials, c.seed);
        InequalityReport r;
        r.id = std::string("probe-") + w;
        r.instance = {{"which", w},        {"p_kind", c.p_kind},           {"gradient", pj},
                      {"trials", cr.trials}, {"seed", c.seed},             {"worst_condition", cr.worst_condition},
                      {"failures", cr.failures}, {"p_condition", cr.p_condition}};
        r.lhs = cr.trials - cr.failures;
        r.rhs = cr.trials;
        r.margin = cr.worst_margin;
        r.tol = cr.tolerance;
        r.verdict = cr.failures == 0 ? Verdict::Pass : Verdict::Fail;
        r.note = std::to_string(cr.failures) + " concavity failures";
        rs.push_back(r);
    }
    return emit(c, rs, out);
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"body",     "solve",     "envelope", "combine", "bm",
                                               "dominate", "rearrange", "iso",      "probe"};
    return s;
}

RunConfig defaults_for(const std::string& sub) {
    if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end())
        bad_field("subcommand", "has unknown value '" + sub + "'");
    RunConfig c;
    c.subcommand = sub;
    if (sub == "combine" || sub == "bm" || sub == "dominate") c.t_list = {0.25, 0.5, 0.75};
    if (sub == "bm" || sub == "solve") c.p_list = {1};
    if (sub == "rearrange") c.p_list = {1, 2, kInf};
    if (sub == "probe") c.seed = 1;
    if (sub == "solve") c.c_tol = 1;  // certificate constant, not the harness one
    return c;
}

std::vector<double> parse_number_list(const std::string& text, const std::string& field) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (item == "inf" || item == "Inf" || item == "infinity") {
            out.push_back(kInf);
            continue;
        }
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (item.empty() || used != item.size() || !std::isfinite(v))
            bad_field(field, "has a malformed entry '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) bad_field(field, "is empty");
    return out;
}

std::string format_number_list(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        if (std::isinf(v[i])) {
            s += "inf";
        } else {
            std::ostringstream o;
            o << v[i];
            s += o.str();
        }
    }
    return s;
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json t = nlohmann::json::array(), p = nlohmann::json::array();
    for (double x : t_list) t.push_back(number_json(x));
    for (double x : p_list) p.push_back(number_json(x));
    return {{"subcommand", subcommand}, {"bodies", bodies},   {"fields", fields},
            {"resolution", resolution}, {"t_list", t},        {"p_list", p},
            {"seed", seed},             {"jobs", jobs},       {"c_tol", c_tol},
            {"residual_rtol", residual_rtol}, {"out_dir", out_dir}, {"refine", refine},
            {"timing", timing},         {"battery", battery}, {"functional", functional},
            {"problem", problem},       {"n_max", n_max},     {"which", which},
            {"p_kind", p_kind},         {"trials", trials},   {"pl_samples", pl_samples}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    if (!j.contains("subcommand")) bad_field("subcommand", "is required");
    RunConfig c = defaults_for(typed<std::string>(j.at("subcommand"), "subcommand"));
    for (const auto& [key, v] : j.items()) {
        if (key == "subcommand") continue;
        else if (key == "bodies") c.bodies = typed<std::vector<std::string>>(v, key);
        else if (key == "fields") c.fields = typed<std::vector<std::string>>(v, key);
        else if (key == "resolution") c.resolution = typed<int>(v, key);
        else if (key == "t_list" || key == "p_list") {
            if (!v.is_array()) bad_field(key, "must be an array");
            std::vector<double> xs;
            for (const auto& x : v) xs.push_back(number_from_json(x, key));
            (key == "t_list" ? c.t_list : c.p_list) = xs;
        }
        else if (key == "seed") c.seed = typed<std::uint64_t>(v, key);
        else if (key == "jobs") c.jobs = typed<int>(v, key);
        else if (key == "c_tol") c.c_tol = typed<double>(v, key);
        else if (key == "residual_rtol") c.residual_rtol = typed<double>(v, key);
        else if (key == "out_dir") c.out_dir = typed<std::string>(v, key);
        else if (key == "refine") c.refine = typed<bool>(v, key);
        else if (key == "timing") c.timing = typed<bool>(v, key);
        else if (key == "battery") c.battery = typed<bool>(v, key);
        else if (key == "functional") c.functional = typed<std::string>(v, key);
        else if (key == "problem") c.problem = typed<std::string>(v, key);
        else if (key == "n_max") c.n_max = typed<int>(v, key);
        else if (key == "which") c.which = typed<std::string>(v, key);
        else if (key == "p_kind") c.p_kind = typed<std::string>(v, key);
        else if (key == "trials") c.trials = typed<int>(v, key);
        else if (key == "pl_samples") c.pl_samples = typed<int>(v, key);
        else bad_field(key, "is not a config field");
    }
    c.validate();
    return c;
}

void RunConfig::validate() const {
    defaults_for(subcommand);
    if (resolution < 5 || resolution > 257) bad_field("resolution", "must lie in [5, 257]");
    for (double t : t_list)
        if (!(t >= 0 && t <= 1)) bad_field("t_list", "entries must lie in [0, 1]");
    for (double p : p_list)
        if (!(p > 0)) bad_field("p_list", "entries must be positive");
    if (jobs < 1) bad_field("jobs", "must be at least 1");
    if (!(c_tol > 0)) bad_field("c_tol", "must be positive");
    if (!(residual_rtol > 0)) bad_field("residual_rtol", "must be positive");
    if (out_dir.empty()) bad_field("out_dir", "must not be empty");
    if (!one_of(functional, {"tau2", "tau2p", "lambda2"})) bad_field("functional", "has unknown value '" + functional + "'");
    if (!one_of(problem, {"torsion", "eigen", "power"})) bad_field("problem", "has unknown value '" + problem + "'");
    if (!one_of(which, {"f", "g", "all"})) bad_field("which", "has unknown value '" + which + "'");
    if (!one_of(p_kind, {"identity", "pg"})) bad_field("p_kind", "has unknown value '" + p_kind + "'");
    if (trials < 1) bad_field("trials", "must be at least 1");
    if (n_max < 0) bad_field("n_max", "must be nonnegative");
    if (pl_samples < 1) bad_field("pl_samples", "must be at least 1");
    if ((subcommand == "bm" || subcommand == "dominate" || subcommand == "combine") && t_list.empty())
        bad_field("t_list", "is required");
    if (subcommand == "rearrange" && p_list.empty()) bad_field("p_list", "is required");
}

int run(const RunConfig& c, std::ostream& out, std::ostream&) {
    c.validate();
    const std::string& s = c.subcommand;
    if (s == "body") return cmd_body(c, out);
    if (s == "solve") return cmd_solve(c, out);
    if (s == "envelope") return cmd_envelope(c, out);
    if (s == "combine") return cmd_combine(c, out);
    if (s == "bm") return cmd_bm(c, out);
    if (s == "dominate") return cmd_dominate(c, out);
    if (s == "rearrange") return cmd_rearrange(c, out);
    if (s == "iso") return cmd_iso(c, out);
    return cmd_probe(c, out);
}

namespace {

/// Options of one subcommand, bound to a config initialised from its defaults.
struct Binding {
    RunConfig cfg;
    std::string body0, body1, field0, field1, t, p;
    CLI::App* app = nullptr;
};

void bind(CLI::App& root, Binding& b, const std::string& name, const std::string& about) {
    b.cfg = defaults_for(name);
    b.t = format_number_list(b.cfg.t_list);
    b.p = format_number_list(b.cfg.p_list);
    CLI::App* a = root.add_subcommand(name, about);
    b.app = a;
    RunConfig& c = b.cfg;
    const bool reports = one_of(name, {"bm", "dominate", "rearrange", "iso", "probe"});
    const bool pair = one_of(name, {"combine", "bm", "dominate"});
    const bool single = one_of(name, {"body", "solve", "envelope", "rearrange", "iso"});

    if (single) a->add_option("--body", b.body0, "body spec: JSON file or inline JSON");
    if (pair) {
        a->add_option("--body0", b.body0, "first body spec");
        a->add_option("--body1", b.body1, "second body spec");
    }
    if (name == "envelope") a->add_option("--field", b.field0, "field snapshot (instead of the torsion solution)");
    if (name == "combine") {
        a->add_option("--field0", b.field0, "first field snapshot");
        a->add_option("--field1", b.field1, "second field snapshot");
    }
    if (name != "probe") a->add_option("--res", c.resolution, "nodes across the longest axis")->capture_default_str();
    if (pair) a->add_option("--t", b.t, "comma list of weights in [0,1]")->capture_default_str();
    if (name == "bm" || name == "solve" || name == "rearrange")
        a->add_option("--p", b.p, "comma list of exponents (inf allowed for rearrange)")->capture_default_str();
    if (name == "bm") {
        a->add_option("--functional", c.functional, "tau2 | tau2p | lambda2")->capture_default_str();
        a->add_flag("--refine", c.refine, "rerun at 2*res-1 and require a stable verdict");
    }
    if (name == "bm" || name == "dominate")
        a->add_flag("--battery", c.battery, "seeded pair battery instead of --body0/--body1");
    if (name == "solve") a->add_option("--problem", c.problem, "torsion | eigen | power")->capture_default_str();
    if (name == "rearrange") a->add_option("--n-max", c.n_max, "rotation-mean steps")->capture_default_str();
    if (name == "probe") {
        a->add_option("--which", c.which, "f | g | all")->capture_default_str();
        a->add_option("--trials", c.trials, "random positive definite pairs")->capture_default_str();
        a->add_option("--p-kind", c.p_kind, "identity | pg (P(g) for a seeded gradient)")->capture_default_str();
    }
    a->add_option("--seed", c.seed, "single source of randomness")->capture_default_str();
    if (reports || name == "solve") a->add_option("--c-tol", c.c_tol, "tolerance constant")->capture_default_str();
    if (name != "probe" && name != "body")
        a->add_option("--residual-rtol", c.residual_rtol, "Newton stopping tolerance")->capture_default_str();
    if (pair || name == "iso" || name == "rearrange")
        a->add_option("--jobs", c.jobs, "worker threads")->capture_default_str();
    a->add_option("--out", c.out_dir, "output directory")->capture_default_str();
    if (reports) a->add_flag("--timing", c.timing, "fill the seconds column of the CSV");
}

void finish(Binding& b) {
    RunConfig& c = b.cfg;
    c.bodies.clear();
    c.fields.clear();
    if (!b.body0.empty() || !b.body1.empty()) c.bodies.push_back(b.body0);
    if (!b.body1.empty()) c.bodies.push_back(b.body1);
    if (!b.field0.empty()) c.fields.push_back(b.field0);
    if (!b.field1.empty()) c.fields.push_back(b.field1);
    if (!b.t.empty()) c.t_list = parse_number_list(b.t, "t_list");
    if (!b.p.empty()) c.p_list = parse_number_list(b.p, "p_list");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Hessian Brunn-Minkowski numerics", "hbm"};
    app.require_subcommand(0, 1);
    app.fallthrough();
    std::string config_path;
    bool print_config = false;
    app.add_option("--config", config_path, "run a saved config (JSON) instead of a subcommand");
    app.add_flag("--print-config", print_config, "print the canonical config and exit");
    std::map<std::string, Binding> binds;
    const std::map<std::string, std::string> about = {
        {"body", "describe a body spec"},
        {"solve", "solve a Dirichlet problem and certify the transformed convexity"},
        {"envelope", "convex envelope of a field"},
        {"combine", "Minkowski combination of two fields"},
        {"bm", "Brunn-Minkowski check for tau2, tau2p or lambda2"},
        {"dominate", "domination of the torsion solution by the combined supersolution"},
        {"rearrange", "Urysohn rearrangement and rotation means"},
        {"iso", "isoperimetric margins and their chain"},
        {"probe", "midpoint concavity probe of f and g"},
    };
    for (const std::string& s : subcommands()) bind(app, binds[s], s, about.at(s));

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        // Subcommand --help lands here too.
        if (e.get_exit_code() == 0) {
            for (auto& [name, b] : binds)
                if (b.app->parsed()) out << b.app->help();
            return 0;
        }
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) {
            cfg = RunConfig::from_json(load_json(config_path, "config"));
        } else {
            const auto chosen = app.get_subcommands();
            if (chosen.empty()) {
                err << "error: a subcommand is required\n" << app.help();
                return 1;
            }
            Binding& b = binds.at(chosen.front()->get_name());
            finish(b);
            // Canonical round trip: what runs is exactly what would be saved.
            cfg = RunConfig::from_json(b.cfg.to_json());
        }
        if (print_config) {
            out << cfg.to_json().dump(2) << '\n';
            return 0;
        }
        return run(cfg, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

int dispatch(int argc, const char* const* argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args, std::cout, std::cerr);
}

}  // namespace hbm
