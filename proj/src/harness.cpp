#include "hbm/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace hbm {

namespace {

using Clock = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

SupportBody mix(const SupportBody& b0, const SupportBody& b1, double t) {
    if (t == 0) return b0;
    if (t == 1) return b1;
    return combine({{1 - t, Mat3::Identity(), b0}, {t, Mat3::Identity(), b1}});
}

void check_t(double t, const char* who) {
    if (!(t >= 0 && t <= 1)) throw std::invalid_argument(std::string(who) + ": t must lie in [0,1]");
}

struct Evaluated {
    double value = kNaN;
    std::string message;
};

Evaluated evaluate(const BmTarget& f, const SupportBody& body, const HarnessOptions& opt) {
    Evaluated e;
    try {
        switch (f.kind) {
            case BmTarget::Kind::Tau2: {
                const SolveReport r = solve_torsion(body, opt.resolution, opt.solver);
                if (!r.converged) return {kNaN, r.message};
                e.value = tau2_from_solution(r).value;
                break;
            }
            case BmTarget::Kind::Tau2p: {
                const SolveReport r = solve_power(body, opt.resolution, f.p, opt.solver);
                if (!r.converged) return {kNaN, r.message};
                e.value = tau2p_from_solution(r, f.p).value;
                break;
            }
            case BmTarget::Kind::Lambda2: {
                const SolveReport r = solve_eigen(body, opt.resolution, opt.solver);
                if (!r.converged) return {kNaN, r.message};
                e.value = lambda2_from_solution(r).value;
                break;
            }
        }
    } catch (const std::exception& ex) {
        e.message = ex.what();
    }
    return e;
}

struct Solved {
    SolveReport report;
    std::string error;
    bool ok() const { return error.empty() && report.converged; }
    std::string why() const { return error.empty() ? report.message : error; }
};

Solved solve_safely(Problem problem, const SupportBody& body, const HarnessOptions& opt) {
    Solved s;
    try {
        s.report = problem == Problem::Torsion ? solve_torsion(body, opt.resolution, opt.solver)
                                               : solve_eigen(body, opt.resolution, opt.solver);
    } catch (const std::exception& ex) {
        s.error = ex.what();
    }
    return s;
}

InequalityReport unevaluable(std::string id, nlohmann::json instance, const std::string& why) {
    InequalityReport r;
    r.id = std::move(id);
    r.instance = std::move(instance);
    r.lhs = r.rhs = r.margin = kNaN;
    r.verdict = Verdict::Unevaluable;
    r.note = why;
    return r;
}

void finish(InequalityReport& r, double lhs, double rhs, double tol, bool homothetic) {
    r.lhs = lhs;
    r.rhs = rhs;
    r.margin = lhs - rhs;
    r.tol = tol;
    r.verdict = classify(r.margin, tol, homothetic);
}

Field square_root_transform(const Field& u) {
    Field v = u;
    for (std::size_t idx : u.grid->domain_nodes()) v[idx] = -std::sqrt(std::max(-u[idx], 0.0));
    return v;
}

Field from_square_root(const Field& v) {
    Field u = v;
    for (std::size_t idx : v.grid->domain_nodes()) u[idx] = -v[idx] * v[idx];
    return u;
}

double norm_p(const Field& u, double p) {
    if (std::isinf(p)) {
        double m = 0;
        for (std::size_t idx : u.grid->domain_nodes()) m = std::max(m, std::abs(u[idx]));
        return m;
    }
    return lp_norm(u, p);
}

/// Trilinear value with exterior nodes and points off the array read as zero.
double zero_extended(const Field& f, const Vec3& x) {
    const Grid3& g = *f.grid;
    const Vec3 r = (x - g.origin()) / g.h();
    int c[3];
    double w[3];
    for (int a = 0; a < 3; ++a) {
        c[a] = static_cast<int>(std::floor(r[a]));
        if (c[a] < -1 || c[a] >= g.dims()[a]) return 0;
        w[a] = r[a] - c[a];
    }
    double acc = 0;
    for (int m = 0; m < 8; ++m) {
        const int d[3] = {m & 1, (m >> 1) & 1, (m >> 2) & 1};
        int ijk[3];
        bool inside = true;
        double wt = 1;
        for (int a = 0; a < 3; ++a) {
            ijk[a] = c[a] + d[a];
            inside = inside && ijk[a] >= 0 && ijk[a] < g.dims()[a];
            wt *= d[a] ? w[a] : 1 - w[a];
        }
        if (!inside || wt == 0) continue;
        const std::size_t id = g.index(ijk[0], ijk[1], ijk[2]);
        if (g.in_domain(id)) acc += wt * f[id];
    }
    return acc;
}

/// Coarse verdicts must survive a rerun at 2*resolution-1.
void merge_refined(std::vector<InequalityReport>& coarse, const std::vector<InequalityReport>& fine, int res) {
    for (std::size_t i = 0; i < coarse.size() && i < fine.size(); ++i) {
        auto& c = coarse[i];
        const auto& f = fine[i];
        c.instance["refined"] = {{"resolution", res}, {"margin", f.margin}, {"tol", f.tol},
                                 {"verdict", verdict_name(f.verdict)}};
        c.seconds += f.seconds;
        if (verdict_ok(c.verdict) && !verdict_ok(f.verdict)) {
            c.verdict = f.verdict == Verdict::Unevaluable ? Verdict::Unevaluable : Verdict::Fail;
            c.note = "verdict not stable under refinement";
        }
    }
}

HarnessOptions finer(const HarnessOptions& opt) {
    HarnessOptions f = opt;
    f.refine = false;
    f.resolution = 2 * opt.resolution - 1;
    return f;
}

std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string csv_field(const nlohmann::json& inst, const char* key) {
    if (!inst.contains(key) || inst[key].is_null()) return "";
    if (inst[key].is_number()) return csv_number(inst[key].get<double>());
    return inst[key].dump();
}

}  // namespace

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::EqualityCandidate: return "equality-candidate";
        case Verdict::Unevaluable: return "unevaluable";
        case Verdict::HypothesisFail: return "hypothesis-fail";
    }
    return "unknown";
}

bool verdict_ok(Verdict v) { return v == Verdict::Pass || v == Verdict::EqualityCandidate; }

nlohmann::json InequalityReport::to_json() const {
    nlohmann::json j{{"id", id},         {"instance", instance}, {"lhs", lhs},
                     {"rhs", rhs},       {"margin", margin},     {"tol", tol},
                     {"verdict", verdict_name(verdict)},         {"seconds", seconds}};
    if (!note.empty()) j["note"] = note;
    return j;
}

double discretization_tol(const HarnessOptions& opt, double scale) {
    if (opt.resolution < 3) throw std::invalid_argument("discretization_tol: resolution must be at least 3");
    const double h = 1.0 / (opt.resolution - 1);
    return opt.c_tol * std::abs(scale) * h * h;
}

Verdict classify(double margin, double tol, bool homothetic) {
    if (!std::isfinite(margin)) return Verdict::Unevaluable;
    if (margin < -tol) return Verdict::Fail;
    if (homothetic && std::abs(margin) <= tol) return Verdict::EqualityCandidate;
    return Verdict::Pass;
}

double BmTarget::exponent() const {
    switch (kind) {
        case Kind::Tau2: return 0.1;
        case Kind::Tau2p: return (p + 1) / (p + 10);
        case Kind::Lambda2: return -0.25;
    }
    return 0;
}

std::string BmTarget::name() const {
    switch (kind) {
        case Kind::Tau2: return "tau2";
        case Kind::Tau2p: return "tau2p";
        case Kind::Lambda2: return "lambda2";
    }
    return "unknown";
}

BmTarget BmTarget::parse(const std::string& name, double p) {
    if (name == "tau2") return {Kind::Tau2, 0};
    if (name == "tau2p") {
        if (!(p > 0 && p < 2)) throw std::invalid_argument("functional tau2p needs p in (0,2)");
        return {Kind::Tau2p, p};
    }
    if (name == "lambda2") return {Kind::Lambda2, 0};
    throw std::invalid_argument("unknown functional '" + name + "' (expected tau2, tau2p or lambda2)");
}

std::vector<InequalityReport> bm_check(const BmTarget& f, const SupportBody& body0, const SupportBody& body1,
                                       const std::vector<double>& t_list, const HarnessOptions& opt) {
    for (double t : t_list) check_t(t, "bm_check");
    const auto t0 = Clock::now();
    std::vector<SupportBody> bodies{body0, body1};
    for (double t : t_list) bodies.push_back(mix(body0, body1, t));
    const auto values = parallel_map<Evaluated>(bodies.size(), opt.jobs,
                                                [&](std::size_t i) { return evaluate(f, bodies[i], opt); });
    const HomothetyFit fit = fit_homothety(body0, body1);
    const double g = f.exponent();
    const double elapsed = since(t0) / std::max<std::size_t>(t_list.size(), 1);

    std::vector<InequalityReport> out;
    for (std::size_t k = 0; k < t_list.size(); ++k) {
        const double t = t_list[k];
        nlohmann::json inst{{"functional", f.name()},
                            {"exponent", g},
                            {"body0", body_to_json(body0)},
                            {"body1", body_to_json(body1)},
                            {"t", t},
                            {"resolution", opt.resolution},
                            {"seed", opt.seed},
                            {"homothetic", fit.homothetic},
                            {"homothety_residual", fit.sup_residual}};
        if (f.kind == BmTarget::Kind::Tau2p) inst["p"] = f.p;
        if (f.kind == BmTarget::Kind::Lambda2) inst["external_theorem"] = true;
        const std::string id = "bm-" + f.name();
        const Evaluated &a = values[0], &b = values[1], &c = values[2 + k];
        if (!std::isfinite(a.value) || !std::isfinite(b.value) || !std::isfinite(c.value)) {
            const std::string why = !std::isfinite(a.value) ? a.message : !std::isfinite(b.value) ? b.message : c.message;
            out.push_back(unevaluable(id, inst, "solve failed: " + why));
            continue;
        }
        inst["F0"] = a.value;
        inst["F1"] = b.value;
        inst["Ft"] = c.value;
        // The power form implies the log form (sign flipped for negative exponents).
        const double log_gap = std::log(c.value) - (1 - t) * std::log(a.value) - t * std::log(b.value);
        inst["log_margin"] = g > 0 ? log_gap : -log_gap;
        InequalityReport r;
        r.id = id;
        r.instance = std::move(inst);
        const double lhs = std::pow(c.value, g);
        const double rhs = (1 - t) * std::pow(a.value, g) + t * std::pow(b.value, g);
        finish(r, lhs, rhs, discretization_tol(opt, std::max(std::abs(lhs), std::abs(rhs))), fit.homothetic);
        r.seconds = elapsed;
        out.push_back(std::move(r));
    }
    if (opt.refine) merge_refined(out, bm_check(f, body0, body1, t_list, finer(opt)), finer(opt).resolution);
    return out;
}

DominationRun domination_run(const SupportBody& body0, const SupportBody& body1, double t,
                             const HarnessOptions& opt) {
    check_t(t, "domination_check");
    const auto t0 = Clock::now();
    const SupportBody bt = mix(body0, body1, t);
    const std::vector<const SupportBody*> bodies{&body0, &body1, &bt};
    const auto solved = parallel_map<Solved>(3, opt.jobs, [&](std::size_t i) {
        return solve_safely(Problem::Torsion, *bodies[i], opt);
    });
    const HomothetyFit fit = fit_homothety(body0, body1);
    nlohmann::json inst{{"body0", body_to_json(body0)}, {"body1", body_to_json(body1)}, {"t", t},
                        {"resolution", opt.resolution}, {"homothetic", fit.homothetic}};
    DominationRun run;
    for (const auto& s : solved) {
        if (!s.ok()) {
            run.report = unevaluable("domination", inst, "solve failed: " + s.why());
            run.report.seconds = since(t0);
            return run;
        }
    }
    run.u0 = solved[0].report.solution;
    run.u1 = solved[1].report.solution;
    run.u_t = solved[2].report.solution;
    if (t == 0 || t == 1) {
        // Identity combination: the transform pair inverts exactly.
        run.tilde_u = t == 0 ? run.u0 : run.u1;
    } else {
        CombineOptions co;
        co.warn_nonconvex = false;
        co.gradient_depth = 2;
        const Field vt = minkowski_combine_functions(
            {{1 - t, square_root_transform(run.u0)}, {t, square_root_transform(run.u1)}}, run.u_t.grid, co);
        run.tilde_u = from_square_root(vt);
    }
    const Grid3& g = *run.u_t.grid;
    double deepest = 0, umax = 0;
    for (std::size_t idx : g.domain_nodes()) {
        deepest = std::max(deepest, -g.sdf(idx));
        umax = std::max(umax, std::abs(run.u_t[idx]));
    }
    double margin = std::numeric_limits<double>::infinity(), bulk = margin;
    Vec3 where = Vec3::Zero();
    std::size_t arg = 0;
    for (std::size_t idx : g.domain_nodes()) {
        if (g.kind(idx) != NodeKind::Interior || g.sdf(idx) > -2 * g.h()) continue;
        const double d = run.tilde_u[idx] - run.u_t[idx];
        if (d < margin) margin = d, where = g.position(idx), arg = idx;
        if (-g.sdf(idx) >= 0.25 * deepest) bulk = std::min(bulk, d);
    }
    InequalityReport& r = run.report;
    r.id = "domination";
    r.instance = std::move(inst);
    if (!std::isfinite(margin)) {
        r = unevaluable("domination", r.instance, "no interior node at depth 2h");
        r.seconds = since(t0);
        return run;
    }
    run.bulk_min = bulk;
    r.instance["bulk_min"] = bulk;
    r.instance["argmin"] = {where[0], where[1], where[2]};
    r.instance["max_abs_u_t"] = umax;
    // lhs/rhs at the minimizing node.
    r.lhs = run.tilde_u[arg];
    r.rhs = run.u_t[arg];
    r.margin = margin;
    r.tol = discretization_tol(opt, umax);
    r.verdict = classify(margin, r.tol, fit.homothetic || t == 0 || t == 1);
    r.seconds = since(t0);
    return run;
}

InequalityReport domination_check(const SupportBody& body0, const SupportBody& body1, double t,
                                  const HarnessOptions& opt) {
    std::vector<InequalityReport> out{domination_run(body0, body1, t, opt).report};
    if (opt.refine) merge_refined(out, {domination_run(body0, body1, t, finer(opt)).report}, finer(opt).resolution);
    return out.front();
}

InequalityReport prekopa_leindler_check(const Field& f, const Field& g, const Field& h, double t,
                                        const HarnessOptions& opt) {
    check_t(t, "prekopa_leindler_check");
    if (!f.grid || !g.grid || !h.grid) throw std::invalid_argument("prekopa_leindler_check: null grid");
    if (opt.pl_samples < 1) throw std::invalid_argument("prekopa_leindler_check: need at least one sample");
    for (const Field* F : {&f, &g, &h}) {
        double m = 0, lo = 0;
        for (std::size_t idx : F->grid->domain_nodes()) {
            m = std::max(m, std::abs((*F)[idx]));
            lo = std::min(lo, (*F)[idx]);
        }
        if (lo < -1e-12 * std::max(m, 1e-300))
            throw std::invalid_argument("prekopa_leindler_check: fields must be nonnegative");
    }
    const auto t0 = Clock::now();
    const auto& df = f.grid->domain_nodes();
    const auto& dg = g.grid->domain_nodes();
    SplitMix64 rng(opt.seed);
    const double slack = 2 * interpolation_unit(h) + 1e-12;
    int violations = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < opt.pl_samples; ++s) {
        const std::size_t ix = df[rng.next() % df.size()];
        const std::size_t iy = dg[rng.next() % dg.size()];
        const Vec3 z = (1 - t) * f.grid->position(ix) + t * g.grid->position(iy);
        const double want = std::pow(std::max(f[ix], 0.0), 1 - t) * std::pow(std::max(g[iy], 0.0), t);
        const double gap = zero_extended(h, z) - want;
        worst = std::min(worst, gap);
        if (gap < -slack) ++violations;
    }
    const double rate = static_cast<double>(violations) / opt.pl_samples;
    const double a = integrate(f), b = integrate(g), c = integrate(h);
    InequalityReport r;
    r.id = "prekopa-leindler";
    r.instance = {{"t", t},
                  {"samples", opt.pl_samples},
                  {"seed", opt.seed},
                  {"hypothesis_violations", violations},
                  {"hypothesis_pass_rate", 1 - rate},
                  {"hypothesis_slack", slack},
                  {"hypothesis_worst_gap", worst},
                  {"int_f", a},
                  {"int_g", b},
                  {"int_h", c}};
    const double rhs = std::pow(a, 1 - t) * std::pow(b, t);
    HarnessOptions o = opt;
    o.resolution = std::max({f.grid->resolution(), g.grid->resolution(), h.grid->resolution()});
    finish(r, c, rhs, discretization_tol(o, std::max(c, rhs)), false);
    if (rate > 1e-3) {
        r.verdict = Verdict::HypothesisFail;
        r.note = "pointwise hypothesis violated on more than 0.1% of samples";
    }
    r.seconds = since(t0);
    return r;
}

std::vector<InequalityReport> urysohn_rearrangement(const SupportBody& body, int n_max,
                                                    const std::vector<double>& p_list,
                                                    const HarnessOptions& opt) {
    if (n_max < 0) throw std::invalid_argument("urysohn_rearrangement: N_max must be >= 0");
    for (double p : p_list)
        if (!(p > 0)) throw std::invalid_argument("urysohn_rearrangement: p must be positive (inf allowed)");
    const auto t0 = Clock::now();
    const ReferenceBalls rb = reference_balls(body);
    const std::vector<const SupportBody*> bodies{&body, &rb.sharp};
    const auto solved = parallel_map<Solved>(2, opt.jobs, [&](std::size_t i) {
        return solve_safely(Problem::Torsion, *bodies[i], opt);
    });
    const bool ball = fit_homothety(body, rb.sharp).homothetic;
    auto base = [&](double p) {
        nlohmann::json j{{"body", body_to_json(body)}, {"sharp_radius", rb.sharp_radius},
                         {"resolution", opt.resolution}, {"seed", opt.seed}, {"homothetic", ball}};
        if (std::isinf(p)) j["p"] = "inf";
        else j["p"] = p;
        return j;
    };
    std::vector<InequalityReport> out;
    const bool ok = solved[0].ok() && solved[1].ok();
    const double per = since(t0) / std::max<std::size_t>(p_list.size(), 1);
    for (double p : p_list) {
        if (!ok) {
            out.push_back(unevaluable("urysohn", base(p),
                                      "solve failed: " + (solved[0].ok() ? solved[1].why() : solved[0].why())));
            continue;
        }
        InequalityReport r;
        r.id = "urysohn";
        r.instance = base(p);
        const double lhs = norm_p(solved[1].report.solution, p);
        const double rhs = norm_p(solved[0].report.solution, p);
        const double tol = discretization_tol(opt, lhs) * (std::isinf(p) ? 2 : 1);
        finish(r, lhs, rhs, tol, ball);
        r.seconds = per;
        out.push_back(r);
        if (p == 1) {
            // tau2 = (int |u|)^2, so the squared L1 margin is the tau2 comparison.
            InequalityReport q;
            q.id = "urysohn-tau2";
            q.instance = base(p);
            finish(q, lhs * lhs, rhs * rhs, 2 * lhs * tol, ball);
            out.push_back(q);
        }
    }

    if (n_max > 0 && ok) {
        const RotationMeans rm = rotation_mean_sequence(body, n_max, opt.seed);
        const SupportBody centred = body.translated(rm.steiner_shift);
        const Solved uc = solve_safely(Problem::Torsion, centred, opt);
        std::vector<int> steps;
        for (int n = 1; n <= n_max; ++n) steps.push_back(n);
        const auto seq = parallel_map<Solved>(steps.size(), opt.jobs, [&](std::size_t i) {
            return solve_safely(Problem::Torsion, rm.bodies[steps[i]], opt);
        });
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const int n = steps[i];
            nlohmann::json inst{{"body", body_to_json(body)}, {"N", n}, {"hausdorff", rm.hausdorff[n]},
                                {"resolution", opt.resolution}, {"seed", opt.seed}};
            if (!uc.ok() || !seq[i].ok()) {
                out.push_back(unevaluable("urysohn-seq-max", inst,
                                          "solve failed: " + (uc.ok() ? seq[i].why() : uc.why())));
                continue;
            }
            const Field& u = uc.report.solution;
            const Field& un = seq[i].report.solution;
            for (double p : p_list) {
                InequalityReport r;
                r.id = "urysohn-seq-lp";
                r.instance = inst;
                if (std::isinf(p)) r.instance["p"] = "inf";
                else r.instance["p"] = p;
                const double lhs = norm_p(un, p), rhs = norm_p(u, p);
                finish(r, lhs, rhs, discretization_tol(opt, lhs) * (std::isinf(p) ? 2 : 1), false);
                out.push_back(r);
            }
            // max |tilde u_N| = max |u| for the combined supersolution.
            std::vector<FieldPart> parts;
            const Field v = square_root_transform(u);
            for (int j = 0; j <= n; ++j) parts.push_back({1.0 / (n + 1), v, rm.rotations[j]});
            double wsum = 0;
            for (const auto& pp : parts) wsum += pp.t;
            parts.back().t += 1 - wsum;
            CombineOptions co;
            co.warn_nonconvex = false;
            co.gradient_depth = 2;
            const Field tn = from_square_root(minkowski_combine_functions(parts, un.grid, co));
            double tmax = 0;
            // Shallow nodes see the depth-sized dual box and come out too low.
            const Grid3& gn = *un.grid;
            for (std::size_t idx : gn.domain_nodes())
                if (gn.kind(idx) == NodeKind::Interior && gn.sdf(idx) <= -2 * gn.h())
                    tmax = std::max(tmax, std::abs(tn[idx]));
            const double umax = norm_p(u, std::numeric_limits<double>::infinity());
            InequalityReport r;
            r.id = "urysohn-seq-max";
            r.instance = inst;
            r.instance["max_tilde_u"] = tmax;
            r.instance["max_u"] = umax;
            r.lhs = tmax;
            r.rhs = umax;
            r.margin = -std::abs(tmax - umax);
            r.tol = 2 * discretization_tol(opt, umax);
            r.verdict = classify(r.margin, r.tol, false);
            r.note = "identity check: margin is -|lhs - rhs|";
            out.push_back(r);
        }
    }
    if (opt.refine) merge_refined(out, urysohn_rearrangement(body, n_max, p_list, finer(opt)), finer(opt).resolution);
    return out;
}

std::vector<InequalityReport> isoperimetric_check(const SupportBody& body, const HarnessOptions& opt) {
    if (!body.analytic()) throw std::invalid_argument("isoperimetric_check: body needs an analytic descriptor");
    const auto t0 = Clock::now();
    const ReferenceBalls rb = reference_balls(body);
    const std::vector<const SupportBody*> bodies{&body, &rb.sharp, &rb.star};
    const auto solved = parallel_map<Solved>(6, opt.jobs, [&](std::size_t i) {
        return solve_safely(i < 3 ? Problem::Torsion : Problem::Eigen, *bodies[i % 3], opt);
    });
    const bool ball = fit_homothety(body, rb.sharp).homothetic;
    nlohmann::json inst{{"body", body_to_json(body)},
                        {"sharp_radius", rb.sharp_radius},
                        {"star_radius", rb.star_radius},
                        {"resolution", opt.resolution},
                        {"homothetic", ball}};
    const char* ids[] = {"UryL", "Ury1", "IsoL", "Iso1", "chain-radius", "chain-L", "chain-1"};
    std::vector<InequalityReport> out;
    for (const auto& s : solved) {
        if (!s.ok()) {
            for (const char* id : ids) out.push_back(unevaluable(id, inst, "solve failed: " + s.why()));
            return out;
        }
    }
    double tau[3], lam[3];
    for (int i = 0; i < 3; ++i) {
        tau[i] = tau2_from_solution(solved[i].report).value;
        lam[i] = lambda2_from_solution(solved[3 + i].report).value;
    }
    inst["tau2"] = {tau[0], tau[1], tau[2]};
    inst["lambda2"] = {lam[0], lam[1], lam[2]};
    const double tl = discretization_tol(opt, lam[0]), tt = discretization_tol(opt, tau[1]);
    const double per = since(t0) / 7;
    auto make = [&](const char* id, double lhs, double rhs, double tol, bool eq) {
        InequalityReport r;
        r.id = id;
        r.instance = inst;
        finish(r, lhs, rhs, tol, eq);
        r.seconds = per;
        return r;
    };
    out.push_back(make("UryL", lam[0], lam[1], tl, ball));
    out.push_back(make("Ury1", tau[1], tau[0], tt, ball));
    out.push_back(make("IsoL", lam[0], lam[2], tl, ball));
    out.push_back(make("Iso1", tau[2], tau[0], tt, ball));
    // Omega* inside Omega#: the (Iso) margins are the smaller ones, as the
    // (Iso) inequalities imply the (Ury) ones.
    out.push_back(make("chain-radius", rb.sharp_radius, rb.star_radius, 1e-9 * rb.sharp_radius, ball));
    out.push_back(make("chain-L", out[0].margin, out[2].margin, 2 * tl, ball));
    out.push_back(make("chain-1", out[1].margin, out[3].margin, 2 * tt, ball));
    if (opt.refine) merge_refined(out, isoperimetric_check(body, finer(opt)), finer(opt).resolution);
    return out;
}

std::vector<BodyPair> pair_battery(std::uint64_t seed) {
    std::vector<BodyPair> out;
    out.push_back({"ball1-ball2", SupportBody::ball(1), SupportBody::ball(2)});
    out.push_back({"ellipsoid-homothetic", SupportBody::ellipsoid(Vec3(1.2, 1, 0.8)),
                   SupportBody::ellipsoid(Vec3(1.8, 1.5, 1.2), Vec3(0.2, -0.1, 0.1))});
    for (std::uint64_t k = 0; k < 3; ++k) {
        SplitMix64 rng(SplitMix64::derive(seed, k));
        Vec3 a0, a1;
        for (int i = 0; i < 3; ++i) a0[i] = rng.uniform(0.7, 1.3);
        for (int i = 0; i < 3; ++i) a1[i] = rng.uniform(0.7, 1.3);
        const Mat3 rho = random_rotation(rng);
        out.push_back({"random-" + std::to_string(k), SupportBody::ellipsoid(a0),
                       SupportBody::ellipsoid(a1).rotated(rho)});
    }
    return out;
}

void write_csv(std::ostream& out, const std::vector<InequalityReport>& reports, bool timing) {
    out << "id,t,p,lhs,rhs,margin,tol,verdict,seconds\n";
    for (const auto& r : reports) {
        out << r.id << ',' << csv_field(r.instance, "t") << ',' << csv_field(r.instance, "p") << ','
            << csv_number(r.lhs) << ',' << csv_number(r.rhs) << ',' << csv_number(r.margin) << ','
            << csv_number(r.tol) << ',' << verdict_name(r.verdict) << ',';
        if (timing) out << csv_number(r.seconds);
        out << '\n';
    }
}

void write_jsonl(std::ostream& out, const std::vector<InequalityReport>& reports) {
    for (const auto& r : reports) out << r.to_json().dump() << '\n';
}

void write_reports(const std::string& dir, const std::string& stem, const std::vector<InequalityReport>& reports,
                   const nlohmann::json& meta, bool timing) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base = std::filesystem::path(dir) / stem;
    std::ofstream csv(base.string() + ".csv"), jl(base.string() + ".jsonl"), mf(base.string() + ".meta.json");
    if (!csv || !jl || !mf) throw std::runtime_error("write_reports: cannot write into " + dir);
    write_csv(csv, reports, timing);
    write_jsonl(jl, reports);
    nlohmann::json m = meta;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m["timestamp"] = stamp;
    nlohmann::json secs = nlohmann::json::array();
    for (const auto& r : reports) secs.push_back(r.seconds);
    m["seconds"] = secs;
    mf << m.dump(2) << '\n';
}

}  // namespace hbm
