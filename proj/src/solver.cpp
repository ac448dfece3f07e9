#include "hbm/solver.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace hbm {

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

const double kSqrt3 = std::sqrt(3.0);

/// Stencils rewritten in dense unknown numbering.
struct Operator {
    GridPtr grid;
    std::vector<int> start;
    std::vector<int> col;
    std::vector<std::array<double, 9>> coef;
    std::vector<bool> interior;
    std::vector<double> weight;

    explicit Operator(GridPtr g) : grid(std::move(g)) {
        const auto& dom = grid->domain_nodes();
        start.reserve(dom.size() + 1);
        start.push_back(0);
        for (std::size_t idx : dom) {
            const NodeStencil& st = grid->stencil(idx);
            for (std::size_t k = 0; k < st.nodes.size(); ++k) {
                col.push_back(static_cast<int>(grid->unknown(st.nodes[k])));
                coef.push_back(st.coef[k]);
            }
            start.push_back(static_cast<int>(col.size()));
            interior.push_back(grid->kind(idx) == NodeKind::Interior);
            weight.push_back(grid->weight(idx));
        }
    }
    int n() const { return static_cast<int>(interior.size()); }

    SymMat3 hessian(const Vec& x, int i) const {
        SymMat3 h;
        for (int e = start[i]; e < start[i + 1]; ++e) {
            const double v = x[col[e]];
            const auto& c = coef[e];
            h.a11 += c[0] * v;
            h.a22 += c[1] * v;
            h.a33 += c[2] * v;
            h.a12 += c[3] * v;
            h.a13 += c[4] * v;
            h.a23 += c[5] * v;
        }
        return h;
    }

    std::vector<SymMat3> hessians(const Vec& x) const {
        std::vector<SymMat3> out(n());
        for (int i = 0; i < n(); ++i) out[i] = hessian(x, i);
        return out;
    }

    Vec to_dense(const Field& f) const {
        Vec x(n());
        const auto& dom = grid->domain_nodes();
        for (int i = 0; i < n(); ++i) x[i] = f.values[dom[i]];
        return x;
    }
    Field to_field(const Vec& x) const {
        Field f(grid, 0.0);
        const auto& dom = grid->domain_nodes();
        for (int i = 0; i < n(); ++i) f.values[dom[i]] = x[i];
        return f;
    }
    double integral(const Vec& x) const {
        double s = 0;
        for (int i = 0; i < n(); ++i) s += weight[i] * x[i];
        return s;
    }
    double lp(const Vec& x, double p) const {
        double s = 0;
        for (int i = 0; i < n(); ++i) s += weight[i] * std::pow(std::abs(x[i]), p);
        return std::pow(s, 1.0 / p);
    }
};

/// Jacobi-preconditioned BiCGSTAB; the Shortley-Weller rows make the systems
/// nonsymmetric. Incomplete LU cost more in factorization than it saved.
bool linear_solve(const SpMat& a, const Vec& b, Vec& x, const SolverOptions& opt) {
    Eigen::BiCGSTAB<SpMat> solver;
    solver.setTolerance(opt.linear_rtol);
    solver.setMaxIterations(opt.max_linear);
    solver.compute(a);
    if (solver.info() != Eigen::Success) return false;
    x = solver.solveWithGuess(b, x);
    return solver.info() == Eigen::Success || solver.error() < 1e3 * opt.linear_rtol;
}

/// Laplacian with zero wall data, solved for Laplacian(u) = c.
Vec poisson(const Operator& op, double c, const SolverOptions& opt) {
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(op.col.size());
    for (int i = 0; i < op.n(); ++i)
        for (int e = op.start[i]; e < op.start[i + 1]; ++e) {
            const auto& k = op.coef[e];
            const double v = k[0] + k[1] + k[2];
            if (v != 0) t.emplace_back(i, op.col[e], v);
        }
    SpMat a(op.n(), op.n());
    a.setFromTriplets(t.begin(), t.end());
    Vec x = Vec::Zero(op.n());
    if (!linear_solve(a, Vec::Constant(op.n(), c), x, opt))
        throw std::runtime_error("solver: Poisson initializer did not converge");
    return x;
}

/// Right-hand side f(u_i, i) and its derivative in u_i.
using Rhs = std::function<void(double u, int i, double& f, double& df)>;

struct NewtonResult {
    Vec u;
    double residual_linf = 0;
    double tol = 0;
    int iterations = 0;
    bool converged = false;
    std::string message;
};

// Gamma_2 up to the Newton tolerance: where the right side nearly vanishes
// (eigen problem at the boundary layer) iterates may graze the cone boundary.
bool admissible_all(const std::vector<SymMat3>& hs, double slack) {
    for (const auto& h : hs)
        if (!(elementary_symmetric(h, 1) > 0 && elementary_symmetric(h, 2) > -slack)) return false;
    return true;
}

NewtonResult newton(const Operator& op, Vec u, const Rhs& rhs, const SolverOptions& opt) {
    NewtonResult res;
    const int n = op.n();
    Vec r(n), fv(n), dfv(n);
    auto evaluate = [&](const Vec& x, std::vector<SymMat3>& hs, Vec& rr, double& fmax) {
        hs = op.hessians(x);
        fmax = 0;
        for (int i = 0; i < n; ++i) {
            rhs(x[i], i, fv[i], dfv[i]);
            fmax = std::max(fmax, std::abs(fv[i]));
            rr[i] = elementary_symmetric(hs[i], 2) - fv[i];
        }
    };
    std::vector<SymMat3> hs;
    double fmax = 0;
    evaluate(u, hs, r, fmax);
    std::vector<Eigen::Triplet<double>> t;
    for (int it = 0;; ++it) {
        res.tol = opt.residual_rtol * fmax;
        res.residual_linf = r.lpNorm<Eigen::Infinity>();
        res.iterations = it;
        if (res.residual_linf <= res.tol) {
            res.converged = true;
            break;
        }
        if (it >= opt.max_newton) {
            res.message = "Newton iteration limit reached";
            break;
        }
        // Jacobian: sum_ab S2^{ab}(H) dH_ab/du - f'(u).
        t.clear();
        t.reserve(op.col.size() + n);
        for (int i = 0; i < n; ++i) {
            const SymMat3 nm = newton_operator(hs[i]);
            const double w[6] = {nm.a11, nm.a22, nm.a33, 2 * nm.a12, 2 * nm.a13, 2 * nm.a23};
            for (int e = op.start[i]; e < op.start[i + 1]; ++e) {
                const auto& c = op.coef[e];
                double v = 0;
                for (int m = 0; m < 6; ++m) v += w[m] * c[m];
                if (op.col[e] == i) v -= dfv[i];
                if (v != 0) t.emplace_back(i, op.col[e], v);
            }
        }
        SpMat jac(n, n);
        jac.setFromTriplets(t.begin(), t.end());
        Vec delta = Vec::Zero(n);
        if (!linear_solve(jac, -r, delta, opt)) {
            res.message = "linear solve failed";
            break;
        }
        // Backtracking on |R|_2; steps leaving Gamma_2 or u < 0 are shrunk.
        const double r0 = r.norm();
        double alpha = 1;
        bool accepted = false;
        Vec trial(n), rt(n);
        std::vector<SymMat3> ht;
        double ft = 0;
        while (alpha >= 1.0 / 1024) {
            trial = u + alpha * delta;
            if (trial.maxCoeff() < 0) {
                evaluate(trial, ht, rt, ft);
                if (admissible_all(ht, res.tol) && rt.norm() <= (1 - 1e-4 * alpha) * r0) {
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            res.message = "line search stalled";
            break;
        }
        u = trial;
        r = rt;
        hs = std::move(ht);
        fmax = ft;
    }
    res.u = std::move(u);
    return res;
}

double interior_admissible(const Operator& op, const Vec& u) {
    std::size_t n = 0, ok = 0;
    for (int i = 0; i < op.n(); ++i) {
        if (!op.interior[i]) continue;
        ++n;
        if (gamma_member(op.hessian(u, i), 2)) ++ok;
    }
    return n ? static_cast<double>(ok) / n : 0.0;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Scaled Poisson start: Laplacian(u) = sqrt 3 (exact on balls), then the
/// amplitude that makes the weighted mean of S2 equal to 1.
Vec torsion_start(const Operator& op, const SolverOptions& opt) {
    Vec u = poisson(op, kSqrt3, opt);
    double s = 0, w = 0;
    for (int i = 0; i < op.n(); ++i) {
        s += op.weight[i] * elementary_symmetric(op.hessian(u, i), 2);
        w += op.weight[i];
    }
    if (!(s > 0)) throw std::runtime_error("solver: Poisson initializer is not 2-admissible");
    return u / std::sqrt(s / w);
}

NewtonResult torsion_newton(const Operator& op, const SolverOptions& opt) {
    const Rhs one = [](double, int, double& f, double& df) {
        f = 1;
        df = 0;
    };
    return newton(op, torsion_start(op, opt), one, opt);
}

double rayleigh(const Operator& op, const Vec& u) {
    double num = 0, den = 0;
    for (int i = 0; i < op.n(); ++i) {
        num -= op.weight[i] * u[i] * elementary_symmetric(op.hessian(u, i), 2);
        den += op.weight[i] * std::pow(std::abs(u[i]), 3);
    }
    return num / den;
}

void check_grid(const GridPtr& grid) {
    if (!grid) throw std::invalid_argument("solver: null grid");
    if (grid->domain_nodes().empty()) throw std::invalid_argument("solver: grid has no interior nodes");
}

void check_body(const SupportBody& body) {
    if (!curvature_proxy_ok(body))
        throw std::invalid_argument("solver: body has a non-positive principal radius (smooth it first)");
}

}  // namespace

std::string problem_name(Problem p) {
    switch (p) {
        case Problem::Torsion: return "torsion";
        case Problem::Power: return "power";
        case Problem::Eigen: return "eigen";
    }
    return "unknown";
}

nlohmann::json SolveReport::to_json() const {
    nlohmann::json j;
    j["problem"] = problem_name(problem);
    if (problem == Problem::Power) j["p"] = p;
    if (solution.grid) {
        j["resolution"] = solution.grid->resolution();
        j["h"] = solution.grid->h();
        j["nodes"] = solution.grid->domain_nodes().size();
        j["body"] = body_to_json(solution.grid->body());
        double umin = 0;
        for (std::size_t idx : solution.grid->domain_nodes()) umin = std::min(umin, solution.values[idx]);
        j["u_min"] = umin;
    }
    j["residual_linf"] = residual_linf;
    j["residual_tol"] = residual_tol;
    j["iterations"] = iterations;
    j["outer_iterations"] = outer_iterations;
    j["admissible_fraction"] = admissible_fraction;
    j["eigenvalue"] = eigenvalue ? nlohmann::json(*eigenvalue) : nlohmann::json(nullptr);
    if (problem == Problem::Power) j["norm_p1"] = norm_p1;
    j["converged"] = converged;
    j["message"] = message;
    j["seconds"] = seconds;
    return j;
}

SolveReport solve_torsion(const GridPtr& grid, const SolverOptions& opt) {
    check_grid(grid);
    const auto t0 = std::chrono::steady_clock::now();
    const Operator op(grid);
    NewtonResult nr = torsion_newton(op, opt);
    SolveReport rep;
    rep.problem = Problem::Torsion;
    rep.residual_linf = nr.residual_linf;
    rep.residual_tol = nr.tol;
    rep.iterations = nr.iterations;
    rep.outer_iterations = 1;
    rep.admissible_fraction = interior_admissible(op, nr.u);
    rep.converged = nr.converged && nr.u.maxCoeff() < 0;
    rep.message = nr.converged ? "converged" : nr.message;
    rep.solution = op.to_field(nr.u);
    rep.seconds = seconds_since(t0);
    return rep;
}

SolveReport solve_power(const GridPtr& grid, double p, const SolverOptions& opt) {
    check_grid(grid);
    if (!(p > 0 && p < 2)) throw std::invalid_argument("solve_power: p must lie in (0,2)");
    const auto t0 = std::chrono::steady_clock::now();
    const Operator op(grid);
    const NewtonResult tor = torsion_newton(op, opt);
    const Vec ut = tor.u;
    // c u_T balances the weighted equation: c^(2-p) = int(-u_T)^(p+1) / int(-u_T).
    double a = 0, b = 0;
    for (int i = 0; i < op.n(); ++i) {
        a += op.weight[i] * std::pow(-ut[i], p + 1);
        b += op.weight[i] * -ut[i];
    }
    const double c = std::pow(a / b, 1.0 / (2 - p));
    const Rhs power = [p](double u, int, double& f, double& df) {
        const double m = std::max(-u, 1e-300);
        f = std::pow(m, p);
        df = -p * std::pow(m, p - 1);
    };
    SolveReport rep;
    rep.problem = Problem::Power;
    rep.p = p;
    double amp = opt.power_amplitude;
    NewtonResult nr;
    bool nontrivial = false;
    for (int attempt = 0; attempt <= opt.power_retries; ++attempt) {
        rep.outer_iterations = attempt + 1;
        nr = newton(op, (amp * c) * ut, power, opt);
        rep.iterations += nr.iterations;
        nontrivial = nr.u.lpNorm<Eigen::Infinity>() > 1e-6 * c;
        if (nr.converged && nontrivial) break;
        amp *= 2;
    }
    rep.residual_linf = nr.residual_linf;
    rep.residual_tol = nr.tol;
    rep.admissible_fraction = interior_admissible(op, nr.u);
    rep.norm_p1 = op.lp(nr.u, p + 1);
    rep.converged = nr.converged && nontrivial && nr.u.maxCoeff() < 0;
    rep.message = rep.converged ? "converged" : (!nontrivial ? "collapsed to the trivial solution" : nr.message);
    rep.solution = op.to_field(nr.u);
    rep.seconds = seconds_since(t0);
    return rep;
}

SolveReport solve_eigen(const GridPtr& grid, const SolverOptions& opt) {
    check_grid(grid);
    const auto t0 = std::chrono::steady_clock::now();
    const Operator op(grid);
    const int n = op.n();
    NewtonResult tor = torsion_newton(op, opt);
    SolveReport rep;
    rep.problem = Problem::Eigen;
    rep.iterations = tor.iterations;
    Vec u = tor.u / op.lp(tor.u, 3);
    double lambda = rayleigh(op, u);
    Vec f(n);
    const Rhs fixed = [&f](double, int i, double& fi, double& df) {
        fi = f[i];
        df = 0;
    };
    bool stable = false, inner_ok = true;
    std::string msg;
    Vec r(n);
    double rinf = 0, rtol = 0;
    for (int it = 1; it <= opt.max_eigen_iterations; ++it) {
        rep.outer_iterations = it;
        for (int i = 0; i < n; ++i) f[i] = u[i] * u[i];
        NewtonResult nr = newton(op, u / std::sqrt(lambda), fixed, opt);
        rep.iterations += nr.iterations;
        inner_ok = nr.converged;
        if (!inner_ok) {
            msg = "inner solve: " + nr.message;
            u = nr.u / op.lp(nr.u, 3);
            break;
        }
        u = nr.u / op.lp(nr.u, 3);
        const double next = rayleigh(op, u);
        stable = std::abs(next - lambda) <= opt.eigen_rtol * std::abs(next);
        lambda = next;
        double fm = 0;
        for (int i = 0; i < n; ++i) {
            r[i] = elementary_symmetric(op.hessian(u, i), 2) - lambda * u[i] * u[i];
            fm = std::max(fm, lambda * u[i] * u[i]);
        }
        rinf = r.lpNorm<Eigen::Infinity>();
        rtol = opt.residual_rtol * fm;
        if (stable && rinf <= rtol) break;
    }
    rep.eigenvalue = lambda;
    rep.residual_linf = rinf;
    rep.residual_tol = rtol;
    rep.admissible_fraction = interior_admissible(op, u);
    rep.converged = inner_ok && stable && rinf <= rtol && u.maxCoeff() < 0;
    rep.message = rep.converged ? "converged" : (msg.empty() ? "eigenvalue estimates did not settle" : msg);
    rep.solution = op.to_field(u);
    rep.seconds = seconds_since(t0);
    return rep;
}

SolveReport solve_torsion(const SupportBody& body, int resolution, const SolverOptions& opt) {
    check_body(body);
    return solve_torsion(build_grid(body, resolution), opt);
}

SolveReport solve_power(const SupportBody& body, int resolution, double p, const SolverOptions& opt) {
    if (!(p > 0 && p < 2)) throw std::invalid_argument("solve_power: p must lie in (0,2)");
    check_body(body);
    return solve_power(build_grid(body, resolution), p, opt);
}

SolveReport solve_eigen(const SupportBody& body, int resolution, const SolverOptions& opt) {
    check_body(body);
    return solve_eigen(build_grid(body, resolution), opt);
}

Field s2_field(const Field& u) {
    const Operator op(u.grid);
    const Vec x = op.to_dense(u);
    Vec s(op.n());
    for (int i = 0; i < op.n(); ++i) s[i] = elementary_symmetric(op.hessian(x, i), 2);
    return op.to_field(s);
}

Field hessian_residual(const Field& u, const std::vector<double>& rhs) {
    if (rhs.size() != u.size()) throw std::invalid_argument("hessian_residual: rhs size does not match the grid");
    Field s = s2_field(u);
    for (std::size_t idx : u.grid->domain_nodes()) s.values[idx] -= rhs[idx];
    return s;
}

double admissible_fraction(const Field& u) {
    const Operator op(u.grid);
    return interior_admissible(op, op.to_dense(u));
}

JetPoint ball_oracle(double radius, const Vec3& x) {
    if (!(radius > 0)) throw std::invalid_argument("ball_oracle: radius must be positive");
    if (x.norm() > radius * (1 + 1e-12)) throw std::invalid_argument("ball_oracle: point lies outside the ball");
    JetPoint j;
    j.value = (x.squaredNorm() - radius * radius) / (2 * kSqrt3);
    j.gradient = x / kSqrt3;
    j.hessian = SymMat3::identity() * (1 / kSqrt3);
    return j;
}

nlohmann::json ConvexityCertificate::to_json() const {
    return {{"transform", transform.name()}, {"nodes", nodes},   {"passing", passing},
            {"fraction", fraction},          {"min_eigenvalue", min_eigenvalue},
            {"tolerance", tolerance},        {"scale", scale},   {"h", h},
            {"pass", pass}};
}

ConvexityCertificate convexity_certificate(const SolveReport& report, const TransformForm& transform, double c) {
    using K = TransformForm::Kind;
    const bool match = (transform.kind == K::Sqrt && report.problem == Problem::Torsion) ||
                       (transform.kind == K::Log && report.problem == Problem::Eigen) ||
                       (transform.kind == K::Power && report.problem == Problem::Power &&
                        std::abs(transform.p - report.p) <= 1e-12);
    if (!match)
        throw std::invalid_argument("convexity_certificate: transform " + transform.name() +
                                    " does not match the " + problem_name(report.problem) + " problem");
    if (!report.solution.grid) throw std::invalid_argument("convexity_certificate: report has no solution");
    if (!report.converged) throw std::invalid_argument("convexity_certificate: report did not converge");
    if (!(c > 0)) throw std::invalid_argument("convexity_certificate: C must be positive");
    const Grid3& g = *report.solution.grid;
    Field v(report.solution.grid, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t idx : g.domain_nodes()) {
        const double u = report.solution.values[idx];
        if (u < 0) v.values[idx] = transform.apply(u);
    }
    ConvexityCertificate cert;
    cert.transform = transform;
    cert.h = g.h();
    std::vector<double> lmin, norms;
    for (std::size_t idx : g.domain_nodes()) {
        if (g.sdf(idx) > -2 * g.h()) continue;
        SymMat3 hm;
        if (!centered_hessian(v, idx, hm)) continue;
        const Vec3 ev = eigenvalues(hm);
        if (!std::isfinite(ev[0]) || !std::isfinite(ev[2])) {
            lmin.push_back(-std::numeric_limits<double>::infinity());
            continue;
        }
        lmin.push_back(ev[0]);
        norms.push_back(std::max(std::abs(ev[0]), std::abs(ev[2])));
    }
    cert.nodes = lmin.size();
    if (cert.nodes == 0) throw std::runtime_error("convexity_certificate: no nodes at depth 2h");
    if (!norms.empty()) {
        std::nth_element(norms.begin(), norms.begin() + norms.size() / 2, norms.end());
        cert.scale = norms[norms.size() / 2];
    }
    cert.tolerance = c * g.h() * cert.scale;
    cert.min_eigenvalue = *std::min_element(lmin.begin(), lmin.end());
    cert.passing = static_cast<std::size_t>(
        std::count_if(lmin.begin(), lmin.end(), [&](double l) { return l >= -cert.tolerance; }));
    cert.fraction = static_cast<double>(cert.passing) / cert.nodes;
    cert.pass = cert.passing == cert.nodes;
    return cert;
}

}  // namespace hbm
