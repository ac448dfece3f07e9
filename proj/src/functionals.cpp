#include "hbm/functionals.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace hbm {

namespace {

nlohmann::json provenance(const SolveReport& r) {
    nlohmann::json j;
    j["problem"] = problem_name(r.problem);
    if (r.problem == Problem::Power) j["p"] = r.p;
    j["resolution"] = r.solution.grid->resolution();
    j["h"] = r.solution.grid->h();
    j["body"] = body_to_json(r.solution.grid->body());
    j["residual_linf"] = r.residual_linf;
    j["iterations"] = r.iterations;
    return j;
}

void require(const SolveReport& r, Problem p, const char* who) {
    if (!r.solution.grid) throw std::invalid_argument(std::string(who) + ": report has no solution");
    if (r.problem != p)
        throw std::invalid_argument(std::string(who) + ": expected a " + problem_name(p) + " report, got " +
                                    problem_name(r.problem));
    if (!r.converged) throw std::invalid_argument(std::string(who) + ": report did not converge");
}

void require_admissible(const Field& w, const char* who) {
    if (!w.grid) throw std::invalid_argument(std::string(who) + ": null grid");
    const double a = admissible_fraction(w);
    if (a < 0.99)
        throw std::invalid_argument(std::string(who) + ": field is not admissible (fraction " + std::to_string(a) +
                                    ")");
}

double power_integral(const Field& w, double q) {
    double s = 0;
    for (std::size_t idx : w.grid->domain_nodes()) s += w.grid->weight(idx) * std::pow(std::max(-w[idx], 0.0), q);
    return s;
}

}  // namespace

nlohmann::json FunctionalValue::to_json() const {
    return {{"name", name}, {"value", value}, {"provenance", provenance}};
}

double hessian_energy(const Field& w) {
    const Field s = s2_field(w);
    double e = 0;
    for (std::size_t idx : w.grid->domain_nodes()) e -= w.grid->weight(idx) * w[idx] * s[idx];
    return e;
}

FunctionalValue tau2_from_solution(const SolveReport& r) {
    require(r, Problem::Torsion, "tau2_from_solution");
    const double i = -integrate(r.solution);
    return {"tau2", i * i, provenance(r)};
}

double rayleigh_quotient(const Field& w) {
    if (!w.grid) throw std::invalid_argument("rayleigh_quotient: null grid");
    for (std::size_t idx : w.grid->domain_nodes())
        if (!(w[idx] < 0)) throw std::invalid_argument("rayleigh_quotient: trial field must be negative inside");
    return hessian_energy(w) / power_integral(w, 3);
}

FunctionalValue lambda2_from_solution(const SolveReport& r) {
    require(r, Problem::Eigen, "lambda2_from_solution");
    FunctionalValue v{"lambda2", rayleigh_quotient(r.solution), provenance(r)};
    v.provenance["fixed_point_estimate"] = *r.eigenvalue;
    return v;
}

FunctionalValue tau2p_from_solution(const SolveReport& r, double p) {
    require(r, Problem::Power, "tau2p_from_solution");
    if (std::abs(r.p - p) > 1e-12)
        throw std::invalid_argument("tau2p_from_solution: report was solved with p = " + std::to_string(r.p));
    return {"tau2p", std::pow(lp_norm(r.solution, p + 1), 2 - p), provenance(r)};
}

FunctionalValue q2p_from_solution(const SolveReport& r, double p) {
    FunctionalValue t = tau2p_from_solution(r, p);
    return {"q2p", 1 / t.value, t.provenance};
}

double q2p(const Field& w, double p) {
    if (!(p > 0 && p < 2)) throw std::invalid_argument("q2p: p must lie in (0,2)");
    require_admissible(w, "q2p");
    return hessian_energy(w) / std::pow(power_integral(w, p + 1), 3 / (p + 1));
}

double f2p_energy(const Field& w, double p) {
    if (!(p >= 0 && p < 2)) throw std::invalid_argument("f2p_energy: p must lie in [0,2)");
    require_admissible(w, "f2p_energy");
    return hessian_energy(w) / 3 - power_integral(w, p + 1) / (p + 1);
}

double boundary_gradient(const Field& u, const Vec3& theta, const Vec3& boundary_point) {
    const double h = u.grid->h();
    // Least squares for u(s) = a s + b s^2 through the first three usable depths.
    double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
    int used = 0;
    for (int m = 2; m <= 8 && used < 3; ++m) {
        const double s = m * h;
        double v;
        if (!trilinear(u, boundary_point - s * theta, v)) continue;
        s11 += s * s;
        s12 += s * s * s;
        s22 += s * s * s * s;
        r1 += s * v;
        r2 += s * s * v;
        ++used;
    }
    if (used < 2) return std::numeric_limits<double>::quiet_NaN();
    const double det = s11 * s22 - s12 * s12;
    const double a = (r1 * s22 - r2 * s12) / det;
    return std::abs(a);
}

nlohmann::json RepresentationReport::to_json() const {
    return {{"value", value.to_json()},
            {"integral_minus_u", integral_minus_u},
            {"reference", reference},
            {"ratio_to_integral", ratio_to_integral},
            {"ratio_to_reference", ratio_to_reference},
            {"skipped", skipped},
            {"convention", convention}};
}

RepresentationReport representation_integral(const SupportBody& body, const SolveReport& r) {
    if (!body.analytic()) throw std::invalid_argument("representation_integral: body needs an analytic descriptor");
    if (!r.solution.grid) throw std::invalid_argument("representation_integral: report has no solution");
    if (!r.converged) throw std::invalid_argument("representation_integral: report did not converge");
    if (r.problem == Problem::Power)
        throw std::invalid_argument("representation_integral: only torsion and eigen reports are supported");
    const bool torsion = r.problem == Problem::Torsion;
    const SphereGrid& sg = body.grid();
    double sum = 0, wsum = 0, wskip = 0;
    RepresentationReport rep;
    for (std::size_t i = 0; i < sg.size(); ++i) {
        const Vec3& th = sg.directions()[i];
        const Vec3 x = descriptor_gradient(*body.descriptor(), th);
        const double g = boundary_gradient(r.solution, th, x);
        wsum += sg.weights()[i];
        if (!std::isfinite(g)) {
            ++rep.skipped;
            wskip += sg.weights()[i];
            continue;
        }
        const auto rad = principal_radii(body, i);
        sum += sg.weights()[i] * body.samples()[i] * g * g * g * (rad[0] + rad[1]);
    }
    // Rescale for skipped directions so the quadrature still covers the sphere.
    if (wskip > 0.2 * wsum) throw std::runtime_error("representation_integral: too few boundary gradients available");
    sum *= wsum / (wsum - wskip);
    const double value = (torsion ? 0.1 : 0.25) * sum;
    rep.value = {torsion ? "repr_tau" : "repr_lambda", value, provenance(r)};
    rep.integral_minus_u = -integrate(r.solution);
    rep.reference = torsion ? rep.integral_minus_u * rep.integral_minus_u : *r.eigenvalue;
    rep.ratio_to_integral = value / rep.integral_minus_u;
    rep.ratio_to_reference = value / rep.reference;
    if (torsion) {
        rep.convention = std::abs(rep.ratio_to_integral - 1) < std::abs(rep.ratio_to_reference - 1)
                             ? "matches -int u = tau2^(1/2)"
                             : "matches tau2";
    } else {
        rep.convention = std::abs(rep.ratio_to_reference - 1) < std::abs(rep.ratio_to_integral - 1)
                             ? "matches Lambda2 with |u|_3 = 1"
                             : "matches -int u";
    }
    rep.value.provenance["convention"] = rep.convention;
    return rep;
}

std::pair<RepresentationReport, RepresentationReport> representation_integrals(const SupportBody& body,
                                                                               const SolveReport& torsion,
                                                                               const SolveReport& eigen) {
    if (torsion.problem != Problem::Torsion || eigen.problem != Problem::Eigen)
        throw std::invalid_argument("representation_integrals: expected a torsion and an eigen report");
    return {representation_integral(body, torsion), representation_integral(body, eigen)};
}

void append_ledger(const std::string& path, const FunctionalValue& v) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw std::runtime_error("append_ledger: cannot open " + path);
    out << v.to_json().dump() << '\n';
}

}  // namespace hbm
