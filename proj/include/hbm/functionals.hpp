#pragma once

// Shape functionals evaluated from solver reports: torsional rigidity tau_2,
// the eigenvalue Lambda_2, tau_{2,p}, the quotient Q_{2,p}, the energy F_{2,p}
// and the boundary representation integrals.

#include "hbm/solver.hpp"

#include "json.hpp"

#include <string>
#include <utility>

namespace hbm {

struct FunctionalValue {
    std::string name;  ///< tau2, lambda2, tau2p, q2p, f2p, repr_tau, repr_lambda
    double value = 0;
    nlohmann::json provenance;  ///< body, resolution, solver parameters
    nlohmann::json to_json() const;
};

/// (-int u)^2 for a converged torsion report.
FunctionalValue tau2_from_solution(const SolveReport& r);
/// Rayleigh quotient -int u S2(D2u) / int |u|^3 for a converged eigen report.
FunctionalValue lambda2_from_solution(const SolveReport& r);
/// |u|_{L^{p+1}}^{2-p} for a converged power report with the same p.
FunctionalValue tau2p_from_solution(const SolveReport& r, double p);
/// Q_{2,p} at the solution, i.e. 1 / tau_{2,p}.
FunctionalValue q2p_from_solution(const SolveReport& r, double p);

/// -int w S2(D2w) / int |w|^3 for any admissible trial field.
double rayleigh_quotient(const Field& w);
/// int (-w) S2(D2w) / (int (-w)^{p+1})^{3/(p+1)}.
double q2p(const Field& w, double p);
/// (1/3) int (-w) S2(D2w) - 1/(p+1) int (-w)^{p+1}; p = 0 is the torsion energy.
double f2p_energy(const Field& w, double p);
/// Weighted int (-w) S2(D2w).
double hessian_energy(const Field& w);

/// |Du| at the boundary point grad h(theta), from a fit u(s) = a s + b s^2 to
/// trilinear samples at depths s = 2h, 3h, ... along the inward normal.
/// Returns NaN when fewer than two samples are available.
double boundary_gradient(const Field& u, const Vec3& theta, const Vec3& boundary_point);

struct RepresentationReport {
    FunctionalValue value;     ///< repr_tau (prefactor 1/10) or repr_lambda (1/4)
    double integral_minus_u = 0;  ///< -int u of the same run
    double reference = 0;      ///< tau_2 (torsion) or Lambda (eigen)
    double ratio_to_integral = 0;
    double ratio_to_reference = 0;
    std::size_t skipped = 0;   ///< sphere nodes without a usable gradient fit
    std::string convention;    ///< which quantity the integral reproduces
    nlohmann::json to_json() const;
};

/// Boundary integral of h |Du(grad h)|^3 (r1 + r2) over the sphere grid.
/// Requires an analytic body and a converged torsion or eigen report.
RepresentationReport representation_integral(const SupportBody& body, const SolveReport& r);
std::pair<RepresentationReport, RepresentationReport> representation_integrals(const SupportBody& body,
                                                                               const SolveReport& torsion,
                                                                               const SolveReport& eigen);

/// Appends one JSON line per value to an append-only run ledger.
void append_ledger(const std::string& path, const FunctionalValue& v);

}  // namespace hbm
