#pragma once

// Finite-difference solvers for S2(D2u) = f(u) with u = 0 on the boundary:
// torsion (f = 1), the power problem (f = (-u)^p) and the eigenvalue problem
// (S2(D2u) = L u^2), plus the closed-form ball solution and convexity
// certificates for the transformed solutions.

#include "hbm/grid_field.hpp"
#include "hbm/hessian_algebra.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hbm {

enum class Problem { Torsion, Power, Eigen };
std::string problem_name(Problem p);

struct SolverOptions {
    double residual_rtol = 1e-6;  ///< stop when |R|_inf <= rtol * max|f|
    int max_newton = 200;
    double linear_rtol = 1e-8;
    int max_linear = 2000;
    int max_eigen_iterations = 200;
    double eigen_rtol = 1e-9;     ///< relative change of successive estimates
    double power_amplitude = 1.0; ///< multiplier on the scaled torsion start
    int power_retries = 4;
};

struct SolveReport {
    Problem problem = Problem::Torsion;
    double p = 0;  ///< exponent of the power problem
    Field solution;
    double residual_linf = 0;
    double residual_tol = 0;
    int iterations = 0;         ///< Newton steps (summed over inverse iterations)
    int outer_iterations = 0;   ///< inverse iterations (eigen) or attempts (power)
    double admissible_fraction = 0;
    std::optional<double> eigenvalue;
    double norm_p1 = 0;         ///< |u|_{L^{p+1}} for the power problem
    bool converged = false;
    std::string message;
    double seconds = 0;

    nlohmann::json to_json() const;  ///< scalars only
};

SolveReport solve_torsion(const SupportBody& body, int resolution, const SolverOptions& opt = {});
SolveReport solve_power(const SupportBody& body, int resolution, double p, const SolverOptions& opt = {});
SolveReport solve_eigen(const SupportBody& body, int resolution, const SolverOptions& opt = {});

/// Same solvers on an existing grid.
SolveReport solve_torsion(const GridPtr& grid, const SolverOptions& opt = {});
SolveReport solve_power(const GridPtr& grid, double p, const SolverOptions& opt = {});
SolveReport solve_eigen(const GridPtr& grid, const SolverOptions& opt = {});

/// Discrete residual S2(H(u)) - f at every in-domain node (0 elsewhere).
Field hessian_residual(const Field& u, const std::vector<double>& rhs);
/// S2(H(u)) per in-domain node.
Field s2_field(const Field& u);
/// Fraction of in-domain nodes whose discrete Hessian lies in Gamma_2.
double admissible_fraction(const Field& u);

/// u = (|x|^2 - R^2)/(2 sqrt 3), Du = x/sqrt 3, D2u = I/sqrt 3.
JetPoint ball_oracle(double radius, const Vec3& x);

struct ConvexityCertificate {
    TransformForm transform;
    std::size_t nodes = 0;     ///< interior nodes at depth >= 2h
    std::size_t passing = 0;
    double fraction = 0;
    double min_eigenvalue = 0; ///< worst lambda_min over the nodes
    double tolerance = 0;      ///< C h scale
    double scale = 0;          ///< median spectral norm of D2v
    double h = 0;
    bool pass = false;
    nlohmann::json to_json() const;
};

/// Convexity of v = T(u) on nodes at depth >= 2h from centred Hessians.
/// The transform must match the problem (sqrt/torsion, log/eigen,
/// power{p}/power with the same p).
ConvexityCertificate convexity_certificate(const SolveReport& report, const TransformForm& transform,
                                           double c = 1.0);

}  // namespace hbm
