#include "doctest.h"

#include "hbm/solver.hpp"

#include <cmath>
#include <numbers>

using namespace hbm;

namespace {

const double kSqrt3 = std::sqrt(3.0);

double value_at_origin(const Field& u) {
    const Grid3& g = *u.grid;
    for (std::size_t idx : g.domain_nodes())
        if (g.position(idx).norm() < 1e-12) return u[idx];
    throw std::runtime_error("no node at the origin");
}

double oracle_error(const SolveReport& r, double radius) {
    double e = 0;
    for (std::size_t idx : r.solution.grid->domain_nodes())
        e = std::max(e, std::abs(r.solution[idx] - ball_oracle(radius, r.solution.grid->position(idx)).value));
    return e;
}

// Radial shooting: for radial u, S2(D2u) = (r u'^2)'/r^2. With u(0) = -1 and
// S2 = r^2 (-u)^p (or Lambda = 1 for p = 2 with u^2), integrate
// I' = r^2 (-u)^p, u' = sqrt(I/r) until u reaches 0 at r = rho.
double shoot_radius(double p) {
    const double dr = 1e-5;
    double r = 1e-4, u = -1 + r * r / (2 * kSqrt3), in = r * r * r / 3;
    auto rhs = [p](double rr, double uu, double ii, double& du, double& di) {
        du = std::sqrt(std::max(ii, 0.0) / rr);
        di = rr * rr * std::pow(std::max(-uu, 0.0), p);
    };
    while (u < 0) {
        double k1u, k1i, k2u, k2i, k3u, k3i, k4u, k4i;
        rhs(r, u, in, k1u, k1i);
        rhs(r + dr / 2, u + dr / 2 * k1u, in + dr / 2 * k1i, k2u, k2i);
        rhs(r + dr / 2, u + dr / 2 * k2u, in + dr / 2 * k2i, k3u, k3i);
        rhs(r + dr, u + dr * k3u, in + dr * k3i, k4u, k4i);
        const double un = u + dr / 6 * (k1u + 2 * k2u + 2 * k3u + k4u);
        in += dr / 6 * (k1i + 2 * k2i + 2 * k3i + k4i);
        if (un >= 0) return r + dr * (-u) / (un - u);
        u = un;
        r += dr;
    }
    return r;
}

SupportBody lumpy_body() {
    // Minkowski sum of a ball and a rotated ellipsoid: smooth, not a quadric.
    const Mat3 rot = Eigen::AngleAxisd(0.6, Vec3(1, 2, 0.5).normalized()).toRotationMatrix();
    return combine({{0.5, Mat3::Identity(), SupportBody::ball(1)},
                    {0.5, rot, SupportBody::ellipsoid(Vec3(1.2, 0.5, 0.3))}});
}

}  // namespace

TEST_CASE("ball oracle") {
    const JetPoint j0 = ball_oracle(1, Vec3::Zero());
    CHECK(j0.value == doctest::Approx(-0.288675).epsilon(1e-6));
    CHECK(ball_oracle(1, Vec3(0, 1, 0)).value == doctest::Approx(0.0));
    const JetPoint j = ball_oracle(2, Vec3(0.3, -1, 0.4));
    CHECK(elementary_symmetric(j.hessian, 2) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((j.gradient - Vec3(0.3, -1, 0.4) / kSqrt3).norm() <= 1e-15);
    CHECK_THROWS_AS(ball_oracle(1, Vec3(1.1, 0, 0)), std::invalid_argument);
    CHECK_THROWS_AS(ball_oracle(0, Vec3::Zero()), std::invalid_argument);
}

TEST_CASE("radial shooting oracle reproduces the torsion closed form") {
    // p = 0: rho^2 = 2 sqrt 3, so u(0) on the unit ball is -1/(2 sqrt 3).
    CHECK(shoot_radius(0) == doctest::Approx(std::sqrt(2 * kSqrt3)).epsilon(1e-6));
}

TEST_CASE("torsion on the unit ball") {
    const SolveReport r = solve_torsion(SupportBody::ball(1), 33);
    REQUIRE(r.converged);
    CHECK(r.problem == Problem::Torsion);
    CHECK(r.admissible_fraction == 1.0);
    CHECK(r.residual_linf <= r.residual_tol);
    CHECK(value_at_origin(r.solution) == doctest::Approx(-1 / (2 * kSqrt3)).epsilon(0.02));
    CHECK(-integrate(r.solution) == doctest::Approx(4 * std::numbers::pi / (15 * kSqrt3)).epsilon(0.04));
    for (std::size_t idx : r.solution.grid->domain_nodes()) CHECK(r.solution[idx] < 0);
    // Shortley-Weller is exact on quadratics, so only solver error remains.
    CHECK(oracle_error(r, 1) <= 1e-7);
    // The quadrature error of -int u decreases at second order.
    const SolveReport c = solve_torsion(SupportBody::ball(1), 17);
    const double exact = 4 * std::numbers::pi / (15 * kSqrt3);
    const double e17 = std::abs(-integrate(c.solution) - exact), e33 = std::abs(-integrate(r.solution) - exact);
    CHECK(e17 / e33 > 3);
}

TEST_CASE("torsion on ellipsoids matches the quadratic closed form") {
    const Vec3 a(1.3, 0.9, 0.7);
    const SolveReport r = solve_torsion(SupportBody::ellipsoid(a), 25);
    REQUIRE(r.converged);
    const Vec3 inv(1 / (a[0] * a[0]), 1 / (a[1] * a[1]), 1 / (a[2] * a[2]));
    // u = c (sum x_i^2/a_i^2 - 1), S2 = 4 c^2 (sum_{i<j} inv_i inv_j) = 1.
    const double c = 0.5 / std::sqrt(inv[0] * inv[1] + inv[0] * inv[2] + inv[1] * inv[2]);
    double e = 0;
    for (std::size_t idx : r.solution.grid->domain_nodes()) {
        const Vec3 x = r.solution.grid->position(idx);
        e = std::max(e, std::abs(r.solution[idx] - c * (x.cwiseProduct(x).dot(inv) - 1)));
    }
    CHECK(e <= 1e-7);
}

TEST_CASE("torsion scaling law on a non-quadric body") {
    const SupportBody b = lumpy_body();
    const SolveReport r1 = solve_torsion(b, 21);
    const SolveReport r2 = solve_torsion(b.scaled(2), 21);
    REQUIRE(r1.converged);
    REQUIRE(r2.converged);
    CHECK(r1.iterations > 0);
    CHECK(r1.admissible_fraction == 1.0);
    // Grids are scaled copies: u_2(2x) = 4 u_1(x) node by node.
    double e = 0, m = 0;
    for (std::size_t idx : r1.solution.grid->domain_nodes()) {
        e = std::max(e, std::abs(r2.solution[idx] - 4 * r1.solution[idx]));
        m = std::max(m, std::abs(r1.solution[idx]));
    }
    CHECK(e <= 1e-5 * 4 * m);
    CHECK(-integrate(r2.solution) == doctest::Approx(32 * -integrate(r1.solution)).epsilon(1e-5));
}

TEST_CASE("non-convergence is flagged, not thrown") {
    SolverOptions opt;
    opt.max_newton = 0;
    const SolveReport r = solve_torsion(lumpy_body(), 17, opt);
    CHECK_FALSE(r.converged);
    CHECK(r.message.find("limit") != std::string::npos);
    CHECK_THROWS_AS(convexity_certificate(r, TransformForm::sqrt()), std::invalid_argument);
}

TEST_CASE("power problem") {
    const SupportBody ball = SupportBody::ball(1);
    for (double p : {0.5, 1.0, 1.5}) {
        const SolveReport r = solve_power(ball, 25, p);
        REQUIRE(r.converged);
        CHECK(r.admissible_fraction == 1.0);
        CHECK(r.norm_p1 > 0);
        // u(0) = -rho^(-4/(2-p)) from the radial shooting oracle.
        const double u0 = -std::pow(shoot_radius(p), -4 / (2 - p));
        CHECK(value_at_origin(r.solution) == doctest::Approx(u0).epsilon(0.01));
        CHECK(r.norm_p1 == doctest::Approx(lp_norm(r.solution, p + 1)).epsilon(1e-12));
    }
    // p -> 0 approaches the torsion solution.
    const SolveReport tor = solve_torsion(ball, 25);
    const SolveReport small = solve_power(ball, 25, 0.05);
    const double d = std::abs(value_at_origin(small.solution) / value_at_origin(tor.solution) - 1);
    CHECK(d < 0.1);
    // Scaling: u on lambda B is lambda^(4/(2-p)) u(x/lambda).
    const double p = 1.0;
    const SolveReport r1 = solve_power(lumpy_body(), 17, p);
    const SolveReport r2 = solve_power(lumpy_body().scaled(1.5), 17, p);
    REQUIRE(r1.converged);
    REQUIRE(r2.converged);
    const double s = std::pow(1.5, 4 / (2 - p));
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(lp_norm(r2.solution, inf) == doctest::Approx(s * lp_norm(r1.solution, inf)).epsilon(0.02));
    CHECK_THROWS_AS(solve_power(ball, 17, 2.0), std::invalid_argument);
    CHECK_THROWS_AS(solve_power(ball, 17, 0.0), std::invalid_argument);
}

TEST_CASE("eigenvalue problem") {
    const SolveReport r = solve_eigen(SupportBody::ball(1), 25);
    REQUIRE(r.converged);
    REQUIRE(r.eigenvalue.has_value());
    CHECK(r.admissible_fraction == 1.0);
    CHECK(lp_norm(r.solution, 3) == doctest::Approx(1.0).epsilon(1e-12));
    // Radial oracle: with Lambda = 1 the solution vanishes at rho, so Lambda(B_1) = rho^4.
    const double lambda = std::pow(shoot_radius(2), 4);
    CHECK(*r.eigenvalue == doctest::Approx(lambda).epsilon(0.02));
    // Rayleigh quotient and postcondition residual.
    std::vector<double> rhs(r.solution.size(), 0.0);
    for (std::size_t idx : r.solution.grid->domain_nodes())
        rhs[idx] = *r.eigenvalue * r.solution[idx] * r.solution[idx];
    const Field res = hessian_residual(r.solution, rhs);
    CHECK(lp_norm(res, std::numeric_limits<double>::infinity()) <= r.residual_tol);
    // Nodes of ball{2} are scaled copies: Lambda(2B) = Lambda(B)/16.
    const SolveReport r2 = solve_eigen(SupportBody::ball(2), 25);
    REQUIRE(r2.converged);
    CHECK(*r2.eigenvalue == doctest::Approx(*r.eigenvalue / 16).epsilon(0.02));
}

TEST_CASE("convexity certificates") {
    const SolveReport t = solve_torsion(SupportBody::ball(1), 25);
    const ConvexityCertificate c = convexity_certificate(t, TransformForm::sqrt());
    CHECK(c.pass);
    CHECK(c.fraction == 1.0);
    CHECK(c.nodes > 1000);
    CHECK(c.tolerance == doctest::Approx(c.h * c.scale));
    // Closed form: v = -(R^2 - r^2)^(1/2) / (2 sqrt 3)^(1/2) has lambda_min = v''(0) at the centre region.
    CHECK(c.min_eigenvalue > 0);
    const ConvexityCertificate strict = convexity_certificate(t, TransformForm::sqrt(), 1e-6);
    CHECK(strict.tolerance < c.tolerance);

    const SolveReport e = solve_torsion(SupportBody::ellipsoid(Vec3(1, 1, 0.6)), 25);
    CHECK(convexity_certificate(e, TransformForm::sqrt()).pass);

    CHECK_THROWS_AS(convexity_certificate(t, TransformForm::log()), std::invalid_argument);
    CHECK_THROWS_AS(convexity_certificate(t, TransformForm::power(1)), std::invalid_argument);
    const SolveReport pw = solve_power(SupportBody::ball(1), 17, 1.0);
    CHECK(convexity_certificate(pw, TransformForm::power(1.0)).pass);
    CHECK_THROWS_AS(convexity_certificate(pw, TransformForm::power(0.5)), std::invalid_argument);
    const SolveReport ei = solve_eigen(SupportBody::ball(1), 17);
    CHECK(convexity_certificate(ei, TransformForm::log()).pass);
    CHECK_THROWS_AS(convexity_certificate(ei, TransformForm::sqrt()), std::invalid_argument);
}

TEST_CASE("certificate detects a non-convex field") {
    // Perturb the torsion solution with a saddle large enough to break convexity of v.
    SolveReport t = solve_torsion(SupportBody::ball(1), 21);
    for (std::size_t idx : t.solution.grid->domain_nodes()) {
        const Vec3 x = t.solution.grid->position(idx);
        t.solution.values[idx] *= 1 + 0.8 * std::sin(6 * x[0]) * std::sin(6 * x[1]);
    }
    const ConvexityCertificate c = convexity_certificate(t, TransformForm::sqrt());
    CHECK_FALSE(c.pass);
    CHECK(c.fraction < 1);
    CHECK(c.min_eigenvalue < -c.tolerance);
}

TEST_CASE("reports serialize scalars") {
    const SolveReport r = solve_eigen(SupportBody::ball(1), 13);
    const nlohmann::json j = r.to_json();
    CHECK(j["problem"] == "eigen");
    CHECK(j["eigenvalue"].get<double>() == *r.eigenvalue);
    CHECK(j["resolution"] == 13);
    CHECK(j["body"]["kind"] == "ball");
    CHECK(j.find("values") == j.end());
    const SolveReport t = solve_torsion(SupportBody::ball(1), 13);
    CHECK(t.to_json()["eigenvalue"].is_null());
    CHECK(s2_field(t.solution).size() == t.solution.size());
    CHECK(admissible_fraction(t.solution) == 1.0);
    CHECK_THROWS_AS(hessian_residual(t.solution, {}), std::invalid_argument);
}

TEST_CASE("kinked bodies are rejected") {
    auto g = SphereGrid::icosahedral();
    std::vector<double> h;
    for (const Vec3& th : g->directions()) h.push_back(th.cwiseAbs().maxCoeff());
    CHECK_THROWS_AS(solve_torsion(SupportBody(g, h), 17), std::invalid_argument);
}
