#include "doctest.h"

#include "hbm/convex_body.hpp"

#include <cmath>
#include <numbers>

using namespace hbm;

namespace {

constexpr double kPi = std::numbers::pi;

// Oblate spheroid area with equatorial radius a and polar radius c < a.
double spheroid_area(double a, double c) {
    const double e = std::sqrt(1.0 - c * c / (a * a));
    return 2 * kPi * a * a * (1.0 + (1.0 - e * e) / e * std::atanh(e));
}

// Support function by brute maximization over a dense boundary parametrization.
double sup_form(const Vec3& axes, const Mat3& rot, const Vec3& dir, int n = 400) {
    double best = -1e300;
    for (int i = 0; i <= n; ++i) {
        const double th = kPi * i / n;
        for (int j = 0; j < 2 * n; ++j) {
            const double ph = kPi * j / n;
            const Vec3 local(axes[0] * std::sin(th) * std::cos(ph), axes[1] * std::sin(th) * std::sin(ph),
                             axes[2] * std::cos(th));
            best = std::max(best, dir.dot(rot * local));
        }
    }
    return best;
}

}  // namespace

TEST_CASE("sphere grid invariants") {
    for (int level : {0, 2, 4}) {
        auto g = SphereGrid::icosahedral(level);
        CHECK(g->size() == static_cast<std::size_t>(10 * (1 << (2 * level)) + 2));
        double wsum = 0;
        for (std::size_t i = 0; i < g->size(); ++i) {
            CHECK(std::abs(g->directions()[i].norm() - 1.0) <= 1e-12);
            CHECK(g->weights()[i] > 0);
            wsum += g->weights()[i];
            CHECK((g->directions()[g->antipode(i)] + g->directions()[i]).norm() <= 1e-12);
        }
        CHECK(std::abs(wsum - 4 * kPi) <= 1e-6 * 4 * kPi);
    }
    CHECK(SphereGrid::icosahedral(4) == SphereGrid::icosahedral());
    CHECK_THROWS(SphereGrid::icosahedral(9));
}

TEST_CASE("support evaluation") {
    const SupportBody b = SupportBody::ball(1.0);
    CHECK(support_eval(b, Vec3(0, 0, 1)) == doctest::Approx(1.0));
    const SupportBody e = SupportBody::ellipsoid(Vec3(1, 1, 0.5));
    CHECK(support_eval(e, Vec3(0, 0, 1)) == doctest::Approx(0.5));
    const SupportBody bt = SupportBody::ball(1.0, Vec3(1, 0, 0));
    CHECK(support_eval(bt, Vec3(1, 0, 0)) == doctest::Approx(2.0));
    CHECK_THROWS_AS(support_eval(b, Vec3(0, 0, 2)), std::invalid_argument);
    for (std::size_t i = 0; i < b.grid().size(); i += 97) CHECK(bt.samples()[i] == doctest::Approx(1.0 + b.grid().directions()[i][0]));
}

TEST_CASE("sampled interpolation is exact at nodes and close between them") {
    const SupportBody e = SupportBody::ellipsoid(Vec3(1.2, 1, 0.7));
    const SupportBody s(e.grid_ptr(), e.samples());
    CHECK_FALSE(s.analytic());
    for (std::size_t i = 0; i < s.grid().size(); i += 53)
        CHECK(support_eval(s, s.grid().directions()[i]) == doctest::Approx(e.samples()[i]).epsilon(1e-12));
    SplitMix64 rng(3);
    for (int t = 0; t < 100; ++t) {
        Vec3 d(rng.normal(), rng.normal(), rng.normal());
        d.normalize();
        CHECK(std::abs(support_eval(s, d) - support_eval(e, d)) <= 2e-3);
    }
}

TEST_CASE("containment") {
    const SupportBody b = SupportBody::ball(1.0);
    CHECK(contains(b, Vec3::Zero()));
    CHECK_FALSE(contains(b, Vec3(2, 0, 0)));
    CHECK_FALSE(contains(SupportBody::ellipsoid(Vec3(1, 1, 0.5)), Vec3(0, 0, 0.75)));
}

TEST_CASE("combination") {
    const SupportBody b1 = SupportBody::ball(1);
    const SupportBody b3 = SupportBody::ball(3);
    const SupportBody m = combine({{0.5, Mat3::Identity(), b1}, {0.5, Mat3::Identity(), b3}});
    for (std::size_t i = 0; i < m.grid().size(); i += 31) CHECK(m.samples()[i] == doctest::Approx(2.0));
    CHECK(signed_distance(m, Vec3::Zero()).value == doctest::Approx(-2.0));

    const SupportBody e = SupportBody::ellipsoid(Vec3(1, 1, 0.5));
    const SupportBody d = combine({{1, Mat3::Identity(), e}, {1, -Mat3::Identity(), e}});
    const SupportBody e2 = SupportBody::ellipsoid(Vec3(2, 2, 1));
    CHECK(support_distance(d, e2) <= 1e-12);

    CHECK_THROWS_AS(combine({{0, Mat3::Identity(), b1}}), std::invalid_argument);
    CHECK_THROWS_AS(combine({}), std::invalid_argument);
    const SupportBody coarse = SupportBody::ball(1, Vec3::Zero(), SphereGrid::icosahedral(2));
    CHECK_THROWS_AS(combine({{1, Mat3::Identity(), b1}, {1, Mat3::Identity(), coarse}}), std::invalid_argument);

    SplitMix64 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
        const Vec3 a0(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5));
        const Vec3 a1(rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5));
        const double t = rng.uniform();
        const SupportBody o0 = SupportBody::ellipsoid(a0), o1 = SupportBody::ellipsoid(a1, Vec3(0.2, 0, 0));
        const SupportBody ot = combine({{1 - t, Mat3::Identity(), o0}, {t, Mat3::Identity(), o1}});
        for (std::size_t i = 0; i < ot.grid().size(); ++i)
            CHECK(ot.samples()[i] == doctest::Approx((1 - t) * o0.samples()[i] + t * o1.samples()[i]).epsilon(1e-14));
        CHECK(mean_width(ot) == doctest::Approx((1 - t) * mean_width(o0) + t * mean_width(o1)).epsilon(1e-12));
    }
}

TEST_CASE("combination of rotated ellipsoids matches independent sup-form evaluation") {
    SplitMix64 rng(7);
    const Vec3 axes(1.3, 0.9, 0.6);
    const Mat3 rho = random_rotation(rng);
    const SupportBody e = SupportBody::ellipsoid(axes);
    const SupportBody c = combine({{0.4, rho, e}, {0.6, Mat3::Identity(), SupportBody::ball(0.8)}});
    for (int k = 0; k < 5; ++k) {
        Vec3 d(rng.normal(), rng.normal(), rng.normal());
        d.normalize();
        const double ref = 0.4 * sup_form(axes, rho, d) + 0.6 * 0.8;
        CHECK(support_eval(c, d) == doctest::Approx(ref).epsilon(1e-4));
    }
}

TEST_CASE("mean width and Steiner point") {
    CHECK(mean_width(SupportBody::ball(1.7)) == doctest::Approx(3.4).epsilon(1e-12));
    CHECK(mean_width(SupportBody::ball(1, Vec3(5, 0, 0))) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(steiner_point(SupportBody::ball(1)).norm() <= 1e-12);
    CHECK((steiner_point(SupportBody::ball(1, Vec3(1, 2, 3))) - Vec3(1, 2, 3)).norm() <= 1e-10);
    const SupportBody e = SupportBody::ellipsoid(Vec3(1, 1, 0.5));
    CHECK(steiner_point(e).norm() <= 1e-12);
    const Vec3 c(0.3, -0.2, 0.7);
    CHECK((steiner_point(e.translated(c)) - steiner_point(e) - c).norm() <= 1e-10);

    // Grid-refinement oracle for the ellipsoid mean width.
    double prev = 0, diff_prev = 1;
    for (int level : {3, 5, 6}) {
        const double mw = mean_width(SupportBody::ellipsoid(Vec3(1, 1, 0.5), Vec3::Zero(), SphereGrid::icosahedral(level)));
        if (prev != 0) {
            const double diff = std::abs(mw - prev);
            CHECK(diff < diff_prev);
            diff_prev = diff;
        }
        prev = mw;
    }
    CHECK(std::abs(mean_width(e) - prev) <= 1e-4);
}

TEST_CASE("surface area") {
    CHECK(surface_area(SupportBody::ball(1)).area == doctest::Approx(4 * kPi).epsilon(1e-12));
    CHECK(surface_area(SupportBody::ball(2)).area == doctest::Approx(16 * kPi).epsilon(1e-12));
    const SupportBody e = SupportBody::ellipsoid(Vec3(1, 1, 0.5));
    const SurfaceArea sa = surface_area(e);
    CHECK(sa.ok);
    CHECK(sa.area == doctest::Approx(spheroid_area(1, 0.5)).epsilon(2e-3));
    CHECK(surface_area(e.scaled(1.7)).area == doctest::Approx(1.7 * 1.7 * sa.area).epsilon(1e-9));
    // Sampled bodies use a local quartic fit.
    const SupportBody s(e.grid_ptr(), e.samples());
    const SurfaceArea ss = surface_area(s);
    CHECK(ss.ok);
    CHECK(ss.area == doctest::Approx(sa.area).epsilon(5e-3));
}

TEST_CASE("surface area flags non-smooth sampled bodies") {
    // A cube-like polytope: h = max over the 6 face normals of <theta, n>.
    auto g = SphereGrid::icosahedral(3);
    std::vector<double> h(g->size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = g->directions()[i].cwiseAbs().sum();
    const SupportBody cube(g, h);
    const SurfaceArea raw = surface_area(cube);
    CHECK_FALSE(raw.ok);
    CHECK_FALSE(raw.message.empty());
    CHECK_FALSE(curvature_proxy_ok(cube));
    // Adding eps*B_1 shifts every radius by eps.
    const SurfaceArea smooth = surface_area(cube, 0.1 - raw.min_radius);
    CHECK(smooth.ok);
    CHECK(smooth.min_radius > 0);
}

TEST_CASE("principal radii") {
    const auto r = principal_radii(SupportBody::ball(1.5), 17);
    CHECK(r[0] == doctest::Approx(1.5));
    CHECK(r[1] == doctest::Approx(1.5));
    // Ellipsoid semi-axes (a,b,c): at the pole (0,0,1) the radii are a^2/c and b^2/c.
    const SupportBody e = SupportBody::ellipsoid(Vec3(1.2, 1, 0.5));
    const std::size_t pole = e.grid().nearest(Vec3(0, 0, 1));
    REQUIRE((e.grid().directions()[pole] - Vec3(0, 0, 1)).norm() < 1e-12);
    const auto re = principal_radii(e, pole);
    CHECK(re[0] == doctest::Approx(1.0 / 0.5));
    CHECK(re[1] == doctest::Approx(1.44 / 0.5));
    CHECK(curvature_proxy_ok(e));
}

TEST_CASE("reference balls") {
    const ReferenceBalls rb = reference_balls(SupportBody::ball(1));
    CHECK(rb.sharp_radius == doctest::Approx(1.0));
    CHECK(rb.star_radius == doctest::Approx(1.0));
    const SupportBody e = SupportBody::ellipsoid(Vec3(1, 1, 0.5));
    const ReferenceBalls re = reference_balls(e);
    CHECK(re.sharp_radius >= re.star_radius);
    const ReferenceBalls r2 = reference_balls(e.scaled(2));
    CHECK(r2.sharp_radius == doctest::Approx(2 * re.sharp_radius));
    CHECK(r2.star_radius == doctest::Approx(2 * re.star_radius));
}

TEST_CASE("rotation means") {
    const RotationMeans rb = rotation_mean_sequence(SupportBody::ball(1), 4, 9);
    for (const auto& b : rb.bodies) CHECK(support_distance(b, SupportBody::ball(1)) <= 1e-12);
    const SupportBody e = SupportBody::ellipsoid(Vec3(1, 1, 0.5));
    const RotationMeans re = rotation_mean_sequence(e, 32, 9);
    CHECK(re.bodies.size() == 33);
    CHECK(re.hausdorff.back() < re.hausdorff.front());
    // Exact in the continuum; rotated samples carry the grid quadrature error.
    for (const auto& b : re.bodies) CHECK(mean_width(b) == doctest::Approx(mean_width(e)).epsilon(1e-6));
    const RotationMeans again = rotation_mean_sequence(e, 32, 9);
    CHECK(again.hausdorff == re.hausdorff);
}

TEST_CASE("signed distance") {
    const SupportBody b = SupportBody::ball(1, Vec3(0.5, 0, 0));
    CHECK(signed_distance(b, Vec3(0.5, 0, 0)).value == doctest::Approx(-1.0));
    CHECK(signed_distance(b, Vec3(2.5, 0, 0)).value == doctest::Approx(1.0));
    const Vec3 x(0.2, 0.3, -0.4);
    CHECK(signed_distance(b, x).value == doctest::Approx((x - Vec3(0.5, 0, 0)).norm() - 1.0).epsilon(1e-10));
    // Ellipsoid: points on the boundary have zero distance.
    const SupportBody e = SupportBody::ellipsoid(Vec3(1.3, 0.9, 0.7));
    for (double th : {0.3, 1.1, 2.0}) {
        const Vec3 p(1.3 * std::sin(th) * std::cos(2 * th), 0.9 * std::sin(th) * std::sin(2 * th), 0.7 * std::cos(th));
        CHECK(std::abs(signed_distance(e, p).value) <= 1e-9);
    }
}

TEST_CASE("homothety detection") {
    const SupportBody e = SupportBody::ellipsoid(Vec3(1.2, 1, 0.8));
    const HomothetyFit f = fit_homothety(e, e.scaled(1.5).translated(Vec3(0.1, 0.2, 0)));
    CHECK(f.homothetic);
    CHECK(f.scale == doctest::Approx(1.5));
    CHECK((f.translation - Vec3(0.1, 0.2, 0)).norm() <= 1e-10);
    CHECK_FALSE(fit_homothety(SupportBody::ball(1), e).homothetic);
    CHECK(fit_homothety(SupportBody::ball(1), SupportBody::ball(3)).homothetic);
}

TEST_CASE("Urysohn volume inequality by Monte Carlo") {
    for (const Vec3 axes : {Vec3(1, 1, 0.5), Vec3(1.3, 0.9, 0.7)}) {
        const SupportBody e = SupportBody::ellipsoid(axes);
        const VolumeEstimate v = monte_carlo_volume(e, 20000, 4);
        CHECK(v.volume == doctest::Approx(4 * kPi / 3 * axes.prod()).epsilon(4 * v.std_error / v.volume));
        const double bound = 4 * kPi / 3 * std::pow(0.5 * mean_width(e), 3);
        CHECK(v.volume <= bound + 3 * v.std_error);
    }
    const VolumeEstimate vb = monte_carlo_volume(SupportBody::ball(1), 20000, 4);
    CHECK(std::abs(vb.volume - 4 * kPi / 3) <= 4 * vb.std_error);
}

TEST_CASE("body JSON round trip and errors") {
    const nlohmann::json spec = nlohmann::json::parse(R"({"kind":"combination","parts":[
        {"weight":0.5,"body":{"kind":"ball","radius":1}},
        {"weight":0.5,"rotation":[[0,-1,0],[1,0,0],[0,0,1]],"body":{"kind":"ellipsoid","semi_axes":[1.2,1,0.8]}}]})");
    const SupportBody b = body_from_json(spec);
    CHECK(b.analytic());
    const SupportBody b2 = body_from_json(body_to_json(b));
    CHECK(support_distance(b, b2) <= 1e-15);

    const SupportBody s(b.grid_ptr(), b.samples());
    const SupportBody s2 = body_from_json(body_to_json(s));
    CHECK(support_distance(s, s2) == 0.0);

    auto err = [](const char* text) {
        try {
            body_from_json(nlohmann::json::parse(text));
        } catch (const std::invalid_argument& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(err(R"({"kind":"ball"})").find("radius") != std::string::npos);
    CHECK(err(R"({"kind":"ball","radius":-1})").find("radius") != std::string::npos);
    CHECK(err(R"({"kind":"cube"})").find("kind") != std::string::npos);
    CHECK(err(R"({"kind":"ellipsoid","semi_axes":[1,2]})").find("semi_axes") != std::string::npos);
    CHECK(err(R"({"kind":"samples","grid_order":1,"h":[1,2]})").find("'h'") != std::string::npos);
    CHECK(err(R"({"radius":1})").find("kind") != std::string::npos);
}
