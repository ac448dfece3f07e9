#include "doctest.h"

#include "hbm/hessian_algebra.hpp"
#include "hbm/random.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

using namespace hbm;

namespace {

SymMat3 random_sym(SplitMix64& rng, double scale = 1.0) {
    return {scale * rng.normal(), scale * rng.normal(), scale * rng.normal(),
            scale * rng.normal(), scale * rng.normal(), scale * rng.normal()};
}

Vec3 random_vec(SplitMix64& rng) { return {rng.normal(), rng.normal(), rng.normal()}; }

Mat3 random_orthogonal(SplitMix64& rng) {
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = rng.normal();
    Eigen::HouseholderQR<Mat3> qr(m);
    return qr.householderQ();
}

// Characteristic-polynomial coefficients from an independent eigen-solve.
Vec3 sk_from_eigs(const SymMat3& a) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(a.dense());
    const Vec3 l = es.eigenvalues();
    return {l.sum(), l[0] * l[1] + l[0] * l[2] + l[1] * l[2], l.prod()};
}

// Jet of v = T(u) from a jet of u, via the chain rule.
JetPoint transform_jet(const TransformForm& form, double u, const Vec3& du, const Mat3& d2u) {
    JetPoint j;
    const double w = -u;
    double d1 = 0, d2 = 0;  // dv/du, d2v/du2
    switch (form.kind) {
        case TransformForm::Kind::Log:
            d1 = -1.0 / u;
            d2 = 1.0 / (u * u);
            break;
        case TransformForm::Kind::Sqrt:
            d1 = 0.5 / std::sqrt(w);
            d2 = 0.25 * std::pow(w, -1.5);
            break;
        case TransformForm::Kind::Power: {
            const double a = (2.0 - form.p) / 4.0;
            d1 = a * std::pow(w, a - 1);
            d2 = -a * (a - 1) * std::pow(w, a - 2);
            break;
        }
    }
    j.value = form.apply(u);
    j.gradient = d1 * du;
    j.hessian = SymMat3::from_dense(d1 * d2u + d2 * du * du.transpose());
    return j;
}

}  // namespace

TEST_CASE("elementary symmetric functions on fixed matrices") {
    const SymMat3 i = SymMat3::identity();
    CHECK(elementary_symmetric(i, 1) == 3.0);
    CHECK(elementary_symmetric(i, 2) == 3.0);
    CHECK(elementary_symmetric(i, 3) == 1.0);
    const SymMat3 d = SymMat3::diag(1, 2, 3);
    CHECK(elementary_symmetric(d, 1) == 6.0);
    CHECK(elementary_symmetric(d, 2) == 11.0);
    CHECK(elementary_symmetric(d, 3) == 6.0);
    CHECK_THROWS_AS(elementary_symmetric(d, 4), std::invalid_argument);
    CHECK_THROWS_AS(elementary_symmetric(d, 0), std::invalid_argument);
}

TEST_CASE("elementary symmetric functions match eigenvalue oracle") {
    SplitMix64 rng(11);
    for (int t = 0; t < 500; ++t) {
        const SymMat3 a = random_sym(rng);
        const Vec3 ref = sk_from_eigs(a);
        for (int k = 1; k <= 3; ++k)
            CHECK(elementary_symmetric(a, k) == doctest::Approx(ref[k - 1]).epsilon(1e-9).scale(1.0));
        const double tr = a.trace();
        const double tr2 = (a.dense() * a.dense()).trace();
        CHECK(elementary_symmetric(a, 2) == doctest::Approx(0.5 * (tr * tr - tr2)).scale(1.0));
    }
}

TEST_CASE("S_k orthogonal invariance and homogeneity") {
    SplitMix64 rng(12);
    for (int t = 0; t < 500; ++t) {
        const SymMat3 a = random_sym(rng);
        const Mat3 q = random_orthogonal(rng);
        const SymMat3 b = SymMat3::from_dense(q * a.dense() * q.transpose());
        const double lam = rng.uniform(0.1, 5.0);
        for (int k = 1; k <= 3; ++k) {
            const double s = elementary_symmetric(a, k);
            const double scale = std::pow(1.0 + a.max_abs(), k);
            CHECK(std::abs(elementary_symmetric(b, k) - s) <= 1e-10 * scale);
            CHECK(std::abs(elementary_symmetric(lam * a, k) - std::pow(lam, k) * s) <=
                  1e-12 * std::pow(lam, k) * scale);
        }
    }
}

TEST_CASE("gamma cones") {
    const SymMat3 a = SymMat3::diag(1, 1, -0.1);
    CHECK(gamma_member(a, 1));
    CHECK(gamma_member(a, 2));
    CHECK_FALSE(gamma_member(a, 3));
    CHECK(elementary_symmetric(a, 2) == doctest::Approx(0.8));
    SplitMix64 rng(13);
    for (int t = 0; t < 2000; ++t) {
        const SymMat3 m = random_sym(rng) + SymMat3::identity();
        if (gamma_member(m, 3)) CHECK(gamma_member(m, 2));
        if (gamma_member(m, 2)) CHECK(gamma_member(m, 1));
    }
}

TEST_CASE("P matrix") {
    const SymMat3 p = p_matrix(Vec3(1, 0, 0));
    CHECK(p.a11 == 0.0);
    CHECK(p.a22 == 1.0);
    CHECK(p.a33 == 1.0);
    CHECK(p.a12 == 0.0);
    CHECK(p_matrix(Vec3::Zero()).max_abs() == 0.0);
    SplitMix64 rng(14);
    for (int t = 0; t < 200; ++t) {
        const Vec3 g = random_vec(rng);
        const SymMat3 pg = p_matrix(g);
        CHECK((pg.dense() * g).norm() <= 1e-12 * g.squaredNorm() * g.norm() + 1e-300);
        CHECK(pg.trace() == doctest::Approx(2 * g.squaredNorm()));
        const Vec3 ev = eigenvalues(pg);
        CHECK(std::abs(ev[0]) <= 1e-12 * g.squaredNorm());
        CHECK(ev[1] == doctest::Approx(g.squaredNorm()));
        CHECK(ev[2] == doctest::Approx(g.squaredNorm()));
    }
}

TEST_CASE("Newton operator") {
    const SymMat3 n1 = newton_operator(SymMat3::identity());
    CHECK(n1.a11 == 2.0);
    CHECK(n1.a33 == 2.0);
    const SymMat3 n2 = newton_operator(SymMat3::diag(1, 2, 3));
    CHECK(n2.a11 == 5.0);
    CHECK(n2.a22 == 4.0);
    CHECK(n2.a33 == 3.0);
    SplitMix64 rng(15);
    for (int t = 0; t < 500; ++t) {
        const SymMat3 a = random_sym(rng);
        CHECK(0.5 * newton_operator(a).frobenius(a) == doctest::Approx(elementary_symmetric(a, 2)).scale(1.0));
        if (gamma_member(a, 2)) CHECK(is_positive_definite(newton_operator(a)));
    }
}

TEST_CASE("positive definiteness test") {
    CHECK(is_positive_definite(SymMat3::identity()));
    CHECK_FALSE(is_positive_definite(SymMat3::diag(1, 1, 0)));
    CHECK_FALSE(is_positive_definite(SymMat3::diag(1, -1, 1)));
    CHECK_FALSE(is_positive_definite(SymMat3{}));
    CHECK_FALSE(is_positive_definite(SymMat3::diag(1, 1, 1e-14)));
}

TEST_CASE("lmx functions: direct values") {
    const SymMat3 i = SymMat3::identity();
    const LmxValues v = lmx_functions(i, i);
    CHECK(v.f == doctest::Approx(1.0));
    CHECK(v.g == doctest::Approx(1.0 / 3.0));
    for (double lam : {0.5, 2.0, 7.0}) {
        const LmxValues w = lmx_functions(lam * i, i);
        CHECK(w.f == doctest::Approx(lam));
        CHECK(w.g == doctest::Approx(lam / 3.0));
    }
    // Midpoint of I and diag(4,1,1), evaluated term by term.
    const SymMat3 b = SymMat3::diag(4, 1, 1);
    const SymMat3 m = SymMat3::diag(2.5, 1, 1);
    auto f_diag = [](double a1, double a2, double a3) {
        const double s1 = 1 / a1 + 1 / a2 + 1 / a3;
        const double s2 = 1 / (a1 * a2) + 1 / (a1 * a3) + 1 / (a2 * a3);
        return s1 / s2;
    };
    CHECK(lmx_functions(b, i).f == doctest::Approx(f_diag(4, 1, 1)));
    CHECK(lmx_functions(m, i).f == doctest::Approx(f_diag(2.5, 1, 1)));
    CHECK(lmx_functions(m, i).f >= 0.5 * (lmx_functions(i, i).f + lmx_functions(b, i).f));
}

TEST_CASE("lmx functions: errors") {
    CHECK_THROWS_AS(lmx_functions(SymMat3::diag(1, 1, 0), SymMat3::identity()), std::invalid_argument);
    CHECK_THROWS_AS(lmx_functions(SymMat3::identity(), SymMat3{}), std::invalid_argument);
    CHECK_THROWS_AS(lmx_functions(SymMat3::identity(), SymMat3::diag(1, -1, 1)), std::invalid_argument);
}

TEST_CASE("concavity probe") {
    const ConcavityReport rf = concavity_probe(LmxFunction::F, SymMat3::identity(), 2000, 1);
    CHECK(rf.failures == 0);
    CHECK(rf.worst_condition <= 1e4);
    const ConcavityReport rg = concavity_probe(LmxFunction::G, SymMat3::diag(1, 1, 0), 2000, 2);
    CHECK(rg.failures == 0);
    CHECK(rg.p_condition == doctest::Approx(1.0));
    SplitMix64 rng(4);
    for (int k = 0; k < 5; ++k) {
        const SymMat3 pg = p_matrix(random_vec(rng));
        CHECK(concavity_probe(LmxFunction::F, pg, 1000, 10 + k).failures == 0);
        CHECK(concavity_probe(LmxFunction::G, pg, 1000, 20 + k).failures == 0);
    }
    CHECK_THROWS_AS(concavity_probe(LmxFunction::F, SymMat3::identity(), 0, 1), std::invalid_argument);
    const SymMat3 a = SymMat3::diag(2, 3, 5);
    CHECK(concavity_margin(LmxFunction::F, SymMat3::identity(), a, a) == 0.0);
    CHECK(concavity_margin(LmxFunction::G, SymMat3::identity(), a, a) == 0.0);
}

TEST_CASE("f is not concave for a rank-one P") {
    // P = e1 e1^T, A = diag(a,1,1): f = 1/(a+2), strictly convex in a.
    const SymMat3 p = SymMat3::diag(1, 0, 0);
    CHECK(lmx_functions(SymMat3::diag(1, 1, 1), p).f == doctest::Approx(1.0 / 3.0));
    CHECK(lmx_functions(SymMat3::diag(3, 1, 1), p).f == doctest::Approx(1.0 / 5.0));
    CHECK(concavity_margin(LmxFunction::F, p, SymMat3::diag(1, 1, 1), SymMat3::diag(3, 1, 1)) == doctest::Approx(-0.05));
    CHECK(concavity_probe(LmxFunction::F, p, 1000, 3).failures > 0);
    // g = a11 is linear here, so g stays concave.
    CHECK(concavity_probe(LmxFunction::G, p, 1000, 3).failures == 0);
}

TEST_CASE("concavity probe is deterministic per seed") {
    const ConcavityReport a = concavity_probe(LmxFunction::F, SymMat3::identity(), 100, 42);
    const ConcavityReport b = concavity_probe(LmxFunction::F, SymMat3::identity(), 100, 42);
    CHECK(a.worst_margin == b.worst_margin);
    CHECK(a.worst_condition == b.worst_condition);
}

TEST_CASE("sqrt residual vanishes on the exact ball jet") {
    const double c = 1.0 / (2.0 * std::sqrt(3.0));
    for (double r : {0.1, 0.5, 0.9}) {
        const Vec3 x = r * Vec3(1, 2, -1).normalized();
        const double u = c * (x.squaredNorm() - 1.0);
        const JetPoint j = transform_jet(TransformForm::sqrt(), u, 2 * c * x, 2 * c * Mat3::Identity());
        CHECK(std::abs(residual(TransformForm::sqrt(), j)) <= 1e-10);
    }
}

TEST_CASE("transformed residuals equal the scaled original residual") {
    // With u = -(-v)^b, b = 4/(2-p): residual_power(v) = (S2(D2u) - (-u)^p) / (b^2 (-v)^(2b-4)).
    SplitMix64 rng(16);
    for (int t = 0; t < 200; ++t) {
        const double u = -rng.uniform(0.05, 2.0);
        const Vec3 du = random_vec(rng);
        const Mat3 d2u = random_sym(rng, 0.5).dense() + 2 * Mat3::Identity();
        const double s2 = elementary_symmetric(SymMat3::from_dense(d2u), 2);
        for (double p : {0.05, 0.5, 1.0, 1.5}) {
            const TransformForm f = TransformForm::power(p);
            const JetPoint j = transform_jet(f, u, du, d2u);
            const double b = 4.0 / (2.0 - p);
            const double expect = (s2 - std::pow(-u, p)) / (b * b * std::pow(-j.value, 2 * b - 4));
            CHECK(residual(f, j) == doctest::Approx(expect).epsilon(1e-9).scale(1.0));
        }
        const JetPoint js = transform_jet(TransformForm::sqrt(), u, du, d2u);
        CHECK(residual(TransformForm::sqrt(), js) == doctest::Approx((s2 - 1.0) / 4.0).epsilon(1e-9).scale(1.0));
        const double lam = rng.uniform(1, 10);
        const JetPoint jl = transform_jet(TransformForm::log(), u, du, d2u);
        CHECK(residual(TransformForm::log(), jl, lam) ==
              doctest::Approx((s2 - lam * u * u) / (u * u)).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("residual edge cases") {
    JetPoint zero;
    CHECK(residual(TransformForm::sqrt(), zero) == -0.25);
    CHECK_THROWS_AS(residual(TransformForm::power(2.0), zero), std::invalid_argument);
    CHECK_THROWS_AS(residual(TransformForm::power(0.0), zero), std::invalid_argument);
    CHECK(residual(TransformForm::power(1.0), zero) == doctest::Approx(-1.0 / 16.0));
}
