#include "hbm/hessian_algebra.hpp"

#include "hbm/random.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hbm {

SymMat3 SymMat3::from_dense(const Mat3& m) {
    return {m(0, 0),
            m(1, 1),
            m(2, 2),
            0.5 * (m(0, 1) + m(1, 0)),
            0.5 * (m(0, 2) + m(2, 0)),
            0.5 * (m(1, 2) + m(2, 1))};
}

SymMat3 SymMat3::outer(const Vec3& g) {
    return {g[0] * g[0], g[1] * g[1], g[2] * g[2], g[0] * g[1], g[0] * g[2], g[1] * g[2]};
}

Mat3 SymMat3::dense() const {
    Mat3 m;
    m << a11, a12, a13, a12, a22, a23, a13, a23, a33;
    return m;
}

double SymMat3::operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (i == j) return i == 0 ? a11 : (i == 1 ? a22 : a33);
    if (i == 0) return j == 1 ? a12 : a13;
    return a23;
}

double& SymMat3::at(int i, int j) {
    if (i > j) std::swap(i, j);
    if (i == j) return i == 0 ? a11 : (i == 1 ? a22 : a33);
    if (i == 0) return j == 1 ? a12 : a13;
    return a23;
}

double SymMat3::frobenius(const SymMat3& o) const {
    return a11 * o.a11 + a22 * o.a22 + a33 * o.a33 +
           2.0 * (a12 * o.a12 + a13 * o.a13 + a23 * o.a23);
}

double SymMat3::max_abs() const {
    return std::max({std::abs(a11), std::abs(a22), std::abs(a33), std::abs(a12),
                     std::abs(a13), std::abs(a23)});
}

SymMat3& SymMat3::operator+=(const SymMat3& o) {
    a11 += o.a11; a22 += o.a22; a33 += o.a33;
    a12 += o.a12; a13 += o.a13; a23 += o.a23;
    return *this;
}

SymMat3& SymMat3::operator-=(const SymMat3& o) {
    a11 -= o.a11; a22 -= o.a22; a33 -= o.a33;
    a12 -= o.a12; a13 -= o.a13; a23 -= o.a23;
    return *this;
}

SymMat3& SymMat3::operator*=(double s) {
    a11 *= s; a22 *= s; a33 *= s;
    a12 *= s; a13 *= s; a23 *= s;
    return *this;
}

SymMat3 operator+(SymMat3 a, const SymMat3& b) { return a += b; }
SymMat3 operator-(SymMat3 a, const SymMat3& b) { return a -= b; }
SymMat3 operator*(double s, SymMat3 a) { return a *= s; }
SymMat3 operator*(SymMat3 a, double s) { return a *= s; }

double elementary_symmetric(const SymMat3& a, int k) {
    switch (k) {
        case 1:
            return a.trace();
        case 2:
            return (a.a11 * a.a22 - a.a12 * a.a12) + (a.a11 * a.a33 - a.a13 * a.a13) +
                   (a.a22 * a.a33 - a.a23 * a.a23);
        case 3:
            return a.a11 * (a.a22 * a.a33 - a.a23 * a.a23) -
                   a.a12 * (a.a12 * a.a33 - a.a23 * a.a13) +
                   a.a13 * (a.a12 * a.a23 - a.a22 * a.a13);
        default:
            throw std::invalid_argument("elementary_symmetric: k must be 1, 2 or 3");
    }
}

bool gamma_member(const SymMat3& a, int k) {
    if (k < 1 || k > 3) throw std::invalid_argument("gamma_member: k must be 1, 2 or 3");
    for (int i = 1; i <= k; ++i)
        if (!(elementary_symmetric(a, i) > 0.0)) return false;
    return true;
}

SymMat3 p_matrix(const Vec3& g) {
    const double n2 = g.squaredNorm();
    SymMat3 p = SymMat3::diag(n2, n2, n2);
    p -= SymMat3::outer(g);
    return p;
}

SymMat3 newton_operator(const SymMat3& a) {
    const double s1 = a.trace();
    SymMat3 n = SymMat3::diag(s1, s1, s1);
    n -= a;
    return n;
}

bool is_positive_definite(const SymMat3& a, double rel_tol) {
    const double scale = a.max_abs();
    if (scale == 0.0) return false;
    const double piv_tol = rel_tol * scale;
    // LDL^T without pivoting; every pivot must clear the tolerance.
    const double d1 = a.a11;
    if (!(d1 > piv_tol)) return false;
    const double l21 = a.a12 / d1;
    const double l31 = a.a13 / d1;
    const double d2 = a.a22 - l21 * a.a12;
    if (!(d2 > piv_tol)) return false;
    const double l32 = (a.a23 - l31 * a.a12) / d2;
    const double d3 = a.a33 - l31 * a.a13 - l32 * l32 * d2;
    return d3 > piv_tol;
}

Vec3 eigenvalues(const SymMat3& a) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(a.dense(), Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

double min_eigenvalue(const SymMat3& a) { return eigenvalues(a)[0]; }

SymMat3 inverse(const SymMat3& a) {
    const double det = elementary_symmetric(a, 3);
    if (det == 0.0 || !std::isfinite(det)) throw std::invalid_argument("inverse: singular matrix");
    SymMat3 c;
    c.a11 = a.a22 * a.a33 - a.a23 * a.a23;
    c.a22 = a.a11 * a.a33 - a.a13 * a.a13;
    c.a33 = a.a11 * a.a22 - a.a12 * a.a12;
    c.a12 = a.a13 * a.a23 - a.a12 * a.a33;
    c.a13 = a.a12 * a.a23 - a.a13 * a.a22;
    c.a23 = a.a12 * a.a13 - a.a11 * a.a23;
    return (1.0 / det) * c;
}

LmxValues lmx_functions(const SymMat3& a, const SymMat3& p) {
    if (!is_positive_definite(a)) throw std::invalid_argument("lmx_functions: A must be positive definite");
    if (p.max_abs() == 0.0) throw std::invalid_argument("lmx_functions: P must be nonzero");
    if (min_eigenvalue(p) < -1e-12 * p.max_abs())
        throw std::invalid_argument("lmx_functions: P must be positive semidefinite");
    const SymMat3 inv = inverse(a);
    // S1(P A^{-1}) = tr(P A^{-1}) = <P, A^{-1}>_F for symmetric P and A^{-1}.
    const double s1 = p.frobenius(inv);
    const double s2 = elementary_symmetric(inv, 2);
    return {s1 / s2, 1.0 / s1};
}

namespace {

double lmx_value(LmxFunction which, const SymMat3& a, const SymMat3& p) {
    const LmxValues v = lmx_functions(a, p);
    return which == LmxFunction::F ? v.f : v.g;
}

SymMat3 random_pd(SplitMix64& rng, double max_condition, double* condition) {
    for (;;) {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r(i, j) = rng.normal();
        const SymMat3 s = SymMat3::from_dense(r.transpose() * r) + 1e-6 * SymMat3::identity();
        const Vec3 ev = eigenvalues(s);
        const double cond = ev[2] / ev[0];
        if (ev[0] > 0 && cond <= max_condition) {
            if (condition) *condition = cond;
            return s;
        }
    }
}

}  // namespace

double concavity_margin(LmxFunction which, const SymMat3& p, const SymMat3& a, const SymMat3& b) {
    SymMat3 mid = a + b;
    mid *= 0.5;
    const double fa = lmx_value(which, a, p);
    const double fb = lmx_value(which, b, p);
    const double fm = lmx_value(which, mid, p);
    const double scale = std::max({std::abs(fa), std::abs(fb), std::abs(fm)});
    const double margin = fm - 0.5 * (fa + fb);
    return scale > 0 ? margin / scale : margin;
}

ConcavityReport concavity_probe(LmxFunction which, const SymMat3& p, int trials,
                                std::uint64_t seed, double rel_tol) {
    if (trials < 1) throw std::invalid_argument("concavity_probe: trials must be >= 1");
    ConcavityReport rep;
    rep.which = which;
    rep.trials = trials;
    rep.tolerance = rel_tol;
    rep.worst_margin = std::numeric_limits<double>::infinity();
    const Vec3 pev = eigenvalues(p);
    const double pos_floor = 1e-12 * std::max(1.0, pev[2]);
    double pmin = pev[2];
    for (int i = 0; i < 3; ++i)
        if (pev[i] > pos_floor) pmin = std::min(pmin, pev[i]);
    rep.p_condition = pev[2] / pmin;

    for (int t = 0; t < trials; ++t) {
        SplitMix64 rng(SplitMix64::derive(seed, static_cast<std::uint64_t>(t)));
        double ca = 0, cb = 0;
        const SymMat3 a = random_pd(rng, 1e4, &ca);
        const SymMat3 b = random_pd(rng, 1e4, &cb);
        rep.worst_condition = std::max({rep.worst_condition, ca, cb});
        const double m = concavity_margin(which, p, a, b);
        rep.worst_margin = std::min(rep.worst_margin, m);
        if (m < -rel_tol) ++rep.failures;
    }
    return rep;
}

double TransformForm::apply(double u) const {
    switch (kind) {
        case Kind::Log: return -std::log(-u);
        case Kind::Sqrt: return -std::sqrt(-u);
        case Kind::Power: return -std::pow(-u, (2.0 - p) / 4.0);
    }
    return 0;
}

std::string TransformForm::name() const {
    switch (kind) {
        case Kind::Log: return "log";
        case Kind::Sqrt: return "sqrt";
        case Kind::Power: return "power";
    }
    return "?";
}

double residual(const TransformForm& form, const JetPoint& jet, double rhs_const) {
    const SymMat3& h = jet.hessian;
    const double s2 = elementary_symmetric(h, 2);
    // S1(P(g) H) = tr(P H) = <P, H>_F.
    const double s1ph = p_matrix(jet.gradient).frobenius(h);
    const double v = jet.value;
    switch (form.kind) {
        case TransformForm::Kind::Log:
            return s2 - s1ph - rhs_const;
        case TransformForm::Kind::Sqrt:
            return v * v * s2 + v * s1ph - 0.25;
        case TransformForm::Kind::Power: {
            const double p = form.p;
            if (!(p > 0.0 && p < 2.0)) throw std::invalid_argument("residual: power form needs p in (0,2)");
            return v * v * s2 + (p + 2.0) / (2.0 - p) * v * s1ph - (p - 2.0) * (p - 2.0) / 16.0;
        }
    }
    return 0;
}

}  // namespace hbm
