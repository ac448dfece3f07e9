#pragma once

// Elementary symmetric functions of symmetric 3x3 matrices, the Gamma_k cones,
// the gradient projector P(g), and residuals of the transformed Hessian
// equations.

#include <Eigen/Dense>

#include <cstdint>
#include <string>

namespace hbm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Symmetric 3x3 matrix stored by its six independent entries.
struct SymMat3 {
    double a11 = 0, a22 = 0, a33 = 0, a12 = 0, a13 = 0, a23 = 0;

    static SymMat3 identity() { return diag(1, 1, 1); }
    static SymMat3 diag(double d1, double d2, double d3) { return {d1, d2, d3, 0, 0, 0}; }
    /// Symmetric part of a dense matrix.
    static SymMat3 from_dense(const Mat3& m);
    static SymMat3 outer(const Vec3& g);

    Mat3 dense() const;
    double trace() const { return a11 + a22 + a33; }
    /// Entry (i,j), zero-based, symmetric.
    double operator()(int i, int j) const;
    double& at(int i, int j);
    /// Frobenius inner product <A,B> = sum_ij a_ij b_ij.
    double frobenius(const SymMat3& other) const;
    double max_abs() const;

    SymMat3& operator+=(const SymMat3& o);
    SymMat3& operator-=(const SymMat3& o);
    SymMat3& operator*=(double s);
};

SymMat3 operator+(SymMat3 a, const SymMat3& b);
SymMat3 operator-(SymMat3 a, const SymMat3& b);
SymMat3 operator*(double s, SymMat3 a);
SymMat3 operator*(SymMat3 a, double s);

/// S_k(A) for k in {1,2,3}, computed from principal minors.
double elementary_symmetric(const SymMat3& a, int k);

/// A in Gamma_k: S_i(A) > 0 for i = 1..k.
bool gamma_member(const SymMat3& a, int k);

/// P(g) = |g|^2 I - g g^T.
SymMat3 p_matrix(const Vec3& g);

/// Linearization of S_2: S_1(A) I - A.
SymMat3 newton_operator(const SymMat3& a);

/// Cholesky-style positive-definiteness test with pivot tolerance rel_tol*|A|.
bool is_positive_definite(const SymMat3& a, double rel_tol = 1e-12);

/// Ascending eigenvalues (diagnostics only).
Vec3 eigenvalues(const SymMat3& a);
double min_eigenvalue(const SymMat3& a);

SymMat3 inverse(const SymMat3& a);

/// S_1(P A^{-1}) / S_2(A^{-1}) and S_1(P A^{-1})^{-1} for positive definite A.
/// g is concave for every nonzero P >= 0. f is concave for P = I and for
/// P = P(g), but not for arbitrary P >= 0 (P = e1 e1^T gives f = 1/(a+2) along
/// A = diag(a,1,1)).
struct LmxValues {
    double f = 0;
    double g = 0;
};

/// Throws std::invalid_argument when A is not positive definite or P is zero or
/// indefinite.
LmxValues lmx_functions(const SymMat3& a, const SymMat3& p);

enum class LmxFunction { F, G };

struct ConcavityReport {
    LmxFunction which = LmxFunction::F;
    int trials = 0;
    int failures = 0;
    double worst_margin = 0;       ///< min over trials of F(mid) - (F(A)+F(B))/2, scaled
    double worst_condition = 0;    ///< largest sampled condition number
    double p_condition = 0;        ///< lambda_max/lambda_min of P on its range
    double tolerance = 1e-9;
};

/// Midpoint-concavity test on random positive definite pairs. Sample i draws
/// from a generator seeded by the i-th splitmix output of `seed`.
ConcavityReport concavity_probe(LmxFunction which, const SymMat3& p, int trials,
                                std::uint64_t seed, double rel_tol = 1e-9);

/// One midpoint comparison, relative to max(|F(A)|,|F(B)|,|F(mid)|).
double concavity_margin(LmxFunction which, const SymMat3& p, const SymMat3& a,
                        const SymMat3& b);

/// Value, gradient and Hessian of a function at one point.
struct JetPoint {
    double value = 0;
    Vec3 gradient = Vec3::Zero();
    SymMat3 hessian;
};

/// Which change of unknown v(u) is applied to the Dirichlet problem.
struct TransformForm {
    enum class Kind { Log, Sqrt, Power };
    Kind kind = Kind::Sqrt;
    double p = 0;  ///< exponent, used only by Power

    static TransformForm log() { return {Kind::Log, 0}; }
    static TransformForm sqrt() { return {Kind::Sqrt, 0}; }
    static TransformForm power(double p) { return {Kind::Power, p}; }

    /// v as a function of u < 0.
    double apply(double u) const;
    std::string name() const;
};

/// LHS - RHS of the transformed equation at a jet of v:
///   log:   S2(H) - S1(P(g)H) - rhs_const
///   sqrt:  v^2 S2(H) + v S1(P(g)H) - 1/4
///   power: v^2 S2(H) + (p+2)/(2-p) v S1(P(g)H) - (p-2)^2/16
/// Power requires p in (0,2).
double residual(const TransformForm& form, const JetPoint& jet, double rhs_const = 0);

}  // namespace hbm
