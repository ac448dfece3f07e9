#pragma once

// Discrete Legendre transforms on product grids, Minkowski combination of
// functions (infimal convolution through conjugate addition), convex
// envelopes and contact sets.

#include "hbm/grid_field.hpp"

#include <vector>

namespace hbm {

/// Symmetric gradient-space box [-half, half] with n nodes per axis (n odd,
/// so p = 0 is a node).
struct DualGrid {
    Vec3 half = Vec3::Ones();
    int n = 65;

    double step(int axis) const { return 2 * half[axis] / (n - 1); }
    double coord(int axis, int i) const { return -half[axis] + step(axis) * i; }
    Vec3 point(int i, int j, int k) const { return {coord(0, i), coord(1, j), coord(2, k)}; }
    std::size_t size() const { return static_cast<std::size_t>(n) * n * n; }
    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(n) * (j + static_cast<std::size_t>(n) * k);
    }
    void validate() const;
};

/// Componentwise |gradient| bound over interior nodes (stencil gradients),
/// optionally only those at depth >= min_depth * h.
Vec3 gradient_bound(const Field& f, double min_depth = 0);

/// Box covering `bound` with the given margin factor.
DualGrid covering_dual(const Vec3& bound, int n, double margin = 1.25);

struct ConjugateField {
    DualGrid dual;
    std::vector<double> values;

    /// Trilinear value at p, clamped to the box.
    double at(const Vec3& p) const;
};

/// f*(p) = max over in-domain nodes of <p,x> - f(x), exact on the dual nodes.
/// The box is doubled (at most `max_expand` times) until it covers the
/// interior gradients of f; a box that still falls short throws.
ConjugateField legendre(const Field& f, DualGrid dual, int max_expand = 4);

/// g*(x) = max over dual nodes of <p,x> - g(p) at every node of `target`;
/// exterior nodes carry kBig.
Field inverse_legendre(const ConjugateField& g, const GridPtr& target);

/// x -> f(rho^T x) on rho * Omega, weighted by t.
struct FieldPart {
    double t = 1;
    Field field;
    Mat3 rotation = Mat3::Identity();
};

struct CombineOptions {
    int dual_n = 0;          ///< 0: 2 * max resolution + 1
    double margin = 1.25;
    bool warn_nonconvex = true;
    /// Size the dual box from gradients at depth >= gradient_depth * h only.
    /// Values at deeper target nodes are unaffected as long as their
    /// subgradients stay inside the box; shallower nodes come out lower.
    double gradient_depth = 0;
};

/// inf { sum t_i f_i(x_i) : x = sum t_i x_i } on the grid of the combined body
/// (resolution of the first part) or on `target`. Computed as the inverse
/// transform of sum t_i f_i*, so non-convex inputs are replaced by their
/// envelopes (a warning is logged). Zero-weight parts are dropped; a single
/// unrotated part on its own grid is returned unchanged.
Field minkowski_combine_functions(const std::vector<FieldPart>& parts, const CombineOptions& opt = {});
Field minkowski_combine_functions(const std::vector<FieldPart>& parts, const GridPtr& target,
                                  const CombineOptions& opt = {});

/// Grid for sum t_i rho_i Omega_i.
GridPtr combined_grid(const std::vector<FieldPart>& parts, int resolution);

/// Biconjugate f** on the field's own grid. Satisfies f** <= f with equality
/// at the minimizing nodes.
Field convex_envelope(const Field& f, int dual_n = 0);
Field convex_envelope(const Field& f, const DualGrid& dual);

/// h^2/8 * sum_i |H_ii| at one node: the local trilinear interpolation error
/// scale. The field-wide unit is its maximum over interior nodes.
double interpolation_unit(const Field& f, std::size_t node);
double interpolation_unit(const Field& f);

/// Nodes with |envelope - field| <= tol (tol < 0: 2 local interpolation units).
std::vector<bool> contact_set(const Field& field, const Field& envelope, double tol = -1);

struct BruteForceResult {
    Field value;                 ///< kBig where no decomposition exists
    std::vector<Vec3> argmin_x0; ///< minimizing first-part point per node
};

/// Direct discrete infimum for at most two nonzero parts on grids of at most
/// 17 nodes per axis: min over nodes x0 of t0 f0(x0) + t1 f1((x - t0 x0)/t1),
/// with f1 read by trilinear interpolation.
BruteForceResult brute_force_infconv(const std::vector<FieldPart>& parts, int resolution);

}  // namespace hbm
