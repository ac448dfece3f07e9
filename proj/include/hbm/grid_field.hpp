#pragma once

// Uniform Cartesian grids over a convex body with a masked Dirichlet boundary,
// Shortley-Weller finite-difference jets, cut-cell quadrature, and fields.

#include "hbm/convex_body.hpp"
#include "hbm/hessian_algebra.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace hbm {

enum class NodeKind : std::uint8_t { Interior, BoundaryAdjacent, Exterior };

/// Linear finite-difference operator at one node: value-weighted sums over a
/// short list of in-domain nodes. Component order: H11 H22 H33 H12 H13 H23 g1 g2 g3.
struct NodeStencil {
    std::vector<std::size_t> nodes;
    std::vector<std::array<double, 9>> coef;
};

class Grid3 {
public:
    /// Directions in the fraction table: -x,+x,-y,+y,-z,+z.
    static constexpr int kDirs = 6;

    double h() const { return h_; }
    const Vec3& origin() const { return origin_; }
    const std::array<int, 3>& dims() const { return dims_; }
    int resolution() const { return resolution_; }
    std::size_t size() const { return kind_.size(); }
    const SupportBody& body() const { return *body_; }

    std::size_t index(int i, int j, int k) const {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(dims_[0]) *
                                                 (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims_[1]) * k);
    }
    std::array<int, 3> ijk(std::size_t idx) const;
    Vec3 position(std::size_t idx) const;
    Vec3 position(int i, int j, int k) const { return origin_ + h_ * Vec3(i, j, k); }

    NodeKind kind(std::size_t idx) const { return kind_[idx]; }
    bool in_domain(std::size_t idx) const { return kind_[idx] != NodeKind::Exterior; }
    /// Signed distance to the boundary (negative inside).
    double sdf(std::size_t idx) const { return sdf_[idx]; }
    /// Fraction of h to the boundary along direction d (1 when the neighbour is inside).
    double fraction(std::size_t idx, int d) const { return fractions_[idx][d]; }
    /// Neighbour in direction d, or -1 if outside the box.
    long neighbor(std::size_t idx, int d) const;

    /// Cut-cell quadrature weight (volume of the node's cell inside the body).
    double weight(std::size_t idx) const { return weights_[idx]; }
    const std::vector<double>& weights() const { return weights_; }

    /// Dense numbering of in-domain nodes, and its inverse (-1 for exterior).
    const std::vector<std::size_t>& domain_nodes() const { return domain_; }
    long unknown(std::size_t idx) const { return unknown_[idx]; }

    /// Shortley-Weller stencil with zero wall data (valid for in-domain nodes).
    const NodeStencil& stencil(std::size_t idx) const;
    /// In-domain nodes whose cross derivatives fell back to zero.
    std::size_t cross_fallbacks() const { return cross_fallbacks_; }

    std::size_t count(NodeKind k) const;

    friend std::shared_ptr<const Grid3> build_grid(const SupportBody& body, int resolution);

private:
    Grid3() = default;
    double h_ = 0;
    Vec3 origin_ = Vec3::Zero();
    std::array<int, 3> dims_{0, 0, 0};
    int resolution_ = 0;
    std::shared_ptr<const SupportBody> body_;
    std::vector<NodeKind> kind_;
    std::vector<double> sdf_;
    std::vector<Vec3> normal_;
    std::vector<std::array<double, kDirs>> fractions_;
    std::vector<double> weights_;
    std::vector<std::size_t> domain_;
    std::vector<long> unknown_;
    std::vector<NodeStencil> stencils_;
    std::size_t cross_fallbacks_ = 0;

    void build_stencils();
    void build_weights();
};

using GridPtr = std::shared_ptr<const Grid3>;

/// Bounding box from support values plus a two-cell margin; the longest axis
/// gets `resolution` nodes across the body. A node is in the domain when its
/// signed distance is below -1e-3 h.
GridPtr build_grid(const SupportBody& body, int resolution);

/// Large positive sentinel for convexification inputs.
constexpr double kBig = 1e30;

struct Field {
    GridPtr grid;
    std::vector<double> values;

    Field() = default;
    Field(GridPtr g, double fill = 0.0);
    Field(GridPtr g, std::vector<double> v);

    double operator[](std::size_t i) const { return values[i]; }
    double& operator[](std::size_t i) { return values[i]; }
    std::size_t size() const { return values.size(); }

    /// Copy with every exterior node set to `value` (0 for integration, kBig
    /// for convexification).
    Field with_exterior(double value) const;
};

/// Field sampled from f(x) on in-domain nodes, `exterior` elsewhere.
template <class F>
Field sample_field(const GridPtr& g, F&& f, double exterior = 0.0) {
    Field out(g, exterior);
    for (std::size_t idx : g->domain_nodes()) out.values[idx] = f(g->position(idx));
    return out;
}

/// Value, gradient and Hessian from the node's stencil (wall data 0).
JetPoint jet_at(const Field& field, std::size_t node);

/// Hessian from centred second differences; requires all 18 face and edge
/// neighbours in the domain (returns false otherwise).
bool centered_hessian(const Field& field, std::size_t node, SymMat3& out);

/// (sum w |v|^p)^(1/p) over in-domain nodes; p = infinity gives max |v|.
double lp_norm(const Field& field, double p);
/// sum w v over in-domain nodes.
double integrate(const Field& field);

/// Smallest Hessian eigenvalue per node from centred stencils; NaN where the
/// centred stencil is unavailable and at exterior nodes.
Field min_hessian_eig_field(const Field& field);

/// Trilinear interpolation; false when a corner lies outside the domain.
bool trilinear(const Field& field, const Vec3& x, double& out);

/// Snapshot: body spec, resolution, node values (exterior as null).
nlohmann::json field_to_json(const Field& field);
Field field_from_json(const nlohmann::json& j);

}  // namespace hbm
