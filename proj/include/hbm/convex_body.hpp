#pragma once

// Convex bodies in R^3 represented by support-function samples on an
// icosahedral sphere grid, optionally backed by an analytic descriptor
// (ball, ellipsoid, or a Minkowski combination tree of those).

#include "hbm/hessian_algebra.hpp"
#include "hbm/random.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace hbm {

/// Vertices of a geodesic icosphere with spherical-area (Voronoi-like) weights.
/// Level L has 10*4^L + 2 nodes; the construction is invariant under the full
/// icosahedral group, so the node set is antipodally symmetric.
class SphereGrid {
public:
    static constexpr int kDefaultLevel = 4;

    static std::shared_ptr<const SphereGrid> icosahedral(int level = kDefaultLevel);

    int level() const { return level_; }
    std::size_t size() const { return directions_.size(); }
    const std::vector<Vec3>& directions() const { return directions_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<std::array<int, 3>>& triangles() const { return triangles_; }
    const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }
    int antipode(std::size_t i) const { return antipodes_[i]; }
    bool compatible(const SphereGrid& other) const {
        return this == &other || (level_ == other.level_ && size() == other.size());
    }

    /// Triangle containing the ray through `dir` and planar barycentric
    /// coordinates of its intersection with that (flat) triangle.
    struct Location {
        int triangle = -1;
        Vec3 bary = Vec3::Zero();
    };
    Location locate(const Vec3& dir) const;
    int nearest(const Vec3& dir) const;

private:
    SphereGrid() = default;
    int level_ = 0;
    std::vector<Vec3> directions_;
    std::vector<double> weights_;
    std::vector<std::array<int, 3>> triangles_;
    std::vector<std::vector<int>> neighbors_;
    std::vector<std::vector<int>> vertex_triangles_;
    std::vector<int> antipodes_;
};

struct BodyDescriptor;
using DescriptorPtr = std::shared_ptr<const BodyDescriptor>;

struct BallShape {
    double radius = 1;
    Vec3 center = Vec3::Zero();
};

/// Axis-aligned ellipsoid; rotated copies are combination nodes.
struct EllipsoidShape {
    Vec3 semi_axes = Vec3::Ones();
    Vec3 center = Vec3::Zero();
};

struct CombinationPart {
    double weight = 1;
    Mat3 rotation = Mat3::Identity();
    DescriptorPtr body;
};

/// h(theta) = sum_i w_i h_i(rho_i^T theta) + <offset, theta>.
struct CombinationShape {
    std::vector<CombinationPart> parts;
    Vec3 offset = Vec3::Zero();
};

struct BodyDescriptor {
    std::variant<BallShape, EllipsoidShape, CombinationShape> shape;
};

/// Support function of a descriptor and its first two derivatives, all for the
/// 1-homogeneous extension to R^3 \ {0}.
double descriptor_support(const BodyDescriptor& d, const Vec3& dir);
Vec3 descriptor_gradient(const BodyDescriptor& d, const Vec3& dir);
Mat3 descriptor_hessian(const BodyDescriptor& d, const Vec3& dir);

class SupportBody {
public:
    SupportBody(std::shared_ptr<const SphereGrid> grid, std::vector<double> h,
                DescriptorPtr descriptor = nullptr);

    static SupportBody from_descriptor(DescriptorPtr d,
                                       std::shared_ptr<const SphereGrid> grid = SphereGrid::icosahedral());
    static SupportBody ball(double radius, const Vec3& center = Vec3::Zero(),
                            std::shared_ptr<const SphereGrid> grid = SphereGrid::icosahedral());
    static SupportBody ellipsoid(const Vec3& semi_axes, const Vec3& center = Vec3::Zero(),
                                 std::shared_ptr<const SphereGrid> grid = SphereGrid::icosahedral());

    const SphereGrid& grid() const { return *grid_; }
    const std::shared_ptr<const SphereGrid>& grid_ptr() const { return grid_; }
    const std::vector<double>& samples() const { return h_; }
    const DescriptorPtr& descriptor() const { return descriptor_; }
    bool analytic() const { return descriptor_ != nullptr; }

    /// Copies with h + <c,theta>, lambda*h, and h(rho^T theta).
    SupportBody translated(const Vec3& c) const;
    SupportBody scaled(double lambda) const;
    SupportBody rotated(const Mat3& rho) const;
    /// Minkowski addition of eps*B_1 (h + eps).
    SupportBody smoothed(double eps) const;

private:
    std::shared_ptr<const SphereGrid> grid_;
    std::vector<double> h_;
    DescriptorPtr descriptor_;
};

/// h(direction); exact for analytic bodies, otherwise barycentric
/// interpolation of the 1-homogeneous extension on the icosphere.
double support_eval(const SupportBody& body, const Vec3& direction);

/// <x,theta> <= h(theta) for every grid direction (outer polyhedral test).
bool contains(const SupportBody& body, const Vec3& point);

/// max_theta <x,theta> - h(theta): the signed distance to the boundary of a
/// convex body. The grid maximum is refined by ascent on the sphere when an
/// analytic descriptor is present. `normal` is the maximizing direction.
struct SignedDistance {
    double value = 0;
    Vec3 normal = Vec3::UnitX();
};
SignedDistance signed_distance(const SupportBody& body, const Vec3& x);
/// Ascent only, warm-started from `start` (analytic bodies); falls back to the
/// full grid scan for sampled bodies.
SignedDistance signed_distance_from(const SupportBody& body, const Vec3& x, const Vec3& start);

struct WeightedPart {
    double weight = 1;
    Mat3 rotation = Mat3::Identity();
    SupportBody body;
};

/// sum_i w_i rho_i B_i. Grids must match and at least one weight be positive.
SupportBody combine(const std::vector<WeightedPart>& parts);

double mean_width(const SupportBody& body);
Vec3 steiner_point(const SupportBody& body);

/// Principal radii of curvature (ascending) at grid node i: eigenvalues of the
/// spherical Hessian of h plus h I.
std::array<double, 2> principal_radii(const SupportBody& body, std::size_t node);

struct SurfaceArea {
    double area = 0;
    double min_radius = 0;  ///< smallest principal radius over the grid
    bool ok = true;         ///< false when some radius is not positive
    std::string message;
};
/// Integral over the sphere of r1*r2. `smoothing` adds eps*B_1 first.
SurfaceArea surface_area(const SupportBody& body, double smoothing = 0);

/// Sampled curvature-positivity proxy: all principal radii positive and finite.
bool curvature_proxy_ok(const SupportBody& body);

struct ReferenceBalls {
    SupportBody sharp;  ///< same mean width
    SupportBody star;   ///< same surface area
    double sharp_radius = 0;
    double star_radius = 0;
};
ReferenceBalls reference_balls(const SupportBody& body);

struct RotationMeans {
    std::vector<SupportBody> bodies;   ///< Omega_0 .. Omega_Nmax
    std::vector<Mat3> rotations;       ///< rho_0 .. rho_Nmax
    std::vector<double> hausdorff;     ///< sup_theta |h_N - b/2|
    double mean_width = 0;
    Vec3 steiner_shift = Vec3::Zero(); ///< translation applied to centre the body
};
RotationMeans rotation_mean_sequence(const SupportBody& body, int n_max, std::uint64_t seed);

/// Uniform rotation from a normalized Gaussian quaternion.
Mat3 random_rotation(SplitMix64& rng);

/// sup over grid directions of |h_a - h_b|.
double support_distance(const SupportBody& a, const SupportBody& b);

struct AxisBox {
    Vec3 lo = Vec3::Zero();
    Vec3 hi = Vec3::Zero();
};
AxisBox bounding_box(const SupportBody& body);
double diameter_bound(const SupportBody& body);

/// Least-squares fit of h_b ~ a*h_a + <x0,theta>; homothetic when the sup
/// residual is below rel_threshold * diameter.
struct HomothetyFit {
    double scale = 0;
    Vec3 translation = Vec3::Zero();
    double sup_residual = 0;
    bool homothetic = false;
};
HomothetyFit fit_homothety(const SupportBody& a, const SupportBody& b, double rel_threshold = 1e-6);

/// Hit-or-miss volume estimate over the bounding box.
struct VolumeEstimate {
    double volume = 0;
    double std_error = 0;
};
VolumeEstimate monte_carlo_volume(const SupportBody& body, std::size_t samples, std::uint64_t seed);

/// Body-spec JSON (kinds: ball, ellipsoid, combination, samples).
SupportBody body_from_json(const nlohmann::json& spec,
                           std::shared_ptr<const SphereGrid> grid = SphereGrid::icosahedral());
nlohmann::json body_to_json(const SupportBody& body);
nlohmann::json descriptor_to_json(const BodyDescriptor& d);
DescriptorPtr descriptor_from_json(const nlohmann::json& spec);
std::string describe(const SupportBody& body);

}  // namespace hbm
