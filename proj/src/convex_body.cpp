#include "hbm/convex_body.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace hbm {

namespace {

constexpr double kPi = std::numbers::pi;

double spherical_triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
    // Van Oosterom-Strackee solid angle.
    const double num = std::abs(a.dot(b.cross(c)));
    const double den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    return 2.0 * std::atan2(num, den);
}

void tangent_basis(const Vec3& n, Vec3& e1, Vec3& e2) {
    Vec3 a = Vec3::UnitX();
    if (std::abs(n[1]) < std::abs(n[0]) && std::abs(n[1]) <= std::abs(n[2])) a = Vec3::UnitY();
    else if (std::abs(n[2]) < std::abs(n[0])) a = Vec3::UnitZ();
    e1 = n.cross(a).normalized();
    e2 = n.cross(e1);
}

}  // namespace

std::shared_ptr<const SphereGrid> SphereGrid::icosahedral(int level) {
    if (level < 0 || level > 7) throw std::invalid_argument("SphereGrid: level must be in [0,7]");
    static std::mutex mu;
    static std::map<int, std::shared_ptr<const SphereGrid>> cache;
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = cache.find(level); it != cache.end()) return it->second;

    auto g = std::shared_ptr<SphereGrid>(new SphereGrid());
    g->level_ = level;
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                           {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                           {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& p : v) p.normalize();
    std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                         {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                         {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                         {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> mid;
        auto midpoint = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            if (auto it = mid.find(key); it != mid.end()) return it->second;
            v.push_back((v[a] + v[b]).normalized());
            const int id = static_cast<int>(v.size()) - 1;
            mid.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> nf;
        nf.reserve(f.size() * 4);
        for (const auto& t : f) {
            const int ab = midpoint(t[0], t[1]);
            const int bc = midpoint(t[1], t[2]);
            const int ca = midpoint(t[2], t[0]);
            nf.push_back({t[0], ab, ca});
            nf.push_back({t[1], bc, ab});
            nf.push_back({t[2], ca, bc});
            nf.push_back({ab, bc, ca});
        }
        f = std::move(nf);
    }

    const std::size_t n = v.size();
    g->directions_ = v;
    g->triangles_ = f;
    g->weights_.assign(n, 0.0);
    g->vertex_triangles_.assign(n, {});
    std::vector<std::set<int>> nb(n);
    for (std::size_t ti = 0; ti < f.size(); ++ti) {
        const auto& t = f[ti];
        const double area = spherical_triangle_area(v[t[0]], v[t[1]], v[t[2]]);
        for (int k = 0; k < 3; ++k) {
            g->weights_[t[k]] += area / 3.0;
            g->vertex_triangles_[t[k]].push_back(static_cast<int>(ti));
            nb[t[k]].insert(t[(k + 1) % 3]);
            nb[t[k]].insert(t[(k + 2) % 3]);
        }
    }
    g->neighbors_.resize(n);
    for (std::size_t i = 0; i < n; ++i) g->neighbors_[i].assign(nb[i].begin(), nb[i].end());
    g->antipodes_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int j = g->nearest(-v[i]);
        if ((v[j] + v[i]).norm() > 1e-12) throw std::logic_error("SphereGrid: grid not antipodal");
        g->antipodes_[i] = j;
    }
    cache.emplace(level, g);
    return g;
}

int SphereGrid::nearest(const Vec3& dir) const {
    int best = 0;
    double bd = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < directions_.size(); ++i) {
        const double d = directions_[i].dot(dir);
        if (d > bd) {
            bd = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

SphereGrid::Location SphereGrid::locate(const Vec3& dir) const {
    auto try_tri = [&](int ti, Location& loc) {
        const auto& t = triangles_[ti];
        Mat3 m;
        m.col(0) = directions_[t[0]];
        m.col(1) = directions_[t[1]];
        m.col(2) = directions_[t[2]];
        const Vec3 lam = m.partialPivLu().solve(dir);
        if (lam.minCoeff() < -1e-12) return false;
        loc.triangle = ti;
        loc.bary = lam / lam.sum();
        return true;
    };
    Location loc;
    const int v = nearest(dir);
    for (int ti : vertex_triangles_[v])
        if (try_tri(ti, loc)) return loc;
    for (std::size_t ti = 0; ti < triangles_.size(); ++ti)
        if (try_tri(static_cast<int>(ti), loc)) return loc;
    throw std::logic_error("SphereGrid::locate: no triangle found");
}

// ---------------------------------------------------------------------------
// Analytic descriptors

double descriptor_support(const BodyDescriptor& d, const Vec3& dir) {
    return std::visit(
        [&](const auto& s) -> double {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BallShape>) {
                return s.radius * dir.norm() + s.center.dot(dir);
            } else if constexpr (std::is_same_v<T, EllipsoidShape>) {
                const Vec3 m = s.semi_axes.cwiseProduct(s.semi_axes);
                return std::sqrt(dir.dot(m.cwiseProduct(dir))) + s.center.dot(dir);
            } else {
                double h = s.offset.dot(dir);
                for (const auto& p : s.parts)
                    if (p.weight != 0.0) h += p.weight * descriptor_support(*p.body, p.rotation.transpose() * dir);
                return h;
            }
        },
        d.shape);
}

Vec3 descriptor_gradient(const BodyDescriptor& d, const Vec3& dir) {
    return std::visit(
        [&](const auto& s) -> Vec3 {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BallShape>) {
                return s.radius * dir.normalized() + s.center;
            } else if constexpr (std::is_same_v<T, EllipsoidShape>) {
                const Vec3 m = s.semi_axes.cwiseProduct(s.semi_axes);
                const Vec3 mt = m.cwiseProduct(dir);
                return mt / std::sqrt(dir.dot(mt)) + s.center;
            } else {
                Vec3 g = s.offset;
                for (const auto& p : s.parts)
                    if (p.weight != 0.0)
                        g += p.weight * (p.rotation * descriptor_gradient(*p.body, p.rotation.transpose() * dir));
                return g;
            }
        },
        d.shape);
}

Mat3 descriptor_hessian(const BodyDescriptor& d, const Vec3& dir) {
    return std::visit(
        [&](const auto& s) -> Mat3 {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BallShape>) {
                const double r = dir.norm();
                const Vec3 u = dir / r;
                return s.radius / r * (Mat3::Identity() - u * u.transpose());
            } else if constexpr (std::is_same_v<T, EllipsoidShape>) {
                const Vec3 m = s.semi_axes.cwiseProduct(s.semi_axes);
                const Vec3 mt = m.cwiseProduct(dir);
                const double h0 = std::sqrt(dir.dot(mt));
                Mat3 hm = Mat3(m.asDiagonal()) / h0;
                hm -= mt * mt.transpose() / (h0 * h0 * h0);
                return hm;
            } else {
                Mat3 hm = Mat3::Zero();
                for (const auto& p : s.parts)
                    if (p.weight != 0.0)
                        hm += p.weight * (p.rotation * descriptor_hessian(*p.body, p.rotation.transpose() * dir) *
                                          p.rotation.transpose());
                return hm;
            }
        },
        d.shape);
}

// ---------------------------------------------------------------------------
// SupportBody

SupportBody::SupportBody(std::shared_ptr<const SphereGrid> grid, std::vector<double> h, DescriptorPtr descriptor)
    : grid_(std::move(grid)), h_(std::move(h)), descriptor_(std::move(descriptor)) {
    if (!grid_) throw std::invalid_argument("SupportBody: null grid");
    if (h_.size() != grid_->size()) throw std::invalid_argument("SupportBody: sample count does not match grid");
    for (std::size_t i = 0; i < h_.size(); ++i) {
        if (!std::isfinite(h_[i])) throw std::invalid_argument("SupportBody: non-finite support value");
        if (!(h_[i] + h_[grid_->antipode(i)] > 0.0))
            throw std::invalid_argument("SupportBody: empty interior (h(theta)+h(-theta) <= 0)");
    }
}

SupportBody SupportBody::from_descriptor(DescriptorPtr d, std::shared_ptr<const SphereGrid> grid) {
    if (!d) throw std::invalid_argument("SupportBody: null descriptor");
    std::vector<double> h(grid->size());
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = descriptor_support(*d, grid->directions()[i]);
    return SupportBody(std::move(grid), std::move(h), std::move(d));
}

SupportBody SupportBody::ball(double radius, const Vec3& center, std::shared_ptr<const SphereGrid> grid) {
    if (!(radius > 0)) throw std::invalid_argument("ball: radius must be positive");
    return from_descriptor(std::make_shared<BodyDescriptor>(BodyDescriptor{BallShape{radius, center}}),
                           std::move(grid));
}

SupportBody SupportBody::ellipsoid(const Vec3& semi_axes, const Vec3& center, std::shared_ptr<const SphereGrid> grid) {
    if (!(semi_axes.minCoeff() > 0)) throw std::invalid_argument("ellipsoid: semi-axes must be positive");
    return from_descriptor(std::make_shared<BodyDescriptor>(BodyDescriptor{EllipsoidShape{semi_axes, center}}),
                           std::move(grid));
}

namespace {

DescriptorPtr wrap(const DescriptorPtr& d, double w, const Mat3& rot, const Vec3& offset) {
    if (!d) return nullptr;
    CombinationShape c;
    c.parts.push_back({w, rot, d});
    c.offset = offset;
    return std::make_shared<BodyDescriptor>(BodyDescriptor{std::move(c)});
}

}  // namespace

SupportBody SupportBody::translated(const Vec3& c) const {
    std::vector<double> h = h_;
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += c.dot(grid_->directions()[i]);
    return SupportBody(grid_, std::move(h), wrap(descriptor_, 1.0, Mat3::Identity(), c));
}

SupportBody SupportBody::scaled(double lambda) const {
    if (!(lambda > 0)) throw std::invalid_argument("scaled: factor must be positive");
    std::vector<double> h = h_;
    for (auto& x : h) x *= lambda;
    return SupportBody(grid_, std::move(h), wrap(descriptor_, lambda, Mat3::Identity(), Vec3::Zero()));
}

SupportBody SupportBody::rotated(const Mat3& rho) const {
    return combine({{1.0, rho, *this}});
}

SupportBody SupportBody::smoothed(double eps) const {
    if (eps < 0) throw std::invalid_argument("smoothed: eps must be nonnegative");
    std::vector<double> h = h_;
    for (auto& x : h) x += eps;
    DescriptorPtr d;
    if (descriptor_) {
        CombinationShape c;
        c.parts.push_back({1.0, Mat3::Identity(), descriptor_});
        c.parts.push_back({eps, Mat3::Identity(),
                           std::make_shared<BodyDescriptor>(BodyDescriptor{BallShape{1.0, Vec3::Zero()}})});
        d = std::make_shared<BodyDescriptor>(BodyDescriptor{std::move(c)});
    }
    return SupportBody(grid_, std::move(h), std::move(d));
}

double support_eval(const SupportBody& body, const Vec3& direction) {
    const double n = direction.norm();
    if (std::abs(n - 1.0) > 1e-9) throw std::invalid_argument("support_eval: direction must be a unit vector");
    if (body.analytic()) return descriptor_support(*body.descriptor(), direction);
    const SphereGrid& g = body.grid();
    const auto loc = g.locate(direction);
    const auto& t = g.triangles()[loc.triangle];
    Vec3 p = Vec3::Zero();
    double hp = 0;
    for (int k = 0; k < 3; ++k) {
        p += loc.bary[k] * g.directions()[t[k]];
        hp += loc.bary[k] * body.samples()[t[k]];
    }
    return hp / p.norm();
}

bool contains(const SupportBody& body, const Vec3& point) {
    const auto& dirs = body.grid().directions();
    const auto& h = body.samples();
    for (std::size_t i = 0; i < dirs.size(); ++i)
        if (point.dot(dirs[i]) > h[i]) return false;
    return true;
}

namespace {

SignedDistance grid_signed_distance(const SupportBody& body, const Vec3& x) {
    const auto& dirs = body.grid().directions();
    const auto& h = body.samples();
    SignedDistance sd;
    sd.value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        const double g = x.dot(dirs[i]) - h[i];
        if (g > sd.value) {
            sd.value = g;
            sd.normal = dirs[i];
        }
    }
    return sd;
}

// Maximize F(theta) = <x,theta> - h(theta) on the unit sphere. Newton steps use
// the Riemannian Hessian -(P D2h P + F P); gradient steps are the fallback
// when that is not negative definite.
SignedDistance refine(const BodyDescriptor& d, const Vec3& x, Vec3 theta) {
    theta.normalize();
    double val = x.dot(theta) - descriptor_support(d, theta);
    const double scale = 1.0 + x.norm() + std::abs(val);
    double gstep = 1.0;
    for (int it = 0; it < 100; ++it) {
        Vec3 e1, e2;
        tangent_basis(theta, e1, e2);
        const Vec3 grad = x - descriptor_gradient(d, theta);
        const Eigen::Vector2d gt(grad.dot(e1), grad.dot(e2));
        if (gt.norm() < 1e-14 * scale) break;
        const Mat3 hm = descriptor_hessian(d, theta);
        Eigen::Matrix2d nh;
        nh << e1.dot(hm * e1) + val, e1.dot(hm * e2), e2.dot(hm * e1), e2.dot(hm * e2) + val;
        Vec3 step;
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(nh, Eigen::EigenvaluesOnly);
        const bool newton = es.eigenvalues()[0] > 1e-12 * scale;
        if (newton) {
            const Eigen::Vector2d dl = nh.ldlt().solve(gt);
            step = dl[0] * e1 + dl[1] * e2;
        } else {
            step = gstep * (gt[0] * e1 + gt[1] * e2);
        }
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            const Vec3 cand = (theta + step).normalized();
            const double cv = x.dot(cand) - descriptor_support(d, cand);
            if (cv >= val) {
                theta = cand;
                val = cv;
                accepted = true;
                if (!newton) gstep = std::min(gstep * 2.0, 1e6);
                break;
            }
            step *= 0.5;
            if (!newton) gstep *= 0.5;
        }
        if (!accepted) break;
    }
    return {val, theta};
}

}  // namespace

SignedDistance signed_distance(const SupportBody& body, const Vec3& x) {
    SignedDistance sd = grid_signed_distance(body, x);
    if (body.analytic()) {
        const SignedDistance r = refine(*body.descriptor(), x, sd.normal);
        if (r.value >= sd.value) sd = r;
    }
    return sd;
}

SignedDistance signed_distance_from(const SupportBody& body, const Vec3& x, const Vec3& start) {
    if (!body.analytic()) return grid_signed_distance(body, x);
    return refine(*body.descriptor(), x, start);
}

SupportBody combine(const std::vector<WeightedPart>& parts) {
    if (parts.empty()) throw std::invalid_argument("combine: no parts");
    const auto& grid = parts.front().body.grid_ptr();
    bool any_positive = false;
    bool all_analytic = true;
    for (const auto& p : parts) {
        if (!p.body.grid().compatible(*grid)) throw std::invalid_argument("combine: bodies use different sphere grids");
        if (p.weight < 0) throw std::invalid_argument("combine: negative weight");
        if (p.weight > 0) any_positive = true;
        if ((p.rotation.transpose() * p.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
            throw std::invalid_argument("combine: rotation is not orthogonal");
        all_analytic = all_analytic && p.body.analytic();
    }
    if (!any_positive) throw std::invalid_argument("combine: all weights are zero");

    const auto& dirs = grid->directions();
    std::vector<double> h(dirs.size(), 0.0);
    for (const auto& p : parts) {
        if (p.weight == 0) continue;
        const bool identity = (p.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0;
        for (std::size_t i = 0; i < dirs.size(); ++i) {
            const double hv = identity ? p.body.samples()[i] : support_eval(p.body, p.rotation.transpose() * dirs[i]);
            h[i] += p.weight * hv;
        }
    }
    DescriptorPtr d;
    if (all_analytic) {
        CombinationShape c;
        for (const auto& p : parts) c.parts.push_back({p.weight, p.rotation, p.body.descriptor()});
        d = std::make_shared<BodyDescriptor>(BodyDescriptor{std::move(c)});
    }
    return SupportBody(grid, std::move(h), std::move(d));
}

double mean_width(const SupportBody& body) {
    // 2/(3 omega_3) * integral h, omega_3 = 4 pi / 3.
    const auto& w = body.grid().weights();
    double s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * body.samples()[i];
    return s / (2.0 * kPi);
}

Vec3 steiner_point(const SupportBody& body) {
    const auto& w = body.grid().weights();
    const auto& dirs = body.grid().directions();
    Vec3 s = Vec3::Zero();
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * body.samples()[i] * dirs[i];
    return 3.0 / (4.0 * kPi) * s;
}

std::array<double, 2> principal_radii(const SupportBody& body, std::size_t node) {
    const SphereGrid& g = body.grid();
    const Vec3& n = g.directions()[node];
    Vec3 e1, e2;
    tangent_basis(n, e1, e2);
    Eigen::Matrix2d q;
    if (body.analytic()) {
        const Mat3 hm = descriptor_hessian(*body.descriptor(), n);
        q << e1.dot(hm * e1), e1.dot(hm * e2), e2.dot(hm * e1), e2.dot(hm * e2);
    } else {
        // Quartic least-squares fit of the 1-homogeneous extension on the
        // tangent plane over the three-ring neighbourhood.
        std::set<int> ring{static_cast<int>(node)};
        for (int layer = 0; layer < 3; ++layer) {
            const std::vector<int> front(ring.begin(), ring.end());
            for (int a : front)
                for (int b : g.neighbors()[a]) ring.insert(b);
        }
        Eigen::MatrixXd a(ring.size(), 15);
        Eigen::VectorXd rhs(ring.size());
        int r = 0;
        for (int k : ring) {
            const Vec3& d = g.directions()[k];
            const double c = d.dot(n);
            const Vec3 off = d / c - n;
            const double s = off.dot(e1), t = off.dot(e2);
            a.row(r) << 1, s, t, s * s, s * t, t * t, s * s * s, s * s * t, s * t * t, t * t * t, s * s * s * s,
                s * s * s * t, s * s * t * t, s * t * t * t, t * t * t * t;
            rhs[r] = body.samples()[k] / c;
            ++r;
        }
        const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);
        q << 2 * coef[3], coef[4], coef[4], 2 * coef[5];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (q + q.transpose()), Eigen::EigenvaluesOnly);
    return {es.eigenvalues()[0], es.eigenvalues()[1]};
}

SurfaceArea surface_area(const SupportBody& body, double smoothing) {
    const SupportBody b = smoothing > 0 ? body.smoothed(smoothing) : body;
    SurfaceArea out;
    out.min_radius = std::numeric_limits<double>::infinity();
    const auto& w = b.grid().weights();
    for (std::size_t i = 0; i < w.size(); ++i) {
        const auto r = principal_radii(b, i);
        out.min_radius = std::min(out.min_radius, r[0]);
        out.area += w[i] * r[0] * r[1];
    }
    if (!(out.min_radius > 0) || !std::isfinite(out.area)) {
        out.ok = false;
        out.message = "non-positive principal radius; body is not smooth at grid resolution (try smoothing)";
    }
    return out;
}

bool curvature_proxy_ok(const SupportBody& body) {
    for (std::size_t i = 0; i < body.grid().size(); ++i) {
        const auto r = principal_radii(body, i);
        if (!(r[0] > 0) || !std::isfinite(r[1])) return false;
    }
    return true;
}

ReferenceBalls reference_balls(const SupportBody& body) {
    const SurfaceArea sa = surface_area(body);
    if (!sa.ok) throw std::runtime_error("reference_balls: " + sa.message);
    const double rs = 0.5 * mean_width(body);
    const double rst = std::sqrt(sa.area / (4.0 * kPi));
    return {SupportBody::ball(rs, Vec3::Zero(), body.grid_ptr()), SupportBody::ball(rst, Vec3::Zero(), body.grid_ptr()),
            rs, rst};
}

Mat3 random_rotation(SplitMix64& rng) {
    Eigen::Quaterniond q;
    double n = 0;
    do {
        q = Eigen::Quaterniond(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        n = q.norm();
    } while (n < 1e-12);
    q.normalize();
    return q.toRotationMatrix();
}

double support_distance(const SupportBody& a, const SupportBody& b) {
    if (!a.grid().compatible(b.grid())) throw std::invalid_argument("support_distance: different grids");
    double d = 0;
    for (std::size_t i = 0; i < a.samples().size(); ++i) d = std::max(d, std::abs(a.samples()[i] - b.samples()[i]));
    return d;
}

RotationMeans rotation_mean_sequence(const SupportBody& body, int n_max, std::uint64_t seed) {
    if (n_max < 0) throw std::invalid_argument("rotation_mean_sequence: N_max must be >= 0");
    RotationMeans out;
    out.steiner_shift = -steiner_point(body);
    const SupportBody centred = body.translated(out.steiner_shift);
    out.mean_width = mean_width(centred);
    const double half_b = 0.5 * out.mean_width;
    std::vector<SupportBody> rotated;
    for (int i = 0; i <= n_max; ++i) {
        SplitMix64 rng(SplitMix64::derive(seed, static_cast<std::uint64_t>(i)));
        const Mat3 rho = random_rotation(rng);
        out.rotations.push_back(rho);
        std::vector<WeightedPart> parts;
        const double w = 1.0 / (i + 1);
        for (int j = 0; j <= i; ++j) parts.push_back({w, out.rotations[j], centred});
        SupportBody mean = combine(parts);
        double dist = 0;
        for (double hv : mean.samples()) dist = std::max(dist, std::abs(hv - half_b));
        out.hausdorff.push_back(dist);
        out.bodies.push_back(std::move(mean));
    }
    return out;
}

AxisBox bounding_box(const SupportBody& body) {
    AxisBox b;
    for (int a = 0; a < 3; ++a) {
        Vec3 e = Vec3::Zero();
        e[a] = 1;
        b.hi[a] = support_eval(body, e);
        b.lo[a] = -support_eval(body, -e);
    }
    if (!body.analytic()) {
        // Interpolated axis values can undershoot the sampled polytope slightly.
        for (std::size_t i = 0; i < body.grid().size(); ++i) {
            const Vec3& d = body.grid().directions()[i];
            for (int a = 0; a < 3; ++a) {
                if (std::abs(d[a]) > 0.999) {
                    if (d[a] > 0) b.hi[a] = std::max(b.hi[a], body.samples()[i] / d[a]);
                    else b.lo[a] = std::min(b.lo[a], body.samples()[i] / d[a]);
                }
            }
        }
    }
    return b;
}

double diameter_bound(const SupportBody& body) {
    double d = 0;
    for (std::size_t i = 0; i < body.grid().size(); ++i)
        d = std::max(d, body.samples()[i] + body.samples()[body.grid().antipode(i)]);
    return d;
}

HomothetyFit fit_homothety(const SupportBody& a, const SupportBody& b, double rel_threshold) {
    if (!a.grid().compatible(b.grid())) throw std::invalid_argument("fit_homothety: different grids");
    const auto& dirs = a.grid().directions();
    const std::size_t n = dirs.size();
    Eigen::MatrixXd m(n, 4);
    Eigen::VectorXd y(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.row(i) << a.samples()[i], dirs[i][0], dirs[i][1], dirs[i][2];
        y[i] = b.samples()[i];
    }
    const Eigen::Vector4d c = m.colPivHouseholderQr().solve(y);
    HomothetyFit fit;
    fit.scale = c[0];
    fit.translation = c.tail<3>();
    fit.sup_residual = (m * c - y).cwiseAbs().maxCoeff();
    fit.homothetic = fit.scale > 0 && fit.sup_residual <= rel_threshold * diameter_bound(b);
    return fit;
}

VolumeEstimate monte_carlo_volume(const SupportBody& body, std::size_t samples, std::uint64_t seed) {
    const AxisBox box = bounding_box(body);
    const Vec3 ext = box.hi - box.lo;
    const double box_vol = ext.prod();
    SplitMix64 rng(seed);
    std::size_t hits = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        const Vec3 x(box.lo[0] + ext[0] * rng.uniform(), box.lo[1] + ext[1] * rng.uniform(),
                     box.lo[2] + ext[2] * rng.uniform());
        if (signed_distance(body, x).value < 0) ++hits;
    }
    const double frac = static_cast<double>(hits) / static_cast<double>(samples);
    return {box_vol * frac, box_vol * std::sqrt(frac * (1 - frac) / static_cast<double>(samples))};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* key) {
    if (!j.is_object() || !j.contains(key))
        throw std::invalid_argument(std::string("body spec: missing field '") + key + "'");
    return j.at(key);
}

Vec3 vec3_field(const nlohmann::json& j, const char* key, const Vec3& dflt, bool required) {
    if (!j.contains(key)) {
        if (required) throw std::invalid_argument(std::string("body spec: missing field '") + key + "'");
        return dflt;
    }
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3)
        throw std::invalid_argument(std::string("body spec: field '") + key + "' must be an array of 3 numbers");
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
        if (!a[i].is_number())
            throw std::invalid_argument(std::string("body spec: field '") + key + "' must be an array of 3 numbers");
        v[i] = a[i].get<double>();
    }
    return v;
}

double number_field(const nlohmann::json& j, const char* key) {
    const auto& v = require(j, key);
    if (!v.is_number()) throw std::invalid_argument(std::string("body spec: field '") + key + "' must be a number");
    return v.get<double>();
}

nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v[0], v[1], v[2]}); }

}  // namespace

DescriptorPtr descriptor_from_json(const nlohmann::json& spec) {
    const std::string kind = require(spec, "kind").get<std::string>();
    if (kind == "ball") {
        const double r = number_field(spec, "radius");
        if (!(r > 0)) throw std::invalid_argument("body spec: field 'radius' must be positive");
        return std::make_shared<BodyDescriptor>(BodyDescriptor{BallShape{r, vec3_field(spec, "center", Vec3::Zero(), false)}});
    }
    if (kind == "ellipsoid") {
        const Vec3 ax = vec3_field(spec, "semi_axes", Vec3::Ones(), true);
        if (!(ax.minCoeff() > 0)) throw std::invalid_argument("body spec: field 'semi_axes' must be positive");
        return std::make_shared<BodyDescriptor>(
            BodyDescriptor{EllipsoidShape{ax, vec3_field(spec, "center", Vec3::Zero(), false)}});
    }
    if (kind == "combination") {
        const auto& parts = require(spec, "parts");
        if (!parts.is_array() || parts.empty())
            throw std::invalid_argument("body spec: field 'parts' must be a nonempty array");
        CombinationShape c;
        c.offset = vec3_field(spec, "offset", Vec3::Zero(), false);
        bool any_positive = false;
        for (const auto& p : parts) {
            CombinationPart cp;
            cp.weight = number_field(p, "weight");
            if (cp.weight < 0) throw std::invalid_argument("body spec: field 'weight' must be nonnegative");
            any_positive = any_positive || cp.weight > 0;
            if (p.contains("rotation")) {
                const auto& r = p.at("rotation");
                if (!r.is_array() || r.size() != 3)
                    throw std::invalid_argument("body spec: field 'rotation' must be a 3x3 array");
                for (int i = 0; i < 3; ++i) {
                    if (!r[i].is_array() || r[i].size() != 3)
                        throw std::invalid_argument("body spec: field 'rotation' must be a 3x3 array");
                    for (int k = 0; k < 3; ++k) cp.rotation(i, k) = r[i][k].get<double>();
                }
                if ((cp.rotation.transpose() * cp.rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9)
                    throw std::invalid_argument("body spec: field 'rotation' is not orthogonal");
            }
            const auto& sub = require(p, "body");
            if (sub.contains("kind") && sub.at("kind") == "samples")
                throw std::invalid_argument("body spec: sampled bodies cannot appear inside a combination file");
            cp.body = descriptor_from_json(sub);
            c.parts.push_back(std::move(cp));
        }
        if (!any_positive) throw std::invalid_argument("body spec: field 'weight' is zero for every part");
        return std::make_shared<BodyDescriptor>(BodyDescriptor{std::move(c)});
    }
    throw std::invalid_argument("body spec: field 'kind' has unknown value '" + kind + "'");
}

SupportBody body_from_json(const nlohmann::json& spec, std::shared_ptr<const SphereGrid> grid) {
    const std::string kind = require(spec, "kind").get<std::string>();
    if (kind == "samples") {
        const int order = static_cast<int>(number_field(spec, "grid_order"));
        auto g = SphereGrid::icosahedral(order);
        const auto& h = require(spec, "h");
        if (!h.is_array() || h.size() != g->size())
            throw std::invalid_argument("body spec: field 'h' must have one value per grid node (" +
                                        std::to_string(g->size()) + ")");
        return SupportBody(g, h.get<std::vector<double>>());
    }
    return SupportBody::from_descriptor(descriptor_from_json(spec), std::move(grid));
}

nlohmann::json descriptor_to_json(const BodyDescriptor& d) {
    return std::visit(
        [](const auto& s) -> nlohmann::json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BallShape>) {
                return {{"kind", "ball"}, {"radius", s.radius}, {"center", vec_json(s.center)}};
            } else if constexpr (std::is_same_v<T, EllipsoidShape>) {
                return {{"kind", "ellipsoid"}, {"semi_axes", vec_json(s.semi_axes)}, {"center", vec_json(s.center)}};
            } else {
                nlohmann::json parts = nlohmann::json::array();
                for (const auto& p : s.parts) {
                    nlohmann::json rot = nlohmann::json::array();
                    for (int i = 0; i < 3; ++i)
                        rot.push_back({p.rotation(i, 0), p.rotation(i, 1), p.rotation(i, 2)});
                    parts.push_back({{"weight", p.weight}, {"rotation", rot}, {"body", descriptor_to_json(*p.body)}});
                }
                nlohmann::json j = {{"kind", "combination"}, {"parts", parts}};
                if (s.offset != Vec3::Zero()) j["offset"] = vec_json(s.offset);
                return j;
            }
        },
        d.shape);
}

nlohmann::json body_to_json(const SupportBody& body) {
    if (body.analytic()) return descriptor_to_json(*body.descriptor());
    return {{"kind", "samples"}, {"grid_order", body.grid().level()}, {"h", body.samples()}};
}

std::string describe(const SupportBody& body) {
    if (!body.analytic()) return "samples[" + std::to_string(body.grid().size()) + "]";
    std::ostringstream os;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BallShape>) {
                os << "ball{" << s.radius << "}";
            } else if constexpr (std::is_same_v<T, EllipsoidShape>) {
                os << "ellipsoid{" << s.semi_axes[0] << "," << s.semi_axes[1] << "," << s.semi_axes[2] << "}";
            } else {
                os << "combination[" << s.parts.size() << "]";
            }
        },
        body.descriptor()->shape);
    return os.str();
}

}  // namespace hbm
