#include "hbm/convexify.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace hbm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// out(s) = max_i (s x_i + a_i) for uniform x_i = x0 + dx i and sorted s, by an
/// upper hull walk. Entries a_i = -inf are skipped.
void llt_line(double x0, double dx, const std::vector<double>& a, const std::vector<double>& s,
              std::vector<double>& out, std::vector<int>& hull) {
    hull.clear();
    const int n = static_cast<int>(a.size());
    for (int i = 0; i < n; ++i) {
        if (a[i] == kNegInf) continue;
        while (hull.size() >= 2) {
            const int i0 = hull[hull.size() - 2], i1 = hull.back();
            // Pop i1 when it lies on or below the chord i0 -> i.
            const double cross = (i1 - i0) * (a[i] - a[i0]) - (a[i1] - a[i0]) * (i - i0);
            if (cross >= 0)
                hull.pop_back();
            else
                break;
        }
        hull.push_back(i);
    }
    out.assign(s.size(), kNegInf);
    if (hull.empty()) return;
    std::size_t j = 0;
    for (std::size_t q = 0; q < s.size(); ++q) {
        auto val = [&](std::size_t h) { return s[q] * (x0 + dx * hull[h]) + a[hull[h]]; };
        while (j + 1 < hull.size() && val(j + 1) >= val(j)) ++j;
        out[q] = val(j);
    }
}

/// Applies llt_line along one axis of an array with x-fastest layout.
std::vector<double> transform_axis(const std::vector<double>& in, std::array<int, 3>& dims, int axis,
                                   double x0, double dx, const std::vector<double>& s) {
    std::array<int, 3> od = dims;
    od[axis] = static_cast<int>(s.size());
    std::vector<double> out(static_cast<std::size_t>(od[0]) * od[1] * od[2]);
    const int o1 = axis == 0 ? 1 : 0, o2 = axis == 2 ? 1 : 2;
    auto at = [](const std::array<int, 3>& d, int i, int j, int k) {
        return static_cast<std::size_t>(i) + static_cast<std::size_t>(d[0]) * (j + static_cast<std::size_t>(d[1]) * k);
    };
    std::vector<double> line(dims[axis]), res;
    std::vector<int> hull;
    std::array<int, 3> c{};
    for (int b = 0; b < dims[o2]; ++b) {
        for (int a = 0; a < dims[o1]; ++a) {
            c[o1] = a;
            c[o2] = b;
            for (int m = 0; m < dims[axis]; ++m) {
                c[axis] = m;
                line[m] = in[at(dims, c[0], c[1], c[2])];
            }
            llt_line(x0, dx, line, s, res, hull);
            for (std::size_t m = 0; m < s.size(); ++m) {
                c[axis] = static_cast<int>(m);
                out[at(od, c[0], c[1], c[2])] = res[m];
            }
        }
    }
    dims = od;
    return out;
}

std::vector<double> dual_coords(const DualGrid& d, int axis) {
    std::vector<double> s(d.n);
    for (int i = 0; i < d.n; ++i) s[i] = d.coord(axis, i);
    return s;
}

ConjugateField forward(const Field& f, const DualGrid& dual) {
    const Grid3& g = *f.grid;
    std::vector<double> a(g.size(), kNegInf);
    for (std::size_t idx : g.domain_nodes())
        if (f.values[idx] < kBig / 2) a[idx] = -f.values[idx];
    std::array<int, 3> dims = g.dims();
    for (int ax = 0; ax < 3; ++ax) a = transform_axis(a, dims, ax, g.origin()[ax], g.h(), dual_coords(dual, ax));
    ConjugateField out{dual, std::move(a)};
    for (double v : out.values)
        if (v == kNegInf) throw std::invalid_argument("legendre: field has no finite in-domain values");
    return out;
}

bool same_geometry(const Grid3& a, const Grid3& b) {
    return a.dims() == b.dims() && a.h() == b.h() && a.origin() == b.origin() &&
           a.domain_nodes() == b.domain_nodes();
}

int default_dual_n(int resolution) {
    int n = std::max(2 * resolution + 1, 65);
    return n % 2 ? n : n + 1;
}

std::vector<FieldPart> active_parts(const std::vector<FieldPart>& parts, const char* who) {
    if (parts.empty()) throw std::invalid_argument(std::string(who) + ": no parts");
    double sum = 0;
    for (const auto& p : parts) {
        if (!(p.t >= 0)) throw std::invalid_argument(std::string(who) + ": weights must be nonnegative");
        if (!p.field.grid) throw std::invalid_argument(std::string(who) + ": part without a grid");
        if ((p.rotation.transpose() * p.rotation - Mat3::Identity()).norm() > 1e-9)
            throw std::invalid_argument(std::string(who) + ": rotation is not orthogonal");
        sum += p.t;
    }
    if (std::abs(sum - 1) > 1e-12) throw std::invalid_argument(std::string(who) + ": weights must sum to 1");
    std::vector<FieldPart> out;
    for (const auto& p : parts)
        if (p.t > 0) out.push_back(p);
    return out;
}

bool is_identity(const Mat3& r) { return (r - Mat3::Identity()).norm() <= 1e-15; }

void warn_if_nonconvex(const Field& f, std::size_t index) {
    const Field m = min_hessian_eig_field(f);
    double worst = std::numeric_limits<double>::infinity(), scale = 0;
    for (std::size_t idx : f.grid->domain_nodes()) {
        if (std::isnan(m[idx])) continue;
        worst = std::min(worst, m[idx]);
        scale = std::max(scale, std::abs(m[idx]));
    }
    if (std::isfinite(worst) && worst < -f.grid->h() * std::max(scale, 1e-300))
        std::clog << "warning: minkowski_combine_functions: part " << index
                  << " is not convex (min Hessian eigenvalue " << worst
                  << "); conjugate addition combines its convex envelope\n";
}

}  // namespace

void DualGrid::validate() const {
    if (n < 3 || n % 2 == 0) throw std::invalid_argument("DualGrid: node count must be odd and at least 3");
    if (!(half.minCoeff() > 0) || !half.allFinite())
        throw std::invalid_argument("DualGrid: half-widths must be positive and finite");
}

Vec3 gradient_bound(const Field& f, double min_depth) {
    const Grid3& g = *f.grid;
    Vec3 b = Vec3::Zero();
    bool any = false;
    for (std::size_t idx : g.domain_nodes()) {
        if (g.kind(idx) != NodeKind::Interior || g.sdf(idx) > -min_depth * g.h()) continue;
        b = b.cwiseMax(jet_at(f, idx).gradient.cwiseAbs());
        any = true;
    }
    if (!any)
        for (std::size_t idx : g.domain_nodes()) b = b.cwiseMax(jet_at(f, idx).gradient.cwiseAbs());
    return b;
}

DualGrid covering_dual(const Vec3& bound, int n, double margin) {
    if (!(margin >= 1)) throw std::invalid_argument("covering_dual: margin must be at least 1");
    DualGrid d;
    d.n = n % 2 ? n : n + 1;
    // Keep every axis at least a small fraction of the largest so the box is never degenerate.
    const double floor = std::max(bound.maxCoeff(), 1e-3) * 1e-2;
    for (int a = 0; a < 3; ++a) d.half[a] = margin * std::max(bound[a], floor);
    d.validate();
    return d;
}

double ConjugateField::at(const Vec3& p) const {
    double idx[3];
    int i0[3];
    for (int a = 0; a < 3; ++a) {
        const double u = std::clamp((p[a] + dual.half[a]) / dual.step(a), 0.0, dual.n - 1.0);
        i0[a] = std::min(static_cast<int>(u), dual.n - 2);
        idx[a] = u - i0[a];
    }
    double v = 0;
    for (int m = 0; m < 8; ++m) {
        const int di = m & 1, dj = (m >> 1) & 1, dk = (m >> 2) & 1;
        const double w = (di ? idx[0] : 1 - idx[0]) * (dj ? idx[1] : 1 - idx[1]) * (dk ? idx[2] : 1 - idx[2]);
        if (w != 0) v += w * values[dual.index(i0[0] + di, i0[1] + dj, i0[2] + dk)];
    }
    return v;
}

ConjugateField legendre(const Field& f, DualGrid dual, int max_expand) {
    if (!f.grid) throw std::invalid_argument("legendre: null grid");
    dual.validate();
    const Vec3 need = gradient_bound(f);
    int expansions = 0;
    while ((dual.half.array() < need.array()).any()) {
        if (expansions++ >= max_expand)
            throw std::runtime_error("legendre: dual box does not cover the field's gradients after expansion");
        dual.half *= 2;
    }
    return forward(f, dual);
}

Field inverse_legendre(const ConjugateField& g, const GridPtr& target) {
    if (!target) throw std::invalid_argument("inverse_legendre: null grid");
    std::vector<double> a(g.values.size());
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = -g.values[i];
    std::array<int, 3> dims{g.dual.n, g.dual.n, g.dual.n};
    for (int ax = 0; ax < 3; ++ax) {
        std::vector<double> s(target->dims()[ax]);
        for (int i = 0; i < target->dims()[ax]; ++i) s[i] = target->origin()[ax] + target->h() * i;
        a = transform_axis(a, dims, ax, -g.dual.half[ax], g.dual.step(ax), s);
    }
    Field out(target, std::move(a));
    return out.with_exterior(kBig);
}

GridPtr combined_grid(const std::vector<FieldPart>& parts, int resolution) {
    std::vector<WeightedPart> wp;
    for (const auto& p : parts)
        if (p.t > 0) wp.push_back({p.t, p.rotation, p.field.grid->body()});
    if (wp.empty()) throw std::invalid_argument("combined_grid: no part has positive weight");
    return build_grid(combine(wp), resolution);
}

Field minkowski_combine_functions(const std::vector<FieldPart>& parts, const CombineOptions& opt) {
    const std::vector<FieldPart> act = active_parts(parts, "minkowski_combine_functions");
    return minkowski_combine_functions(parts, combined_grid(act, act.front().field.grid->resolution()), opt);
}

Field minkowski_combine_functions(const std::vector<FieldPart>& parts, const GridPtr& target,
                                  const CombineOptions& opt) {
    const std::vector<FieldPart> act = active_parts(parts, "minkowski_combine_functions");
    if (!target) throw std::invalid_argument("minkowski_combine_functions: null target grid");
    if (act.size() == 1 && is_identity(act[0].rotation) && same_geometry(*act[0].field.grid, *target))
        return Field(target, act[0].field.values).with_exterior(kBig);

    bool rotated = false;
    int res = target->resolution();
    Vec3 bound = Vec3::Zero();
    double norm_bound = 0;
    for (std::size_t i = 0; i < act.size(); ++i) {
        if (opt.warn_nonconvex) warn_if_nonconvex(act[i].field, i);
        const Vec3 b = gradient_bound(act[i].field, opt.gradient_depth);
        bound = bound.cwiseMax(b);
        norm_bound = std::max(norm_bound, b.norm());
        rotated = rotated || !is_identity(act[i].rotation);
        res = std::max(res, act[i].field.grid->resolution());
    }
    // Rotated conjugates are read at rho^T p, so the box must be rotation invariant.
    if (rotated) bound = Vec3::Constant(norm_bound);
    const DualGrid dual = covering_dual(bound, opt.dual_n > 0 ? opt.dual_n : default_dual_n(res), opt.margin);

    ConjugateField sum{dual, std::vector<double>(dual.size(), 0.0)};
    std::vector<bool> outside(dual.size(), false);
    for (const auto& part : act) {
        const ConjugateField c = forward(part.field, dual);
        if (is_identity(part.rotation)) {
            for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += part.t * c.values[i];
        } else {
            // (f o rho^T)*(p) = f*(rho^T p). Where rho^T p leaves the box a
            // clamped read would underestimate f*, so those p are dropped; the
            // inscribed ball still holds every needed gradient.
            for (int k = 0; k < dual.n; ++k)
                for (int j = 0; j < dual.n; ++j)
                    for (int i = 0; i < dual.n; ++i) {
                        const std::size_t id = dual.index(i, j, k);
                        const Vec3 q = part.rotation.transpose() * dual.point(i, j, k);
                        if ((q.cwiseAbs().array() > dual.half.array() * (1 + 1e-12)).any()) outside[id] = true;
                        else sum.values[id] += part.t * c.at(q);
                    }
        }
    }
    for (std::size_t i = 0; i < outside.size(); ++i)
        if (outside[i]) sum.values[i] = kBig;
    return inverse_legendre(sum, target);
}

Field convex_envelope(const Field& f, int dual_n) {
    if (!f.grid) throw std::invalid_argument("convex_envelope: null grid");
    return convex_envelope(
        f, covering_dual(gradient_bound(f), dual_n > 0 ? dual_n : default_dual_n(f.grid->resolution())));
}

Field convex_envelope(const Field& f, const DualGrid& dual) {
    if (!f.grid) throw std::invalid_argument("convex_envelope: null grid");
    dual.validate();
    return inverse_legendre(forward(f, dual), f.grid);
}

double interpolation_unit(const Field& f, std::size_t node) {
    const SymMat3 h = jet_at(f, node).hessian;
    return f.grid->h() * f.grid->h() / 8 * (std::abs(h.a11) + std::abs(h.a22) + std::abs(h.a33));
}

double interpolation_unit(const Field& f) {
    const Grid3& g = *f.grid;
    double m = 0;
    for (std::size_t idx : g.domain_nodes())
        if (g.kind(idx) == NodeKind::Interior) m = std::max(m, interpolation_unit(f, idx));
    return m;
}

std::vector<bool> contact_set(const Field& field, const Field& envelope, double tol) {
    if (!field.grid || !envelope.grid || !same_geometry(*field.grid, *envelope.grid))
        throw std::invalid_argument("contact_set: fields live on different grids");
    std::vector<bool> mask(field.size(), false);
    for (std::size_t idx : field.grid->domain_nodes()) {
        const double t = tol >= 0 ? tol : 2 * interpolation_unit(field, idx) + 1e-12 * std::abs(field[idx]);
        mask[idx] = std::abs(envelope[idx] - field[idx]) <= t;
    }
    return mask;
}

BruteForceResult brute_force_infconv(const std::vector<FieldPart>& parts, int resolution) {
    const std::vector<FieldPart> act = active_parts(parts, "brute_force_infconv");
    if (act.size() > 2) throw std::invalid_argument("brute_force_infconv: at most two parts with positive weight");
    if (resolution > 17) throw std::invalid_argument("brute_force_infconv: resolution is capped at 17");
    for (const auto& p : act)
        if (p.field.grid->resolution() > 17)
            throw std::invalid_argument("brute_force_infconv: part grids are capped at resolution 17");
    const GridPtr target = combined_grid(act, resolution);
    BruteForceResult out{Field(target, kBig), std::vector<Vec3>(target->size(), Vec3::Constant(kBig))};
    const FieldPart& a = act[0];
    for (std::size_t idx : target->domain_nodes()) {
        const Vec3 x = target->position(idx);
        if (act.size() == 1) {
            double v;
            if (is_identity(a.rotation) && same_geometry(*a.field.grid, *target)) {
                out.value.values[idx] = a.field[idx];
                out.argmin_x0[idx] = x;
            } else if (trilinear(a.field, a.rotation.transpose() * x, v)) {
                out.value.values[idx] = v;
                out.argmin_x0[idx] = x;
            }
            continue;
        }
        const FieldPart& b = act[1];
        double best = kBig;
        Vec3 arg = Vec3::Constant(kBig);
        for (std::size_t n0 : a.field.grid->domain_nodes()) {
            const Vec3 x0 = a.rotation * a.field.grid->position(n0);
            const Vec3 y = b.rotation.transpose() * ((x - a.t * x0) / b.t);
            double v1;
            if (!trilinear(b.field, y, v1)) continue;
            const double v = a.t * a.field[n0] + b.t * v1;
            if (v < best) {
                best = v;
                arg = x0;
            }
        }
        out.value.values[idx] = best;
        out.argmin_x0[idx] = arg;
    }
    return out;
}

}  // namespace hbm
