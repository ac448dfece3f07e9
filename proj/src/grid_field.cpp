#include "hbm/grid_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hbm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const int kAxisOf[6] = {0, 0, 1, 1, 2, 2};
const int kSignOf[6] = {-1, 1, -1, 1, -1, 1};

int dir_of(int axis, int sign) { return 2 * axis + (sign > 0 ? 1 : 0); }

// Root of phi along [0,1] (phi(0) < 0 <= phi(1)) by the Illinois method.
template <class Phi>
double illinois_root(Phi&& phi, double f0, double f1) {
    double a = 0, b = 1, fa = f0, fb = f1;
    int side = 0;
    for (int it = 0; it < 100 && (b - a) > 1e-12; ++it) {
        const double c = (a * fb - b * fa) / (fb - fa);
        const double fc = phi(c);
        if (fc == 0) return c;
        if ((fc < 0) == (fa < 0)) {
            a = c;
            fa = fc;
            if (side == -1) fb *= 0.5;
            side = -1;
        } else {
            b = c;
            fb = fc;
            if (side == 1) fa *= 0.5;
            side = 1;
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

std::array<int, 3> Grid3::ijk(std::size_t idx) const {
    const int i = static_cast<int>(idx % dims_[0]);
    const std::size_t r = idx / dims_[0];
    const int j = static_cast<int>(r % dims_[1]);
    const int k = static_cast<int>(r / dims_[1]);
    return {i, j, k};
}

Vec3 Grid3::position(std::size_t idx) const {
    const auto c = ijk(idx);
    return position(c[0], c[1], c[2]);
}

long Grid3::neighbor(std::size_t idx, int d) const {
    auto c = ijk(idx);
    c[kAxisOf[d]] += kSignOf[d];
    const int a = kAxisOf[d];
    if (c[a] < 0 || c[a] >= dims_[a]) return -1;
    return static_cast<long>(index(c[0], c[1], c[2]));
}

const NodeStencil& Grid3::stencil(std::size_t idx) const {
    if (!in_domain(idx)) throw std::invalid_argument("Grid3::stencil: exterior node");
    return stencils_[unknown_[idx]];
}

std::size_t Grid3::count(NodeKind k) const { return static_cast<std::size_t>(std::count(kind_.begin(), kind_.end(), k)); }

GridPtr build_grid(const SupportBody& body, int resolution) {
    if (resolution < 9) throw std::invalid_argument("build_grid: resolution must be >= 9");
    auto g = std::shared_ptr<Grid3>(new Grid3());
    g->body_ = std::make_shared<SupportBody>(body);
    g->resolution_ = resolution;
    const AxisBox box = bounding_box(body);
    const Vec3 ext = box.hi - box.lo;
    const double h = ext.maxCoeff() / (resolution - 1);
    g->h_ = h;
    for (int a = 0; a < 3; ++a) {
        const int cells = std::max(1, static_cast<int>(std::ceil(ext[a] / h - 1e-9)));
        g->dims_[a] = cells + 1 + 4;
        const double pad = 0.5 * (cells * h - ext[a]);
        g->origin_[a] = box.lo[a] - 2 * h - pad;
    }
    const std::size_t n = static_cast<std::size_t>(g->dims_[0]) * g->dims_[1] * g->dims_[2];
    g->kind_.assign(n, NodeKind::Exterior);
    g->sdf_.assign(n, 0.0);
    g->normal_.assign(n, Vec3::UnitX());

    // Signed distance. A scan over the level-2 directions (a prefix of every
    // finer icosphere) bounds phi from below within err; only nodes whose
    // bound leaves them near the wall get the full scan and the ascent.
    const SphereGrid& sg = body.grid();
    const auto& dirs = sg.directions();
    const auto& hs = body.samples();
    const std::size_t m = dirs.size();
    const std::size_t mc = sg.level() > 2 ? 162 : m;
    double cover = 0;
    for (std::size_t j = 0; j < m; ++j) {
        double best = -1;
        for (std::size_t i = 0; i < mc; ++i) best = std::max(best, dirs[j].dot(dirs[i]));
        cover = std::max(cover, std::acos(std::min(1.0, best)));
    }
    const double err = mc == m ? 0.0 : cover * cover * diameter_bound(body);
    auto scan = [&](const Vec3& x, std::size_t count, double& val, Vec3& nrm) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t j = 0; j < count; ++j) {
            const double v = x[0] * dirs[j][0] + x[1] * dirs[j][1] + x[2] * dirs[j][2] - hs[j];
            if (v > best) {
                best = v;
                arg = j;
            }
        }
        val = best;
        nrm = dirs[arg];
    };
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 x = g->position(i);
        scan(x, mc, g->sdf_[i], g->normal_[i]);
        const double lo = g->sdf_[i];
        if (mc == m || lo < -(3 * h + err) || lo > 3 * h) continue;
        scan(x, m, g->sdf_[i], g->normal_[i]);
        if (body.analytic() && std::abs(g->sdf_[i]) <= 3 * h) {
            const SignedDistance sd = signed_distance_from(body, x, g->normal_[i]);
            if (sd.value >= g->sdf_[i]) {
                g->sdf_[i] = sd.value;
                g->normal_[i] = sd.normal;
            }
        }
    }
    if (mc == m && body.analytic()) {
        for (std::size_t i = 0; i < n; ++i) {
            if (std::abs(g->sdf_[i]) > 3 * h) continue;
            const SignedDistance sd = signed_distance_from(body, g->position(i), g->normal_[i]);
            if (sd.value >= g->sdf_[i]) {
                g->sdf_[i] = sd.value;
                g->normal_[i] = sd.normal;
            }
        }
    }

    const double delta = 1e-3 * h;
    for (std::size_t i = 0; i < n; ++i)
        if (g->sdf_[i] < -delta) g->kind_[i] = NodeKind::Interior;

    g->fractions_.assign(n, {1, 1, 1, 1, 1, 1});
    g->unknown_.assign(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        if (!g->in_domain(i)) continue;
        g->unknown_[i] = static_cast<long>(g->domain_.size());
        g->domain_.push_back(i);
        const Vec3 x = g->position(i);
        for (int d = 0; d < Grid3::kDirs; ++d) {
            const long nb = g->neighbor(i, d);
            if (nb < 0) throw std::logic_error("build_grid: in-domain node on the box boundary");
            if (g->in_domain(nb)) continue;
            g->kind_[i] = NodeKind::BoundaryAdjacent;
            const double fnb = g->sdf_[nb];
            if (fnb < 0) continue;  // neighbour lies within delta of the wall
            Vec3 e = Vec3::Zero();
            e[kAxisOf[d]] = kSignOf[d] * h;
            Vec3 warm = g->normal_[i];
            auto phi = [&](double s) {
                const SignedDistance sd = body.analytic() ? signed_distance_from(body, x + s * e, warm)
                                                          : signed_distance(body, x + s * e);
                warm = sd.normal;
                return sd.value;
            };
            const double frac = illinois_root(phi, g->sdf_[i], fnb);
            g->fractions_[i][d] = std::clamp(frac, 1e-9, 1.0);
        }
    }
    g->build_stencils();
    g->build_weights();
    return g;
}

void Grid3::build_stencils() {
    stencils_.assign(domain_.size(), {});
    cross_fallbacks_ = 0;
    const double h2 = h_ * h_;
    for (std::size_t u = 0; u < domain_.size(); ++u) {
        const std::size_t idx = domain_[u];
        NodeStencil& st = stencils_[u];
        auto add = [&](std::size_t node, int comp, double c) {
            for (std::size_t k = 0; k < st.nodes.size(); ++k) {
                if (st.nodes[k] == node) {
                    st.coef[k][comp] += c;
                    return;
                }
            }
            st.nodes.push_back(node);
            std::array<double, 9> z{};
            z[comp] = c;
            st.coef.push_back(z);
        };
        add(idx, 0, 0.0);
        // Diagonal second derivatives and gradient: Shortley-Weller.
        for (int a = 0; a < 3; ++a) {
            const double am = fraction(idx, dir_of(a, -1)) * h_;
            const double bp = fraction(idx, dir_of(a, 1)) * h_;
            const long nm = neighbor(idx, dir_of(a, -1));
            const long np = neighbor(idx, dir_of(a, 1));
            const bool hm = nm >= 0 && in_domain(nm);
            const bool hp = np >= 0 && in_domain(np);
            add(idx, a, -2.0 / (am * bp));
            add(idx, 6 + a, (bp - am) / (am * bp));
            if (hp) {
                add(np, a, 2.0 / (bp * (am + bp)));
                add(np, 6 + a, am / (bp * (am + bp)));
            }
            if (hm) {
                add(nm, a, 2.0 / (am * (am + bp)));
                add(nm, 6 + a, -bp / (am * (am + bp)));
            }
        }
        // Cross derivatives from the quadrant formulas.
        const auto c = ijk(idx);
        bool fallback = false;
        const int pairs[3][3] = {{0, 1, 3}, {0, 2, 4}, {1, 2, 5}};
        for (const auto& pr : pairs) {
            const int ai = pr[0], aj = pr[1], comp = pr[2];
            auto node_at = [&](int si, int sj) -> long {
                auto q = c;
                q[ai] += si;
                q[aj] += sj;
                for (int a = 0; a < 3; ++a)
                    if (q[a] < 0 || q[a] >= dims_[a]) return -1;
                const std::size_t id = index(q[0], q[1], q[2]);
                return in_domain(id) ? static_cast<long>(id) : -1;
            };
            bool ok[2][2];
            for (int si = 0; si < 2; ++si)
                for (int sj = 0; sj < 2; ++sj) {
                    const int s1 = si ? 1 : -1, s2 = sj ? 1 : -1;
                    ok[si][sj] = node_at(s1, s2) >= 0 && node_at(s1, 0) >= 0 && node_at(0, s2) >= 0;
                }
            std::vector<std::pair<int, int>> use;
            if (ok[0][0] && ok[0][1] && ok[1][0] && ok[1][1]) use = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
            else if (ok[1][1] && ok[0][0]) use = {{1, 1}, {0, 0}};
            else if (ok[1][0] && ok[0][1]) use = {{1, 0}, {0, 1}};
            else {
                for (int si = 0; si < 2 && use.empty(); ++si)
                    for (int sj = 0; sj < 2 && use.empty(); ++sj)
                        if (ok[si][sj]) use = {{si, sj}};
            }
            if (use.empty()) {
                fallback = true;
                continue;
            }
            const double w = 1.0 / (static_cast<double>(use.size()) * h2);
            for (const auto& [si, sj] : use) {
                const int s1 = si ? 1 : -1, s2 = sj ? 1 : -1;
                const double sg = s1 * s2 * w;
                add(static_cast<std::size_t>(node_at(s1, s2)), comp, sg);
                add(static_cast<std::size_t>(node_at(s1, 0)), comp, -sg);
                add(static_cast<std::size_t>(node_at(0, s2)), comp, -sg);
                add(idx, comp, sg);
            }
        }
        if (fallback) ++cross_fallbacks_;
    }
}

void Grid3::build_weights() {
    const std::size_t n = size();
    weights_.assign(n, 0.0);
    const double h3 = h_ * h_ * h_;
    const double band = 0.5 * std::sqrt(3.0) * h_;
    const int sub = 6;
    for (std::size_t i = 0; i < n; ++i) {
        const double phi = sdf_[i];
        if (phi >= band) continue;
        double w = h3;
        if (phi > -band) {
            int inside = 0;
            const Vec3& nrm = normal_[i];
            for (int a = 0; a < sub; ++a)
                for (int b = 0; b < sub; ++b)
                    for (int c = 0; c < sub; ++c) {
                        const Vec3 d((a + 0.5) / sub - 0.5, (b + 0.5) / sub - 0.5, (c + 0.5) / sub - 0.5);
                        if (phi + h_ * nrm.dot(d) < 0) ++inside;
                    }
            w = h3 * inside / static_cast<double>(sub * sub * sub);
        }
        if (w == 0) continue;
        if (in_domain(i)) {
            weights_[i] += w;
            continue;
        }
        // Inside part of an exterior node's cell goes to its deepest face neighbour.
        long best = -1;
        for (int d = 0; d < kDirs; ++d) {
            const long nb = neighbor(i, d);
            if (nb >= 0 && in_domain(nb) && (best < 0 || sdf_[nb] < sdf_[best])) best = nb;
        }
        if (best < 0) {
            const auto c = ijk(i);
            for (int dk = -1; dk <= 1; ++dk)
                for (int dj = -1; dj <= 1; ++dj)
                    for (int di = -1; di <= 1; ++di) {
                        const int x = c[0] + di, y = c[1] + dj, z = c[2] + dk;
                        if (x < 0 || y < 0 || z < 0 || x >= dims_[0] || y >= dims_[1] || z >= dims_[2]) continue;
                        const std::size_t id = index(x, y, z);
                        if (in_domain(id) && (best < 0 || sdf_[id] < sdf_[best])) best = static_cast<long>(id);
                    }
        }
        if (best >= 0) weights_[best] += w;
    }
}

Field::Field(GridPtr g, double fill) : grid(std::move(g)) {
    if (!grid) throw std::invalid_argument("Field: null grid");
    values.assign(grid->size(), fill);
}

Field::Field(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
    if (!grid) throw std::invalid_argument("Field: null grid");
    if (values.size() != grid->size()) throw std::invalid_argument("Field: value count does not match grid");
}

Field Field::with_exterior(double value) const {
    Field out = *this;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (!grid->in_domain(i)) out.values[i] = value;
    return out;
}

JetPoint jet_at(const Field& field, std::size_t node) {
    const Grid3& g = *field.grid;
    if (node >= g.size() || !g.in_domain(node)) throw std::invalid_argument("jet_at: node is not in the domain");
    const NodeStencil& st = g.stencil(node);
    std::array<double, 9> acc{};
    for (std::size_t k = 0; k < st.nodes.size(); ++k) {
        const double v = field.values[st.nodes[k]];
        for (int c = 0; c < 9; ++c) acc[c] += st.coef[k][c] * v;
    }
    JetPoint j;
    j.value = field.values[node];
    j.hessian = {acc[0], acc[1], acc[2], acc[3], acc[4], acc[5]};
    j.gradient = Vec3(acc[6], acc[7], acc[8]);
    return j;
}

bool centered_hessian(const Field& field, std::size_t node, SymMat3& out) {
    const Grid3& g = *field.grid;
    if (!g.in_domain(node)) return false;
    const auto c = g.ijk(node);
    const auto& d = g.dims();
    auto val = [&](int di, int dj, int dk, double& v) {
        const int x = c[0] + di, y = c[1] + dj, z = c[2] + dk;
        if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) return false;
        const std::size_t id = g.index(x, y, z);
        if (!g.in_domain(id)) return false;
        v = field.values[id];
        return true;
    };
    const double h2 = g.h() * g.h();
    const double u0 = field.values[node];
    double m = 0, p = 0;
    std::array<double, 3> diag{};
    const int e[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    for (int a = 0; a < 3; ++a) {
        if (!val(-e[a][0], -e[a][1], -e[a][2], m) || !val(e[a][0], e[a][1], e[a][2], p)) return false;
        diag[a] = (p - 2 * u0 + m) / h2;
    }
    std::array<double, 3> cross{};
    const int pr[3][2] = {{0, 1}, {0, 2}, {1, 2}};
    for (int q = 0; q < 3; ++q) {
        const int a = pr[q][0], b = pr[q][1];
        double vpp, vpm, vmp, vmm;
        auto off = [&](int sa, int sb, double& v) {
            return val(sa * e[a][0] + sb * e[b][0], sa * e[a][1] + sb * e[b][1], sa * e[a][2] + sb * e[b][2], v);
        };
        if (!off(1, 1, vpp) || !off(1, -1, vpm) || !off(-1, 1, vmp) || !off(-1, -1, vmm)) return false;
        cross[q] = (vpp - vpm - vmp + vmm) / (4 * h2);
    }
    out = {diag[0], diag[1], diag[2], cross[0], cross[1], cross[2]};
    return true;
}

double lp_norm(const Field& field, double p) {
    if (!(p > 0)) throw std::invalid_argument("lp_norm: p must be positive");
    const Grid3& g = *field.grid;
    if (std::isinf(p)) {
        double m = 0;
        for (std::size_t idx : g.domain_nodes()) m = std::max(m, std::abs(field.values[idx]));
        return m;
    }
    double s = 0;
    for (std::size_t idx : g.domain_nodes()) s += g.weight(idx) * std::pow(std::abs(field.values[idx]), p);
    return std::pow(s, 1.0 / p);
}

double integrate(const Field& field) {
    double s = 0;
    for (std::size_t idx : field.grid->domain_nodes()) s += field.grid->weight(idx) * field.values[idx];
    return s;
}

Field min_hessian_eig_field(const Field& field) {
    Field out(field.grid, kNaN);
    for (std::size_t idx : field.grid->domain_nodes()) {
        SymMat3 hm;
        if (centered_hessian(field, idx, hm)) out.values[idx] = min_eigenvalue(hm);
    }
    return out;
}

bool trilinear(const Field& field, const Vec3& x, double& out) {
    const Grid3& g = *field.grid;
    const Vec3 r = (x - g.origin()) / g.h();
    int c[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        c[a] = static_cast<int>(std::floor(r[a]));
        if (c[a] < 0 || c[a] >= g.dims()[a] - 1) return false;
        f[a] = r[a] - c[a];
    }
    double acc = 0;
    for (int dk = 0; dk < 2; ++dk)
        for (int dj = 0; dj < 2; ++dj)
            for (int di = 0; di < 2; ++di) {
                const std::size_t id = g.index(c[0] + di, c[1] + dj, c[2] + dk);
                if (!g.in_domain(id)) return false;
                const double w = (di ? f[0] : 1 - f[0]) * (dj ? f[1] : 1 - f[1]) * (dk ? f[2] : 1 - f[2]);
                acc += w * field.values[id];
            }
    out = acc;
    return true;
}

nlohmann::json field_to_json(const Field& field) {
    const Grid3& g = *field.grid;
    nlohmann::json vals = nlohmann::json::array();
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (g.in_domain(i)) vals.push_back(field.values[i]);
        else vals.push_back(nullptr);
    }
    return {{"body", body_to_json(g.body())},
            {"resolution", g.resolution()},
            {"h", g.h()},
            {"origin", {g.origin()[0], g.origin()[1], g.origin()[2]}},
            {"dims", {g.dims()[0], g.dims()[1], g.dims()[2]}},
            {"values", vals}};
}

Field field_from_json(const nlohmann::json& j) {
    for (const char* key : {"body", "resolution", "values"})
        if (!j.contains(key)) throw std::invalid_argument(std::string("field snapshot: missing field '") + key + "'");
    const GridPtr g = build_grid(body_from_json(j.at("body")), j.at("resolution").get<int>());
    const auto& vals = j.at("values");
    if (!vals.is_array() || vals.size() != g->size())
        throw std::invalid_argument("field snapshot: field 'values' does not match the rebuilt grid");
    Field f(g, 0.0);
    for (std::size_t i = 0; i < g->size(); ++i) f.values[i] = vals[i].is_null() ? 0.0 : vals[i].get<double>();
    return f;
}

}  // namespace hbm
