#include "faultrom/deform.hpp"

#include <cmath>

#include "faultrom/error.hpp"

namespace faultrom::deform {

Point AffineDisplacement::operator()(const Eigen::VectorXd& mu_geom) const {
    Point s = constant;
    const auto n = std::min<std::size_t>(coeffs.size(), static_cast<std::size_t>(mu_geom.size()));
    for (std::size_t k = 0; k < n; ++k) s += mu_geom[static_cast<Eigen::Index>(k)] * coeffs[k];
    return s;
}

double rbf_kernel(double d) {
    if (d < 0.0) throw ConfigError("rbf_kernel: negative distance");
    return d / 0.2;
}

double side(const Point& x, const SlidingSurface& surface) {
    const double s = (x - surface.ref_point).dot(surface.normal);
    return s > 0.0 ? 1.0 : (s < 0.0 ? 0.0 : 0.5);
}

namespace {

bool on_fault(SetTag t) { return t == SetTag::Cdf || t == SetTag::Csf; }
bool is_displacement(SetTag t) { return t == SetTag::Cd || t == SetTag::Cdf; }

double nxor(double a, double b) { return a == b ? 1.0 : 0.0; }

const SlidingSurface* fault_surface(const DeformConfig& c, int index) {
    return index < 0 ? nullptr : &c.surfaces[index];
}

}  // namespace

double influence(const Point& x, int x_side, const ControlPoint& cp, const SlidingSurface* fault) {
    if (!on_fault(cp.set)) return 1.0;
    if (!fault) throw ConfigError("fault control point without a sliding fault surface");
    if (cp.side != 0 && cp.side != 1) throw ConfigError("fault control point without a side flag");
    const double cs = static_cast<double>(cp.side);
    if (x_side == 0 || x_side == 1) return nxor(static_cast<double>(x_side), cs);
    const Point r = x - fault->ref_point;
    const double dist = r.norm();
    if (dist == 0.0) return 0.0;
    return std::abs(r.dot(fault->normal)) / dist * nxor(side(x, *fault), cs);
}

int validate(const DeformConfig& c) {
    if (c.dim != 2 && c.dim != 3) throw ConfigError("deformation dimension must be 2 or 3");
    int fault = -1;
    for (std::size_t i = 0; i < c.surfaces.size(); ++i) {
        const auto& s = c.surfaces[i];
        if (std::abs(s.normal.norm() - 1.0) > 1e-12) throw ConfigError("surface normal is not unit");
        if (static_cast<int>(s.tangents.size()) != c.dim - 1) throw ConfigError("surface needs dim-1 tangents");
        for (std::size_t a = 0; a < s.tangents.size(); ++a) {
            if (std::abs(s.tangents[a].norm() - 1.0) > 1e-12) throw ConfigError("surface tangent is not unit");
            if (std::abs(s.tangents[a].dot(s.normal)) > 1e-12) throw ConfigError("surface tangent not normal-orthogonal");
            for (std::size_t b = 0; b < a; ++b)
                if (std::abs(s.tangents[a].dot(s.tangents[b])) > 1e-12) throw ConfigError("surface tangents not orthogonal");
        }
        if (s.is_fault) {
            if (fault >= 0) throw ConfigError("only one sliding fault surface is supported");
            fault = static_cast<int>(i);
        }
    }
    for (const auto& cp : c.controls) {
        if (!is_displacement(cp.set) && (cp.surface < 0 || cp.surface >= static_cast<int>(c.surfaces.size())))
            throw ConfigError("sliding control point without a valid surface");
        if (on_fault(cp.set) && fault < 0) throw ConfigError("fault control point but no sliding fault surface");
        if (on_fault(cp.set) && cp.side != 0 && cp.side != 1) throw ConfigError("fault control point needs side 0 or 1");
    }
    if (c.controls.empty()) throw ConfigError("deformation needs at least one control point");
    return fault;
}

RbfSystem assemble_system(const DeformConfig& c, const Eigen::VectorXd& mu_geom) {
    const int fault_idx = validate(c);
    const SlidingSurface* fault = fault_surface(c, fault_idx);
    const int D = c.dim;
    const auto l = static_cast<Eigen::Index>(c.controls.size());
    RbfSystem sys;
    sys.dim = D;
    sys.matrix = Eigen::MatrixXd::Zero(D * l, D * l);
    sys.rhs = Eigen::VectorXd::Zero(D * l);

    // G_ij = influence(x_i, x_j) g(|x_i - x_j|).
    Eigen::MatrixXd G(l, l);
    for (Eigen::Index i = 0; i < l; ++i) {
        const auto& ci = c.controls[i];
        const int xi_side = on_fault(ci.set) ? ci.side : -1;
        for (Eigen::Index j = 0; j < l; ++j) {
            const auto& cj = c.controls[j];
            G(i, j) = influence(ci.position, xi_side, cj, fault) * rbf_kernel((ci.position - cj.position).norm());
        }
    }
    for (Eigen::Index i = 0; i < l; ++i) {
        const auto& ci = c.controls[i];
        const Eigen::Index row = D * i;
        if (is_displacement(ci.set)) {
            const Point s = ci.displacement(mu_geom);
            for (int d = 0; d < D; ++d) {
                for (Eigen::Index j = 0; j < l; ++j) sys.matrix(row + d, D * j + d) = G(i, j);
                sys.rhs[row + d] = s[d];
            }
        } else {
            const auto& surf = c.surfaces[ci.surface];
            for (Eigen::Index j = 0; j < l; ++j)
                for (int d = 0; d < D; ++d) sys.matrix(row, D * j + d) = G(i, j) * surf.normal[d];
            for (int t = 0; t < D - 1; ++t)
                for (int d = 0; d < D; ++d) sys.matrix(row + 1 + t, D * i + d) = surf.tangents[t][d];
        }
    }
    return sys;
}

Eigen::VectorXd solve_system(const RbfSystem& sys, const DeformConfig& c) {
    const Eigen::Index n = sys.matrix.rows();
    const Eigen::MatrixXd reg = sys.matrix + c.regularization * Eigen::MatrixXd::Identity(n, n);
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(reg);
    Eigen::VectorXd z = lu.solve(sys.rhs);
    for (int k = 0; k < c.refinement_steps; ++k) {
        const Eigen::VectorXd r = sys.rhs - sys.matrix * z;
        if (r.lpNorm<Eigen::Infinity>() == 0.0) break;
        z += lu.solve(r);
    }
    if (!z.allFinite() || (sys.rhs - sys.matrix * z).lpNorm<Eigen::Infinity>() >
                              1e-10 * std::max(1.0, sys.rhs.lpNorm<Eigen::Infinity>()))
        throw NumericalError("deformation system is singular beyond regularization (rcond estimate " +
                             std::to_string(lu.rcond()) + ")");
    return z;
}

Point displacement_at(const Point& x, int x_side, const DeformConfig& c, const Eigen::VectorXd& zeta) {
    const SlidingSurface* fault = nullptr;
    for (const auto& s : c.surfaces)
        if (s.is_fault) fault = &s;
    Point s = Point::Zero();
    for (std::size_t j = 0; j < c.controls.size(); ++j) {
        const auto& cj = c.controls[j];
        const double w = influence(x, x_side, cj, fault) * rbf_kernel((x - cj.position).norm());
        if (w == 0.0) continue;
        for (int d = 0; d < c.dim; ++d) s[d] += w * zeta[static_cast<Eigen::Index>(c.dim * j + d)];
    }
    return s;
}

std::vector<int> node_side_values(const mesh::MixedDimMesh& m, const DeformConfig& c) {
    std::vector<int> out(m.matrix.num_nodes(), -1);
    const SlidingSurface* fault = nullptr;
    for (const auto& s : c.surfaces)
        if (s.is_fault) fault = &s;
    if (!fault || fault->fault_id < 0) return out;
    const int fi = m.fault_index(fault->fault_id);
    if (fi < 0) throw ConfigError("sliding surface refers to unknown fault " + std::to_string(fault->fault_id));
    int side_value[2] = {-1, -1};
    for (const auto& cpl : m.couplings) {
        if (cpl.fault_index != fi || cpl.matrix_face_ids.empty()) continue;
        const int f = cpl.matrix_face_ids.front();
        const double b = side(m.matrix.cell_centers[m.matrix.face_cells[f][0]], *fault);
        if (b == 0.5) throw ConfigError("fault-adjacent cell centre lies on the sliding surface");
        side_value[static_cast<int>(cpl.side)] = static_cast<int>(b);
    }
    const auto sides = mesh::fault_node_sides(m, fi);
    for (std::size_t n = 0; n < sides.size(); ++n)
        if (sides[n] == 0 || sides[n] == 1) out[n] = side_value[sides[n]];
    return out;
}

mesh::MixedDimMesh displace(const mesh::MixedDimMesh& m, const Eigen::VectorXd& zeta, const DeformConfig& c) {
    if (c.dim != m.dim) throw ConfigError("deformation dimension differs from mesh dimension");
    const auto sides = node_side_values(m, c);
    std::vector<Point> coords = m.matrix.node_coords;
    for (std::size_t n = 0; n < coords.size(); ++n) coords[n] += displacement_at(coords[n], sides[n], c, zeta);
    return mesh::with_node_coords(m, coords);
}

mesh::MixedDimMesh deform_mesh(const mesh::MixedDimMesh& m, const DeformConfig& c, const Eigen::VectorXd& mu_geom) {
    return displace(m, solve_system(assemble_system(c, mu_geom), c), c);
}

ConstraintResiduals constraint_residuals(const DeformConfig& c, const Eigen::VectorXd& zeta,
                                         const Eigen::VectorXd& mu_geom) {
    ConstraintResiduals r;
    for (const auto& cp : c.controls) {
        const int s = on_fault(cp.set) ? cp.side : -1;
        const Point moved = displacement_at(cp.position, s, c, zeta);
        if (is_displacement(cp.set)) {
            const Point target = cp.displacement(mu_geom);
            r.displacement = std::max(r.displacement, (moved - target).norm() / std::max(1.0, target.norm()));
        } else {
            r.sliding = std::max(r.sliding, std::abs(moved.dot(c.surfaces[cp.surface].normal)));
        }
    }
    return r;
}

namespace {

using nlohmann::json;

Point to_point(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() < 2 || v.size() > 3) throw ConfigError("vector must have 2 or 3 entries");
    return Point(v[0], v[1], v.size() == 3 ? v[2] : 0.0);
}

json from_point(const Point& p, int dim) {
    return dim == 2 ? json{p.x(), p.y()} : json{p.x(), p.y(), p.z()};
}

SetTag parse_set(const std::string& s) {
    if (s == "C_d") return SetTag::Cd;
    if (s == "C_df") return SetTag::Cdf;
    if (s == "C_s") return SetTag::Cs;
    if (s == "C_sf") return SetTag::Csf;
    throw ConfigError("unknown control point set '" + s + "'");
}

const char* set_name(SetTag t) {
    switch (t) {
        case SetTag::Cd: return "C_d";
        case SetTag::Cdf: return "C_df";
        case SetTag::Cs: return "C_s";
        case SetTag::Csf: return "C_sf";
    }
    return "";
}

}  // namespace

DeformConfig config_from_json(const json& doc) {
    DeformConfig c;
    try {
        c.dim = doc.value("dim", 2);
        c.regularization = doc.value("regularization", 1e-12);
        std::vector<int> surface_ids;
        for (const auto& s : doc.value("surfaces", json::array())) {
            SlidingSurface surf;
            surf.id = s.at("id").get<int>();
            surf.normal = to_point(s.at("normal"));
            for (const auto& t : s.at("tangents")) surf.tangents.push_back(to_point(t));
            surf.ref_point = to_point(s.at("ref_point"));
            surf.is_fault = s.value("is_fault", false);
            surf.fault_id = s.value("fault_id", -1);
            surface_ids.push_back(surf.id);
            c.surfaces.push_back(std::move(surf));
        }
        for (const auto& j : doc.at("controls")) {
            ControlPoint cp;
            cp.position = to_point(j.at("pos"));
            cp.set = parse_set(j.at("set").get<std::string>());
            cp.node = j.value("node", -1);
            cp.side = j.value("side", -1);
            if (j.contains("displacement_expr")) {
                const auto& e = j.at("displacement_expr");
                cp.displacement.constant = to_point(e.at("constant"));
                for (const auto& k : e.value("coeffs", json::array())) cp.displacement.coeffs.push_back(to_point(k));
            }
            if (j.contains("surface")) {
                const int id = j.at("surface").get<int>();
                const auto it = std::find(surface_ids.begin(), surface_ids.end(), id);
                if (it == surface_ids.end()) throw ConfigError("control point refers to unknown surface " + std::to_string(id));
                cp.surface = static_cast<int>(it - surface_ids.begin());
            }
            const bool disp = is_displacement(cp.set);
            if (disp == j.contains("surface") || disp != j.contains("displacement_expr"))
                throw ConfigError("control point needs exactly one of displacement_expr / surface for its set");
            c.controls.push_back(std::move(cp));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed deformation config: ") + e.what());
    }
    validate(c);
    return c;
}

json config_to_json(const DeformConfig& c) {
    json surfaces = json::array(), controls = json::array();
    for (const auto& s : c.surfaces) {
        json t = json::array();
        for (const auto& v : s.tangents) t.push_back(from_point(v, c.dim));
        surfaces.push_back({{"id", s.id},
                            {"normal", from_point(s.normal, c.dim)},
                            {"tangents", t},
                            {"ref_point", from_point(s.ref_point, c.dim)},
                            {"is_fault", s.is_fault},
                            {"fault_id", s.fault_id}});
    }
    for (const auto& cp : c.controls) {
        json j{{"pos", from_point(cp.position, c.dim)}, {"set", set_name(cp.set)}};
        if (cp.node >= 0) j["node"] = cp.node;
        if (cp.side >= 0) j["side"] = cp.side;
        if (is_displacement(cp.set)) {
            json coeffs = json::array();
            for (const auto& k : cp.displacement.coeffs) coeffs.push_back(from_point(k, c.dim));
            j["displacement_expr"] = {{"constant", from_point(cp.displacement.constant, c.dim)}, {"coeffs", coeffs}};
        } else {
            j["surface"] = c.surfaces[cp.surface].id;
        }
        controls.push_back(std::move(j));
    }
    return {{"dim", c.dim}, {"regularization", c.regularization}, {"surfaces", surfaces}, {"controls", controls}};
}

}  // namespace faultrom::deform
