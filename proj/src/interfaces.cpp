#include <algorithm>
#include <cmath>

#include "faultrom/error.hpp"
#include "faultrom/meshkit.hpp"

namespace faultrom::mesh {

void assign_layout(MixedDimMesh& mesh) {
    DofLayout& l = mesh.layout;
    l.p = 0;
    l.p_gamma = mesh.matrix.num_cells();
    std::size_t at = l.p_gamma;
    mesh.fault_offsets.clear();
    for (const auto& f : mesh.faults) {
        mesh.fault_offsets.push_back(at);
        at += f.grid.num_cells();
    }
    mesh.intersection_offset = at;
    at += mesh.intersections.size();
    l.lambda = at;
    for (auto& c : mesh.couplings) {
        c.lambda_offset = at;
        at += c.fault_cell_ids.size();
    }
    mesh.branch_lambda_offset = at;
    for (const auto& ix : mesh.intersections) at += ix.branches.size();
    l.total = at;
}

namespace {

bool boxes_overlap(const std::vector<Point>& a, const std::vector<Point>& b, double pad) {
    for (int d = 0; d < 3; ++d) {
        double alo = a[0][d], ahi = a[0][d], blo = b[0][d], bhi = b[0][d];
        for (const auto& p : a) alo = std::min(alo, p[d]), ahi = std::max(ahi, p[d]);
        for (const auto& p : b) blo = std::min(blo, p[d]), bhi = std::max(bhi, p[d]);
        if (ahi + pad < blo || bhi + pad < alo) return false;
    }
    return true;
}

}  // namespace

void build_interfaces_inplace(MixedDimMesh& mesh) {
    const Subdomain& m = mesh.matrix;
    for (auto& c : mesh.couplings) {
        const Fault& fault = mesh.faults[c.fault_index];
        const Subdomain& g = fault.grid;
        std::vector<std::vector<Point>> face_pts(c.matrix_face_ids.size());
        for (std::size_t i = 0; i < face_pts.size(); ++i)
            for (int n : m.faces[c.matrix_face_ids[i]]) face_pts[i].push_back(m.node_coords[n]);

        std::vector<Eigen::Triplet<double>> trip;
        for (std::size_t k = 0; k < c.fault_cell_ids.size(); ++k) {
            const int cell = c.fault_cell_ids[k];
            std::vector<Point> cell_pts;
            for (int n : g.cells[cell]) cell_pts.push_back(g.node_coords[n]);
            const double measure = g.cell_measures[cell];
            const double pad = 1e-9 * std::sqrt(measure);
            double total = 0.0;
            for (std::size_t i = 0; i < face_pts.size(); ++i) {
                if (!boxes_overlap(cell_pts, face_pts[i], pad)) continue;
                const double ov = g.dim == 1 ? geom::segment_overlap(cell_pts[0], cell_pts[1], face_pts[i][0], face_pts[i][1])
                                             : geom::polygon_overlap(cell_pts, face_pts[i], fault.cell_normals[cell]);
                if (ov > 1e-12 * measure) {
                    trip.emplace_back(static_cast<int>(k), static_cast<int>(i), ov / measure);
                    total += ov;
                }
            }
            if (total <= 0.0)
                throw NumericalError("fault " + std::to_string(fault.id) + " cell " + std::to_string(cell) +
                                     " has no overlap with its matrix faces");
        }
        c.projection.resize(static_cast<Eigen::Index>(c.fault_cell_ids.size()),
                            static_cast<Eigen::Index>(c.matrix_face_ids.size()));
        c.projection.setFromTriplets(trip.begin(), trip.end());
    }
    assign_layout(mesh);
}

MixedDimMesh build_interfaces(MixedDimMesh mesh) {
    build_interfaces_inplace(mesh);
    return mesh;
}

std::vector<int> fault_node_sides(const MixedDimMesh& mesh, int fault_index) {
    std::vector<int> side(mesh.matrix.num_nodes(), -1);
    for (const auto& c : mesh.couplings) {
        if (c.fault_index != fault_index) continue;
        const int s = static_cast<int>(c.side);
        for (int f : c.matrix_face_ids)
            for (int n : mesh.matrix.faces[f]) side[n] = (side[n] == -1 || side[n] == s) ? s : 2;
    }
    return side;
}

MixedDimMesh with_node_coords(const MixedDimMesh& mesh, const std::vector<Point>& coords) {
    if (coords.size() != mesh.matrix.num_nodes()) throw ConfigError("node coordinate count mismatch");
    MixedDimMesh out = mesh;
    out.matrix.node_coords = coords;
    if (out.dim == 3) out.base.reset();
    update_geometry(out);
    return out;
}

MixedDimMesh resample_fault(const MixedDimMesh& mesh, int fault_index, const std::vector<double>& fractions) {
    if (mesh.dim != 2) throw ConfigError("resample_fault supports 2D meshes only");
    if (fault_index < 0 || static_cast<std::size_t>(fault_index) >= mesh.faults.size())
        throw ConfigError("fault index out of range");
    if (fractions.size() < 2 || fractions.front() != 0.0 || fractions.back() != 1.0 ||
        !std::is_sorted(fractions.begin(), fractions.end()) ||
        std::adjacent_find(fractions.begin(), fractions.end()) != fractions.end())
        throw ConfigError("fractions must increase strictly from 0 to 1");
    MixedDimMesh out = mesh;
    Fault& fault = out.faults[fault_index];
    for (auto k : fault.face_kind)
        if (k == FaultFaceKind::Branch) throw ConfigError("cannot resample a fault with intersections");
    const Subdomain& old = mesh.faults[fault_index].grid;
    const auto& old_fault = mesh.faults[fault_index];
    int first_face = -1, last_face = -1;
    for (std::size_t f = 0; f < old.num_faces(); ++f) {
        if (old.faces[f][0] == 0) first_face = static_cast<int>(f);
        if (old.faces[f][0] == static_cast<int>(old.num_nodes()) - 1) last_face = static_cast<int>(f);
    }

    Subdomain g;
    g.dim = 1;
    g.ambient = 2;
    const int a = fault.polyline.front(), b = fault.polyline.back();
    fault.anchor_nodes.clear();
    fault.anchor_weights.clear();
    for (double s : fractions) {
        g.node_coords.push_back(Point::Zero());
        fault.anchor_nodes.push_back({a, b});
        fault.anchor_weights.push_back(s);
    }
    const int n_cells = static_cast<int>(fractions.size()) - 1;
    for (int j = 0; j < n_cells; ++j) g.cells.push_back({j, j + 1});
    g.cell_region.assign(n_cells, 0);
    g.cell_faces.assign(n_cells, {});
    fault.face_kind.clear();
    fault.face_matrix_face.clear();
    fault.face_intersection.clear();
    for (int j = 0; j <= n_cells; ++j) {
        const int f = static_cast<int>(g.faces.size());
        g.faces.push_back({j});
        if (j == 0 || j == n_cells) {
            const int src = j == 0 ? first_face : last_face;
            const int c = j == 0 ? 0 : n_cells - 1;
            g.face_cells.push_back({c, -1});
            g.cell_faces[c].push_back(f);
            fault.face_kind.push_back(old_fault.face_kind[src]);
            fault.face_matrix_face.push_back(old_fault.face_matrix_face[src]);
        } else {
            g.face_cells.push_back({j - 1, j});
            g.cell_faces[j - 1].push_back(f);
            g.cell_faces[j].push_back(f);
            fault.face_kind.push_back(FaultFaceKind::Interior);
            fault.face_matrix_face.push_back(-1);
        }
        fault.face_intersection.push_back(-1);
    }
    g.face_tag.assign(g.num_faces(), -1);
    fault.grid = std::move(g);
    for (auto& c : out.couplings) {
        if (c.fault_index != fault_index) continue;
        c.fault_cell_ids.resize(n_cells);
        for (int j = 0; j < n_cells; ++j) c.fault_cell_ids[j] = j;
    }
    update_geometry(out);
    return out;
}

MixedDimMesh extrude(const MixedDimMesh& mesh2d, int layers, double height) {
    if (layers <= 0) throw ConfigError("extrusion needs at least one layer");
    if (!(height > 0.0)) throw ConfigError("extrusion height must be positive");
    if (mesh2d.dim != 2) throw ConfigError("only 2D meshes can be extruded");
    if (!mesh2d.intersections.empty()) throw ConfigError("extrusion of meshes with intersections is not supported");

    const Subdomain& m2 = mesh2d.matrix;
    const int n2 = static_cast<int>(m2.num_nodes());
    const int c2 = static_cast<int>(m2.num_cells());
    const int f2 = static_cast<int>(m2.num_faces());
    const int L = layers;

    MixedDimMesh out;
    out.dim = 3;
    out.tag_names = mesh2d.tag_names;
    for (const char* name : {"zmin", "zmax"})
        if (out.tag_index(name) < 0) out.tag_names.emplace_back(name);
    const int tag_zmin = out.tag_index("zmin"), tag_zmax = out.tag_index("zmax");

    Subdomain& m = out.matrix;
    m.dim = 3;
    m.ambient = 3;
    for (int k = 0; k <= L; ++k)
        for (int n = 0; n < n2; ++n) {
            Point p = m2.node_coords[n];
            p.z() = height * static_cast<double>(k) / L;
            m.node_coords.push_back(p);
        }
    auto node = [&](int n, int k) { return n + k * n2; };
    for (int k = 0; k < L; ++k)
        for (int c = 0; c < c2; ++c) {
            std::vector<int> nodes;
            for (int n : m2.cells[c]) nodes.push_back(node(n, k));
            for (int n : m2.cells[c]) nodes.push_back(node(n, k + 1));
            m.cells.push_back(std::move(nodes));
            m.cell_region.push_back(m2.cell_region[c]);
        }
    m.cell_faces.assign(m.num_cells(), {});
    auto cell3 = [&](int c, int k) { return c < 0 ? -1 : k * c2 + c; };
    // Lateral faces: id k*f2 + f.
    for (int k = 0; k < L; ++k)
        for (int f = 0; f < f2; ++f) {
            int a = m2.faces[f][0], b = m2.faces[f][1];
            const Point t = m2.node_coords[b] - m2.node_coords[a];
            const Point right(t.y(), -t.x(), 0.0);
            if (right.dot(m2.face_centers[f] - m2.cell_centers[m2.face_cells[f][0]]) < 0.0) std::swap(a, b);
            const int id = static_cast<int>(m.faces.size());
            m.faces.push_back({node(a, k), node(b, k), node(b, k + 1), node(a, k + 1)});
            m.face_cells.push_back({cell3(m2.face_cells[f][0], k), cell3(m2.face_cells[f][1], k)});
            m.face_tag.push_back(m2.face_tag[f]);
            for (int c : m.face_cells.back())
                if (c >= 0) m.cell_faces[c].push_back(id);
        }
    // Horizontal faces at level k: ids L*f2 + k*c2 + c.
    for (int k = 0; k <= L; ++k)
        for (int c = 0; c < c2; ++c) {
            std::vector<int> loop;
            for (int n : m2.cells[c]) loop.push_back(node(n, k));
            const int id = static_cast<int>(m.faces.size());
            if (k == 0) {
                std::reverse(loop.begin(), loop.end());
                m.face_cells.push_back({cell3(c, 0), -1});
                m.face_tag.push_back(tag_zmin);
            } else if (k == L) {
                m.face_cells.push_back({cell3(c, L - 1), -1});
                m.face_tag.push_back(tag_zmax);
            } else {
                m.face_cells.push_back({cell3(c, k - 1), cell3(c, k)});
                m.face_tag.push_back(-1);
            }
            m.faces.push_back(std::move(loop));
            for (int cc : m.face_cells.back())
                if (cc >= 0) m.cell_faces[cc].push_back(id);
        }

    for (const auto& f2d : mesh2d.faults) {
        Fault fault;
        fault.id = f2d.id;
        Subdomain& g = fault.grid;
        const Subdomain& g1 = f2d.grid;
        g.dim = 2;
        g.ambient = 3;
        const int nn = static_cast<int>(g1.num_nodes());
        const int nc = static_cast<int>(g1.num_cells());
        const int nf = static_cast<int>(g1.num_faces());
        for (int k = 0; k <= L; ++k)
            for (int j = 0; j < nn; ++j) {
                g.node_coords.push_back(Point::Zero());
                const auto [a, b] = f2d.anchor_nodes[j];
                fault.anchor_nodes.push_back({node(a, k), node(b, k)});
                fault.anchor_weights.push_back(f2d.anchor_weights[j]);
            }
        auto gnode = [&](int j, int k) { return j + k * nn; };
        for (int k = 0; k < L; ++k)
            for (int i = 0; i < nc; ++i) {
                const int j0 = g1.cells[i][0], j1 = g1.cells[i][1];
                g.cells.push_back({gnode(j0, k), gnode(j0, k + 1), gnode(j1, k + 1), gnode(j1, k)});
                g.cell_region.push_back(0);
            }
        g.cell_faces.assign(g.num_cells(), {});
        auto gcell = [&](int i, int k) { return i < 0 ? -1 : k * nc + i; };
        auto add = [&](std::vector<int> nodes, std::array<int, 2> cells, FaultFaceKind kind, int matrix_face) {
            const int id = static_cast<int>(g.faces.size());
            g.faces.push_back(std::move(nodes));
            g.face_cells.push_back(cells);
            for (int c : cells)
                if (c >= 0) g.cell_faces[c].push_back(id);
            fault.face_kind.push_back(kind);
            fault.face_matrix_face.push_back(matrix_face);
            fault.face_intersection.push_back(-1);
        };
        for (int k = 0; k < L; ++k)
            for (int f = 0; f < nf; ++f) {
                const int j = g1.faces[f][0];
                const int mf = f2d.face_matrix_face[f];
                add({gnode(j, k), gnode(j, k + 1)}, {gcell(g1.face_cells[f][0], k), gcell(g1.face_cells[f][1], k)},
                    f2d.face_kind[f], mf < 0 ? -1 : k * f2 + mf);
            }
        // Matrix cell on the - side of every fault cell, for the horizontal end faces.
        std::vector<int> minus_cell(nc, -1);
        for (const auto& c2d : mesh2d.couplings)
            if (c2d.fault_id == f2d.id && c2d.side == Side::Minus)
                for (std::size_t q = 0; q < c2d.fault_cell_ids.size(); ++q)
                    if (minus_cell[c2d.fault_cell_ids[q]] < 0)
                        minus_cell[c2d.fault_cell_ids[q]] = m2.face_cells[c2d.matrix_face_ids[q]][0];
        for (int k = 0; k <= L; ++k)
            for (int i = 0; i < nc; ++i) {
                const int j0 = g1.cells[i][0], j1 = g1.cells[i][1];
                const int end_face = minus_cell[i] < 0 ? -1 : L * f2 + k * c2 + minus_cell[i];
                if (k == 0)
                    add({gnode(j0, 0), gnode(j1, 0)}, {gcell(i, 0), -1}, FaultFaceKind::External, end_face);
                else if (k == L)
                    add({gnode(j0, L), gnode(j1, L)}, {gcell(i, L - 1), -1}, FaultFaceKind::External, end_face);
                else
                    add({gnode(j0, k), gnode(j1, k)}, {gcell(i, k - 1), gcell(i, k)}, FaultFaceKind::Interior, -1);
            }
        g.face_tag.assign(g.num_faces(), -1);
        out.faults.push_back(std::move(fault));
    }
    for (const auto& c2d : mesh2d.couplings) {
        InterfaceCoupling c;
        c.fault_index = c2d.fault_index;
        c.fault_id = c2d.fault_id;
        c.side = c2d.side;
        const int nc = static_cast<int>(mesh2d.faults[c2d.fault_index].grid.num_cells());
        for (int k = 0; k < L; ++k) {
            for (int f : c2d.matrix_face_ids) c.matrix_face_ids.push_back(k * f2 + f);
            for (int i : c2d.fault_cell_ids) c.fault_cell_ids.push_back(k * nc + i);
        }
        out.couplings.push_back(std::move(c));
    }
    out.extrusion = {layers, height};
    out.base = std::make_shared<const MixedDimMesh>(mesh2d);
    update_geometry(out);
    return out;
}

}  // namespace faultrom::mesh
