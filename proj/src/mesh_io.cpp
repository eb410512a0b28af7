#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "faultrom/error.hpp"
#include "faultrom/meshkit.hpp"

namespace faultrom::mesh {

namespace {

using nlohmann::json;

struct UnionFind {
    std::vector<int> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    int find(int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

std::pair<int, int> key(int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; }

template <typename T>
T field(const json& doc, const char* name) {
    if (!doc.contains(name)) throw ConfigError(std::string("mesh document lacks '") + name + "'");
    try {
        return doc.at(name).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed '") + name + "': " + e.what());
    }
}

void check_node(int n, std::size_t count, const char* what) {
    if (n < 0 || static_cast<std::size_t>(n) >= count)
        throw ConfigError(std::string("node index out of range in ") + what + ": " + std::to_string(n));
}

void build_matrix_2d(Subdomain& g) {
    std::map<std::pair<int, int>, int> edge_face;
    g.cell_faces.assign(g.num_cells(), {});
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const auto& nodes = g.cells[c];
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const int a = nodes[i];
            const int b = nodes[(i + 1) % nodes.size()];
            const auto k = key(a, b);
            auto it = edge_face.find(k);
            if (it == edge_face.end()) {
                const int f = static_cast<int>(g.faces.size());
                edge_face.emplace(k, f);
                g.faces.push_back({a, b});
                g.face_cells.push_back({static_cast<int>(c), -1});
                g.cell_faces[c].push_back(f);
            } else {
                auto& fc = g.face_cells[it->second];
                if (fc[1] >= 0) throw ConfigError("edge shared by more than two cells");
                fc[1] = static_cast<int>(c);
                g.cell_faces[c].push_back(it->second);
            }
        }
    }
    g.face_tag.assign(g.num_faces(), -1);
}

struct IntersectionSource {
    int node;
    int cls;
    std::vector<int> fault_ids;
};

void resolve_faults(MixedDimMesh& mesh, const json& polylines, const std::vector<IntersectionSource>& ix_src) {
    Subdomain& m = mesh.matrix;
    const std::size_t n_nodes = m.num_nodes();
    UnionFind uf(n_nodes);

    struct Source {
        int id;
        std::vector<int> nodes;
        std::vector<std::array<int, 2>> pairs;
    };
    std::vector<Source> sources;
    for (const auto& pl : polylines) {
        Source s{field<int>(pl, "id"), field<std::vector<int>>(pl, "nodes"), {}};
        if (pl.contains("side_pairs")) s.pairs = pl.at("side_pairs").get<std::vector<std::array<int, 2>>>();
        if (s.nodes.size() < 2) throw ConfigError("fault polyline " + std::to_string(s.id) + " has fewer than 2 nodes");
        for (int n : s.nodes) check_node(n, n_nodes, "fault polyline");
        for (const auto& p : s.pairs) {
            check_node(p[0], n_nodes, "side_pairs");
            check_node(p[1], n_nodes, "side_pairs");
            uf.unite(p[0], p[1]);
        }
        sources.push_back(std::move(s));
    }

    std::map<std::pair<int, int>, std::vector<int>> boundary_by_class;
    for (std::size_t f = 0; f < m.num_faces(); ++f)
        if (m.is_boundary(static_cast<int>(f)))
            boundary_by_class[key(uf.find(m.faces[f][0]), uf.find(m.faces[f][1]))].push_back(static_cast<int>(f));

    std::vector<int> face_owner(m.num_faces(), -1);
    mesh.faults.clear();
    mesh.couplings.clear();
    for (std::size_t fi = 0; fi < sources.size(); ++fi) {
        const Source& src = sources[fi];
        const std::size_t n_seg = src.nodes.size() - 1;
        InterfaceCoupling minus, plus;
        minus.fault_index = plus.fault_index = static_cast<int>(fi);
        minus.fault_id = plus.fault_id = src.id;
        minus.side = Side::Minus;
        plus.side = Side::Plus;
        const Point start = m.node_coords[src.nodes.front()];
        const Point dir = (m.node_coords[src.nodes.back()] - start).normalized();
        for (std::size_t j = 0; j < n_seg; ++j) {
            const int a = src.nodes[j], b = src.nodes[j + 1];
            const Point pa = m.node_coords[a], pb = m.node_coords[b];
            const Point t = pb - pa;
            const double off_line = std::abs(dir.x() * (pb - start).y() - dir.y() * (pb - start).x());
            if (off_line > 1e-9 * std::max(1.0, t.norm()))
                throw ConfigError("fault " + std::to_string(src.id) + " is not straight");
            const auto it = boundary_by_class.find(key(uf.find(a), uf.find(b)));
            std::vector<int> found;
            if (it != boundary_by_class.end())
                for (int f : it->second)
                    if (face_owner[f] < 0) found.push_back(f);
            if (found.size() != 2)
                throw ConfigError("fault " + std::to_string(src.id) + " segment " + std::to_string(j) +
                                  " is not aligned with a face chain (" + std::to_string(found.size()) + " faces)");
            const Point normal(-t.y(), t.x(), 0.0);
            int side_of[2];
            for (int k = 0; k < 2; ++k) {
                const Point& cc = m.cell_centers[m.face_cells[found[k]][0]];
                side_of[k] = (cc - pa).dot(normal) > 0.0 ? 1 : 0;
            }
            if (side_of[0] == side_of[1])
                throw ConfigError("fault " + std::to_string(src.id) + " segment " + std::to_string(j) +
                                  " has both faces on one side");
            for (int k = 0; k < 2; ++k) {
                face_owner[found[k]] = static_cast<int>(fi);
                auto& c = side_of[k] == 1 ? plus : minus;
                c.matrix_face_ids.push_back(found[k]);
                c.fault_cell_ids.push_back(static_cast<int>(j));
            }
        }
        Fault fault;
        fault.id = src.id;
        fault.polyline = src.nodes;
        fault.side_pairs = src.pairs;
        fault.grid.dim = 1;
        fault.grid.ambient = 2;
        for (int n : src.nodes) {
            fault.grid.node_coords.push_back(m.node_coords[n]);
            fault.anchor_nodes.push_back({n, n});
            fault.anchor_weights.push_back(0.0);
        }
        for (std::size_t j = 0; j < n_seg; ++j)
            fault.grid.cells.push_back({static_cast<int>(j), static_cast<int>(j + 1)});
        fault.grid.cell_region.assign(n_seg, 0);
        mesh.faults.push_back(std::move(fault));
        mesh.couplings.push_back(std::move(minus));
        mesh.couplings.push_back(std::move(plus));
    }

    // Node classes touching the outer (non-fault) boundary, with a face found there.
    std::map<int, int> external_face;
    for (std::size_t f = 0; f < m.num_faces(); ++f) {
        if (!m.is_boundary(static_cast<int>(f)) || face_owner[f] >= 0) continue;
        for (int n : m.faces[f]) external_face.emplace(uf.find(n), static_cast<int>(f));
    }

    mesh.intersections.clear();
    for (const auto& is : ix_src) {
        Intersection ix;
        ix.node = is.node;
        ix.branch_fault_ids = is.fault_ids;
        for (int id : is.fault_ids) {
            const int fi = mesh.fault_index(id);
            if (fi < 0) throw ConfigError("intersection references unknown fault " + std::to_string(id));
            const auto& pl = mesh.faults[fi].polyline;
            const bool hit = std::any_of(pl.begin(), pl.end(), [&](int n) { return uf.find(n) == is.cls; });
            if (!hit)
                throw ConfigError("intersection at node " + std::to_string(is.node) + " is not on fault " +
                                  std::to_string(id));
        }
        mesh.intersections.push_back(std::move(ix));
    }

    for (std::size_t fi = 0; fi < mesh.faults.size(); ++fi) {
        Fault& fault = mesh.faults[fi];
        Subdomain& g = fault.grid;
        const int n_seg = static_cast<int>(g.num_cells());
        g.cell_faces.assign(n_seg, {});
        auto add_face = [&](int node, int c0, int c1, FaultFaceKind kind, int matrix_face, int ix) {
            const int f = static_cast<int>(g.faces.size());
            g.faces.push_back({node});
            g.face_cells.push_back({c0, c1});
            g.cell_faces[c0].push_back(f);
            if (c1 >= 0) g.cell_faces[c1].push_back(f);
            fault.face_kind.push_back(kind);
            fault.face_matrix_face.push_back(matrix_face);
            fault.face_intersection.push_back(ix);
            return f;
        };
        for (int j = 0; j <= n_seg; ++j) {
            const int cls = uf.find(fault.polyline[j]);
            int ix_index = -1;
            for (std::size_t k = 0; k < ix_src.size(); ++k)
                if (ix_src[k].cls == cls &&
                    std::find(ix_src[k].fault_ids.begin(), ix_src[k].fault_ids.end(), fault.id) !=
                        ix_src[k].fault_ids.end())
                    ix_index = static_cast<int>(k);
            std::vector<int> adjacent;
            if (j > 0) adjacent.push_back(j - 1);
            if (j < n_seg) adjacent.push_back(j);
            if (ix_index >= 0) {
                for (int c : adjacent) {
                    const int f = add_face(j, c, -1, FaultFaceKind::Branch, -1, ix_index);
                    mesh.intersections[ix_index].branches.push_back({static_cast<int>(fi), c, f, Point::Zero()});
                }
            } else if (adjacent.size() == 2) {
                add_face(j, adjacent[0], adjacent[1], FaultFaceKind::Interior, -1, -1);
            } else {
                const auto ext = external_face.find(cls);
                if (ext != external_face.end())
                    add_face(j, adjacent[0], -1, FaultFaceKind::External, ext->second, -1);
                else
                    add_face(j, adjacent[0], -1, FaultFaceKind::Tip, -1, -1);
            }
        }
        g.face_tag.assign(g.num_faces(), -1);
    }
    for (const auto& ix : mesh.intersections)
        if (ix.branches.size() < 2)
            throw ConfigError("intersection at node " + std::to_string(ix.node) + " has fewer than 2 branches");
}

}  // namespace

MixedDimMesh load_mesh(const json& doc) {
    const int dim = field<int>(doc, "dim");
    if (dim == 3) {
        if (!doc.contains("base") || !doc.contains("extrude"))
            throw ConfigError("3D mesh documents must carry 'base' and 'extrude'");
        const auto& ex = doc.at("extrude");
        return extrude(load_mesh(doc.at("base")), field<int>(ex, "layers"), field<double>(ex, "height"));
    }
    if (dim != 2) throw ConfigError("unsupported mesh dimension " + std::to_string(dim));

    MixedDimMesh mesh;
    mesh.dim = 2;
    Subdomain& m = mesh.matrix;
    m.dim = 2;
    m.ambient = 2;
    for (const auto& p : field<std::vector<std::vector<double>>>(doc, "nodes")) {
        if (p.size() < 2) throw ConfigError("node with fewer than 2 coordinates");
        m.node_coords.emplace_back(p[0], p[1], 0.0);
    }
    m.cells = field<std::vector<std::vector<int>>>(doc, "cells");
    for (auto& cell : m.cells) {
        if (cell.size() < 3) throw ConfigError("cell with fewer than 3 nodes");
        for (int n : cell) check_node(n, m.num_nodes(), "cells");
        std::vector<Point> pts;
        for (int n : cell) pts.push_back(m.node_coords[n]);
        if (geom::signed_area_xy(pts) < 0.0) std::reverse(cell.begin(), cell.end());
    }
    build_matrix_2d(m);
    if (doc.contains("cell_regions")) {
        m.cell_region = doc.at("cell_regions").get<std::vector<int>>();
        if (m.cell_region.size() != m.num_cells()) throw ConfigError("cell_regions size does not match cells");
    } else {
        m.cell_region.assign(m.num_cells(), 0);
    }

    if (doc.contains("boundary_tags")) {
        std::map<std::pair<int, int>, int> face_of;
        for (std::size_t f = 0; f < m.num_faces(); ++f) face_of.emplace(key(m.faces[f][0], m.faces[f][1]), f);
        for (const auto& [tag, pairs] : doc.at("boundary_tags").items()) {
            const int t = static_cast<int>(mesh.tag_names.size());
            mesh.tag_names.push_back(tag);
            for (const auto& pr : pairs) {
                const auto ab = pr.get<std::array<int, 2>>();
                const auto it = face_of.find(key(ab[0], ab[1]));
                if (it == face_of.end() || !m.is_boundary(it->second))
                    throw ConfigError("boundary tag '" + tag + "' names a non-boundary edge");
                m.face_tag[it->second] = t;
            }
        }
    }
    compute_geometry(m);

    // Intersections are resolved against node classes, computed inside resolve_faults;
    // we rebuild the classes here with the same rule for the sources.
    std::vector<IntersectionSource> ix_src;
    const json polylines = doc.value("fault_polylines", json::array());
    if (doc.contains("intersections")) {
        UnionFind uf(m.num_nodes());
        for (const auto& pl : polylines)
            if (pl.contains("side_pairs"))
                for (const auto& p : pl.at("side_pairs")) {
                    const auto ab = p.get<std::array<int, 2>>();
                    check_node(ab[0], m.num_nodes(), "side_pairs");
                    check_node(ab[1], m.num_nodes(), "side_pairs");
                    uf.unite(ab[0], ab[1]);
                }
        for (const auto& ix : doc.at("intersections")) {
            const int node = field<int>(ix, "node");
            check_node(node, m.num_nodes(), "intersections");
            ix_src.push_back({node, uf.find(node), field<std::vector<int>>(ix, "branches")});
        }
    }
    resolve_faults(mesh, polylines, ix_src);
    update_geometry(mesh);
    return mesh;
}

MixedDimMesh load_mesh_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open mesh file " + path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ConfigError("mesh file " + path + " is not valid JSON: " + e.what());
    }
    return load_mesh(doc);
}

json save_mesh(const MixedDimMesh& mesh) {
    if (mesh.dim == 3) {
        if (!mesh.base) throw ConfigError("3D mesh has no extrusion source to save");
        return json{{"dim", 3},
                    {"base", save_mesh(*mesh.base)},
                    {"extrude", {{"layers", mesh.extrusion.layers}, {"height", mesh.extrusion.height}}}};
    }
    const Subdomain& m = mesh.matrix;
    json doc;
    doc["dim"] = 2;
    json nodes = json::array();
    for (const auto& p : m.node_coords) nodes.push_back({p.x(), p.y()});
    doc["nodes"] = std::move(nodes);
    doc["cells"] = m.cells;
    doc["cell_regions"] = m.cell_region;
    json faults = json::array();
    for (const auto& f : mesh.faults) faults.push_back({{"id", f.id}, {"nodes", f.polyline}, {"side_pairs", f.side_pairs}});
    doc["fault_polylines"] = std::move(faults);
    json ixs = json::array();
    for (const auto& ix : mesh.intersections) ixs.push_back({{"node", ix.node}, {"branches", ix.branch_fault_ids}});
    doc["intersections"] = std::move(ixs);
    json tags = json::object();
    for (std::size_t t = 0; t < mesh.tag_names.size(); ++t) tags[mesh.tag_names[t]] = json::array();
    for (std::size_t f = 0; f < m.num_faces(); ++f)
        if (m.face_tag[f] >= 0) tags[mesh.tag_names[m.face_tag[f]]].push_back(m.faces[f]);
    doc["boundary_tags"] = std::move(tags);
    return doc;
}

void save_mesh_file(const MixedDimMesh& mesh, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write mesh file " + path);
    out << save_mesh(mesh).dump();
}

}  // namespace faultrom::mesh
