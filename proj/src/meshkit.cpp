#include "faultrom/meshkit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "faultrom/error.hpp"

namespace faultrom::mesh {

int MixedDimMesh::tag_index(const std::string& name) const {
    for (std::size_t i = 0; i < tag_names.size(); ++i)
        if (tag_names[i] == name) return static_cast<int>(i);
    return -1;
}

std::size_t MixedDimMesh::num_subdomains(int d) const {
    if (d == dim) return 1;
    if (d == dim - 1) return faults.size();
    if (d == dim - 2) return intersections.size();
    return 0;
}

int MixedDimMesh::fault_index(int fault_id) const {
    for (std::size_t i = 0; i < faults.size(); ++i)
        if (faults[i].id == fault_id) return static_cast<int>(i);
    return -1;
}

namespace {

std::vector<Point> gather(const Subdomain& g, const std::vector<int>& ids) {
    std::vector<Point> pts;
    pts.reserve(ids.size());
    for (int i : ids) pts.push_back(g.node_coords[i]);
    return pts;
}

void fail_cell(const Subdomain& g, std::size_t c, double measure) {
    throw NumericalError("non-positive measure " + std::to_string(measure) + " of cell " + std::to_string(c) +
                         " in dim-" + std::to_string(g.dim) + " grid");
}

void orient_normals(Subdomain& g) {
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const int c0 = g.face_cells[f][0];
        if (g.face_normals[f].dot(g.face_centers[f] - g.cell_centers[c0]) < 0.0) g.face_normals[f] = -g.face_normals[f];
    }
}

void geometry_polygons_2d(Subdomain& g) {
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const auto pts = gather(g, g.cells[c]);
        const double area = geom::signed_area_xy(pts);
        if (!(area > 0.0)) fail_cell(g, c, area);
        g.cell_measures[c] = area;
        g.cell_centers[c] = geom::centroid_xy(pts);
    }
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const Point& a = g.node_coords[g.faces[f][0]];
        const Point& b = g.node_coords[g.faces[f][1]];
        const Point t = b - a;
        const double len = t.norm();
        g.face_measures[f] = len;
        g.face_centers[f] = 0.5 * (a + b);
        g.face_normals[f] = Point(t.y(), -t.x(), 0.0) / len;
    }
    orient_normals(g);
}

void geometry_prisms(Subdomain& g) {
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const auto pts = gather(g, g.faces[f]);
        const Point va = geom::vector_area(pts);
        g.face_measures[f] = va.norm();
        g.face_normals[f] = va / va.norm();
        g.face_centers[f] = geom::polygon_centroid(pts);
    }
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        std::vector<std::vector<Point>> loops;
        for (int f : g.cell_faces[c]) {
            auto pts = gather(g, g.faces[f]);
            if (g.face_cells[f][0] != static_cast<int>(c)) std::reverse(pts.begin(), pts.end());
            loops.push_back(std::move(pts));
        }
        const auto vc = geom::polyhedron_volume(loops);
        if (!(vc.volume > 0.0)) fail_cell(g, c, vc.volume);
        g.cell_measures[c] = vc.volume;
        g.cell_centers[c] = vc.centroid;
    }
    orient_normals(g);
}

void geometry_segments(Subdomain& g) {
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const Point& a = g.node_coords[g.cells[c][0]];
        const Point& b = g.node_coords[g.cells[c][1]];
        const double len = (b - a).norm();
        if (!(len > 0.0)) fail_cell(g, c, len);
        g.cell_measures[c] = len;
        g.cell_centers[c] = 0.5 * (a + b);
    }
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const Point& x = g.node_coords[g.faces[f][0]];
        const int c0 = g.face_cells[f][0];
        g.face_measures[f] = 1.0;
        g.face_centers[f] = x;
        g.face_normals[f] = (x - g.cell_centers[c0]).normalized();
    }
}

void geometry_surface_quads(Subdomain& g) {
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const auto pts = gather(g, g.cells[c]);
        const double area = geom::vector_area(pts).norm();
        if (!(area > 0.0)) fail_cell(g, c, area);
        g.cell_measures[c] = area;
        g.cell_centers[c] = geom::polygon_centroid(pts);
    }
    for (std::size_t f = 0; f < g.num_faces(); ++f) {
        const Point& a = g.node_coords[g.faces[f][0]];
        const Point& b = g.node_coords[g.faces[f][1]];
        const int c0 = g.face_cells[f][0];
        const Point cell_normal = geom::vector_area(gather(g, g.cells[c0])).normalized();
        const Point t = b - a;
        g.face_measures[f] = t.norm();
        g.face_centers[f] = 0.5 * (a + b);
        g.face_normals[f] = t.cross(cell_normal).normalized();
    }
    orient_normals(g);
}

}  // namespace

void compute_geometry(Subdomain& g) {
    g.cell_measures.assign(g.num_cells(), 0.0);
    g.cell_centers.assign(g.num_cells(), Point::Zero());
    g.face_measures.assign(g.num_faces(), 0.0);
    g.face_centers.assign(g.num_faces(), Point::Zero());
    g.face_normals.assign(g.num_faces(), Point::Zero());
    if (g.dim == 3)
        geometry_prisms(g);
    else if (g.dim == 2 && g.ambient == 2)
        geometry_polygons_2d(g);
    else if (g.dim == 2)
        geometry_surface_quads(g);
    else if (g.dim == 1)
        geometry_segments(g);
}

void update_geometry(MixedDimMesh& mesh) {
    compute_geometry(mesh.matrix);
    for (auto& fault : mesh.faults) {
        auto& g = fault.grid;
        for (std::size_t i = 0; i < g.num_nodes(); ++i) {
            const auto [a, b] = fault.anchor_nodes[i];
            const double w = fault.anchor_weights[i];
            g.node_coords[i] = w == 0.0 ? mesh.matrix.node_coords[a]
                                        : Point((1.0 - w) * mesh.matrix.node_coords[a] + w * mesh.matrix.node_coords[b]);
        }
        compute_geometry(g);
        fault.cell_normals.resize(g.num_cells());
        for (std::size_t c = 0; c < g.num_cells(); ++c) {
            if (g.dim == 1) {
                const Point t = g.node_coords[g.cells[c][1]] - g.node_coords[g.cells[c][0]];
                fault.cell_normals[c] = Point(-t.y(), t.x(), 0.0).normalized();
            } else {
                std::vector<Point> pts;
                for (int n : g.cells[c]) pts.push_back(g.node_coords[n]);
                fault.cell_normals[c] = geom::vector_area(pts).normalized();
            }
        }
    }
    for (auto& ix : mesh.intersections) {
        ix.position = mesh.matrix.node_coords[ix.node];
        for (auto& br : ix.branches) {
            const auto& g = mesh.faults[br.fault_index].grid;
            br.tangent = (ix.position - g.cell_centers[br.fault_cell]).normalized();
        }
    }
    build_interfaces_inplace(mesh);
}

}  // namespace faultrom::mesh
