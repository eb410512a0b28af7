#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <json.hpp>

#include "faultrom/geometry.hpp"

namespace faultrom::mesh {

using geom::Point;

/// A grid of one topological dimension. Cells of a 2D grid are polygons,
/// of a 3D grid prisms, of a fault grid segments (2D) or quads (3D).
struct Subdomain {
    int dim = 2;
    int ambient = 2;
    std::vector<Point> node_coords;
    std::vector<std::vector<int>> cells;
    std::vector<std::vector<int>> faces;
    std::vector<std::vector<int>> cell_faces;
    std::vector<std::array<int, 2>> face_cells;  // [1] == -1 on boundary faces
    std::vector<int> cell_region;
    std::vector<int> face_tag;  // index into MixedDimMesh::tag_names, -1 if untagged

    // Geometry, filled by compute_geometry.
    std::vector<Point> cell_centers;
    std::vector<double> cell_measures;
    std::vector<Point> face_centers;
    std::vector<Point> face_normals;  // unit, pointing out of face_cells[0]
    std::vector<double> face_measures;

    std::size_t num_nodes() const { return node_coords.size(); }
    std::size_t num_cells() const { return cells.size(); }
    std::size_t num_faces() const { return faces.size(); }
    bool is_boundary(int face) const { return face_cells[face][1] < 0; }
};

enum class FaultFaceKind { Interior, Tip, External, Branch };

/// One fault (or fracture) and its lower-dimensional grid.
struct Fault {
    int id = 0;
    Subdomain grid;
    /// Fault cell normal defining the + side (the matrix side the normal points into).
    std::vector<Point> cell_normals;
    std::vector<FaultFaceKind> face_kind;
    std::vector<int> face_matrix_face;  // outer matrix boundary face next to External faces
    std::vector<int> face_intersection;  // intersection index at Branch faces, -1 otherwise
    /// Each fault-grid node sits at (1-w) x_a + w x_b for matrix nodes (a, b).
    std::vector<std::array<int, 2>> anchor_nodes;
    std::vector<double> anchor_weights;

    // Source description, kept for saving (2D only).
    std::vector<int> polyline;
    std::vector<std::array<int, 2>> side_pairs;
};

enum class Side { Minus = 0, Plus = 1 };

/// Mortar coupling between one side of a fault and the matrix faces on it.
/// Mortar cell k lives on fault cell fault_cell_ids[k].
struct InterfaceCoupling {
    int fault_index = 0;
    int fault_id = 0;
    Side side = Side::Minus;
    std::vector<int> matrix_face_ids;
    std::vector<int> fault_cell_ids;
    /// rows: mortar cells, cols: position in matrix_face_ids; entry = overlap / |mortar cell|.
    Eigen::SparseMatrix<double, Eigen::RowMajor> projection;
    /// Index of the first mortar dof of this coupling inside the lambda block.
    std::size_t lambda_offset = 0;
};

struct IntersectionBranch {
    int fault_index = 0;
    int fault_cell = 0;
    int fault_face = 0;
    Point tangent = Point::Zero();  // unit, from the branch cell towards the intersection
};

struct Intersection {
    int node = 0;
    Point position = Point::Zero();
    std::vector<int> branch_fault_ids;
    std::vector<IntersectionBranch> branches;
};

/// Offsets of the pressure, fault-pressure and interface-flux blocks.
/// p_gamma holds fault cells then intersection cells; lambda holds mortar
/// cells of every coupling then one flux per intersection branch.
struct DofLayout {
    std::size_t p = 0;
    std::size_t p_gamma = 0;
    std::size_t lambda = 0;
    std::size_t total = 0;

    std::size_t n_p() const { return p_gamma - p; }
    std::size_t n_p_gamma() const { return lambda - p_gamma; }
    std::size_t n_lambda() const { return total - lambda; }
    std::array<std::size_t, 3> offsets() const { return {p, p_gamma, lambda}; }
};

struct Extrusion {
    int layers = 0;
    double height = 0.0;
};

struct MixedDimMesh {
    int dim = 2;
    Subdomain matrix;
    std::vector<Fault> faults;
    std::vector<Intersection> intersections;
    std::vector<InterfaceCoupling> couplings;
    std::vector<std::string> tag_names;
    DofLayout layout;
    /// Offset of each fault's cells inside the p_gamma block.
    std::vector<std::size_t> fault_offsets;
    /// Offset of the first intersection branch flux inside the lambda block.
    std::size_t branch_lambda_offset = 0;
    std::size_t intersection_offset = 0;  // inside the p_gamma block
    /// Set when the mesh was produced by extrude; the base keeps the 2D source.
    Extrusion extrusion;
    std::shared_ptr<const MixedDimMesh> base;

    int tag_index(const std::string& name) const;
    std::size_t num_subdomains(int d) const;
    int fault_index(int fault_id) const;
};

/// Fill centers, measures, face geometry of a grid from its node coordinates.
/// Throws NumericalError naming the cell when a measure is not positive.
void compute_geometry(Subdomain& grid);

/// Recompute all geometry of a mesh (matrix, faults, intersections, projections).
void update_geometry(MixedDimMesh& mesh);

MixedDimMesh load_mesh(const nlohmann::json& document);
MixedDimMesh load_mesh_file(const std::string& path);
nlohmann::json save_mesh(const MixedDimMesh& mesh);
void save_mesh_file(const MixedDimMesh& mesh, const std::string& path);

MixedDimMesh extrude(const MixedDimMesh& mesh2d, int layers, double height);

/// Recompute block offsets from the current subdomain sizes.
void assign_layout(MixedDimMesh& mesh);

/// Compute the overlap projections of every coupling from current geometry.
/// Throws NumericalError when a mortar cell has no overlap with its faces.
MixedDimMesh build_interfaces(MixedDimMesh mesh);
void build_interfaces_inplace(MixedDimMesh& mesh);

/// Side of every matrix node relative to one fault: -1 if the node is not on
/// that fault, 0 or 1 for the - or + copy, 2 when both sides share the node.
std::vector<int> fault_node_sides(const MixedDimMesh& mesh, int fault_index);

/// Replace node coordinates (matrix numbering) and recompute geometry. Fault
/// grid nodes follow their anchor nodes.
MixedDimMesh with_node_coords(const MixedDimMesh& mesh, const std::vector<Point>& coords);

/// Replace the grid of a 2D fault by cells with breakpoints at the given
/// arc-length fractions (strictly increasing, 0 and 1 included), making the
/// fault non-conforming with the matrix faces. Faults carrying intersections
/// are rejected.
MixedDimMesh resample_fault(const MixedDimMesh& mesh, int fault_index, const std::vector<double>& fractions);

/// Parameters of the built-in faulted rectangle generator.
struct FaultedRectangle {
    double width = 1.0;
    double height = 1.0;
    double fault_angle_deg = 60.0;
    Point fault_center{0.5, 0.5, 0.0};
    std::vector<double> horizons;     // interior y levels, increasing
    std::vector<int> rows_per_layer;  // horizons.size() + 1 entries
    int cols_left = 10;
    int cols_right = 10;
};

/// Structured quadrilateral mesh of a rectangle cut by one straight fault
/// running from the bottom to the top boundary. Cell regions are layer indices
/// counted from the bottom. Returns the mesh document.
nlohmann::json faulted_rectangle(const FaultedRectangle& params);

/// Uniform nx-by-ny quadrilateral grid of [x0,x1]x[y0,y1] with tags xmin/xmax/ymin/ymax.
nlohmann::json rectangle_grid(int nx, int ny, double x0 = 0.0, double x1 = 1.0, double y0 = 0.0,
                              double y1 = 1.0);

}  // namespace faultrom::mesh
