#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "faultrom/meshkit.hpp"

namespace faultrom::deform {

using geom::Point;

enum class SetTag { Cd, Cdf, Cs, Csf };

/// Prescribed displacement s(mu) = constant + sum_k mu_k * coeffs[k].
struct AffineDisplacement {
    Point constant = Point::Zero();
    std::vector<Point> coeffs;

    Point operator()(const Eigen::VectorXd& mu_geom) const;
};

struct ControlPoint {
    Point position = Point::Zero();
    SetTag set = SetTag::Cd;
    AffineDisplacement displacement;  // C_d, C_df
    int surface = -1;                 // C_s, C_sf: index into the surface list
    int side = -1;                    // C_df, C_sf: 0 or 1, the side value relative to the fault normal
    int node = -1;                    // matrix node the point was taken from, if any
};

struct SlidingSurface {
    int id = 0;
    Point normal = Point::Zero();
    std::vector<Point> tangents;  // one in 2D, two in 3D
    Point ref_point = Point::Zero();
    bool is_fault = false;
    int fault_id = -1;  // mesh fault the surface follows, for topological node sides
};

struct DeformConfig {
    int dim = 2;
    std::vector<ControlPoint> controls;
    std::vector<SlidingSurface> surfaces;
    double regularization = 1e-12;
    int refinement_steps = 3;
};

/// Stacked system: unknowns zeta_j (dim entries each, point-major).
struct RbfSystem {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd rhs;
    int dim = 2;
};

double rbf_kernel(double d);

/// (sign((x - x_ref) . nu) + 1) / 2.
double side(const Point& x, const SlidingSurface& surface);

/// Weight of control point `cp` seen from x. `x_side` is the stored side
/// value (0 or 1) when x is a node on the sliding fault, -1 otherwise.
double influence(const Point& x, int x_side, const ControlPoint& cp, const SlidingSurface* fault);

/// Validates surfaces and control points; returns the index of the sliding fault or -1.
int validate(const DeformConfig& config);

RbfSystem assemble_system(const DeformConfig& config, const Eigen::VectorXd& mu_geom);

/// Regularized dense LU with iterative refinement against the unregularized matrix.
Eigen::VectorXd solve_system(const RbfSystem& system, const DeformConfig& config);

/// s(x) = sum_j influence * g(|x - x_j|) * zeta_j.
Point displacement_at(const Point& x, int x_side, const DeformConfig& config, const Eigen::VectorXd& zeta);

/// Side value (0/1) of every matrix node on the sliding fault, -1 elsewhere.
std::vector<int> node_side_values(const mesh::MixedDimMesh& mesh, const DeformConfig& config);

/// Move every matrix node by s(node) and rebuild geometry. Throws
/// NumericalError naming the cell if one inverts.
mesh::MixedDimMesh displace(const mesh::MixedDimMesh& mesh, const Eigen::VectorXd& zeta, const DeformConfig& config);

/// assemble + solve + displace.
mesh::MixedDimMesh deform_mesh(const mesh::MixedDimMesh& mesh, const DeformConfig& config,
                               const Eigen::VectorXd& mu_geom);

/// Residuals of the constraint rows at the solution: max displacement
/// mismatch (scaled by max(1, |s|)) and max normal motion of sliding points.
struct ConstraintResiduals {
    double displacement = 0.0;
    double sliding = 0.0;
};
ConstraintResiduals constraint_residuals(const DeformConfig& config, const Eigen::VectorXd& zeta,
                                         const Eigen::VectorXd& mu_geom);

DeformConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const DeformConfig& config);

}  // namespace faultrom::deform
