#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "faultrom/meshkit.hpp"

namespace faultrom::fom {

struct PhysicalParams {
    std::vector<double> region_permeability;  // K per matrix region
    std::vector<double> fault_k_tangential;   // per fault index
    std::vector<double> fault_k_normal;
    std::vector<double> fault_aperture;
    std::vector<double> intersection_k;       // per intersection
    std::vector<double> matrix_source;        // per unit measure, per matrix cell (empty: none)
    std::vector<double> fault_source;         // per unit measure, per p_gamma fault cell (empty: none)
    std::vector<std::pair<int, double>> point_sources;  // (matrix cell, total rate)
    int intersection_aperture_power = 2;      // epsilon exponent of the intersection law
};

enum class BcKind { Neumann, Dirichlet };

struct FaceBc {
    BcKind kind = BcKind::Neumann;
    double value = 0.0;  // pressure for Dirichlet, outward flux density for Neumann
};

/// One entry per matrix face; only outer boundary faces are read.
struct BoundaryConditions {
    std::vector<FaceBc> faces;
};

/// Homogeneous Neumann on every face.
BoundaryConditions neumann_everywhere(const mesh::MixedDimMesh& mesh);

/// Set every face carrying the named boundary tag; throws ConfigError for an unknown tag.
void set_tag_bc(BoundaryConditions& bc, const mesh::MixedDimMesh& mesh, const std::string& tag, FaceBc value);

/// Sparse system [A B^T; B -C] in the dof order of the layout.
struct FomSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    mesh::DofLayout layout;
};

/// Sub-blocks of a system, split at the layout offsets.
struct FomBlocks {
    Eigen::SparseMatrix<double> A_p, A_pg, B1, B2, C;
};
FomBlocks split_blocks(const FomSystem& system);

struct FomSolution {
    Eigen::VectorXd u;
    double residual = 0.0;  // ||A u - b|| / ||b||
    mesh::DofLayout layout;
};

/// Per-face transmissibility of the matrix grid: harmonic two-point value on
/// interior faces, half transmissibility |f| K / d on boundary faces.
std::vector<double> transmissibilities(const mesh::MixedDimMesh& mesh, const PhysicalParams& params);

/// Validate parameters against the mesh; throws ConfigError.
void check_params(const mesh::MixedDimMesh& mesh, const PhysicalParams& params);

FomSystem assemble(const mesh::MixedDimMesh& mesh, const PhysicalParams& params, const BoundaryConditions& bc);

FomSolution solve(const FomSystem& system);

/// assemble + solve.
FomSolution solve(const mesh::MixedDimMesh& mesh, const PhysicalParams& params, const BoundaryConditions& bc);

/// Integrated fluxes, positive out of face_cells[0] (matrix and fault faces),
/// and interface fluxes per mortar / branch dof.
struct FaceFluxes {
    std::vector<double> matrix;
    std::vector<std::vector<double>> fault;
    Eigen::VectorXd lambda;
};
FaceFluxes reconstruct_velocity(const FomSolution& solution, const mesh::MixedDimMesh& mesh,
                                const PhysicalParams& params, const BoundaryConditions& bc);

/// Largest per-cell mass balance residual, each scaled by max(1, |source|).
struct ConservationReport {
    double matrix = 0.0;
    double fault = 0.0;
    double intersection = 0.0;  // |sum of branch fluxes|
};
ConservationReport check_conservation(const FomSolution& solution, const mesh::MixedDimMesh& mesh,
                                      const PhysicalParams& params, const BoundaryConditions& bc);

/// Pressure jump between two matrix cells.
double qoi_delta_p(const FomSolution& solution, int injection_cell, int production_cell);

/// max over mortar cells of |p_trace - p_gamma|, using the face pressures of
/// the reconstruction.
double max_trace_jump(const FomSolution& solution, const mesh::MixedDimMesh& mesh, const PhysicalParams& params,
                      const BoundaryConditions& bc);

/// Solution file: "FOMS" record with layout, parameter point and dof vector.
void write_solution(const std::string& path, const FomSolution& solution, const Eigen::VectorXd& mu);
FomSolution read_solution(const std::string& path, Eigen::VectorXd* mu = nullptr);

/// CSV with one row per matrix / fault cell: id, x, y(, z), value.
void write_pressure_csv(const std::string& path, const FomSolution& solution, const mesh::MixedDimMesh& mesh);

}  // namespace faultrom::fom
