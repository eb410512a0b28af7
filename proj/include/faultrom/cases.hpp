#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "faultrom/deform.hpp"
#include "faultrom/dlrom.hpp"
#include "faultrom/meshkit.hpp"
#include "faultrom/snapshots.hpp"

namespace faultrom::cases {

/// Reference geometry: the built-in faulted rectangle or a mesh document,
/// optionally extruded along z.
struct MeshSpec {
    std::string kind = "faulted_rectangle";  // or "file"
    mesh::FaultedRectangle rect;
    std::string file;  // relative paths resolve against the data directory
    int extrude_layers = 0;
    double extrude_height = 1.0;
};

/// A permeability that is either fixed or exp(mu[axis]).
struct Permeability {
    std::string axis;  // empty: fixed
    double value = 1.0;

    double at(const snap::ParameterSpace& space, const Eigen::VectorXd& mu) const;
};

struct FaultPhysics {
    int id = -1;  // -1: default for faults not listed
    Permeability k_tangential;
    /// K_n = kn_factor * K_t / aperture when kn_factor > 0, otherwise k_normal.
    double kn_factor = 0.0;
    Permeability k_normal;
    double aperture = 1e-3;
};

struct Physics {
    std::vector<Permeability> regions;  // one per matrix region
    std::vector<FaultPhysics> faults;   // defaults first (id -1), then overrides by id
};

/// Deformation rule; control points are derived from the mesh.
///  throw:          the block on the + side of the fault rises by the axis value
///                  along the fault at the horizons; the other block stays fixed.
///  horizon_shift:  horizon nodes left of the sliding fault and the listed rigid
///                  faults move by (0, value); both sides of the sliding fault
///                  slide, its tips, the other faults and the outer boundary stay
///                  fixed except the left side, which slides.
///  none
struct DeformSpec {
    std::string kind = "none";
    std::string axis;
    int fault_id = 0;
    std::vector<double> horizons;  // y levels of the horizons in the reference mesh
    std::vector<int> rigid_faults;
};

/// corner:      Dirichlet `pressure` on the outer faces of the injection cell,
///              sources +rate / -rate in the injection / production cells.
/// sinusoidal:  Dirichlet p_b(omega) = p1 (1 - sin(theta/2)) + p2 sin(theta/2) on
///              all outer faces, theta = omega - omega0 wrapped to [0, 2 pi), omega
///              the polar angle of the face centre about `center`.
struct BcSpec {
    std::string kind = "corner";
    double pressure = 1.0;
    double rate = 1.0;
    /// When positive, the rate is rescaled on model construction so that
    /// delta p equals this target at calibrate_at (physical values; empty:
    /// centre of the parameter box).
    double calibrate_target = 0.0;
    std::vector<double> calibrate_at;
    double p1 = 1.0, p2 = 0.0;
    std::string axis;  // omega0
    std::vector<double> center{0.5, 0.5};
};

/// Cells nearest to the two points of the reference mesh.
struct QoiSpec {
    bool enabled = false;
    std::vector<double> injection, production;
};

struct DatasetSpec {
    snap::SplitSizes sizes{800, 100, 100};
    std::uint64_t seed = 1;
};

struct DlromSpec {
    std::vector<Eigen::Index> encoder_hidden{181};
    std::vector<Eigen::Index> map_hidden{100};
    Eigen::Index latent = 5;
    dl::TrainingConfig training;
    std::uint64_t init_seed = 1;
};

struct PodSpec {
    std::vector<Eigen::Index> modes{5, 15, 45};
    Eigen::Index reference = 45;
    bool block = false;  // Galerkin on a block basis needs a rich lambda space to stay stable
};

struct CaseDefinition {
    int id = 0;
    std::string name;
    MeshSpec mesh;
    snap::ParameterSpace space;
    Physics physics;
    DeformSpec deform;
    BcSpec bc;
    QoiSpec qoi;
    DatasetSpec dataset;
    DlromSpec dlrom;
    PodSpec pod;
};

CaseDefinition case1();
CaseDefinition case2();
CaseDefinition case3();
/// case1 / case2 / case3 by number; ConfigError otherwise.
CaseDefinition by_id(int id);

nlohmann::json to_json(const CaseDefinition& def);
CaseDefinition from_json(const nlohmann::json& doc);
void save(const CaseDefinition& def, const std::string& path);
CaseDefinition load(const std::string& path);

/// Deformation whose RBF coefficients are affine in the geometric parameters:
/// zeta(mu_g) = zeta0 + dzeta mu_g, with the dense system factored once.
struct AffineDeformation {
    deform::DeformConfig config;
    Eigen::VectorXd zeta0;
    Eigen::MatrixXd dzeta;      // one column per geometric parameter
    std::vector<int> axes;      // parameter indices of the geometric parameters

    Eigen::VectorXd geometric(const Eigen::VectorXd& mu) const;
    Eigen::VectorXd zeta(const Eigen::VectorXd& mu) const;
};

/// Runtime model of a case: reference meshes, deformation and physics.
class CaseModel {
public:
    explicit CaseModel(CaseDefinition def);

    const CaseDefinition& definition() const { return def_; }
    const snap::ParameterSpace& space() const { return def_.space; }
    /// Reference mesh in the solved dimension.
    const mesh::MixedDimMesh& reference() const { return *reference_; }
    /// 2D mesh the deformation acts on (the extrusion base for 3D cases).
    const mesh::MixedDimMesh& reference2d() const { return *reference2d_; }
    const std::optional<AffineDeformation>& deformation() const { return deformation_; }
    const mesh::DofLayout& layout() const { return reference_->layout; }

    /// Deformed mesh at mu.
    mesh::MixedDimMesh mesh_at(const Eigen::VectorXd& mu) const;
    snap::Problem problem(const Eigen::VectorXd& mu) const;
    snap::ProblemBuilder builder() const;

    /// Injection / production cells (matrix cell ids), if the case has a QoI.
    std::optional<std::pair<int, int>> qoi_cells() const { return qoi_cells_; }
    std::optional<dl::QoiIndices> qoi_dofs() const;
    /// p(injection) - p(production) of a full-order dof vector.
    double delta_p(const Eigen::VectorXd& u) const;

    dl::Architecture architecture() const;

private:
    CaseDefinition def_;
    std::shared_ptr<const mesh::MixedDimMesh> reference2d_, reference_;
    std::optional<AffineDeformation> deformation_;
    std::optional<std::pair<int, int>> qoi_cells_;
};

/// Build the throw / horizon-shift control points for a 2D mesh.
deform::DeformConfig control_points(const mesh::MixedDimMesh& mesh2d, const DeformSpec& spec,
                                    const snap::ParameterSpace& space);

/// Rate giving delta_p = target at mu (delta p is linear in the rate).
double calibrate_rate(const CaseDefinition& def, const Eigen::VectorXd& mu, double target);

/// Parameter point of the physical values (log for exponent axes).
Eigen::VectorXd parameter_point(const snap::ParameterSpace& space, const std::vector<double>& physical);

/// Search box of the inverse problem on Case 2 (physical bounds).
snap::ParameterSpace case2_inverse_space();
/// Reference point of the inverse problem and its target pressure difference.
std::vector<double> case2_inverse_reference();
inline constexpr double kCase2Target = 0.188;

}  // namespace faultrom::cases
