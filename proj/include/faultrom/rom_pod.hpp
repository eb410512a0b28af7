#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faultrom/darcy_fom.hpp"
#include "faultrom/snapshots.hpp"

namespace faultrom::pod {

/// Thin decomposition S = U diag(sigma) V^T. sigma holds all n_s values in
/// non-increasing order; U keeps only the columns above the rank cutoff.
struct Svd {
    Eigen::MatrixXd U;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd V;
    Eigen::Index rank() const { return U.cols(); }
};

/// Relative rank cutoff: directions with sigma below this times sigma_1 get no
/// column in U.
/// The Gram eigensolver cannot resolve sigma below about sqrt(n_s eps) sigma_1
/// either, so the effective cutoff is the larger of the two; the rank never
/// exceeds the row count.
inline constexpr double kRankCutoff = 1e-12;
double rank_cutoff(Eigen::Index n_snapshots);

/// Method of snapshots: eigendecomposition of S^T S, then U = S V Sigma^-1 with
/// sigma_k = ||S v_k||.
/// The Gram matrix and its eigenproblem are computed in extended precision.
Svd svd_snapshots(const Eigen::MatrixXd& S);

enum class Mode { Monolithic = 0, Block = 1 };

struct PodBasis {
    Eigen::MatrixXd Phi;                // N x n
    std::vector<Eigen::VectorXd> sigma; // one array (monolithic) or three (p, p_gamma, lambda)
    Mode mode = Mode::Monolithic;
    mesh::DofLayout layout;
    Eigen::Index requested = 0;  // modes asked for (per block in block mode)

    Eigen::Index n() const { return Phi.cols(); }
    double compression() const { return Phi.rows() ? static_cast<double>(Phi.cols()) / Phi.rows() : 0.0; }
};

/// First n left singular vectors. n above the rank is clamped to the rank.
PodBasis truncate(const Svd& svd, Eigen::Index n);

PodBasis monolithic_pod(const Eigen::MatrixXd& S, Eigen::Index n, const mesh::DofLayout& layout);

/// Independent decomposition per variable block with n modes each; Phi is block diagonal.
PodBasis block_pod(const Eigen::MatrixXd& S, const mesh::DofLayout& layout, Eigen::Index n_per_block);

/// sum_i ||u_i - Phi Phi^T u_i||^2 over the columns of S.
double projection_error_sq(const PodBasis& basis, const Eigen::MatrixXd& S);

struct ReducedSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};
ReducedSystem project(const fom::FomSystem& system, const Eigen::MatrixXd& Phi);

struct OnlineTimings {
    double build = 0.0;     // deformation and physics setup
    double assemble = 0.0;
    double project = 0.0;
    double solve = 0.0;
    double total() const { return build + assemble + project + solve; }
};

struct OnlineResult {
    Eigen::VectorXd u;          // reconstructed full-order vector
    Eigen::VectorXd reduced;    // coefficients u_n
    double galerkin_residual = 0.0;  // ||Phi^T (b - A Phi u_n)|| / ||Phi^T b||
    OnlineTimings timings;
};

/// Dense LU solve of the reduced system; throws NumericalError when A_n is singular.
Eigen::VectorXd solve_reduced(const ReducedSystem& reduced);

/// Rebuild the full-order system at mu, project, solve and reconstruct.
OnlineResult online_query(const Eigen::VectorXd& mu, const PodBasis& basis, const snap::ProblemBuilder& builder);

void save(const PodBasis& basis, const std::string& path);
PodBasis load(const std::string& path);

}  // namespace faultrom::pod
