#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faultrom/darcy_fom.hpp"
#include "faultrom/meshkit.hpp"

namespace faultrom::snap {

enum class Scale { Linear, Exponent };

/// For exponent axes lo/hi bound the physical value; the parameter itself is
/// its natural logarithm.
struct Axis {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    Scale scale = Scale::Linear;
};

struct ParameterSpace {
    std::vector<Axis> axes;

    std::size_t dim() const { return axes.size(); }
    void validate() const;
    /// Bounds in parameter coordinates (log of the bounds for exponent axes).
    Eigen::VectorXd lower() const;
    Eigen::VectorXd upper() const;
    /// Physical value of each parameter: exp for exponent axes.
    Eigen::VectorXd physical(const Eigen::VectorXd& mu) const;
    /// Map to [0,1]^e and back, using the parameter bounds.
    Eigen::VectorXd to_unit(const Eigen::VectorXd& mu) const;
    Eigen::VectorXd from_unit(const Eigen::VectorXd& unit) const;
    int index(const std::string& name) const;
};

/// count x e matrix of parameter points; row i depends only on (seed, i).
Eigen::MatrixXd sample_uniform(const ParameterSpace& space, std::size_t count, std::uint64_t seed);

/// Everything needed for one full-order solve at a parameter point.
struct Problem {
    mesh::MixedDimMesh mesh;
    fom::PhysicalParams params;
    fom::BoundaryConditions bc;
};
using ProblemBuilder = std::function<Problem(const Eigen::VectorXd& mu)>;

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct BlockStats {
    double min = 0.0;
    double max = 0.0;
};
using NormStats = std::array<BlockStats, 3>;

struct SplitSizes {
    std::size_t train = 0, val = 0, test = 0;
    std::size_t total() const { return train + val + test; }
};

struct SnapshotSet {
    Eigen::MatrixXd S;       // N x n_s
    Eigen::MatrixXd params;  // n_s x e
    mesh::DofLayout layout;
    std::vector<Split> splits;
    NormStats stats{};
    std::vector<double> solve_seconds;  // per column, wall clock of deform + assemble + solve

    std::size_t size() const { return static_cast<std::size_t>(S.cols()); }
    std::vector<int> indices(Split which) const;
    Eigen::MatrixXd columns(Split which) const;
    Eigen::MatrixXd params_of(Split which) const;
};

struct GenerateOptions {
    std::uint64_t seed = 0;
    int jobs = 1;
    bool allow_failures = false;
};

struct GenerateReport {
    std::vector<int> failed;  // sample indices that were skipped
    std::vector<std::string> messages;
};

/// Solve at each row of `params`, in index order. A failed solve aborts with
/// NumericalError unless allow_failures is set, in which case the sample is
/// dropped and listed in the report.
SnapshotSet solve_all(const Eigen::MatrixXd& params, const ProblemBuilder& builder, const GenerateOptions& options,
                      GenerateReport* report = nullptr);

/// Sample, solve and finalize: seeded split assignment and training statistics.
SnapshotSet generate(const ParameterSpace& space, const ProblemBuilder& builder, const SplitSizes& sizes,
                     const GenerateOptions& options, GenerateReport* report = nullptr);

/// Assign splits by a seeded shuffle. Sizes are scaled down proportionally
/// when failures removed samples.
void assign_splits(SnapshotSet& set, SplitSizes sizes, std::uint64_t seed);

/// Per-block min/max over the training columns.
NormStats training_stats(const SnapshotSet& set);

/// Blockwise (v - min) / (max - min); zero-range blocks map to 0.5.
Eigen::MatrixXd normalize(const Eigen::MatrixXd& values, const mesh::DofLayout& layout, const NormStats& stats);
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& values, const mesh::DofLayout& layout, const NormStats& stats);

void save(const SnapshotSet& set, const std::string& path);
SnapshotSet load(const std::string& path);

}  // namespace faultrom::snap
