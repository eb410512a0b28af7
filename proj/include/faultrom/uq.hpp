#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faultrom/snapshots.hpp"

namespace faultrom::uq {

struct ErrorReport {
    double e_max = 0.0;
    double e_min = 0.0;
    double e_ave = 0.0;
    std::vector<double> per_sample;  // ||u_j - u~_j|| / ||u_j||
};

/// Relative errors column by column. Throws NumericalError on a zero reference column.
ErrorReport errors(const Eigen::MatrixXd& reference, const Eigen::MatrixXd& approx);

/// Scalar quantity evaluated on a batch of points (rows).
using BatchQoi = std::function<Eigen::VectorXd(const Eigen::MatrixXd& points)>;

/// Batch wrapper around a pointwise function, evaluated with `jobs` workers.
BatchQoi pointwise(std::function<double(const Eigen::VectorXd&)> f, int jobs = 1);

struct SobolResult {
    double mean = 0.0;
    double std = 0.0;
    Eigen::VectorXd first_order;
    std::size_t base_samples = 0;
    std::size_t evaluations = 0;
    std::string warning;  // set when the QoI has no variance
};

/// Raw pick-freeze evaluations: f(A), f(B) and f(A with column i from B).
struct PickFreeze {
    Eigen::VectorXd fA, fB;
    Eigen::MatrixXd fAB;  // n_base x e
};

/// A and B are uniform on the parameter box; row j of either depends only on
/// (seed, j), so smaller base sizes are prefixes of larger ones.
PickFreeze pick_freeze(const BatchQoi& f, const snap::ParameterSpace& space, std::size_t n_base, std::uint64_t seed);

/// Statistics over the first `count` base rows. Mean and std pool f(A) and f(B);
/// S_i = mean(fB (fAB_i - fA)) / Var.
SobolResult sobol_statistics(const PickFreeze& pf, std::size_t count);

SobolResult sobol_first_order(const BatchQoi& f, const snap::ParameterSpace& space, std::size_t n_base,
                              std::uint64_t seed);

/// Statistics at each base size, sharing one set of evaluations.
std::vector<SobolResult> convergence_study(const BatchQoi& f, const snap::ParameterSpace& space,
                                           const std::vector<std::size_t>& counts, std::uint64_t seed);

/// Scott's rule: sample std times m^(-1/5).
double scott_bandwidth(const std::vector<double>& samples);

/// Gaussian kernel density estimate on the grid.
std::vector<double> kde(const std::vector<double>& samples, const std::vector<double>& grid);

struct DeBound {
    std::string name;  // keys the random streams of this axis
    double lo = 0.0;
    double hi = 1.0;
};

struct DeConfig {
    std::vector<DeBound> bounds;
    int popsize = 15;  // population is popsize * e
    double mutation_lo = 0.5;
    double mutation_hi = 1.0;
    double recombination = 0.7;
    double tol = 1e-3;
    double atol = 1e-10;
    int max_iterations = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct DeResult {
    Eigen::VectorXd x;
    double fun = 0.0;
    std::size_t evaluations = 0;
    int iterations = 0;
    bool converged = false;
};

/// best1bin differential evolution with dithered mutation and Latin hypercube
/// initialization. Each generation's trials are evaluated as one batch and
/// selected afterwards, so results do not depend on how the batch is scheduled.
DeResult differential_evolution(const BatchQoi& objective, const DeConfig& config);

struct InverseResult {
    DeResult de;
    Eigen::VectorXd mu;
    double delta_p_rom = 0.0;
    std::optional<double> delta_p_fom;
};

/// Minimize (dp(mu) - target)^2 over the box; `verify` is called once at the optimum.
InverseResult invert_delta_p(const BatchQoi& delta_p, double target, const DeConfig& config,
                             const std::function<double(const Eigen::VectorXd&)>& verify = {});

}  // namespace faultrom::uq
