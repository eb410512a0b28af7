#include "faultrom/uq.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "faultrom/error.hpp"
#include "faultrom/parallel.hpp"
#include "faultrom/rng.hpp"

namespace faultrom::uq {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

ErrorReport errors(const MatrixXd& reference, const MatrixXd& approx) {
    if (reference.rows() != approx.rows() || reference.cols() != approx.cols())
        throw ConfigError("error report: reference and surrogate shapes differ");
    if (reference.cols() < 1) throw ConfigError("error report needs at least one sample");
    ErrorReport r;
    r.per_sample.reserve(static_cast<std::size_t>(reference.cols()));
    for (Index j = 0; j < reference.cols(); ++j) {
        const double norm = reference.col(j).norm();
        if (!(norm > 0.0)) throw NumericalError("reference snapshot " + std::to_string(j) + " has zero norm");
        r.per_sample.push_back((reference.col(j) - approx.col(j)).norm() / norm);
    }
    const auto [lo, hi] = std::minmax_element(r.per_sample.begin(), r.per_sample.end());
    r.e_min = *lo;
    r.e_max = *hi;
    r.e_ave = std::accumulate(r.per_sample.begin(), r.per_sample.end(), 0.0) / static_cast<double>(r.per_sample.size());
    // Summation order can put the mean an ulp outside [min, max] when all values agree.
    r.e_ave = std::clamp(r.e_ave, r.e_min, r.e_max);
    return r;
}

BatchQoi pointwise(std::function<double(const VectorXd&)> f, int jobs) {
    return [f = std::move(f), jobs](const MatrixXd& points) {
        VectorXd out(points.rows());
        parallel_for(static_cast<std::size_t>(points.rows()), jobs, [&](std::size_t i) {
            out[static_cast<Index>(i)] = f(points.row(static_cast<Index>(i)).transpose());
        });
        return out;
    };
}

namespace {

VectorXd evaluate(const BatchQoi& f, const MatrixXd& points) {
    VectorXd v = f(points);
    if (v.size() != points.rows()) throw ConfigError("QoI returned the wrong number of values");
    for (Index i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) throw NumericalError("QoI is not finite at sample " + std::to_string(i));
    return v;
}

}  // namespace

PickFreeze pick_freeze(const BatchQoi& f, const snap::ParameterSpace& space, std::size_t n_base, std::uint64_t seed) {
    if (n_base < 2) throw ConfigError("Sobol estimation needs at least two base samples");
    const MatrixXd A = snap::sample_uniform(space, n_base, seed);
    const MatrixXd B = snap::sample_uniform(space, n_base, rng::mix(seed ^ 0x5a17e11bull));
    const Index n = A.rows(), e = A.cols();
    // One batch with A, B and every A_B^(i) stacked.
    MatrixXd all(n * (e + 2), e);
    all.topRows(n) = A;
    all.middleRows(n, n) = B;
    for (Index i = 0; i < e; ++i) {
        MatrixXd AB = A;
        AB.col(i) = B.col(i);
        all.middleRows(n * (2 + i), n) = AB;
    }
    const VectorXd v = evaluate(f, all);
    PickFreeze pf;
    pf.fA = v.head(n);
    pf.fB = v.segment(n, n);
    pf.fAB.resize(n, e);
    for (Index i = 0; i < e; ++i) pf.fAB.col(i) = v.segment(n * (2 + i), n);
    return pf;
}

SobolResult sobol_statistics(const PickFreeze& pf, std::size_t count) {
    const Index n = static_cast<Index>(count);
    if (n < 2 || n > pf.fA.size()) throw ConfigError("Sobol sample count out of range");
    const Index e = pf.fAB.cols();
    SobolResult r;
    r.base_samples = count;
    r.evaluations = count * static_cast<std::size_t>(e + 2);
    VectorXd pooled(2 * n);
    pooled << pf.fA.head(n), pf.fB.head(n);
    r.mean = pooled.mean();
    const double var = (pooled.array() - r.mean).square().sum() / static_cast<double>(2 * n - 1);
    r.std = std::sqrt(var);
    r.first_order = VectorXd::Zero(e);
    // Relative to the mean's magnitude, a variance at rounding level is no variance.
    const double scale = std::max(1.0, r.mean * r.mean);
    if (!(var > 1e-28 * scale)) {
        r.std = 0.0;
        r.warning = "QoI has zero variance; first-order indices reported as 0";
        return r;
    }
    for (Index i = 0; i < e; ++i) {
        const double vi =
            (pf.fB.head(n).array() * (pf.fAB.col(i).head(n) - pf.fA.head(n)).array()).sum() / static_cast<double>(n);
        r.first_order[i] = vi / var;
    }
    return r;
}

SobolResult sobol_first_order(const BatchQoi& f, const snap::ParameterSpace& space, std::size_t n_base,
                              std::uint64_t seed) {
    return sobol_statistics(pick_freeze(f, space, n_base, seed), n_base);
}

std::vector<SobolResult> convergence_study(const BatchQoi& f, const snap::ParameterSpace& space,
                                           const std::vector<std::size_t>& counts, std::uint64_t seed) {
    if (counts.empty()) throw ConfigError("convergence study needs at least one sample count");
    for (std::size_t k = 1; k < counts.size(); ++k)
        if (counts[k] <= counts[k - 1]) throw ConfigError("convergence counts must be increasing");
    const auto pf = pick_freeze(f, space, counts.back(), seed);
    std::vector<SobolResult> out;
    for (auto c : counts) out.push_back(sobol_statistics(pf, c));
    return out;
}

double scott_bandwidth(const std::vector<double>& samples) {
    if (samples.size() < 2) throw ConfigError("density estimation needs at least two samples");
    const Eigen::Map<const VectorXd> x(samples.data(), static_cast<Index>(samples.size()));
    const double m = static_cast<double>(samples.size());
    const double sd = std::sqrt((x.array() - x.mean()).square().sum() / (m - 1.0));
    if (!(sd > 0.0)) throw NumericalError("density estimation: samples have zero variance");
    return sd * std::pow(m, -0.2);
}

std::vector<double> kde(const std::vector<double>& samples, const std::vector<double>& grid) {
    const double h = scott_bandwidth(samples);
    const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
    std::vector<double> out(grid.size(), 0.0);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double s = 0.0;
        for (double x : samples) {
            const double z = (grid[g] - x) / h;
            s += std::exp(-0.5 * z * z);
        }
        out[g] = s * norm;
    }
    return out;
}

void DeConfig::validate() const {
    if (bounds.empty()) throw ConfigError("differential evolution needs at least one axis");
    for (const auto& b : bounds)
        if (!(b.lo < b.hi) || !std::isfinite(b.lo) || !std::isfinite(b.hi))
            throw ConfigError("bounds of axis '" + b.name + "' must satisfy lo < hi");
    for (std::size_t i = 0; i < bounds.size(); ++i)
        for (std::size_t j = i + 1; j < bounds.size(); ++j)
            if (bounds[i].name == bounds[j].name) throw ConfigError("duplicate axis name '" + bounds[i].name + "'");
    if (!(tol > 0.0) || !(atol > 0.0)) throw ConfigError("tol and atol must be positive");
    if (popsize < 1 || max_iterations < 0) throw ConfigError("invalid population size or iteration limit");
    if (!(0.0 <= mutation_lo && mutation_lo <= mutation_hi && mutation_hi <= 2.0))
        throw ConfigError("mutation range must lie in [0, 2]");
    if (!(recombination >= 0.0 && recombination <= 1.0)) throw ConfigError("recombination must lie in [0, 1]");
}

namespace {

// Draw purposes; combined with the axis key to form a stream id.
enum Purpose : std::uint64_t { kInit = 1, kCross = 2, kFill = 3, kRepair = 4, kGlobal = 5 };

struct Draws {
    std::uint64_t seed;
    std::vector<std::uint64_t> axis;
    double u(std::size_t a, Purpose p, std::uint64_t index) const {
        return rng::uniform01(seed, rng::mix(axis[a] ^ p), index);
    }
    double g(std::uint64_t what, std::uint64_t index) const { return rng::uniform01(seed, rng::mix(kGlobal ^ (what << 8)), index); }
};

bool converged(const VectorXd& energies, const DeConfig& c) {
    const double mean = energies.mean();
    const double sd = std::sqrt((energies.array() - mean).square().mean());
    return sd <= c.atol + c.tol * std::abs(mean);
}

}  // namespace

DeResult differential_evolution(const BatchQoi& objective, const DeConfig& config) {
    config.validate();
    const std::size_t e = config.bounds.size();
    const std::size_t P = std::max<std::size_t>(5, static_cast<std::size_t>(config.popsize) * e);
    Draws d{config.seed, {}};
    for (const auto& b : config.bounds) d.axis.push_back(rng::fnv1a(b.name));
    VectorXd lo(static_cast<Index>(e)), span(static_cast<Index>(e));
    for (std::size_t a = 0; a < e; ++a) {
        lo[static_cast<Index>(a)] = config.bounds[a].lo;
        span[static_cast<Index>(a)] = config.bounds[a].hi - config.bounds[a].lo;
    }
    auto to_physical = [&](const MatrixXd& unit) {
        MatrixXd x = unit;
        for (Index a = 0; a < x.cols(); ++a) x.col(a) = lo[a] + span[a] * unit.col(a).array();
        return x;
    };

    // Latin hypercube in unit coordinates; each axis permutes its strata with its own stream.
    MatrixXd pop(static_cast<Index>(P), static_cast<Index>(e));
    for (std::size_t a = 0; a < e; ++a) {
        std::vector<std::size_t> strata(P);
        std::iota(strata.begin(), strata.end(), 0);
        rng::Stream(config.seed, d.axis[a]).shuffle(strata.begin(), strata.end());
        for (std::size_t i = 0; i < P; ++i)
            pop(static_cast<Index>(i), static_cast<Index>(a)) =
                (static_cast<double>(strata[i]) + d.u(a, kInit, i)) / static_cast<double>(P);
    }
    VectorXd energy = evaluate(objective, to_physical(pop));
    DeResult r;
    r.evaluations = P;
    Index best;
    energy.minCoeff(&best);
    r.converged = converged(energy, config);

    while (!r.converged && r.iterations < config.max_iterations) {
        const std::uint64_t gen = static_cast<std::uint64_t>(r.iterations);
        const double F = config.mutation_lo + (config.mutation_hi - config.mutation_lo) * d.g(1, gen);
        MatrixXd trial(static_cast<Index>(P), static_cast<Index>(e));
        for (std::size_t i = 0; i < P; ++i) {
            const std::uint64_t idx = gen * P + i;
            // Two distinct donors, both different from the target.
            rng::Stream pick(config.seed ^ rng::mix(idx), kGlobal);
            std::size_t r0, r1;
            do r0 = pick.below(P); while (r0 == i);
            do r1 = pick.below(P); while (r1 == i || r1 == r0);
            // The forced crossover axis is the one with the smallest draw, which keeps
            // the choice tied to axis identity rather than position.
            std::size_t fill = 0;
            double fmin = 2.0;
            for (std::size_t a = 0; a < e; ++a) {
                const double v = d.u(a, kFill, idx);
                if (v < fmin) fmin = v, fill = a;
            }
            for (std::size_t a = 0; a < e; ++a) {
                const Index ia = static_cast<Index>(a), ii = static_cast<Index>(i);
                const bool cross = a == fill || d.u(a, kCross, idx) < config.recombination;
                double v = pop(ii, ia);
                if (cross) {
                    v = pop(best, ia) + F * (pop(static_cast<Index>(r0), ia) - pop(static_cast<Index>(r1), ia));
                    if (v < 0.0 || v > 1.0) v = d.u(a, kRepair, idx);
                }
                trial(ii, ia) = v;
            }
        }
        const VectorXd te = evaluate(objective, to_physical(trial));
        r.evaluations += P;
        for (Index i = 0; i < static_cast<Index>(P); ++i)
            if (te[i] <= energy[i]) {
                pop.row(i) = trial.row(i);
                energy[i] = te[i];
            }
        energy.minCoeff(&best);
        ++r.iterations;
        r.converged = converged(energy, config);
    }
    r.x = to_physical(pop.row(best)).transpose();
    r.fun = energy[best];
    return r;
}

InverseResult invert_delta_p(const BatchQoi& delta_p, double target, const DeConfig& config,
                             const std::function<double(const VectorXd&)>& verify) {
    const BatchQoi F = [&](const MatrixXd& pts) -> VectorXd {
        return (evaluate(delta_p, pts).array() - target).square().matrix();
    };
    InverseResult r;
    r.de = differential_evolution(F, config);
    r.mu = r.de.x;
    r.delta_p_rom = evaluate(delta_p, r.mu.transpose())[0];
    if (verify) r.delta_p_fom = verify(r.mu);
    return r;
}

}  // namespace faultrom::uq
