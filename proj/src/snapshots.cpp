#include "faultrom/snapshots.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>

#include "faultrom/binary_io.hpp"
#include "faultrom/error.hpp"
#include "faultrom/parallel.hpp"
#include "faultrom/rng.hpp"

namespace faultrom::snap {

void ParameterSpace::validate() const {
    if (axes.empty()) throw ConfigError("parameter space needs at least one axis");
    for (const auto& a : axes) {
        if (!(a.lo <= a.hi)) throw ConfigError("axis " + a.name + ": lo must not exceed hi");
        if (a.scale == Scale::Exponent && !(a.lo > 0.0)) throw ConfigError("axis " + a.name + ": exponent bounds must be positive");
    }
}

Eigen::VectorXd ParameterSpace::lower() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) v[i] = axes[i].scale == Scale::Exponent ? std::log(axes[i].lo) : axes[i].lo;
    return v;
}

Eigen::VectorXd ParameterSpace::upper() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(dim()));
    for (std::size_t i = 0; i < dim(); ++i) v[i] = axes[i].scale == Scale::Exponent ? std::log(axes[i].hi) : axes[i].hi;
    return v;
}

Eigen::VectorXd ParameterSpace::physical(const Eigen::VectorXd& mu) const {
    if (static_cast<std::size_t>(mu.size()) != dim()) throw ConfigError("parameter vector has the wrong length");
    Eigen::VectorXd v = mu;
    for (std::size_t i = 0; i < dim(); ++i)
        if (axes[i].scale == Scale::Exponent) v[i] = std::exp(mu[i]);
    return v;
}

Eigen::VectorXd ParameterSpace::to_unit(const Eigen::VectorXd& mu) const {
    const Eigen::VectorXd lo = lower(), hi = upper();
    Eigen::VectorXd u(mu.size());
    for (Eigen::Index i = 0; i < mu.size(); ++i) u[i] = hi[i] > lo[i] ? (mu[i] - lo[i]) / (hi[i] - lo[i]) : 0.5;
    return u;
}

Eigen::VectorXd ParameterSpace::from_unit(const Eigen::VectorXd& unit) const {
    const Eigen::VectorXd lo = lower(), hi = upper();
    return lo.array() + unit.array() * (hi - lo).array();
}

int ParameterSpace::index(const std::string& name) const {
    for (std::size_t i = 0; i < dim(); ++i)
        if (axes[i].name == name) return static_cast<int>(i);
    return -1;
}

Eigen::MatrixXd sample_uniform(const ParameterSpace& space, std::size_t count, std::uint64_t seed) {
    space.validate();
    const Eigen::VectorXd lo = space.lower(), hi = space.upper();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(space.dim()));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t a = 0; a < space.dim(); ++a)
            out(i, a) = lo[a] + (hi[a] - lo[a]) * rng::uniform01(seed, a, i);
    return out;
}

std::vector<int> SnapshotSet::indices(Split which) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == which) out.push_back(static_cast<int>(i));
    return out;
}

Eigen::MatrixXd SnapshotSet::columns(Split which) const {
    const auto idx = indices(which);
    Eigen::MatrixXd out(S.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = S.col(idx[j]);
    return out;
}

Eigen::MatrixXd SnapshotSet::params_of(Split which) const {
    const auto idx = indices(which);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), params.cols());
    for (std::size_t j = 0; j < idx.size(); ++j) out.row(j) = params.row(idx[j]);
    return out;
}

SnapshotSet solve_all(const Eigen::MatrixXd& params, const ProblemBuilder& builder, const GenerateOptions& options,
                      GenerateReport* report) {
    const auto count = static_cast<std::size_t>(params.rows());
    std::vector<std::optional<fom::FomSolution>> sols(count);
    std::vector<std::string> errors(count);
    std::vector<double> seconds(count, 0.0);
    parallel_for(count, options.jobs, [&](std::size_t i) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Problem pb = builder(params.row(static_cast<Eigen::Index>(i)).transpose());
            sols[i] = fom::solve(pb.mesh, pb.params, pb.bc);
        } catch (const NumericalError& e) {
            errors[i] = e.what();
        }
        seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    SnapshotSet set;
    std::vector<int> kept;
    for (std::size_t i = 0; i < count; ++i) {
        if (sols[i]) {
            kept.push_back(static_cast<int>(i));
            continue;
        }
        if (!options.allow_failures)
            throw NumericalError("snapshot " + std::to_string(i) + " failed: " + errors[i]);
        if (report) {
            report->failed.push_back(static_cast<int>(i));
            report->messages.push_back(errors[i]);
        }
    }
    if (kept.empty()) throw NumericalError("every snapshot solve failed");
    set.layout = sols[kept[0]]->layout;
    const auto N = static_cast<Eigen::Index>(set.layout.total);
    set.S.resize(N, static_cast<Eigen::Index>(kept.size()));
    set.params.resize(static_cast<Eigen::Index>(kept.size()), params.cols());
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const auto& sol = *sols[kept[j]];
        if (sol.u.size() != N) throw NumericalError("snapshot sizes differ; the mesh topology must stay fixed");
        set.S.col(j) = sol.u;
        set.params.row(j) = params.row(kept[j]);
        set.solve_seconds.push_back(seconds[kept[j]]);
    }
    set.splits.assign(kept.size(), Split::Train);
    set.stats = training_stats(set);
    return set;
}

void assign_splits(SnapshotSet& set, SplitSizes sizes, std::uint64_t seed) {
    const std::size_t n = set.size();
    if (sizes.total() == 0) throw ConfigError("split sizes must not all be zero");
    if (sizes.total() != n) {
        // Failures removed samples: shrink val and test proportionally, rest is training.
        const double f = static_cast<double>(n) / static_cast<double>(sizes.total());
        sizes.val = static_cast<std::size_t>(std::floor(sizes.val * f));
        sizes.test = static_cast<std::size_t>(std::floor(sizes.test * f));
        sizes.train = n - sizes.val - sizes.test;
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Stream stream(seed, 0x5b1);
    stream.shuffle(order.begin(), order.end());
    set.splits.assign(n, Split::Train);
    for (std::size_t k = 0; k < n; ++k)
        set.splits[order[k]] = k < sizes.train ? Split::Train : k < sizes.train + sizes.val ? Split::Val : Split::Test;
    set.stats = training_stats(set);
}

SnapshotSet generate(const ParameterSpace& space, const ProblemBuilder& builder, const SplitSizes& sizes,
                     const GenerateOptions& options, GenerateReport* report) {
    auto set = solve_all(sample_uniform(space, sizes.total(), options.seed), builder, options, report);
    assign_splits(set, sizes, options.seed);
    return set;
}

namespace {

std::array<std::pair<Eigen::Index, Eigen::Index>, 3> blocks(const mesh::DofLayout& L) {
    return {{{static_cast<Eigen::Index>(L.p), static_cast<Eigen::Index>(L.n_p())},
             {static_cast<Eigen::Index>(L.p_gamma), static_cast<Eigen::Index>(L.n_p_gamma())},
             {static_cast<Eigen::Index>(L.lambda), static_cast<Eigen::Index>(L.n_lambda())}}};
}

}  // namespace

NormStats training_stats(const SnapshotSet& set) {
    NormStats stats{};
    const auto train = set.indices(Split::Train);
    const auto bl = blocks(set.layout);
    for (std::size_t b = 0; b < 3; ++b) {
        const auto [start, len] = bl[b];
        if (len == 0 || train.empty()) continue;
        double lo = INFINITY, hi = -INFINITY;
        for (int j : train) {
            lo = std::min(lo, set.S.col(j).segment(start, len).minCoeff());
            hi = std::max(hi, set.S.col(j).segment(start, len).maxCoeff());
        }
        stats[b] = {lo, hi};
    }
    return stats;
}

Eigen::MatrixXd normalize(const Eigen::MatrixXd& values, const mesh::DofLayout& layout, const NormStats& stats) {
    if (values.rows() != static_cast<Eigen::Index>(layout.total)) throw ConfigError("normalize: row count mismatch");
    Eigen::MatrixXd out(values.rows(), values.cols());
    const auto bl = blocks(layout);
    for (std::size_t b = 0; b < 3; ++b) {
        const auto [start, len] = bl[b];
        const double range = stats[b].max - stats[b].min;
        if (range > 0.0)
            out.middleRows(start, len) = (values.middleRows(start, len).array() - stats[b].min) / range;
        else
            out.middleRows(start, len).setConstant(0.5);
    }
    return out;
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& values, const mesh::DofLayout& layout, const NormStats& stats) {
    if (values.rows() != static_cast<Eigen::Index>(layout.total)) throw ConfigError("denormalize: row count mismatch");
    Eigen::MatrixXd out(values.rows(), values.cols());
    const auto bl = blocks(layout);
    for (std::size_t b = 0; b < 3; ++b) {
        const auto [start, len] = bl[b];
        const double range = stats[b].max - stats[b].min;
        if (range > 0.0)
            out.middleRows(start, len) = values.middleRows(start, len).array() * range + stats[b].min;
        else
            out.middleRows(start, len).setConstant(stats[b].min);
    }
    return out;
}

namespace {
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kHeaderBytes = 4 + 4 + 8 * 8;
}  // namespace

void save(const SnapshotSet& set, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    const std::uint64_t N = static_cast<std::uint64_t>(set.S.rows()), ns = set.size(),
                        e = static_cast<std::uint64_t>(set.params.cols());
    const std::uint64_t tags_offset = kHeaderBytes + 8 * (ns * e + N * ns);
    const std::uint64_t stats_offset = tags_offset + ns;
    io::put_magic(os, "SNAP");
    io::put(os, kVersion);
    for (std::uint64_t v : {N, ns, e, std::uint64_t{set.layout.p}, std::uint64_t{set.layout.p_gamma},
                            std::uint64_t{set.layout.lambda}, tags_offset, stats_offset})
        io::put(os, v);
    for (std::uint64_t i = 0; i < ns; ++i)
        for (std::uint64_t a = 0; a < e; ++a) io::put(os, set.params(i, a));
    io::put_span(os, std::span<const double>(set.S.data(), N * ns));
    for (auto s : set.splits) io::put(os, static_cast<std::uint8_t>(s));
    for (const auto& st : set.stats) {
        io::put(os, st.min);
        io::put(os, st.max);
    }
    if (set.solve_seconds.size() == ns)
        io::put_span(os, std::span<const double>(set.solve_seconds.data(), ns));
    if (!os) throw ConfigError("write failed: " + path);
}

SnapshotSet load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open " + path);
    io::expect_magic(is, "SNAP");
    if (io::get<std::uint32_t>(is) != kVersion) throw ConfigError("unsupported SNAP version in " + path);
    const auto N = io::get<std::uint64_t>(is), ns = io::get<std::uint64_t>(is), e = io::get<std::uint64_t>(is);
    SnapshotSet set;
    set.layout.p = io::get<std::uint64_t>(is);
    set.layout.p_gamma = io::get<std::uint64_t>(is);
    set.layout.lambda = io::get<std::uint64_t>(is);
    set.layout.total = N;
    const auto tags_offset = io::get<std::uint64_t>(is), stats_offset = io::get<std::uint64_t>(is);
    if (set.layout.p != 0 || set.layout.p_gamma > set.layout.lambda || set.layout.lambda > N || e > 1024 ||
        tags_offset != kHeaderBytes + 8 * (ns * e + N * ns) || stats_offset != tags_offset + ns)
        throw ConfigError("corrupt SNAP header in " + path);
    set.params.resize(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(e));
    for (std::uint64_t i = 0; i < ns; ++i)
        for (std::uint64_t a = 0; a < e; ++a) set.params(i, a) = io::get<double>(is);
    set.S.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(ns));
    io::get_span(is, std::span<double>(set.S.data(), N * ns));
    set.splits.resize(ns);
    for (auto& s : set.splits) {
        const auto t = io::get<std::uint8_t>(is);
        if (t > 2) throw ConfigError("corrupt split tag in " + path);
        s = static_cast<Split>(t);
    }
    for (auto& st : set.stats) {
        st.min = io::get<double>(is);
        st.max = io::get<double>(is);
    }
    set.solve_seconds.resize(ns);
    is.read(reinterpret_cast<char*>(set.solve_seconds.data()), static_cast<std::streamsize>(8 * ns));
    if (!is) set.solve_seconds.clear();
    return set;
}

}  // namespace faultrom::snap
