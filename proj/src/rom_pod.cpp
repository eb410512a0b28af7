#include "faultrom/rom_pod.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "faultrom/binary_io.hpp"
#include "faultrom/error.hpp"

namespace faultrom::pod {

namespace {

using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

}  // namespace

double rank_cutoff(Eigen::Index n_snapshots) {
    const double resolution =
        std::sqrt(static_cast<double>(n_snapshots) * static_cast<double>(std::numeric_limits<long double>::epsilon()));
    return std::max(kRankCutoff, resolution);
}

Svd svd_snapshots(const Eigen::MatrixXd& S) {
    if (S.cols() < 1) throw ConfigError("SVD needs at least one snapshot");
    const MatrixL SL = S.cast<long double>();
    const MatrixL G = SL.transpose() * SL;
    Eigen::SelfAdjointEigenSolver<MatrixL> es(G);
    if (es.info() != Eigen::Success) throw NumericalError("Gram eigendecomposition failed");
    const Eigen::Index ns = S.cols();
    // sigma_k = ||S v_k|| rather than sqrt(lambda_k): the eigenvalues carry an
    // absolute error of about eps ||G||, which swamps the small sigma_k^2 that
    // the tail sums of the truncation error are made of.
    MatrixL SV = SL * es.eigenvectors();
    Eigen::Matrix<long double, Eigen::Dynamic, 1> norms = SV.colwise().norm().transpose();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(ns));
    std::iota(order.rbegin(), order.rend(), Eigen::Index{0});  // eigenvalues come in ascending order
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return norms[a] > norms[b]; });
    Svd out;
    MatrixL V(ns, ns), U(S.rows(), ns);
    Eigen::Matrix<long double, Eigen::Dynamic, 1> sig(ns);
    for (Eigen::Index k = 0; k < ns; ++k) {
        const Eigen::Index src = order[static_cast<std::size_t>(k)];
        sig[k] = norms[src];
        V.col(k) = es.eigenvectors().col(src);
        U.col(k) = SV.col(src);
    }
    Eigen::Index rank = 0;
    const long double cutoff = rank_cutoff(ns) * sig[0];
    while (rank < std::min(ns, S.rows()) && sig[rank] > cutoff) ++rank;
    U.conservativeResize(Eigen::NoChange, rank);
    for (Eigen::Index k = 0; k < rank; ++k) U.col(k) /= sig[k];
    out.sigma = sig.cast<double>();
    out.U = U.cast<double>();
    out.V = V.cast<double>();
    return out;
}

PodBasis truncate(const Svd& svd, Eigen::Index n) {
    if (n < 1) throw ConfigError("need at least one POD mode");
    PodBasis b;
    b.requested = n;
    b.Phi = svd.U.leftCols(std::min(n, svd.rank()));
    b.sigma = {svd.sigma};
    return b;
}

PodBasis monolithic_pod(const Eigen::MatrixXd& S, Eigen::Index n, const mesh::DofLayout& layout) {
    auto b = truncate(svd_snapshots(S), n);
    b.layout = layout;
    return b;
}

PodBasis block_pod(const Eigen::MatrixXd& S, const mesh::DofLayout& layout, Eigen::Index n_per_block) {
    if (S.rows() != static_cast<Eigen::Index>(layout.total)) throw ConfigError("block POD: layout does not match snapshots");
    if (n_per_block < 1) throw ConfigError("need at least one POD mode per block");
    const std::array<std::pair<std::size_t, std::size_t>, 3> blocks{
        {{layout.p, layout.n_p()}, {layout.p_gamma, layout.n_p_gamma()}, {layout.lambda, layout.n_lambda()}}};
    PodBasis b;
    b.mode = Mode::Block;
    b.layout = layout;
    b.requested = n_per_block;
    std::vector<Eigen::MatrixXd> parts;
    Eigen::Index cols = 0;
    for (const auto& [start, len] : blocks) {
        if (len == 0) {
            b.sigma.emplace_back();
            parts.emplace_back();
            continue;
        }
        const auto svd = svd_snapshots(S.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(len)));
        b.sigma.push_back(svd.sigma);
        parts.push_back(svd.U.leftCols(std::min(n_per_block, svd.rank())));
        cols += parts.back().cols();
    }
    b.Phi = Eigen::MatrixXd::Zero(S.rows(), cols);
    Eigen::Index c = 0;
    for (std::size_t k = 0; k < 3; ++k) {
        if (parts[k].size() == 0) continue;
        b.Phi.block(static_cast<Eigen::Index>(blocks[k].first), c, parts[k].rows(), parts[k].cols()) = parts[k];
        c += parts[k].cols();
    }
    return b;
}

double projection_error_sq(const PodBasis& basis, const Eigen::MatrixXd& S) {
    const Eigen::MatrixXd R = S - basis.Phi * (basis.Phi.transpose() * S);
    return R.squaredNorm();
}

ReducedSystem project(const fom::FomSystem& system, const Eigen::MatrixXd& Phi) {
    if (Phi.rows() != system.matrix.rows()) throw ConfigError("basis and system sizes differ");
    const Eigen::MatrixXd APhi = system.matrix * Phi;
    return {Phi.transpose() * APhi, Phi.transpose() * system.rhs};
}

Eigen::VectorXd solve_reduced(const ReducedSystem& r) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(r.A);
    const double rc = lu.rcond();
    if (!(rc > 1e-14)) throw NumericalError("reduced matrix is singular (rcond " + std::to_string(rc) + "); the basis is deficient");
    return lu.solve(r.b);
}

OnlineResult online_query(const Eigen::VectorXd& mu, const PodBasis& basis, const snap::ProblemBuilder& builder) {
    OnlineResult out;
    auto t0 = Clock::now();
    const auto pb = builder(mu);
    out.timings.build = seconds_since(t0);
    t0 = Clock::now();
    const auto sys = fom::assemble(pb.mesh, pb.params, pb.bc);
    out.timings.assemble = seconds_since(t0);
    t0 = Clock::now();
    const auto red = project(sys, basis.Phi);
    out.timings.project = seconds_since(t0);
    t0 = Clock::now();
    out.reduced = solve_reduced(red);
    out.u = basis.Phi * out.reduced;
    out.timings.solve = seconds_since(t0);
    const double bn = red.b.norm();
    out.galerkin_residual = (red.b - red.A * out.reduced).norm() / (bn > 0.0 ? bn : 1.0);
    return out;
}

namespace {
constexpr std::uint32_t kVersion = 1;
}

void save(const PodBasis& b, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    io::put_magic(os, "PODB");
    io::put(os, kVersion);
    io::put(os, static_cast<std::uint32_t>(b.mode));
    const std::uint64_t N = static_cast<std::uint64_t>(b.Phi.rows()), n = static_cast<std::uint64_t>(b.Phi.cols());
    for (std::uint64_t v : {N, n, static_cast<std::uint64_t>(b.requested), std::uint64_t{b.layout.p},
                            std::uint64_t{b.layout.p_gamma}, std::uint64_t{b.layout.lambda}})
        io::put(os, v);
    io::put_span(os, std::span<const double>(b.Phi.data(), N * n));
    io::put(os, static_cast<std::uint32_t>(b.sigma.size()));
    for (const auto& s : b.sigma) {
        io::put(os, static_cast<std::uint64_t>(s.size()));
        io::put_span(os, std::span<const double>(s.data(), static_cast<std::size_t>(s.size())));
    }
    if (!os) throw ConfigError("write failed: " + path);
}

PodBasis load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open " + path);
    io::expect_magic(is, "PODB");
    if (io::get<std::uint32_t>(is) != kVersion) throw ConfigError("unsupported PODB version in " + path);
    PodBasis b;
    const auto mode = io::get<std::uint32_t>(is);
    if (mode > 1) throw ConfigError("corrupt POD mode in " + path);
    b.mode = static_cast<Mode>(mode);
    const auto N = io::get<std::uint64_t>(is), n = io::get<std::uint64_t>(is);
    b.requested = static_cast<Eigen::Index>(io::get<std::uint64_t>(is));
    b.layout.p = io::get<std::uint64_t>(is);
    b.layout.p_gamma = io::get<std::uint64_t>(is);
    b.layout.lambda = io::get<std::uint64_t>(is);
    b.layout.total = N;
    if (b.layout.p != 0 || b.layout.p_gamma > b.layout.lambda || b.layout.lambda > N || n > N) throw ConfigError("corrupt PODB header in " + path);
    b.Phi.resize(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(n));
    io::get_span(is, std::span<double>(b.Phi.data(), N * n));
    const auto blocks = io::get<std::uint32_t>(is);
    if (blocks > 3) throw ConfigError("corrupt PODB sigma count in " + path);
    for (std::uint32_t k = 0; k < blocks; ++k) {
        const auto len = io::get<std::uint64_t>(is);
        if (len > (1u << 26)) throw ConfigError("corrupt PODB sigma length in " + path);
        Eigen::VectorXd s(static_cast<Eigen::Index>(len));
        io::get_span(is, std::span<double>(s.data(), len));
        b.sigma.push_back(std::move(s));
    }
    return b;
}

}  // namespace faultrom::pod
