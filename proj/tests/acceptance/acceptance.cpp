// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Usage: acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "faultrom/cases.hpp"
#include "faultrom/darcy_fom.hpp"
#include "faultrom/deform.hpp"
#include "faultrom/dlrom.hpp"
#include "faultrom/error.hpp"
#include "faultrom/rng.hpp"
#include "faultrom/rom_pod.hpp"
#include "faultrom/snapshots.hpp"
#include "faultrom/uq.hpp"

using namespace faultrom;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Clock = std::chrono::steady_clock;

namespace {

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

/// Outcome of one criterion: every named check must hold.
class Verdict {
public:
    void check(bool ok, const std::string& what) {
        pass_ = pass_ && ok;
        if (!ok) failed_.push_back(what);
    }
    void note(const char* fmt, ...) __attribute__((format(printf, 2, 3)));
    bool pass() const { return pass_; }
    std::string detail() const {
        std::string s = notes_;
        if (!failed_.empty()) {
            s += " | failed:";
            for (const auto& f : failed_) s += " [" + f + "]";
        }
        return s;
    }

private:
    bool pass_ = true;
    std::string notes_;
    std::vector<std::string> failed_;
};

void Verdict::note(const char* fmt, ...) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    if (!notes_.empty()) notes_ += "; ";
    notes_ += buf;
}

VectorXd centre(const snap::ParameterSpace& s) { return 0.5 * (s.lower() + s.upper()); }

const cases::CaseModel& case_model(int id) {
    static std::map<int, std::unique_ptr<cases::CaseModel>> models;
    auto& m = models[id];
    if (!m) m = std::make_unique<cases::CaseModel>(cases::by_id(id));
    return *m;
}

/// Full-size dataset of a case (its own split sizes and seed), built once.
const snap::SnapshotSet& full_dataset(int id, double* seconds = nullptr) {
    static std::map<int, std::pair<snap::SnapshotSet, double>> sets;
    auto it = sets.find(id);
    if (it == sets.end()) {
        const auto& m = case_model(id);
        const auto& d = m.definition();
        std::printf("  generating %zu case %d snapshots...\n", d.dataset.sizes.total(), id);
        std::fflush(stdout);
        const auto t0 = Clock::now();
        snap::GenerateOptions opt;
        opt.seed = d.dataset.seed;
        opt.jobs = jobs();
        auto set = snap::generate(m.space(), m.builder(), d.dataset.sizes, opt);
        it = sets.emplace(id, std::make_pair(std::move(set), since(t0))).first;
    }
    if (seconds) *seconds = it->second.second;
    return it->second.first;
}

dl::TrainResult train_case(const cases::CaseModel& m, const snap::SnapshotSet& set, double gamma_qoi) {
    const auto& d = m.definition();
    auto model = dl::make_model(m.architecture());
    dl::init_weights(model, d.dlrom.init_seed);
    auto cfg = d.dlrom.training;
    cfg.gamma_qoi = gamma_qoi;
    const int every = std::max(1, cfg.epochs / 10);
    const auto t0 = Clock::now();
    return dl::train(std::move(model), set, m.space(), cfg, gamma_qoi > 0.0 ? m.qoi_dofs() : std::nullopt,
                     [&](const dl::EpochRecord& r) {
                         if ((r.epoch + 1) % every == 0) {
                             std::printf("  epoch %d/%d  train %.4g  val %.4g  (%.0f s)\n", r.epoch + 1, cfg.epochs,
                                         r.train_loss, r.val_loss, since(t0));
                             std::fflush(stdout);
                         }
                         return true;
                     });
}

VectorXd delta_p_columns(const cases::CaseModel& m, const MatrixXd& U) {
    VectorXd dp(U.cols());
    for (Index j = 0; j < U.cols(); ++j) dp[j] = m.delta_p(U.col(j));
    return dp;
}

double fom_delta_p(const cases::CaseModel& m, const VectorXd& mu) {
    const auto pb = m.problem(mu);
    return m.delta_p(fom::solve(pb.mesh, pb.params, pb.bc).u);
}

/// Weight of the pressure-difference loss in the UQ criteria.
constexpr double kGammaQoi = 1.0;

// ----------------------------------------------------------------- criteria

Verdict fom_properties() {
    Verdict v;
    // Patch test: an affine pressure on a K-orthogonal grid is reproduced exactly.
    {
        const auto m = mesh::load_mesh(mesh::rectangle_grid(7, 5, 0.0, 2.0, 0.0, 1.0));
        fom::PhysicalParams p;
        p.region_permeability = {2.5};
        auto exact = [](const geom::Point& x) { return 0.3 + 1.7 * x.x() - 0.9 * x.y(); };
        auto bc = fom::neumann_everywhere(m);
        for (std::size_t f = 0; f < m.matrix.num_faces(); ++f)
            if (m.matrix.face_cells[f][1] < 0) bc.faces[f] = {fom::BcKind::Dirichlet, exact(m.matrix.face_centers[f])};
        const auto sol = fom::solve(m, p, bc);
        double err = 0.0;
        for (std::size_t c = 0; c < m.matrix.num_cells(); ++c)
            err = std::max(err, std::abs(sol.u[static_cast<Index>(c)] - exact(m.matrix.cell_centers[c])));
        v.note("patch %.2e", err);
        v.check(err <= 1e-10, "patch test");
    }
    // Per-cell balance at the box centre and three random points of every case.
    for (int id : {1, 2, 3}) {
        const auto& cm = case_model(id);
        MatrixXd pts = snap::sample_uniform(cm.space(), 3, 99);
        pts.conservativeResize(4, Eigen::NoChange);
        pts.row(3) = centre(cm.space()).transpose();
        double worst = 0.0, inter = 0.0;
        for (Index i = 0; i < pts.rows(); ++i) {
            const auto pb = cm.problem(pts.row(i).transpose());
            const auto sol = fom::solve(pb.mesh, pb.params, pb.bc);
            const auto rep = fom::check_conservation(sol, pb.mesh, pb.params, pb.bc);
            worst = std::max({worst, rep.matrix, rep.fault});
            inter = std::max(inter, rep.intersection);
        }
        v.note("case %d balance %.2e", id, worst);
        v.check(worst <= 1e-9, "mass balance case " + std::to_string(id));
        if (id == 3) {
            v.note("intersections %.2e", inter);
            v.check(cm.reference().intersections.size() > 0, "case 3 has intersections");
            v.check(inter <= 1e-9, "intersection sums");
        }
    }
    // Trace jump over increasing normal permeability on Case 1.
    {
        const auto& cm = case_model(1);
        const auto pb0 = cm.problem(centre(cm.space()));
        std::vector<double> jumps;
        for (double scale : {1e-3, 1e-2, 1e-1, 1.0}) {
            auto pb = pb0;
            for (auto& kn : pb.params.fault_k_normal) kn = scale;
            jumps.push_back(fom::max_trace_jump(fom::solve(pb.mesh, pb.params, pb.bc), pb.mesh, pb.params, pb.bc));
        }
        bool monotone = true;
        for (std::size_t i = 1; i < jumps.size(); ++i) monotone = monotone && jumps[i] < jumps[i - 1];
        v.note("jump %.2e -> %.2e over K_n 1e-3..1", jumps.front(), jumps.back());
        v.check(monotone, "jump decreasing");
        v.check(jumps.back() <= 1e-2 * jumps.front(), "jump vanishing");
    }
    return v;
}

Verdict mesh_deformation() {
    Verdict v;
    const auto& cm = case_model(1);
    const auto& def = *cm.deformation();
    const auto& ref = cm.reference();
    const int axis = def.axes.at(0);
    double disp = 0.0, slide = 0.0, moved = 0.0;
    int inverted = 0;
    for (double h : {0.0, 0.035, 0.07}) {
        VectorXd mu = centre(cm.space());
        mu[axis] = h;
        const VectorXd zeta =
            deform::solve_system(deform::assemble_system(def.config, def.geometric(mu)), def.config);
        const auto r = deform::constraint_residuals(def.config, zeta, def.geometric(mu));
        disp = std::max(disp, r.displacement);
        slide = std::max(slide, r.sliding);
        try {
            const auto dm = deform::displace(ref, zeta, def.config);
            for (double a : dm.matrix.cell_measures) inverted += a <= 0.0;
            if (h == 0.0)
                for (std::size_t n = 0; n < ref.matrix.num_nodes(); ++n)
                    moved = std::max(moved, (dm.matrix.node_coords[n] - ref.matrix.node_coords[n]).norm());
        } catch (const NumericalError&) {
            ++inverted;
        }
    }
    v.note("displacement %.2e, sliding %.2e, inverted %d, h=0 motion %.2e", disp, slide, inverted, moved);
    v.check(disp <= 1e-9, "prescribed displacement");
    v.check(slide <= 1e-9, "sliding normal");
    v.check(inverted == 0, "no inverted cells");
    v.check(moved <= 1e-14, "h = 0 reproduces the mesh");
    return v;
}

Verdict non_affinity() {
    Verdict v;
    const auto& cm = case_model(1);
    const int axis = cm.deformation()->axes.at(0);
    auto operator_at = [&](double h) {
        VectorXd mu = centre(cm.space());
        mu[axis] = h;
        const auto pb = cm.problem(mu);
        return Eigen::SparseMatrix<double>(fom::assemble(pb.mesh, pb.params, pb.bc).matrix);
    };
    const auto A0 = operator_at(0.0);
    const Eigen::SparseMatrix<double> D1 = operator_at(0.035) - A0, D2 = operator_at(0.07) - A0;
    // Gram matrix of the two vectorized differences.
    const double g11 = D1.squaredNorm(), g22 = D2.squaredNorm(), g12 = D1.cwiseProduct(D2).sum();
    Eigen::Matrix2d G;
    G << g11, g12, g12, g22;
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(G);
    const double s_max = std::sqrt(std::max(0.0, es.eigenvalues()[1]));
    const double s_min = std::sqrt(std::max(0.0, es.eigenvalues()[0]));
    const int rank = (s_max > 0.0) + (s_min > 1e-8 * s_max);
    v.note("singular values %.3e, %.3e -> rank %d", s_max, s_min, rank);
    v.check(rank == 2, "rank 2");
    return v;
}

Verdict pod_optimality() {
    Verdict v;
    const auto& cm = case_model(1);
    double gen_seconds = 0.0;
    const auto& set = full_dataset(1, &gen_seconds);
    const auto t0 = Clock::now();
    const MatrixXd S = set.columns(snap::Split::Train);
    const auto svd = pod::svd_snapshots(S);
    double worst_ey = 0.0, previous = INFINITY;
    bool monotone = true;
    for (Index n : {5, 15, 45}) {
        const auto basis = pod::truncate(svd, n);
        const double lhs = pod::projection_error_sq(basis, S);
        const double rhs = svd.sigma.tail(svd.sigma.size() - n).squaredNorm();
        worst_ey = std::max(worst_ey, std::abs(lhs - rhs) / rhs);
        monotone = monotone && lhs <= previous;
        previous = lhs;
    }
    const auto basis = pod::monolithic_pod(S, 45, set.layout);
    const auto test = set.indices(snap::Split::Test);
    MatrixXd ref(S.rows(), static_cast<Index>(test.size())), approx(ref.rows(), ref.cols());
    const auto builder = cm.builder();
    for (std::size_t k = 0; k < test.size(); ++k) {
        ref.col(static_cast<Index>(k)) = set.S.col(test[k]);
        approx.col(static_cast<Index>(k)) = pod::online_query(set.params.row(test[k]).transpose(), basis, builder).u;
    }
    const auto rep = uq::errors(ref, approx);
    const double total = gen_seconds + since(t0);
    v.note("Eckart-Young rel %.2e, test e_ave(45) %.3e (e_max %.3e), %.0f s incl. %zu solves", worst_ey, rep.e_ave,
           rep.e_max, total, set.size());
    v.check(worst_ey <= 1e-8, "Eckart-Young");
    v.check(monotone, "monotone in n");
    v.check(rep.e_ave <= 0.05, "e_ave(45) <= 5%");
    v.check(total < 300.0, "runtime < 5 min");
    return v;
}

Verdict block_decay() {
    Verdict v;
    const auto& set = full_dataset(1);
    const auto basis = pod::block_pod(set.columns(snap::Split::Train), set.layout, 20);
    std::array<double, 3> r{};
    for (int b = 0; b < 3; ++b) r[b] = basis.sigma[b][19] / basis.sigma[b][0];
    v.note("sigma20/sigma1: p %.3e, p_gamma %.3e, lambda %.3e", r[0], r[1], r[2]);
    v.check(r[1] < r[0], "p_gamma below p");
    v.check(r[2] < r[0], "lambda below p");
    return v;
}

Verdict dlrom_case(int id, double ave_tol, std::optional<double> max_tol, std::optional<double> budget) {
    Verdict v;
    const auto& cm = case_model(id);
    const auto& set = full_dataset(id);
    const auto t0 = Clock::now();
    const auto result = train_case(cm, set, 0.0);
    const double secs = since(t0);
    const auto test = set.indices(snap::Split::Test);
    MatrixXd ref(set.S.rows(), static_cast<Index>(test.size())), mus(set.params.cols(), ref.cols());
    for (std::size_t k = 0; k < test.size(); ++k) {
        ref.col(static_cast<Index>(k)) = set.S.col(test[k]);
        mus.col(static_cast<Index>(k)) = set.params.row(test[k]).transpose();
    }
    const auto rep = uq::errors(ref, dl::infer_batch(result.model, mus));
    v.note("%d epochs, final-epoch model: e_ave %.3e, e_max %.3e, training %.0f s", cm.definition().dlrom.training.epochs,
           rep.e_ave, rep.e_max, secs);
    v.check(rep.e_ave <= ave_tol, "e_ave");
    if (max_tol) v.check(rep.e_max <= *max_tol, "e_max");
    if (budget) v.check(secs <= *budget, "training time");
    return v;
}

std::vector<std::pair<double*, double*>> pair_params(dl::Model& m, dl::Gradients& g) {
    std::vector<std::pair<double*, double*>> out;
    auto add = [&](std::vector<dl::DenseLayer>& P, std::vector<dl::DenseLayer>& G) {
        for (std::size_t k = 0; k < P.size(); ++k) {
            for (Index i = 0; i < P[k].W.size(); ++i) out.emplace_back(P[k].W.data() + i, G[k].W.data() + i);
            for (Index i = 0; i < P[k].b.size(); ++i) out.emplace_back(P[k].b.data() + i, G[k].b.data() + i);
            out.emplace_back(&P[k].a, &G[k].a);
        }
    };
    add(m.encoder.layers, g.encoder);
    add(m.decoder.layers, g.decoder);
    add(m.map.layers, g.map);
    return out;
}

Verdict gradient_oracle() {
    Verdict v;
    double worst = 0.0;
    for (std::uint64_t trial = 0; trial < 100; ++trial) {
        rng::Stream rs(trial, 4242);
        dl::Architecture a;
        a.N = 4 + static_cast<Index>(rs.below(6));
        a.e = 1 + static_cast<Index>(rs.below(3));
        a.n = 1 + static_cast<Index>(rs.below(3));
        a.encoder_hidden = {2 + static_cast<Index>(rs.below(5))};
        a.map_hidden = {2 + static_cast<Index>(rs.below(5))};
        if (trial % 3 == 0) a.encoder_hidden.push_back(2 + static_cast<Index>(rs.below(4)));
        auto m = dl::make_model(a);
        dl::init_weights(m, 1000 + trial);
        for (dl::Network* net : {&m.encoder, &m.decoder, &m.map})
            for (auto& L : net->layers) L.a = rs.uniform(0.05, 0.6);
        const Index B = 1 + static_cast<Index>(rs.below(5));
        MatrixXd U(a.N, B), M(a.e, B);
        for (Index i = 0; i < U.size(); ++i) U.data()[i] = rs.uniform();
        for (Index i = 0; i < M.size(); ++i) M.data()[i] = rs.uniform();
        dl::TrainingConfig cfg;
        cfg.alpha = rs.uniform(0.1, 2.0);
        cfg.beta = rs.uniform(0.1, 2.0);
        cfg.gamma_qoi = trial % 2 ? rs.uniform(0.1, 2.0) : 0.0;
        const dl::QoiIndices qoi{0, a.N - 1};

        auto g = dl::zero_gradients(m);
        dl::loss(m, U, M, cfg, qoi, &g);
        auto params = pair_params(m, g);
        VectorXd analytic(static_cast<Index>(params.size())), fd(analytic.size());
        const double h = 1e-6;
        for (std::size_t k = 0; k < params.size(); ++k) {
            double* p = params[k].first;
            const double keep = *p;
            *p = keep + h;
            const double up = dl::loss(m, U, M, cfg, qoi, nullptr).total();
            *p = keep - h;
            const double dn = dl::loss(m, U, M, cfg, qoi, nullptr).total();
            *p = keep;
            fd[static_cast<Index>(k)] = (up - dn) / (2.0 * h);
            analytic[static_cast<Index>(k)] = *params[k].second;
        }
        worst = std::max(worst, (analytic - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff());
    }
    v.note("worst relative deviation %.2e over 100 trials", worst);
    v.check(worst <= 1e-5, "gradients");
    return v;
}

Verdict svd_oracle() {
    Verdict v;
    double ds = 0.0, du = 0.0, dr = 0.0;
    for (unsigned t = 0; t < 20; ++t) {
        std::srand(500 + t);
        const MatrixXd S = MatrixXd::Random(50, 20);
        const auto svd = pod::svd_snapshots(S);
        // Oracle: dense double-precision eigendecomposition of the Gram matrix.
        const Eigen::SelfAdjointEigenSolver<MatrixXd> es(S.transpose() * S);
        const VectorXd lam = es.eigenvalues().reverse();
        const MatrixXd W = es.eigenvectors().rowwise().reverse();
        const VectorXd sig = lam.cwiseMax(0.0).cwiseSqrt();
        const MatrixXd U = S * W * sig.cwiseInverse().asDiagonal();
        ds = std::max(ds, (svd.sigma - sig).cwiseAbs().maxCoeff() / sig[0]);
        // Columns agree up to sign.
        const MatrixXd C = svd.U.transpose() * U;
        du = std::max(du, (C.cwiseAbs() - MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff());
        dr = std::max(dr, (svd.U * svd.sigma.asDiagonal() * svd.V.transpose() - S).norm() / S.norm());
    }
    v.note("sigma %.2e, |U^T U_oracle| - I %.2e, reconstruction %.2e", ds, du, dr);
    v.check(ds <= 1e-8, "singular values");
    v.check(du <= 1e-8, "singular vectors");
    v.check(dr <= 1e-8, "reconstruction");
    return v;
}


/// Dataset of `train` + `val` Case-c snapshots drawn with the case seed.
snap::SnapshotSet small_dataset(const cases::CaseModel& cm, std::size_t train, std::size_t val) {
    snap::GenerateOptions opt;
    opt.seed = cm.definition().dataset.seed;
    opt.jobs = jobs();
    std::printf("  generating %zu + %zu case %d snapshots...\n", train, val, cm.definition().id);
    std::fflush(stdout);
    return snap::generate(cm.space(), cm.builder(), {train, val, 0}, opt);
}

/// Indices of the two largest entries, largest first.
std::pair<Index, Index> top_two(const VectorXd& s) {
    std::vector<Index> order(static_cast<std::size_t>(s.size()));
    for (Index i = 0; i < s.size(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return s[a] > s[b]; });
    return {order[0], order[1]};
}

Verdict sensitivity() {
    Verdict v;
    const auto& cm = case_model(1);
    const auto t0 = Clock::now();
    const auto set = small_dataset(cm, 200, 20);
    const auto net = train_case(cm, set, kGammaQoi).model;
    const std::size_t samples = 900;
    const std::uint64_t seed = cm.definition().dataset.seed;
    const auto rom = uq::sobol_first_order(
        [&](const MatrixXd& pts) { return delta_p_columns(cm, dl::infer_batch(net, pts.transpose())); }, cm.space(),
        samples, seed);
    std::printf("  FOM baseline: %zu solves...\n", samples * (cm.space().dim() + 2));
    std::fflush(stdout);
    const auto fom = uq::sobol_first_order(uq::pointwise([&](const VectorXd& mu) { return fom_delta_p(cm, mu); }, jobs()),
                                           cm.space(), samples, seed);
    const double secs = since(t0);
    const auto [r1, r2] = top_two(rom.first_order);
    const auto [f1, f2] = top_two(fom.first_order);
    std::ostringstream idx;
    for (Index i = 0; i < fom.first_order.size(); ++i)
        idx << (i ? " " : "") << cm.space().axes[static_cast<std::size_t>(i)].name << " " << rom.first_order[i] << "/"
            << fom.first_order[i];
    const double rel = std::abs(rom.mean - fom.mean) / std::abs(fom.mean);
    v.note("mean rom %.5g fom %.5g (rel %.2e); S rom/fom: %s; %.0f s", rom.mean, fom.mean, rel, idx.str().c_str(), secs);
    v.check(rel <= 0.05, "mean within 5%");
    v.check(r1 == f1 && r2 == f2, "top-two ranking");
    v.check(secs <= 900.0, "runtime <= 15 min");
    return v;
}

Verdict sobol_oracle() {
    Verdict v;
    // f = x1 + x2^2 + 3 sin(pi x3) + 0 * x4 on [0,1]^4.
    const double pi = std::numbers::pi;
    const std::array<double, 4> var{1.0 / 12.0, 4.0 / 45.0, 9.0 * (0.5 - 4.0 / (pi * pi)), 0.0};
    const double total = var[0] + var[1] + var[2];
    snap::ParameterSpace box;
    for (const char* n : {"x1", "x2", "x3", "x4"}) box.axes.push_back({n, 0.0, 1.0, snap::Scale::Linear});
    const auto r = uq::sobol_first_order(
        uq::pointwise([&](const VectorXd& x) { return x[0] + x[1] * x[1] + 3.0 * std::sin(pi * x[2]); }), box, 10000, 17);
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(r.first_order[i] - var[static_cast<std::size_t>(i)] / total));
    v.note("S = %.4f %.4f %.4f %.4f, exact %.4f %.4f %.4f 0, worst deviation %.3f", r.first_order[0], r.first_order[1],
           r.first_order[2], r.first_order[3], var[0] / total, var[1] / total, var[2] / total, worst);
    v.check(worst <= 0.05, "first-order indices");
    return v;
}

Verdict inverse_problem() {
    Verdict v;
    const auto& cm = case_model(2);
    const auto t0 = Clock::now();
    const auto set = small_dataset(cm, 200, 20);
    const auto net = train_case(cm, set, kGammaQoi).model;
    const auto box = cases::case2_inverse_space();
    uq::DeConfig de;
    const VectorXd lo = box.lower(), hi = box.upper();
    for (std::size_t i = 0; i < box.dim(); ++i)
        de.bounds.push_back({box.axes[i].name, lo[static_cast<Index>(i)], hi[static_cast<Index>(i)]});
    de.tol = 1e-3;
    de.atol = 1e-10;
    de.seed = cm.definition().dataset.seed;
    const auto r = uq::invert_delta_p(
        [&](const MatrixXd& pts) { return delta_p_columns(cm, dl::infer_batch(net, pts.transpose())); },
        cases::kCase2Target, de, [&](const VectorXd& mu) { return fom_delta_p(cm, mu); });
    const double secs = since(t0);
    const VectorXd phys = box.physical(r.mu);
    std::ostringstream mu;
    for (Index i = 0; i < phys.size(); ++i) mu << (i ? "," : "") << phys[i];
    const double fom = r.delta_p_fom.value_or(NAN);
    v.note("mu* = (%s), dp rom %.6f, fom %.6f, %d generations, %.0f s", mu.str().c_str(), r.delta_p_rom, fom,
           r.de.iterations, secs);
    v.check(std::abs(r.delta_p_rom - cases::kCase2Target) <= 1e-3, "surrogate reaches the target");
    v.check(std::abs(fom - cases::kCase2Target) <= 0.05 * cases::kCase2Target, "FOM within 5%");
    v.check(secs <= 600.0, "runtime <= 10 min");
    return v;
}

double median(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const std::size_t n = x.size();
    return n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
}

Verdict online_speed() {
    Verdict v;
    const auto& cm = case_model(1);
    // Inference cost depends on the layer widths only, so a freshly initialized model serves.
    auto net = dl::make_model(cm.architecture());
    dl::init_weights(net, 5);
    net.layout = cm.layout();
    net.mu_lo = cm.space().lower();
    net.mu_hi = cm.space().upper();
    for (auto& s : net.stats) s = {0.0, 1.0};
    const MatrixXd pts = snap::sample_uniform(cm.space(), 21, 8);
    std::vector<double> t_rom, t_fom;
    double sink = 0.0;
    for (Index i = 0; i < pts.rows(); ++i) {
        const VectorXd mu = pts.row(i).transpose();
        auto t0 = Clock::now();
        sink += dl::infer(net, mu)[0];
        t_rom.push_back(since(t0));
        t0 = Clock::now();
        const auto pb = cm.problem(mu);
        sink += fom::solve(pb.mesh, pb.params, pb.bc).u[0];
        t_fom.push_back(since(t0));
    }
    const double rom = median(t_rom), fom = median(t_fom);
    v.note("median online: dl-rom %.3e s, fom deform+assemble+solve %.3e s, speed-up %.0fx", rom, fom, fom / rom);
    v.check(std::isfinite(sink), "finite outputs");
    v.check(fom >= 10.0 * rom, "speed-up >= 10");
    return v;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "FOM correctness", fom_properties},
        {2, "mesh deformation", mesh_deformation},
        {3, "non-affinity witness", non_affinity},
        {4, "POD optimality", pod_optimality},
        {5, "block-POD decay", block_decay},
        {6, "DL-ROM case 1", [] { return dlrom_case(1, 0.03, 0.08, 3600.0); }},
        {7, "DL-ROM case 3", [] { return dlrom_case(3, 0.05, std::nullopt, std::nullopt); }},
        {8, "gradient oracle", gradient_oracle},
        {9, "SVD oracle", svd_oracle},
        {10, "sensitivity", sensitivity},
        {11, "Sobol oracle", sobol_oracle},
        {12, "inverse problem", inverse_problem},
        {13, "online speed", online_speed},
    };
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

    int failed = 0, ran = 0;
    for (const auto& c : all) {
        if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
        ++ran;
        const auto t0 = Clock::now();
        std::string line;
        bool ok = false;
        try {
            const Verdict v = c.run();
            ok = v.pass();
            line = v.detail();
        } catch (const std::exception& e) {
            line = std::string("exception: ") + e.what();
        }
        failed += !ok;
        std::printf("[%s] %2d %s (%.1f s): %s\n", ok ? "PASS" : "FAIL", c.id, c.name, since(t0), line.c_str());
        std::fflush(stdout);
    }
    std::printf("%d/%d criteria passed\n", ran - failed, ran);
    return failed ? 1 : 0;
}
