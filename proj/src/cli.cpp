#include "faultrom/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <Eigen/Core>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>

#include "faultrom/cases.hpp"
#include "faultrom/darcy_fom.hpp"
#include "faultrom/dlrom.hpp"
#include "faultrom/error.hpp"
#include "faultrom/meshkit.hpp"
#include "faultrom/plot.hpp"
#include "faultrom/rng.hpp"
#include "faultrom/rom_pod.hpp"
#include "faultrom/snapshots.hpp"
#include "faultrom/uq.hpp"

#ifndef FAULTROM_VERSION
#define FAULTROM_VERSION "0.0.0"
#endif

namespace faultrom::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string hex(std::uint64_t h, int digits = 16) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf).substr(16 - static_cast<std::size_t>(digits));
}

std::string file_hash(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw MissingInputError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return hex(rng::fnv1a(ss.str()));
}

std::string utc_now() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_json(const fs::path& p, const json& doc) {
    std::ofstream out(p);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << doc.dump(2) << '\n';
}

// ------------------------------------------------------------------ options

/// --epochs, --lr, ... shared by several subcommands; applied from whichever
/// subcommand was parsed.
class TrainingFlags {
public:
    void add(CLI::App* app) {
        bind<int>(app, "--epochs", "Training epochs", &dl::TrainingConfig::epochs);
        bind<int>(app, "--batch", "Mini-batch size", &dl::TrainingConfig::batch_size);
        bind<double>(app, "--lr", "Initial learning rate", &dl::TrainingConfig::lr);
        bind<double>(app, "--decay-factor", "Learning-rate decay factor", &dl::TrainingConfig::decay_factor);
        bind<int>(app, "--decay-every", "Epochs between decays", &dl::TrainingConfig::decay_every);
        bind<double>(app, "--alpha", "Weight of the reconstruction loss", &dl::TrainingConfig::alpha);
        bind<double>(app, "--beta", "Weight of the latent-matching loss", &dl::TrainingConfig::beta);
        bind<double>(app, "--gamma-qoi", "Weight of the pressure-difference loss", &dl::TrainingConfig::gamma_qoi);
    }
    void apply(dl::TrainingConfig& t) const {
        for (const auto& s : setters_) s(t);
    }

private:
    template <typename T>
    void bind(CLI::App* app, const std::string& flag, const std::string& help, T dl::TrainingConfig::*field) {
        auto value = std::make_shared<T>();
        CLI::Option* opt = app->add_option(flag, *value, help);
        setters_.push_back([opt, value, field](dl::TrainingConfig& t) {
            if (opt->count()) t.*field = *value;
        });
    }
    std::vector<std::function<void(dl::TrainingConfig&)>> setters_;
};

struct Options {
    std::string config;
    int case_id = 0;
    std::string out;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int jobs = 1;
    bool allow_failures = false;
    std::vector<std::string> argv;
};

// ------------------------------------------------------------------ run context

/// Resolved configuration and output location shared by every command.
class Context {
public:
    Context(Options opts, cases::CaseDefinition def) : opts_(std::move(opts)), def_(std::move(def)) {
        if (opts_.seed_given) {
            def_.dataset.seed = opts_.seed;
            def_.dlrom.init_seed = opts_.seed;
            def_.dlrom.training.seed = opts_.seed;
        }
        json doc = cases::to_json(def_);
        const json dl = doc.at("dlrom");
        // The run directory holds the dataset; models and bases are named inside it.
        doc.erase("dlrom");
        doc.erase("pod");
        config_hash_ = hex(rng::fnv1a(doc.dump()));
        dlrom_tag_ = "dlrom-" + hex(rng::fnv1a(dl.dump()), 8);
        fs::path root = opts_.out;
        if (root.empty()) {
            const char* env = std::getenv("FAULTROM_OUT");
            root = env && *env ? env : "faultrom_out";
        }
        dir_ = root / ((def_.id ? "case" + std::to_string(def_.id) : std::string("custom")) + "-" + config_hash_);
        fs::create_directories(dir_);
    }

    const Options& options() const { return opts_; }
    const cases::CaseDefinition& def() const { return def_; }
    const fs::path& dir() const { return dir_; }
    const std::string& config_hash() const { return config_hash_; }
    const std::string& dlrom_tag() const { return dlrom_tag_; }
    std::uint64_t seed() const { return def_.dataset.seed; }
    int jobs() const { return opts_.jobs; }

    const cases::CaseModel& model() {
        if (!model_) model_ = std::make_unique<cases::CaseModel>(def_);
        return *model_;
    }

private:
    Options opts_;
    cases::CaseDefinition def_;
    fs::path dir_;
    std::string config_hash_, dlrom_tag_;
    std::unique_ptr<cases::CaseModel> model_;
};

/// Bookkeeping of one command: inputs, outputs, timings. finish() writes
/// manifest-<command>.json and points every output at it in artifacts.json.
class Session {
public:
    Session(Context& ctx, std::string command) : ctx_(ctx), command_(std::move(command)), started_(utc_now()) {
        const fs::path cfg = ctx_.dir() / "config.json";
        write_json(cfg, cases::to_json(ctx_.def()));
        outputs_.push_back("config.json");
    }

    fs::path input(const std::string& name, const std::string& producer) {
        const fs::path p = ctx_.dir() / name;
        if (!fs::exists(p))
            throw MissingInputError("missing " + p.string() + " (produce it with `faultrom " + producer + "`)");
        inputs_[name] = file_hash(p);
        return p;
    }

    fs::path output(const std::string& name) {
        outputs_.push_back(name);
        return ctx_.dir() / name;
    }

    void phase(const std::string& name, double seconds) { timings_[name] = timings_.value(name, 0.0) + seconds; }
    void online(const std::vector<double>& times) {
        if (times.empty()) return;
        const auto f = plot::five_number(times);
        double total = 0;
        for (double t : times) total += t;
        timings_["online_query"] = {{"total", total}, {"count", f.count}, {"median", f.median},
                                    {"q1", f.q1}, {"q3", f.q3}, {"min", f.min}, {"max", f.max}};
    }
    void note(const std::string& key, json value) { notes_[key] = std::move(value); }

    void finish() {
        json outs = json::object();
        for (const auto& name : outputs_) outs[name] = file_hash(ctx_.dir() / name);
        const auto& d = ctx_.def();
        const std::string manifest_name = "manifest-" + command_ + ".json";
        json m = {
            {"command", command_},
            {"argv", ctx_.options().argv},
            {"config_hash", ctx_.config_hash()},
            {"seeds", {{"dataset", d.dataset.seed}, {"init", d.dlrom.init_seed}, {"training", d.dlrom.training.seed}}},
            {"jobs", ctx_.jobs()},
            {"inputs", inputs_},
            {"outputs", outs},
            {"versions",
             {{"faultrom", FAULTROM_VERSION},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)},
              {"compiler", __VERSION__}}},
            {"timings", timings_},
            {"started", started_},
            {"finished", utc_now()},
        };
        if (!notes_.empty()) m["results"] = notes_;
        write_json(ctx_.dir() / manifest_name, m);

        const fs::path index = ctx_.dir() / "artifacts.json";
        json artifacts = json::object();
        if (fs::exists(index)) {
            std::ifstream in(index);
            artifacts = json::parse(in, nullptr, false);
            if (!artifacts.is_object()) artifacts = json::object();
        }
        for (const auto& name : outputs_) artifacts[name] = manifest_name;
        artifacts[manifest_name] = manifest_name;
        write_json(index, artifacts);
        std::cout << command_ << ": " << outputs_.size() << " artifacts in " << ctx_.dir().string() << '\n';
    }

private:
    Context& ctx_;
    std::string command_;
    std::string started_;
    std::map<std::string, std::string> inputs_;
    std::vector<std::string> outputs_;
    json timings_ = json::object();
    json notes_ = json::object();
};

// ------------------------------------------------------------------ helpers

VectorXd point_or_centre(const snap::ParameterSpace& space, const std::vector<double>& physical) {
    if (physical.empty()) return 0.5 * (space.lower() + space.upper());
    return cases::parameter_point(space, physical);
}

std::string point_tag(const VectorXd& mu) {
    std::string bytes(reinterpret_cast<const char*>(mu.data()), static_cast<std::size_t>(mu.size()) * sizeof(double));
    return hex(rng::fnv1a(bytes), 8);
}

json physical_json(const snap::ParameterSpace& space, const VectorXd& mu) {
    const VectorXd phys = space.physical(mu);
    json j = json::object();
    for (std::size_t i = 0; i < space.dim(); ++i) j[space.axes[i].name] = phys[static_cast<Index>(i)];
    return j;
}

std::string pod_name(Index n, bool block) { return std::string("pod-") + (block ? "block" : "mono") + "-n" + std::to_string(n); }

snap::SnapshotSet load_snapshots(Session& s) { return snap::load(s.input("snapshots.snap", "snapshots").string()); }

void require_qoi(const cases::CaseModel& model) {
    if (!model.qoi_cells()) throw ConfigError("this case defines no injection/production pressure difference");
}

/// Online queries at the test split: approximations, errors and per-query times.
struct TestEval {
    uq::ErrorReport report;
    std::vector<double> seconds;
    std::vector<int> indices;
};

template <typename Query>
TestEval evaluate_test(const snap::SnapshotSet& set, Query&& query) {
    const auto idx = set.indices(snap::Split::Test);
    if (idx.empty()) throw ConfigError("the dataset has no test samples");
    MatrixXd ref(set.S.rows(), static_cast<Index>(idx.size())), approx(ref.rows(), ref.cols());
    TestEval out;
    out.indices = idx;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const VectorXd mu = set.params.row(idx[k]).transpose();
        ref.col(static_cast<Index>(k)) = set.S.col(idx[k]);
        double secs = 0;
        approx.col(static_cast<Index>(k)) = query(mu, secs);
        out.seconds.push_back(secs);
    }
    out.report = uq::errors(ref, approx);
    return out;
}

void write_samples(Session& s, const std::string& stem, const TestEval& ev) {
    std::vector<double> index, err;
    for (std::size_t k = 0; k < ev.indices.size(); ++k) {
        index.push_back(ev.indices[k]);
        err.push_back(ev.report.per_sample[k]);
    }
    plot::write_csv(s.output(stem + "-samples.csv").string(), {"sample", "error", "online_seconds"},
                    {index, err, ev.seconds});
}

/// Delta p of each column of a full-order batch.
VectorXd delta_p_columns(const cases::CaseModel& model, const MatrixXd& U) {
    VectorXd dp(U.cols());
    for (Index j = 0; j < U.cols(); ++j) dp[j] = model.delta_p(U.col(j));
    return dp;
}

double fom_delta_p(const cases::CaseModel& model, const VectorXd& mu) {
    const auto prob = model.problem(mu);
    return model.delta_p(fom::solve(prob.mesh, prob.params, prob.bc).u);
}

void print_report(const std::string& label, const uq::ErrorReport& r) {
    std::printf("%s: e_ave %.4g  e_max %.4g  e_min %.4g\n", label.c_str(), r.e_ave, r.e_max, r.e_min);
}

// ------------------------------------------------------------------ commands

void cmd_mesh(Context& ctx) {
    Session s(ctx, "mesh");
    const auto t0 = Clock::now();
    const auto& model = ctx.model();
    const auto& m = model.reference();
    mesh::save_mesh_file(m, s.output("mesh.json").string());
    s.phase("mesh", since(t0));
    json summary = {{"dim", m.dim},
                    {"matrix_cells", m.matrix.cells.size()},
                    {"faults", m.faults.size()},
                    {"intersections", m.intersections.size()},
                    {"dofs", {{"p", m.layout.n_p()}, {"p_gamma", m.layout.n_p_gamma()}, {"lambda", m.layout.n_lambda()},
                              {"total", m.layout.total}}}};
    write_json(s.output("mesh-summary.json"), summary);
    std::printf("mesh: dim %d, %zu cells, %zu faults, N = %zu\n", m.dim, m.matrix.cells.size(), m.faults.size(),
                m.layout.total);
    s.finish();
}

void cmd_deform(Context& ctx, const std::vector<double>& physical, bool solve) {
    Session s(ctx, "deform");
    const auto& model = ctx.model();
    const VectorXd mu = point_or_centre(model.space(), physical);
    const std::string tag = point_tag(mu);
    auto t0 = Clock::now();
    const auto m = model.mesh_at(mu);
    s.phase("deform", since(t0));
    mesh::save_mesh_file(m, s.output("deformed-" + tag + ".json").string());
    s.note("mu", physical_json(model.space(), mu));
    if (solve) {
        t0 = Clock::now();
        const auto prob = model.problem(mu);
        const auto sol = fom::solve(prob.mesh, prob.params, prob.bc);
        s.phase("solve", since(t0));
        fom::write_solution(s.output("solution-" + tag + ".bin").string(), sol, mu);
        fom::write_pressure_csv(s.output("pressure-" + tag + ".csv").string(), sol, prob.mesh);
        s.note("residual", sol.residual);
        if (model.qoi_cells()) {
            s.note("delta_p", model.delta_p(sol.u));
            std::printf("deform: delta p = %.6g\n", model.delta_p(sol.u));
        }
    }
    s.finish();
}

void cmd_snapshots(Context& ctx) {
    Session s(ctx, "snapshots");
    const auto& model = ctx.model();
    const auto& d = ctx.def();
    snap::GenerateReport report;
    const auto t0 = Clock::now();
    auto set = snap::generate(model.space(), model.builder(), d.dataset.sizes,
                              {ctx.seed(), ctx.jobs(), ctx.options().allow_failures}, &report);
    s.phase("offline_data", since(t0));
    const auto secs = std::move(set.solve_seconds);
    set.solve_seconds.clear();  // timings live in their own file so the dataset hash is reproducible
    snap::save(set, s.output("snapshots.snap").string());
    std::vector<double> index(secs.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = static_cast<double>(i);
    plot::write_csv(s.output("snapshot-timings.csv").string(), {"column", "seconds"}, {index, secs});
    plot::timing_summary(s.output("snapshot-timing-summary.csv").string(), {{"fom_solve", secs}});
    if (!report.failed.empty()) {
        write_json(s.output("snapshot-failures.json"), {{"failed", report.failed}, {"messages", report.messages}});
        std::printf("snapshots: %zu samples failed and were dropped\n", report.failed.size());
    }
    s.note("samples", set.size());
    s.note("N", set.S.rows());
    std::printf("snapshots: %zu solves, N = %td\n", set.size(), set.S.rows());
    s.finish();
}

void cmd_pod_build(Context& ctx, std::vector<Index> modes, bool block) {
    Session s(ctx, std::string("pod-build-") + (block ? "block" : "mono"));
    const auto set = load_snapshots(s);
    if (modes.empty()) modes = ctx.def().pod.modes;
    const MatrixXd train = set.columns(snap::Split::Train), test = set.columns(snap::Split::Test);
    std::vector<double> n_col, train_err, test_err;
    std::optional<pod::PodBasis> widest;
    for (Index n : modes) {
        const auto t0 = Clock::now();
        auto basis = block ? pod::block_pod(train, set.layout, n) : pod::monolithic_pod(train, n, set.layout);
        s.phase("offline_train", since(t0));
        pod::save(basis, s.output(pod_name(n, block) + ".podb").string());
        n_col.push_back(static_cast<double>(n));
        train_err.push_back(std::sqrt(pod::projection_error_sq(basis, train) / train.squaredNorm()));
        test_err.push_back(test.size() ? std::sqrt(pod::projection_error_sq(basis, test) / test.squaredNorm()) : 0.0);
        std::printf("pod: n = %td, %td columns, projection error train %.3g test %.3g\n", n, basis.Phi.cols(),
                    train_err.back(), test_err.back());
        if (!widest || n > widest->requested) widest = std::move(basis);
    }
    const std::string stem = std::string("pod-") + (block ? "block" : "mono");
    plot::write_csv(s.output(stem + "-projection.csv").string(), {"n", "train_rel_error", "test_rel_error"},
                    {n_col, train_err, test_err});
    if (widest) {
        plot::sigma_decay((ctx.dir() / (stem + "-sigma")).string(), *widest);
        s.output(stem + "-sigma.csv");
        s.output(stem + "-sigma.svg");
    }
    s.finish();
}

pod::PodBasis load_basis(Session& s, Index n, bool block) {
    return pod::load(s.input(pod_name(n, block) + ".podb", std::string("pod build --modes ") + std::to_string(n) +
                                                               (block ? "" : " --monolithic"))
                         .string());
}

dl::Model load_dlrom(Context& ctx, Session& s) {
    return dl::load(s.input(ctx.dlrom_tag() + ".dlrm", "dlrom train (with the same training flags)").string());
}

/// Test-split errors of the POD-Galerkin ROM for each requested n.
void pod_errors(Context& ctx, Session& s, std::vector<Index> modes, bool block) {
    const auto& model = ctx.model();
    const auto set = load_snapshots(s);
    if (modes.empty()) modes = ctx.def().pod.modes;
    const auto builder = model.builder();
    std::vector<uq::ErrorReport> reports;
    std::map<std::string, std::vector<double>> phases;
    std::vector<double> all;
    const std::string stem = std::string("errors-pod-") + (block ? "block" : "mono");
    for (Index n : modes) {
        const auto basis = load_basis(s, n, block);
        auto ev = evaluate_test(set, [&](const VectorXd& mu, double& secs) {
            auto r = pod::online_query(mu, basis, builder);
            secs = r.timings.build + r.timings.assemble + r.timings.project + r.timings.solve;
            return std::move(r.u);
        });
        print_report("pod n = " + std::to_string(n), ev.report);
        write_samples(s, stem + "-n" + std::to_string(n), ev);
        phases["n" + std::to_string(n)] = ev.seconds;
        all.insert(all.end(), ev.seconds.begin(), ev.seconds.end());
        s.note("n" + std::to_string(n), {{"e_ave", ev.report.e_ave}, {"e_max", ev.report.e_max}, {"e_min", ev.report.e_min}});
        reports.push_back(std::move(ev.report));
    }
    plot::error_vs_n((ctx.dir() / stem).string(), modes, reports);
    s.output(stem + ".csv");
    s.output(stem + ".svg");
    plot::timing_summary(s.output(stem + "-timing.csv").string(), phases);
    s.online(all);
}

void dlrom_errors(Context& ctx, Session& s) {
    const auto set = load_snapshots(s);
    const auto m = load_dlrom(ctx, s);
    auto ev = evaluate_test(set, [&](const VectorXd& mu, double& secs) {
        const auto t0 = Clock::now();
        VectorXd u = dl::infer(m, mu);
        secs = since(t0);
        return u;
    });
    print_report(ctx.dlrom_tag(), ev.report);
    const std::string stem = "errors-" + ctx.dlrom_tag();
    write_samples(s, stem, ev);
    plot::error_vs_n((ctx.dir() / stem).string(), std::vector<Index>{m.n()}, {ev.report});
    s.output(stem + ".csv");
    s.output(stem + ".svg");
    plot::timing_summary(s.output(stem + "-timing.csv").string(), {{"dlrom_online", ev.seconds}});
    s.note("e_ave", ev.report.e_ave);
    s.note("e_max", ev.report.e_max);
    s.note("e_min", ev.report.e_min);
    s.online(ev.seconds);
}

void cmd_errors(Context& ctx, const std::string& rom, const std::vector<Index>& modes, bool block) {
    if (rom == "pod") {
        Session s(ctx, std::string("errors-pod-") + (block ? "block" : "mono"));
        pod_errors(ctx, s, modes, block);
        s.finish();
    } else {
        Session s(ctx, "errors-" + ctx.dlrom_tag());
        dlrom_errors(ctx, s);
        s.finish();
    }
}

void write_query(Context& ctx, Session& s, const std::string& stem, const VectorXd& mu, VectorXd u, double secs) {
    const auto& model = ctx.model();
    fom::FomSolution sol{std::move(u), 0.0, model.layout()};
    fom::write_pressure_csv(s.output(stem + ".csv").string(), sol, model.mesh_at(mu));
    s.note("mu", physical_json(model.space(), mu));
    s.online({secs});
    if (model.qoi_cells()) {
        s.note("delta_p", model.delta_p(sol.u));
        std::printf("%s: delta p = %.6g (%.3g s)\n", stem.c_str(), model.delta_p(sol.u), secs);
    } else {
        std::printf("%s: %.3g s\n", stem.c_str(), secs);
    }
}

void cmd_pod_eval(Context& ctx, Index n, bool block, const std::vector<double>& physical) {
    Session s(ctx, std::string("pod-eval-") + (block ? "block" : "mono"));
    if (physical.empty()) {
        pod_errors(ctx, s, {n}, block);
    } else {
        const auto basis = load_basis(s, n, block);
        const VectorXd mu = point_or_centre(ctx.model().space(), physical);
        auto r = pod::online_query(mu, basis, ctx.model().builder());
        const double secs = r.timings.build + r.timings.assemble + r.timings.project + r.timings.solve;
        s.note("galerkin_residual", r.galerkin_residual);
        write_query(ctx, s, pod_name(n, block) + "-query-" + point_tag(mu), mu, std::move(r.u), secs);
    }
    s.finish();
}

void cmd_dlrom_train(Context& ctx) {
    Session s(ctx, "train-" + ctx.dlrom_tag());
    const auto& model = ctx.model();
    const auto set = load_snapshots(s);
    const auto& d = ctx.def().dlrom;
    auto net = dl::make_model(model.architecture());
    dl::init_weights(net, d.init_seed);
    const int every = std::max(1, d.training.epochs / 10);
    auto result = dl::train(std::move(net), set, model.space(), d.training, model.qoi_dofs(), [&](const dl::EpochRecord& r) {
        if ((r.epoch + 1) % every == 0)
            std::printf("epoch %5d  lr %.3g  train %.4g  val %.4g\n", r.epoch + 1, r.lr, r.train_loss, r.val_loss);
        std::fflush(stdout);
        return true;
    });
    s.phase("offline_train", result.seconds);
    dl::save(result.model, s.output(ctx.dlrom_tag() + ".dlrm").string());
    dl::save(result.best, s.output(ctx.dlrom_tag() + "-best.dlrm").string());
    write_json(s.output(ctx.dlrom_tag() + ".json"), cases::to_json(ctx.def()).at("dlrom"));
    plot::training_history((ctx.dir() / (ctx.dlrom_tag() + "-history")).string(), result.history);
    s.output(ctx.dlrom_tag() + "-history.csv");
    s.output(ctx.dlrom_tag() + "-history.svg");
    s.note("best_epoch", result.best_epoch);
    s.note("final_val_loss", result.history.empty() ? 0.0 : result.history.back().val_loss);
    std::printf("dlrom: %zu epochs in %.1f s, best validation epoch %d\n", result.history.size(), result.seconds,
                result.best_epoch);
    s.finish();
}

void cmd_dlrom_eval(Context& ctx, const std::vector<double>& physical) {
    Session s(ctx, "eval-" + ctx.dlrom_tag());
    if (physical.empty()) {
        dlrom_errors(ctx, s);
    } else {
        const auto m = load_dlrom(ctx, s);
        const VectorXd mu = point_or_centre(ctx.model().space(), physical);
        const auto t0 = Clock::now();
        VectorXd u = dl::infer(m, mu);
        const double secs = since(t0);
        write_query(ctx, s, ctx.dlrom_tag() + "-query-" + point_tag(mu), mu, std::move(u), secs);
    }
    s.finish();
}

void cmd_sensitivity(Context& ctx, const std::string& rom, std::size_t samples, Index modes, bool block) {
    const auto& model = ctx.model();
    require_qoi(model);
    const std::string label = rom == "fom" ? "fom" : rom == "pod" ? pod_name(modes, block) : ctx.dlrom_tag();
    Session s(ctx, "sensitivity-" + label);
    uq::BatchQoi f;
    std::optional<pod::PodBasis> basis;
    std::optional<dl::Model> net;
    if (rom == "fom") {
        f = uq::pointwise([&](const VectorXd& mu) { return fom_delta_p(model, mu); }, ctx.jobs());
    } else if (rom == "pod") {
        basis = load_basis(s, modes, block);
        const auto builder = model.builder();
        f = uq::pointwise([&, builder](const VectorXd& mu) { return model.delta_p(pod::online_query(mu, *basis, builder).u); },
                          ctx.jobs());
    } else {
        net = load_dlrom(ctx, s);
        f = [&](const MatrixXd& pts) { return delta_p_columns(model, dl::infer_batch(*net, pts.transpose())); };
    }
    const auto t0 = Clock::now();
    const auto pf = uq::pick_freeze(f, model.space(), samples, ctx.seed());
    s.phase("online_query", since(t0));

    std::vector<std::size_t> counts;
    for (std::size_t c = 25; c < samples; c *= 2) counts.push_back(c);
    counts.push_back(samples);
    std::vector<uq::SobolResult> study;
    for (auto c : counts) study.push_back(uq::sobol_statistics(pf, c));
    const auto& final = study.back();
    if (!final.warning.empty()) std::printf("sensitivity: %s\n", final.warning.c_str());

    std::vector<std::string> names;
    for (const auto& a : model.space().axes) names.push_back(a.name);
    const std::string stem = "sensitivity-" + label;
    plot::sobol_convergence((ctx.dir() / (stem + "-convergence")).string(), study, names);
    s.output(stem + "-convergence.csv");
    s.output(stem + "-convergence.svg");
    std::vector<double> fa(pf.fA.data(), pf.fA.data() + pf.fA.size());
    plot::kde_curves((ctx.dir() / (stem + "-kde")).string(), {{label, fa}});
    s.output(stem + "-kde.csv");
    s.output(stem + "-kde.svg");
    json idx = json::object();
    for (std::size_t i = 0; i < names.size(); ++i) idx[names[i]] = final.first_order[static_cast<Index>(i)];
    const json summary = {{"rom", label},     {"base_samples", final.base_samples}, {"evaluations", final.evaluations},
                          {"mean", final.mean}, {"std", final.std},                {"first_order", idx}};
    write_json(s.output(stem + ".json"), summary);
    s.note("summary", summary);
    std::printf("sensitivity (%s): mean %.6g  std %.4g\n", label.c_str(), final.mean, final.std);
    for (std::size_t i = 0; i < names.size(); ++i)
        std::printf("  S_%s = %.4g\n", names[i].c_str(), final.first_order[static_cast<Index>(i)]);
    s.finish();
}

void cmd_invert(Context& ctx, std::optional<double> target, bool training_box) {
    const auto& model = ctx.model();
    require_qoi(model);
    Session s(ctx, "invert-" + ctx.dlrom_tag());
    const auto net = load_dlrom(ctx, s);
    const bool case2 = ctx.def().id == 2;
    if (!target && !case2) throw ConfigError("invert needs --target for this case");
    const double goal = target.value_or(cases::kCase2Target);
    const auto box = case2 && !training_box ? cases::case2_inverse_space() : model.space();
    if (box.dim() != model.space().dim()) throw ConfigError("inverse search box does not match the parameter space");

    uq::DeConfig de;
    const VectorXd lo = box.lower(), hi = box.upper();
    for (std::size_t i = 0; i < box.dim(); ++i)
        de.bounds.push_back({box.axes[i].name, lo[static_cast<Index>(i)], hi[static_cast<Index>(i)]});
    de.tol = 1e-3;
    de.atol = 1e-10;
    de.seed = ctx.seed();
    const uq::BatchQoi dp = [&](const MatrixXd& pts) { return delta_p_columns(model, dl::infer_batch(net, pts.transpose())); };
    double verify_secs = 0;
    const auto t0 = Clock::now();
    const auto r = uq::invert_delta_p(dp, goal, de, [&](const VectorXd& mu) {
        const auto t1 = Clock::now();
        const double v = fom_delta_p(model, mu);
        verify_secs = since(t1);
        return v;
    });
    s.phase("online_query", since(t0) - verify_secs);
    s.phase("fom_verification", verify_secs);
    const json result = {{"target", goal},
                         {"mu", physical_json(box, r.mu)},
                         {"delta_p_rom", r.delta_p_rom},
                         {"delta_p_fom", r.delta_p_fom.value_or(std::nan(""))},
                         {"iterations", r.de.iterations},
                         {"evaluations", r.de.evaluations},
                         {"converged", r.de.converged}};
    write_json(s.output("invert-" + ctx.dlrom_tag() + ".json"), result);
    s.note("result", result);
    const auto prob = model.problem(r.mu);
    const auto sol = fom::solve(prob.mesh, prob.params, prob.bc);
    fom::write_pressure_csv(s.output("invert-" + ctx.dlrom_tag() + "-pressure.csv").string(), sol, prob.mesh);
    std::printf("invert: delta p rom %.6g, fom %.6g (target %.6g) after %d generations, %zu evaluations\n",
                r.delta_p_rom, r.delta_p_fom.value_or(std::nan("")), goal, r.de.iterations, r.de.evaluations);
    s.finish();
}

void cmd_case_all(Context& ctx) {
    const auto& d = ctx.def();
    cmd_mesh(ctx);
    cmd_snapshots(ctx);
    cmd_pod_build(ctx, d.pod.modes, d.pod.block);
    cmd_errors(ctx, "pod", d.pod.modes, d.pod.block);
    cmd_dlrom_train(ctx);
    cmd_errors(ctx, "dlrom", {}, false);
}

// ------------------------------------------------------------------ parsing

cases::CaseDefinition resolve_definition(const Options& o) {
    if (!o.config.empty()) {
        if (!fs::exists(o.config)) throw MissingInputError("config file not found: " + o.config);
        auto def = cases::load(o.config);
        if (o.case_id && def.id && o.case_id != def.id)
            throw ConfigError("--case " + std::to_string(o.case_id) + " contradicts the config file (case " +
                              std::to_string(def.id) + ")");
        return def;
    }
    if (o.case_id) return cases::by_id(o.case_id);
    throw ConfigError("no case selected: pass --config PATH or --case 1|2|3");
}

int report(const std::exception& e) {
    std::cerr << "faultrom: " << e.what() << '\n';
    return exit_code(e);
}

}  // namespace

int exit_code(const std::exception& error) {
    if (const auto* e = dynamic_cast<const Error*>(&error)) {
        switch (e->kind()) {
            case ErrorKind::Config: return 2;
            case ErrorKind::Numerical: return 3;
            case ErrorKind::MissingInput: return 4;
        }
    }
    if (dynamic_cast<const CLI::ParseError*>(&error)) return 2;
    if (dynamic_cast<const nlohmann::json::exception*>(&error)) return 2;
    return 1;
}

int run(int argc, const char* const* argv) {
    std::vector<std::string> args(argv, argv + argc);
    return run(args);
}

int run(const std::vector<std::string>& args) {
    Options opts;
    opts.argv = args;
    opts.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    CLI::App app{"Reduced-order models of Darcy flow in faulted porous media"};
    app.name(args.empty() ? "faultrom" : fs::path(args[0]).filename().string());
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--config", opts.config, "Case definition (JSON)");
    app.add_option("--case", opts.case_id, "Built-in case 1, 2 or 3")->check(CLI::Range(1, 3));
    app.add_option("--out", opts.out, "Output root (default $FAULTROM_OUT or ./faultrom_out)");
    auto* seed_opt = app.add_option("--seed", opts.seed, "Seed of every random stream");
    app.add_option("--jobs", opts.jobs, "Worker threads for snapshots, Monte Carlo and optimization")
        ->check(CLI::PositiveNumber);
    app.add_flag("--allow-failures", opts.allow_failures, "Drop failed snapshot solves instead of aborting");

    std::vector<double> mu;
    bool solve = false, block = false, training_box = false;
    std::vector<CLI::Option*> block_flags;
    std::vector<Index> modes;
    Index eval_modes = 0;
    std::string rom = "dlrom";
    std::size_t samples = 900;
    double target = 0;
    TrainingFlags tf;

    auto* mesh_cmd = app.add_subcommand("mesh", "Build the reference mesh");
    auto* deform_cmd = app.add_subcommand("deform", "Deform the mesh at a parameter point");
    deform_cmd->add_option("--mu", mu, "Physical parameter values, comma separated (default: box centre)")
        ->delimiter(',');
    deform_cmd->add_flag("--solve", solve, "Also solve the full-order problem");
    auto* snap_cmd = app.add_subcommand("snapshots", "Sample parameters and solve the full-order model");

    auto* pod_cmd = app.add_subcommand("pod", "POD-Galerkin reduced model");
    pod_cmd->require_subcommand(1);
    auto* pod_build = pod_cmd->add_subcommand("build", "Compute POD bases from the training snapshots");
    pod_build->add_option("--modes", modes, "Modes (per block in block mode); default from the case")->delimiter(',');
    block_flags.push_back(pod_build->add_flag("--block,!--monolithic", block, "Block-wise or monolithic POD (default from the case)"));
    auto* pod_eval = pod_cmd->add_subcommand("eval", "Online POD query, or test-split evaluation without --mu");
    pod_eval->add_option("--modes", eval_modes, "Modes of the basis to use");
    pod_eval->add_option("--mu", mu, "Physical parameter values, comma separated")->delimiter(',');
    block_flags.push_back(pod_eval->add_flag("--block,!--monolithic", block, "Block-wise or monolithic POD (default from the case)"));

    auto* dl_cmd = app.add_subcommand("dlrom", "Autoencoder-based reduced model");
    dl_cmd->require_subcommand(1);
    auto* dl_train = dl_cmd->add_subcommand("train", "Train on the snapshot set");
    auto* dl_eval = dl_cmd->add_subcommand("eval", "Online query, or test-split evaluation without --mu");
    dl_eval->add_option("--mu", mu, "Physical parameter values, comma separated")->delimiter(',');

    auto* err_cmd = app.add_subcommand("errors", "Relative error report on the test split");
    err_cmd->add_option("--rom", rom, "pod or dlrom")->required()->check(CLI::IsMember({"pod", "dlrom"}));
    err_cmd->add_option("--modes", modes, "POD modes; default from the case")->delimiter(',');
    block_flags.push_back(err_cmd->add_flag("--block,!--monolithic", block, "Block-wise or monolithic POD (default from the case)"));

    auto* sens_cmd = app.add_subcommand("sensitivity", "Monte Carlo statistics and first-order Sobol indices");
    sens_cmd->add_option("--rom", rom, "fom, pod or dlrom")->check(CLI::IsMember({"fom", "pod", "dlrom"}));
    sens_cmd->add_option("--samples", samples, "Base samples")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 24));
    sens_cmd->add_option("--modes", eval_modes, "POD modes");
    block_flags.push_back(sens_cmd->add_flag("--block,!--monolithic", block, "Block-wise or monolithic POD (default from the case)"));

    auto* inv_cmd = app.add_subcommand("invert", "Match a target pressure difference with the DL-ROM");
    auto* target_opt = inv_cmd->add_option("--target", target, "Target pressure difference");
    inv_cmd->add_flag("--training-box", training_box, "Search the training box instead of the case's inverse box");

    auto* case_cmd = app.add_subcommand("case", "Run a case end to end: case <1|2|3> all");
    int case_pos = 0;
    std::string what;
    case_cmd->add_option("id", case_pos, "Case number")->required()->check(CLI::Range(1, 3));
    case_cmd->add_option("what", what, "Pipeline to run")->required()->check(CLI::IsMember({"all"}));

    for (auto* sub : {dl_train, dl_eval, err_cmd, sens_cmd, inv_cmd, case_cmd}) tf.add(sub);

    try {
        std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
        std::reverse(rest.begin(), rest.end());
        app.parse(rest);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        opts.seed_given = seed_opt->count() > 0;
        if (*case_cmd) {
            if (opts.case_id && opts.case_id != case_pos)
                throw ConfigError("--case contradicts `case " + std::to_string(case_pos) + "`");
            if (opts.config.empty()) opts.case_id = case_pos;
        }
        auto def = resolve_definition(opts);
        if (*case_cmd && def.id && def.id != case_pos)
            throw ConfigError("config file describes case " + std::to_string(def.id) + ", not " + std::to_string(case_pos));
        tf.apply(def.dlrom.training);
        Context ctx(opts, std::move(def));
        if (std::none_of(block_flags.begin(), block_flags.end(), [](const CLI::Option* o) { return o->count() > 0; }))
            block = ctx.def().pod.block;
        const Index n_eval = eval_modes ? eval_modes : ctx.def().pod.reference;

        if (*mesh_cmd) cmd_mesh(ctx);
        else if (*deform_cmd) cmd_deform(ctx, mu, solve);
        else if (*snap_cmd) cmd_snapshots(ctx);
        else if (*pod_build) cmd_pod_build(ctx, modes, block);
        else if (*pod_eval) cmd_pod_eval(ctx, n_eval, block, mu);
        else if (*dl_train) cmd_dlrom_train(ctx);
        else if (*dl_eval) cmd_dlrom_eval(ctx, mu);
        else if (*err_cmd) cmd_errors(ctx, rom, modes, block);
        else if (*sens_cmd) cmd_sensitivity(ctx, rom, samples, n_eval, block);
        else if (*inv_cmd) cmd_invert(ctx, target_opt->count() ? std::optional<double>(target) : std::nullopt, training_box);
        else if (*case_cmd) cmd_case_all(ctx);
        return 0;
    } catch (const std::exception& e) {
        return report(e);
    }
}

}  // namespace faultrom::cli
