#include "faultrom/dlrom.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "faultrom/binary_io.hpp"
#include "faultrom/error.hpp"
#include "faultrom/rng.hpp"

namespace faultrom::dl {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

void activate(MatrixXd& Z, double a) { Z = Z.unaryExpr([a](double z) { return prelu(z, a); }); }

struct Trace {
    std::vector<MatrixXd> X;  // layer inputs
    std::vector<MatrixXd> Z;  // pre-activations
    MatrixXd Y;
};

Trace run(const Network& net, const MatrixXd& X0) {
    Trace t;
    t.X.reserve(net.layers.size());
    t.Z.reserve(net.layers.size());
    MatrixXd X = X0;
    for (const auto& L : net.layers) {
        MatrixXd Z = L.W * X;
        Z.colwise() += L.b;
        t.X.push_back(std::move(X));
        X = Z;
        activate(X, L.a);
        t.Z.push_back(std::move(Z));
    }
    t.Y = std::move(X);
    return t;
}

/// Accumulates parameter gradients into g and returns dL/dX0 (empty unless input_grad).
MatrixXd backward(const Network& net, const Trace& t, MatrixXd dY, std::vector<DenseLayer>& g,
                  bool input_grad = true) {
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const auto& L = net.layers[k];
        const MatrixXd& Z = t.Z[k];
        g[k].a += (dY.array() * Z.array().min(0.0)).sum();
        MatrixXd dZ = (Z.array() > 0.0).select(dY, L.a * dY);
        g[k].W.noalias() += dZ * t.X[k].transpose();
        g[k].b += dZ.rowwise().sum();
        if (k > 0 || input_grad) dY.noalias() = L.W.transpose() * dZ;
        else dY.resize(0, 0);
    }
    return dY;
}

std::vector<DenseLayer> zeros_like(const Network& net) {
    std::vector<DenseLayer> out;
    out.reserve(net.layers.size());
    for (const auto& L : net.layers)
        out.push_back({MatrixXd::Zero(L.out(), L.in()), VectorXd::Zero(L.out()), 0.0});
    return out;
}

Network make_network(const std::vector<Index>& widths) {
    Network net;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k)
        net.layers.push_back({MatrixXd::Zero(widths[k + 1], widths[k]), VectorXd::Zero(widths[k + 1]), 0.25});
    return net;
}

std::size_t count(const std::vector<Index>& widths) {
    std::size_t c = 0;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k)
        c += static_cast<std::size_t>(widths[k] * widths[k + 1] + widths[k + 1] + 1);
    return c;
}

struct Widths {
    std::vector<Index> encoder, decoder, map;
};

Widths widths(const Architecture& arch) {
    if (arch.N < 1 || arch.e < 1 || arch.n < 1) throw ConfigError("network sizes must be positive");
    for (auto h : arch.encoder_hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
    for (auto h : arch.map_hidden)
        if (h < 1) throw ConfigError("hidden widths must be positive");
    Widths w;
    w.encoder.push_back(arch.N);
    w.encoder.insert(w.encoder.end(), arch.encoder_hidden.begin(), arch.encoder_hidden.end());
    w.encoder.push_back(arch.n);
    w.decoder.assign(w.encoder.rbegin(), w.encoder.rend());
    w.map.push_back(arch.e);
    w.map.insert(w.map.end(), arch.map_hidden.begin(), arch.map_hidden.end());
    w.map.push_back(arch.n);
    return w;
}

template <typename F>
void for_each_tensor(std::vector<DenseLayer>& p, const std::vector<DenseLayer>& g, std::vector<DenseLayer>& m,
                     std::vector<DenseLayer>& v, F&& f) {
    for (std::size_t k = 0; k < p.size(); ++k) {
        auto flat = [](auto& M) { return Eigen::Map<Eigen::ArrayXd>(M.data(), M.size()); };
        auto cflat = [](const auto& M) { return Eigen::Map<const Eigen::ArrayXd>(M.data(), M.size()); };
        f(flat(p[k].W), cflat(g[k].W), flat(m[k].W), flat(v[k].W));
        f(p[k].b.array(), g[k].b.array(), m[k].b.array(), v[k].b.array());
        auto wrap = [](double& x) { return Eigen::Map<Eigen::ArrayXd>(&x, 1); };
        double ga = g[k].a;
        auto pa = wrap(p[k].a), ma = wrap(m[k].a), va = wrap(v[k].a);
        f(pa, Eigen::Map<const Eigen::ArrayXd>(&ga, 1), ma, va);
    }
}

/// Columns of unit parameters from rows of physical-coordinate parameters.
MatrixXd unit_columns(const Model& model, const MatrixXd& rows) {
    MatrixXd M(rows.cols(), rows.rows());
    for (Index j = 0; j < rows.rows(); ++j)
        for (Index i = 0; i < rows.cols(); ++i) {
            const double lo = model.mu_lo[i], hi = model.mu_hi[i];
            M(i, j) = hi > lo ? (rows(j, i) - lo) / (hi - lo) : 0.5;
        }
    return M;
}

MatrixXd gather(const MatrixXd& A, const std::vector<int>& idx, std::size_t from, std::size_t to) {
    MatrixXd out(A.rows(), static_cast<Index>(to - from));
    for (std::size_t k = from; k < to; ++k) out.col(static_cast<Index>(k - from)) = A.col(idx[k]);
    return out;
}

double batched_loss(const Model& model, const MatrixXd& U, const MatrixXd& M, const TrainingConfig& config,
                    const std::optional<QoiIndices>& qoi) {
    constexpr Index chunk = 256;
    double sum = 0.0;
    for (Index c = 0; c < U.cols(); c += chunk) {
        const Index w = std::min(chunk, U.cols() - c);
        sum += loss(model, U.middleCols(c, w), M.middleCols(c, w), config, qoi, nullptr).total() * static_cast<double>(w);
    }
    return U.cols() ? sum / static_cast<double>(U.cols()) : 0.0;
}

}  // namespace

MatrixXd Network::forward(const MatrixXd& X) const {
    if (X.rows() != in()) throw ConfigError("network input has the wrong size");
    calls.value.fetch_add(1, std::memory_order_relaxed);
    MatrixXd Y = X;
    for (const auto& L : layers) {
        MatrixXd Z = L.W * Y;
        Z.colwise() += L.b;
        activate(Z, L.a);
        Y = std::move(Z);
    }
    return Y;
}

std::size_t Network::weight_count() const {
    std::size_t c = 0;
    for (const auto& L : layers) c += static_cast<std::size_t>(L.W.size() + L.b.size() + 1);
    return c;
}

WeightCounts weight_counts(const Architecture& arch) {
    const auto w = widths(arch);
    return {count(w.encoder), count(w.decoder), count(w.map)};
}

Model make_model(const Architecture& arch) {
    const auto w = widths(arch);
    Model m;
    m.encoder = make_network(w.encoder);
    m.decoder = make_network(w.decoder);
    m.map = make_network(w.map);
    m.mu_lo = VectorXd::Zero(arch.e);
    m.mu_hi = VectorXd::Ones(arch.e);
    return m;
}

void init_weights(Model& model, std::uint64_t seed) {
    std::uint64_t stream = 0;
    for (Network* net : {&model.encoder, &model.decoder, &model.map}) {
        for (auto& L : net->layers) {
            rng::Stream rs(seed, ++stream);
            const double r = std::sqrt(1.0 / static_cast<double>(L.in()));
            for (Index j = 0; j < L.W.cols(); ++j)
                for (Index i = 0; i < L.W.rows(); ++i) L.W(i, j) = rs.uniform(-r, r);
            for (Index i = 0; i < L.b.size(); ++i) L.b[i] = rs.uniform(-r, r);
            L.a = 0.25;
        }
    }
}

LossParts loss(const Model& model, const MatrixXd& U, const MatrixXd& M, const TrainingConfig& config,
               const std::optional<QoiIndices>& qoi, Gradients* grads) {
    const Index B = U.cols();
    if (B < 1 || M.cols() != B) throw ConfigError("loss: empty or mismatched batch");
    if (U.rows() != model.N() || M.rows() != model.e()) throw ConfigError("loss: batch does not match the model");
    const double Bd = static_cast<double>(B), Nd = static_cast<double>(model.N()), nd = static_cast<double>(model.n());
    const bool use_l1 = config.alpha != 0.0;
    const bool use_l2 = config.beta != 0.0;
    const bool use_l3 = config.gamma_qoi != 0.0 && qoi.has_value();

    LossParts out;
    const Trace enc = (use_l1 || use_l2) ? run(model.encoder, U) : Trace{};
    const Trace map = (use_l2 || use_l3) ? run(model.map, M) : Trace{};
    MatrixXd dE = MatrixXd::Zero(model.n(), B);
    MatrixXd dM = MatrixXd::Zero(model.n(), B);

    if (use_l1) {
        const Trace dec = run(model.decoder, enc.Y);
        const MatrixXd R = dec.Y - U;
        out.l1 = config.alpha * R.squaredNorm() / (Bd * Nd);
        if (grads) dE += backward(model.decoder, dec, (2.0 * config.alpha / (Bd * Nd)) * R, grads->decoder);
    }
    if (use_l2) {
        const MatrixXd R = enc.Y - map.Y;
        out.l2 = config.beta * R.squaredNorm() / (Bd * nd);
        if (grads) {
            dE += (2.0 * config.beta / (Bd * nd)) * R;
            dM -= (2.0 * config.beta / (Bd * nd)) * R;
        }
    }
    if (use_l3) {
        const Index i = qoi->injection, j = qoi->production;
        if (i < 0 || j < 0 || i >= model.N() || j >= model.N()) throw ConfigError("QoI index out of range");
        const Trace dec = run(model.decoder, map.Y);
        const Eigen::RowVectorXd r = (dec.Y.row(i) - dec.Y.row(j)) - (U.row(i) - U.row(j));
        out.l3 = config.gamma_qoi * r.squaredNorm() / Bd;
        if (grads) {
            MatrixXd dY = MatrixXd::Zero(model.N(), B);
            dY.row(i) += (2.0 * config.gamma_qoi / Bd) * r;
            dY.row(j) -= (2.0 * config.gamma_qoi / Bd) * r;
            dM += backward(model.decoder, dec, std::move(dY), grads->decoder);
        }
    }
    if (grads) {
        if (use_l1 || use_l2) backward(model.encoder, enc, std::move(dE), grads->encoder, false);
        if (use_l2 || use_l3) backward(model.map, map, std::move(dM), grads->map, false);
    }
    return out;
}

Gradients zero_gradients(const Model& model) {
    return {zeros_like(model.encoder), zeros_like(model.decoder), zeros_like(model.map)};
}

AdamState make_adam(const Model& model) { return {zero_gradients(model), zero_gradients(model), 0}; }

void adam_step(Model& model, const Gradients& g, AdamState& s, double lr, const TrainingConfig& c,
               std::array<bool, 3> mask) {
    ++s.t;
    const double b1 = c.adam_beta1, b2 = c.adam_beta2, eps = c.adam_eps;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    // Chunked so m and v are still in cache for the parameter update.
    auto update = [&](auto&& p, const auto& gr, auto&& m, auto&& v) {
        constexpr Index chunk = 2048;
        for (Index i = 0; i < p.size(); i += chunk) {
            const Index len = std::min(chunk, p.size() - i);
            auto mi = m.segment(i, len);
            auto vi = v.segment(i, len);
            const auto gi = gr.segment(i, len);
            mi = b1 * mi + (1.0 - b1) * gi;
            vi = b2 * vi + (1.0 - b2) * gi.square();
            p.segment(i, len) -= lr * (mi / c1) / ((vi / c2).sqrt() + eps);
        }
    };
    if (mask[0]) for_each_tensor(model.encoder.layers, g.encoder, s.m.encoder, s.v.encoder, update);
    if (mask[1]) for_each_tensor(model.decoder.layers, g.decoder, s.m.decoder, s.v.decoder, update);
    if (mask[2]) for_each_tensor(model.map.layers, g.map, s.m.map, s.v.map, update);
}

TrainResult train(Model model, const snap::SnapshotSet& set, const snap::ParameterSpace& space,
                  const TrainingConfig& config, const std::optional<QoiIndices>& qoi, const EpochCallback& on_epoch) {
    if (config.epochs < 0 || config.batch_size < 1) throw ConfigError("epochs must be >= 0 and batch size >= 1");
    if (!(config.lr > 0.0) || !(config.decay_factor > 0.0) || config.decay_every < 1)
        throw ConfigError("learning rate, decay factor and decay period must be positive");
    if (config.alpha < 0.0 || config.beta < 0.0 || config.gamma_qoi < 0.0)
        throw ConfigError("loss weights must be non-negative");
    if (static_cast<Index>(set.S.rows()) != model.N()) throw ConfigError("model size does not match the snapshots");
    if (static_cast<Index>(space.dim()) != model.e()) throw ConfigError("model input does not match the parameter space");

    const auto t0 = std::chrono::steady_clock::now();
    model.stats = set.stats;
    model.layout = set.layout;
    model.mu_lo = space.lower();
    model.mu_hi = space.upper();

    const MatrixXd Ut = snap::normalize(set.columns(snap::Split::Train), set.layout, set.stats);
    const MatrixXd Mt = unit_columns(model, set.params_of(snap::Split::Train));
    const MatrixXd Uv = snap::normalize(set.columns(snap::Split::Val), set.layout, set.stats);
    const MatrixXd Mv = unit_columns(model, set.params_of(snap::Split::Val));
    if (Ut.cols() < 1) throw ConfigError("no training snapshots");

    TrainResult res;
    AdamState adam = make_adam(model);
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<int> order(static_cast<std::size_t>(Ut.cols()));
    const std::size_t bs = static_cast<std::size_t>(config.batch_size);
    const int first_stage = config.two_stage ? config.epochs / 2 : 0;
    Gradients g = zero_gradients(model);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        TrainingConfig stage = config;
        std::array<bool, 3> mask{true, true, true};
        if (config.two_stage) {
            if (epoch < first_stage) {
                stage.beta = 0.0;
                stage.gamma_qoi = 0.0;
                mask = {true, true, false};
            } else {
                stage.alpha = 0.0;
                mask = {false, false, true};
            }
        }
        const double lr = config.lr * std::pow(config.decay_factor, epoch / config.decay_every);
        std::iota(order.begin(), order.end(), 0);
        rng::Stream(config.seed, static_cast<std::uint64_t>(epoch) + 1).shuffle(order.begin(), order.end());

        double sum = 0.0;
        for (std::size_t from = 0; from < order.size(); from += bs) {
            const std::size_t to = std::min(order.size(), from + bs);
            const MatrixXd U = gather(Ut, order, from, to), M = gather(Mt, order, from, to);
            for (auto* net : {&g.encoder, &g.decoder, &g.map})
                for (auto& L : *net) {
                    L.W.setZero();
                    L.b.setZero();
                    L.a = 0.0;
                }
            sum += loss(model, U, M, stage, qoi, &g).total() * static_cast<double>(to - from);
            adam_step(model, g, adam, lr, config, mask);
        }
        EpochRecord rec{epoch, lr, sum / static_cast<double>(order.size()), 0.0};
        rec.val_loss = Uv.cols() ? batched_loss(model, Uv, Mv, stage, qoi) : rec.train_loss;
        if (!std::isfinite(rec.train_loss)) throw NumericalError("training diverged at epoch " + std::to_string(epoch));
        res.history.push_back(rec);
        // In two-stage mode only the second stage's validation loss is comparable to the joint objective.
        if (epoch >= first_stage && rec.val_loss < best_val) {
            best_val = rec.val_loss;
            res.best = model;
            res.best_epoch = epoch;
        }
        if (on_epoch && !on_epoch(rec)) break;
    }
    if (res.best_epoch < 0) res.best = model;
    res.model = std::move(model);
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

MatrixXd infer_batch(const Model& model, const MatrixXd& MU) {
    if (MU.rows() != model.e()) throw ConfigError("parameter vector has the wrong size");
    const MatrixXd M = unit_columns(model, MU.transpose());
    const MatrixXd Y = model.decoder.forward(model.map.forward(M));
    return snap::denormalize(Y, model.layout, model.stats);
}

VectorXd infer(const Model& model, const VectorXd& mu) { return infer_batch(model, mu).col(0); }

namespace {

constexpr std::uint32_t kVersion = 1;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void put_network(std::ostream& os, const Network& net) {
    io::put(os, static_cast<std::uint32_t>(net.layers.size()));
    for (const auto& L : net.layers) {
        io::put(os, static_cast<std::uint64_t>(L.out()));
        io::put(os, static_cast<std::uint64_t>(L.in()));
        const RowMajor W = L.W;
        io::put_span(os, std::span<const double>(W.data(), static_cast<std::size_t>(W.size())));
        io::put_span(os, std::span<const double>(L.b.data(), static_cast<std::size_t>(L.b.size())));
        io::put(os, L.a);
    }
}

Network get_network(std::istream& is) {
    Network net;
    const auto count = io::get<std::uint32_t>(is);
    if (count == 0 || count > 64) throw ConfigError("corrupt DLRM layer count");
    for (std::uint32_t k = 0; k < count; ++k) {
        const auto out = io::get<std::uint64_t>(is), in = io::get<std::uint64_t>(is);
        if (out == 0 || in == 0 || out * in > (std::uint64_t{1} << 32)) throw ConfigError("corrupt DLRM layer shape");
        DenseLayer L{MatrixXd(static_cast<Index>(out), static_cast<Index>(in)), VectorXd(static_cast<Index>(out)), 0.0};
        RowMajor W(static_cast<Index>(out), static_cast<Index>(in));
        io::get_span(is, std::span<double>(W.data(), out * in));
        L.W = W;
        io::get_span(is, std::span<double>(L.b.data(), out));
        L.a = io::get<double>(is);
        if (!net.layers.empty() && net.layers.back().out() != L.in()) throw ConfigError("corrupt DLRM layer chain");
        net.layers.push_back(std::move(L));
    }
    return net;
}

}  // namespace

void save(const Model& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + path);
    io::put_magic(os, "DLRM");
    io::put(os, kVersion);
    io::put(os, static_cast<std::uint64_t>(model.e()));
    io::put(os, static_cast<std::uint64_t>(model.n()));
    put_network(os, model.encoder);
    put_network(os, model.decoder);
    put_network(os, model.map);
    for (const auto& s : model.stats) {
        io::put(os, s.min);
        io::put(os, s.max);
    }
    for (std::uint64_t v : {std::uint64_t{model.layout.p_gamma}, std::uint64_t{model.layout.lambda},
                            std::uint64_t{model.layout.total}})
        io::put(os, v);
    io::put(os, static_cast<std::uint64_t>(model.mu_lo.size()));
    io::put_span(os, std::span<const double>(model.mu_lo.data(), static_cast<std::size_t>(model.mu_lo.size())));
    io::put_span(os, std::span<const double>(model.mu_hi.data(), static_cast<std::size_t>(model.mu_hi.size())));
    if (!os) throw ConfigError("write failed: " + path);
}

Model load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open " + path);
    io::expect_magic(is, "DLRM");
    if (io::get<std::uint32_t>(is) != kVersion) throw ConfigError("unsupported DLRM version in " + path);
    const auto e_header = io::get<std::uint64_t>(is), n_header = io::get<std::uint64_t>(is);
    Model m;
    m.encoder = get_network(is);
    m.decoder = get_network(is);
    m.map = get_network(is);
    for (auto& s : m.stats) {
        s.min = io::get<double>(is);
        s.max = io::get<double>(is);
    }
    m.layout.p_gamma = io::get<std::uint64_t>(is);
    m.layout.lambda = io::get<std::uint64_t>(is);
    m.layout.total = io::get<std::uint64_t>(is);
    const auto e = io::get<std::uint64_t>(is);
    if (static_cast<Index>(e) != m.map.in() || e != e_header || static_cast<Index>(n_header) != m.map.out()) throw ConfigError("corrupt DLRM parameter box in " + path);
    m.mu_lo.resize(static_cast<Index>(e));
    m.mu_hi.resize(static_cast<Index>(e));
    io::get_span(is, std::span<double>(m.mu_lo.data(), e));
    io::get_span(is, std::span<double>(m.mu_hi.data(), e));
    if (m.encoder.in() != m.decoder.out() || m.encoder.out() != m.map.out() || m.decoder.in() != m.map.out() ||
        static_cast<Index>(m.layout.total) != m.decoder.out())
        throw ConfigError("inconsistent DLRM networks in " + path);
    return m;
}

}  // namespace faultrom::dl
