#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "faultrom/meshkit.hpp"
#include "faultrom/snapshots.hpp"

namespace faultrom::dl {

/// Fully connected layer followed by PReLU with one trainable slope.
struct DenseLayer {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
    double a = 0.25;

    Eigen::Index in() const { return W.cols(); }
    Eigen::Index out() const { return W.rows(); }
};

inline double prelu(double x, double a) { return x > 0.0 ? x : a * x; }

/// Counts forward passes; copies carry the current value.
struct CallCounter {
    mutable std::atomic<std::uint64_t> value{0};
    CallCounter() = default;
    CallCounter(const CallCounter& o) : value(o.value.load()) {}
    CallCounter& operator=(const CallCounter& o) {
        value.store(o.value.load());
        return *this;
    }
};

struct Network {
    std::vector<DenseLayer> layers;
    CallCounter calls;

    Eigen::Index in() const { return layers.front().in(); }
    Eigen::Index out() const { return layers.back().out(); }
    /// Columns are samples.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& X) const;
    std::size_t weight_count() const;
};

/// Layer widths of the three networks; the decoder mirrors the encoder.
struct Architecture {
    Eigen::Index N = 0;  // full-order size
    Eigen::Index e = 0;  // parameters
    Eigen::Index n = 0;  // latent size
    std::vector<Eigen::Index> encoder_hidden;
    std::vector<Eigen::Index> map_hidden;
};

struct Model {
    Network encoder;  // N -> n
    Network decoder;  // n -> N
    Network map;      // e -> n
    snap::NormStats stats{};
    mesh::DofLayout layout;
    Eigen::VectorXd mu_lo, mu_hi;  // parameter box used to scale inputs to [0,1]

    Eigen::Index N() const { return decoder.out(); }
    Eigen::Index n() const { return map.out(); }
    Eigen::Index e() const { return map.in(); }
};

/// Per-network trainable weights (weights, biases and one slope per layer).
struct WeightCounts {
    std::size_t encoder = 0, decoder = 0, map = 0;
    std::size_t total() const { return encoder + decoder + map; }
};
WeightCounts weight_counts(const Architecture& arch);

/// Zero-initialized model with the given architecture.
Model make_model(const Architecture& arch);

/// Weights and biases of a layer with fan-in m drawn from U(-sqrt(1/m), sqrt(1/m)); slopes 0.25.
void init_weights(Model& model, std::uint64_t seed);

/// Injection / production rows of the quantity of interest (both in the p block).
struct QoiIndices {
    Eigen::Index injection = 0;
    Eigen::Index production = 0;
};

struct TrainingConfig {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma_qoi = 0.0;
    int epochs = 4000;
    int batch_size = 32;
    double lr = 1e-3;
    double decay_factor = 0.6;
    int decay_every = 500;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 0;
    bool two_stage = false;  // first autoencoder on alpha*l1, then the map on beta*l2
};

/// Loss terms for a batch, already weighted.
struct LossParts {
    double l1 = 0.0, l2 = 0.0, l3 = 0.0;
    double total() const { return l1 + l2 + l3; }
};

/// Same layout as the model, holding gradients.
struct Gradients {
    std::vector<DenseLayer> encoder, decoder, map;
};
Gradients zero_gradients(const Model& model);

/// Loss on a batch of normalized snapshots U (N x B) and unit parameters M (e x B).
/// The QoI term compares the pressure difference of Psi(phi(mu)) with the one
/// read from U, both in normalized units. Gradients are accumulated into grads
/// (which must be zeroed and shaped like the model) when it is not null.
LossParts loss(const Model& model, const Eigen::MatrixXd& U, const Eigen::MatrixXd& M, const TrainingConfig& config,
               const std::optional<QoiIndices>& qoi, Gradients* grads);

struct AdamState {
    Gradients m, v;
    std::uint64_t t = 0;
};
AdamState make_adam(const Model& model);

/// One Adam update with bias correction. `mask` limits the update to
/// encoder/decoder/map (in that order).
void adam_step(Model& model, const Gradients& grads, AdamState& state, double lr, const TrainingConfig& config,
               std::array<bool, 3> mask = {true, true, true});

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    Model model;  // final epoch
    Model best;   // lowest validation loss
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    double seconds = 0.0;
};

/// Called after each epoch; return false to stop early.
using EpochCallback = std::function<bool(const EpochRecord&)>;

/// Train on the set's training split, monitor on its validation split. The
/// model's stats, layout and parameter box are filled from the set and space.
TrainResult train(Model model, const snap::SnapshotSet& set, const snap::ParameterSpace& space,
                  const TrainingConfig& config, const std::optional<QoiIndices>& qoi = std::nullopt,
                  const EpochCallback& on_epoch = {});

/// Psi(phi(mu)) denormalized; the encoder is not evaluated.
Eigen::VectorXd infer(const Model& model, const Eigen::VectorXd& mu);
/// Batched form: columns of MU are parameter points.
Eigen::MatrixXd infer_batch(const Model& model, const Eigen::MatrixXd& MU);

void save(const Model& model, const std::string& path);
Model load(const std::string& path);

}  // namespace faultrom::dl
