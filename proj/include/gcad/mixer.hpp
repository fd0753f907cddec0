#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gcad/errors.hpp"
#include "gcad/rng.hpp"
#include "gcad/tape.hpp"
#include "gcad/tensor.hpp"
#include "gcad/window.hpp"

namespace gcad {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct MixerConfig {
    std::size_t n_channels = 0;
    std::size_t max_lag = 0;
    std::size_t n_layers = 2;
    std::size_t temporal_hidden = 0;  // 0 -> 2 * max_lag
    std::size_t feature_hidden = 0;   // 0 -> 2 * n_channels
    double learning_rate = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch_size = 64;
    std::uint64_t seed = 42;

    MixerConfig resolved() const {
        MixerConfig c = *this;
        if (c.temporal_hidden == 0) c.temporal_hidden = 2 * c.max_lag;
        if (c.feature_hidden == 0) c.feature_hidden = 2 * c.n_channels;
        return c;
    }

    void validate() const {
        if (n_channels < 1) throw ConfigError("n_channels must be >= 1");
        if (max_lag < 1) throw ConfigError("max_lag must be >= 1");
        if (n_layers < 1) throw ConfigError("n_layers must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    }

    bool operator==(const MixerConfig&) const = default;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

/// One mixing layer: a temporal MLP applied per channel (shared across
/// channels) followed by a feature MLP applied per time step (shared across
/// steps), each with a residual connection.
struct MixerLayer {
    Tensor t_w1, t_b1, t_w2, t_b2;  // max_lag->hidden->max_lag
    Tensor f_w1, f_b1, f_w2, f_b2;  // n_channels->hidden->n_channels

    bool operator==(const MixerLayer&) const = default;
};

/// Window predictor: L mixing layers whose outputs are summed through skip
/// connections into a fully connected head over the flattened window.
///
/// Second-stage MLP weights, biases and the head start at zero, so a fresh
/// model is the zero function and each layer initially passes its input
/// through unchanged.
struct MixerModel {
    MixerConfig config;
    std::vector<MixerLayer> layers;
    Tensor head_w;  // (n_channels * max_lag) x n_channels
    Tensor head_b;  // n_channels

    static MixerModel init(const MixerConfig& raw) {
        raw.validate();
        MixerConfig cfg = raw.resolved();
        const std::size_t n = cfg.n_channels, lag = cfg.max_lag;
        const std::size_t th = cfg.temporal_hidden, fh = cfg.feature_hidden;

        MixerModel m;
        m.config = cfg;
        Rng rng(cfg.seed);
        auto uniform_init = [&rng](std::size_t rows, std::size_t cols) {
            Tensor w({rows, cols});
            const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
            for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
            return w;
        };
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            MixerLayer layer;
            layer.t_w1 = uniform_init(lag, th);
            layer.t_b1 = Tensor({th});
            layer.t_w2 = Tensor({th, lag});
            layer.t_b2 = Tensor({lag});
            layer.f_w1 = uniform_init(n, fh);
            layer.f_b1 = Tensor({fh});
            layer.f_w2 = Tensor({fh, n});
            layer.f_b2 = Tensor({n});
            m.layers.push_back(std::move(layer));
        }
        m.head_w = Tensor({n * lag, n});
        m.head_b = Tensor({n});
        return m;
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> ps;
        for (auto& l : layers)
            for (Tensor* t : {&l.t_w1, &l.t_b1, &l.t_w2, &l.t_b2, &l.f_w1, &l.f_b1, &l.f_w2,
                              &l.f_b2})
                ps.push_back(t);
        ps.push_back(&head_w);
        ps.push_back(&head_b);
        return ps;
    }

    std::vector<const Tensor*> parameters() const {
        std::vector<const Tensor*> ps;
        for (const auto& l : layers)
            for (const Tensor* t : {&l.t_w1, &l.t_b1, &l.t_w2, &l.t_b2, &l.f_w1, &l.f_b1, &l.f_w2,
                                    &l.f_b2})
                ps.push_back(t);
        ps.push_back(&head_w);
        ps.push_back(&head_b);
        return ps;
    }

    bool operator==(const MixerModel&) const = default;
};

namespace detail {

struct ForwardGraph {
    Tape::NodeId window = -1;
    Tape::NodeId yhat = -1;
    std::vector<Tape::NodeId> params;  // same order as MixerModel::parameters()
};

// Records the full predictor onto the tape and returns the leaf / output ids.
inline ForwardGraph record_forward(Tape& tape, const MixerModel& m, const Tensor& window) {
    const MixerConfig& cfg = m.config;
    if (window.rank() != 2 || window.dim(0) != cfg.n_channels || window.dim(1) != cfg.max_lag)
        throw ShapeError("window shape " + window.shape_string() + " does not match model (" +
                         std::to_string(cfg.n_channels) + "x" + std::to_string(cfg.max_lag) + ")");
    if (!window.all_finite()) throw DataError("window contains non-finite values");

    ForwardGraph g;
    g.window = tape.leaf(window);
    for (const Tensor* p : m.parameters()) g.params.push_back(tape.leaf(*p));

    Tape::NodeId z = g.window;
    Tape::NodeId skip = -1;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const std::size_t base = l * 8;
        const auto p = [&](std::size_t k) { return g.params[base + k]; };
        // temporal mixing across lags, shared over channels
        auto th = tape.relu(tape.add(tape.matmul(z, p(0)), p(1)));
        auto tz = tape.add(z, tape.add(tape.matmul(th, p(2)), p(3)));
        // feature mixing across channels, shared over time steps
        auto ft = tape.transpose(tz);
        auto fh = tape.relu(tape.add(tape.matmul(ft, p(4)), p(5)));
        auto fz = tape.add(ft, tape.add(tape.matmul(fh, p(6)), p(7)));
        z = tape.transpose(fz);
        skip = (skip < 0) ? z : tape.add(skip, z);
    }
    auto flat = tape.reshape(skip, {1, cfg.n_channels * cfg.max_lag});
    auto out = tape.add(tape.matmul(flat, g.params[m.layers.size() * 8]),
                        g.params[m.layers.size() * 8 + 1]);
    g.yhat = tape.reshape(out, {cfg.n_channels});
    return g;
}

}  // namespace detail

/// One-step prediction for a window. Deterministic.
inline Tensor forward(const MixerModel& model, const Tensor& window) {
    Tape tape;
    auto g = detail::record_forward(tape, model, window);
    return tape.value(g.yhat);
}

/// Per-channel squared prediction errors.
inline Tensor channel_loss(const Tensor& yhat, const Tensor& y) {
    if (!yhat.same_shape(y))
        throw ShapeError("channel_loss shapes disagree: " + yhat.shape_string() + " vs " +
                         y.shape_string());
    Tensor out(yhat.shape());
    for (std::size_t i = 0; i < yhat.numel(); ++i) {
        const double d = yhat[i] - y[i];
        out[i] = d * d;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct EpochStats {
    double train_mse = 0.0;
    std::optional<double> val_mse;
};

struct TrainLog {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;  // epoch whose weights were kept
};

namespace detail {

inline double mean_mse(const MixerModel& model, const WindowList& windows) {
    double total = 0.0;
    for (const Window& w : windows) {
        Tensor yhat = forward(model, w.input);
        Tensor cl = channel_loss(yhat, w.target);
        total += sum_all(cl)[0] / static_cast<double>(cl.numel());
    }
    return total / static_cast<double>(windows.size());
}

}  // namespace detail

/// Minibatch SGD on the channel-mean squared error. When a validation set is
/// given, stops after `patience` epochs without improvement and keeps the
/// best-validation weights.
inline MixerModel train(const WindowList& train_windows, const MixerConfig& raw_config,
                        const WindowList* val_windows = nullptr, TrainLog* log_out = nullptr,
                        std::size_t patience = 10) {
    raw_config.validate();
    const MixerConfig cfg = raw_config.resolved();
    if (train_windows.empty()) throw DataError("training set is empty");
    for (const Window& w : train_windows)
        if (w.input.rank() != 2 || w.input.dim(0) != cfg.n_channels ||
            w.input.dim(1) != cfg.max_lag || w.target.numel() != cfg.n_channels)
            throw ShapeError("training window shaped " + w.input.shape_string() +
                             " does not match config");

    MixerModel model = MixerModel::init(cfg);
    std::vector<Tensor*> params = model.parameters();
    const double inv_n = 1.0 / static_cast<double>(cfg.n_channels);

    Rng rng(derive_seed(cfg.seed, 1));  // shuffle stream, distinct from init stream
    std::vector<std::size_t> order(train_windows.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainLog log;
    MixerModel best = model;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    std::vector<Tensor> acc(params.size());
    Tape tape;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t pos = 0;
        while (pos < order.size()) {
            const std::size_t take = std::min(cfg.batch_size, order.size() - pos);
            for (std::size_t k = 0; k < params.size(); ++k)
                acc[k] = Tensor::zeros(params[k]->shape());
            for (std::size_t b = 0; b < take; ++b) {
                const Window& w = train_windows[order[pos + b]];
                tape.clear();
                auto g = detail::record_forward(tape, model, w.input);
                auto diff = tape.sub(g.yhat, tape.leaf(w.target));
                auto loss = tape.scale(tape.sum(tape.square(diff)), inv_n);
                epoch_loss += tape.value(loss)[0];
                auto grads = tape.backward(loss);
                for (std::size_t k = 0; k < params.size(); ++k) {
                    const Tensor& pg = grads[g.params[k]];
                    for (std::size_t i = 0; i < acc[k].numel(); ++i) acc[k][i] += pg[i];
                }
            }
            const double step = cfg.learning_rate / static_cast<double>(take);
            for (std::size_t k = 0; k < params.size(); ++k) {
                Tensor& p = *params[k];
                for (std::size_t i = 0; i < p.numel(); ++i) p[i] -= step * acc[k][i];
            }
            pos += take;
        }

        EpochStats stats;
        stats.train_mse = epoch_loss / static_cast<double>(order.size());
        if (!std::isfinite(stats.train_mse))
            throw TrainingError("training loss diverged at epoch " + std::to_string(epoch));

        if (val_windows && !val_windows->empty()) {
            const double v = detail::mean_mse(model, *val_windows);
            stats.val_mse = v;
            if (!std::isfinite(v))
                throw TrainingError("validation loss diverged at epoch " + std::to_string(epoch));
            if (v < best_val) {
                best_val = v;
                best = model;
                best_epoch = epoch;
                since_best = 0;
            } else if (++since_best >= patience) {
                log.epochs.push_back(stats);
                break;
            }
        }
        log.epochs.push_back(stats);
    }

    if (val_windows && !val_windows->empty()) {
        model = best;
        log.best_epoch = best_epoch;
    } else {
        log.best_epoch = log.epochs.empty() ? 0 : log.epochs.size() - 1;
    }
    if (log_out) *log_out = std::move(log);
    return model;
}

// ---------------------------------------------------------------------------
// Channel-separated input gradients
// ---------------------------------------------------------------------------

/// Gradients of each channel's squared prediction error with respect to the
/// input window. Layout [cause i][effect j][lag], lag 0 oldest.
class GradientTensor {
public:
    GradientTensor() = default;
    GradientTensor(std::size_t n_channels, std::size_t max_lag)
        : n_(n_channels), lag_(max_lag), v_(n_channels * n_channels * max_lag, 0.0) {}

    std::size_t n_channels() const { return n_; }
    std::size_t max_lag() const { return lag_; }

    double& at(std::size_t i, std::size_t j, std::size_t lag) {
        return v_[(i * n_ + j) * lag_ + lag];
    }
    double at(std::size_t i, std::size_t j, std::size_t lag) const {
        return v_[(i * n_ + j) * lag_ + lag];
    }

    const std::vector<double>& values() const { return v_; }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }

private:
    std::size_t n_ = 0, lag_ = 0;
    std::vector<double> v_;
};

/// One backward pass per output channel over a single recorded forward pass.
inline GradientTensor input_gradients(const MixerModel& model, const Tensor& window,
                                      const Tensor& y_true) {
    const MixerConfig& cfg = model.config;
    if (y_true.numel() != cfg.n_channels)
        throw ShapeError("y_true length " + std::to_string(y_true.numel()) +
                         " does not match n_channels");
    Tape tape;
    auto g = detail::record_forward(tape, model, window);
    if (!tape.value(g.yhat).all_finite())
        throw NumericError("forward pass produced non-finite prediction");
    auto diff = tape.sub(g.yhat, tape.leaf(y_true));
    auto losses = tape.square(diff);

    GradientTensor out(cfg.n_channels, cfg.max_lag);
    for (std::size_t j = 0; j < cfg.n_channels; ++j) {
        auto grads = tape.backward(tape.pick(losses, j));
        const Tensor& gw = grads[g.window];
        for (std::size_t i = 0; i < cfg.n_channels; ++i)
            for (std::size_t lag = 0; lag < cfg.max_lag; ++lag)
                out.at(i, j, lag) = gw.at(i, lag);
    }
    if (!out.all_finite()) throw NumericError("gradient tensor contains non-finite values");
    return out;
}

}  // namespace gcad
