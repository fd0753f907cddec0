#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gcad/errors.hpp"
#include "gcad/mixer.hpp"
#include "gcad/parallel.hpp"
#include "gcad/rng.hpp"
#include "gcad/window.hpp"

namespace gcad {

/// Pairwise Granger effect strengths. Entry (i, j) is the degree to which
/// channel i causes channel j: the lag-mean of the absolute channel-separated
/// gradients. Always entrywise non-negative.
struct CausalityMatrix {
    std::size_t n = 0;
    std::vector<double> values;  // row-major n x n

    CausalityMatrix() = default;
    explicit CausalityMatrix(std::size_t n_) : n(n_), values(n_ * n_, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }

    bool operator==(const CausalityMatrix&) const = default;
};

/// Causality matrix after removing bidirectional similarity edges and
/// thresholding. Off-diagonal entries satisfy min(g[i][j], g[j][i]) = 0 and
/// every surviving entry is >= threshold.
struct SparseCausalGraph {
    std::size_t n = 0;
    double threshold = 0.0;
    std::vector<double> values;

    SparseCausalGraph() = default;
    SparseCausalGraph(std::size_t n_, double h) : n(n_), threshold(h), values(n_ * n_, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return values[i * n + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n + j]; }

    bool operator==(const SparseCausalGraph&) const = default;
};

/// Lag-mean of absolute gradients: effect of channel i on channel j averaged
/// uniformly over the window's lags.
inline CausalityMatrix quantify(const GradientTensor& g) {
    if (!g.all_finite()) throw NumericError("gradient tensor contains non-finite values");
    const std::size_t n = g.n_channels();
    const std::size_t lags = g.max_lag();
    CausalityMatrix a(n);
    const double inv = 1.0 / static_cast<double>(lags);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t lag = 0; lag < lags; ++lag) s += std::fabs(g.at(i, j, lag));
            a.at(i, j) = s * inv;
        }
    return a;
}

/// Monte-Carlo variant: effect strengths averaged over `samples` Gaussian
/// perturbations of the window. Off by default in the pipeline.
inline CausalityMatrix quantify_mc(const MixerModel& model, const Tensor& window,
                                   const Tensor& y_true, std::size_t samples, double sigma,
                                   std::uint64_t seed) {
    if (samples == 0) return quantify(input_gradients(model, window, y_true));
    Rng rng(seed);
    CausalityMatrix acc(model.config.n_channels);
    for (std::size_t k = 0; k < samples; ++k) {
        Tensor probe = window;
        for (std::size_t i = 0; i < probe.numel(); ++i) probe[i] += rng.normal(0.0, sigma);
        CausalityMatrix a = quantify(input_gradients(model, probe, y_true));
        for (std::size_t i = 0; i < acc.values.size(); ++i) acc.values[i] += a.values[i];
    }
    for (double& v : acc.values) v /= static_cast<double>(samples);
    return acc;
}

/// Keeps the dominant direction of each pair (off-diagonal entries become
/// max(0, a_ij - a_ji)), preserves the diagonal, then zeroes every entry
/// below h.
inline SparseCausalGraph sparsify(const CausalityMatrix& a, double h) {
    if (h < 0.0 || !std::isfinite(h)) throw ConfigError("sparsity threshold must be >= 0");
    SparseCausalGraph g(a.n, h);
    for (std::size_t i = 0; i < a.n; ++i) {
        for (std::size_t j = 0; j < a.n; ++j) {
            double v = (i == j) ? a.at(i, i) : std::max(0.0, a.at(i, j) - a.at(j, i));
            g.at(i, j) = (v < h) ? 0.0 : v;
        }
    }
    return g;
}

/// Optional Monte-Carlo averaging of the effect quantification. Off (samples
/// = 0) means the single-point estimator at the observed window.
struct McOptions {
    std::size_t samples = 0;
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// Per-window causal graph used throughout the pipeline. Monte-Carlo draws,
/// when enabled, are seeded per target index so results do not depend on
/// window order or worker count.
inline SparseCausalGraph window_graph(const MixerModel& model, const Window& w, double h,
                                      const McOptions& mc = {}) {
    CausalityMatrix a =
        mc.samples == 0
            ? quantify(input_gradients(model, w.input, w.target))
            : quantify_mc(model, w.input, w.target, mc.samples, mc.sigma,
                          derive_seed(mc.seed, w.target_index));
    return sparsify(a, h);
}

/// Sparsified causal graphs for a sequence of windows, order preserved.
/// Parallel and serial execution produce identical sequences.
inline std::vector<SparseCausalGraph> batch_graphs(const MixerModel& model,
                                                   const WindowList& windows, double h,
                                                   std::size_t workers = 1,
                                                   const McOptions& mc = {}) {
    std::vector<SparseCausalGraph> out(windows.size());
    parallel_for(windows.size(), workers, [&](std::size_t i) {
        try {
            out[i] = window_graph(model, windows[i], h, mc);
        } catch (const ShapeError& e) {
            throw ShapeError("window " + std::to_string(i) + ": " + e.what());
        } catch (const NumericError& e) {
            throw NumericError("window " + std::to_string(i) + ": " + e.what());
        } catch (const DataError& e) {
            throw DataError("window " + std::to_string(i) + ": " + e.what());
        }
    });
    return out;
}

}  // namespace gcad
