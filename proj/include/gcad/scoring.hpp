#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "gcad/causality.hpp"
#include "gcad/errors.hpp"
#include "gcad/mixer.hpp"
#include "gcad/parallel.hpp"
#include "gcad/rng.hpp"
#include "gcad/tensor.hpp"

namespace gcad {

/// Typical causal pattern of the normal data: the entrywise mean of the
/// sparsified graphs of a Bernoulli sample of training windows.
struct NormalPattern {
    std::size_t n = 0;
    std::vector<double> mean_graph;  // row-major n x n
    std::size_t n_samples = 0;
    double bernoulli_p = 1.0;
    double epsilon = 1e-6;

    double at(std::size_t i, std::size_t j) const { return mean_graph[i * n + j]; }

    bool operator==(const NormalPattern&) const = default;
};

/// Per-window anomaly scores aligned to prediction timestamps.
/// s[k] = sc[k] + beta * st[k].
struct ScoreSeries {
    std::vector<std::size_t> timestamps;
    std::vector<double> sc;
    std::vector<double> st;
    std::vector<double> s;
    double beta = 0.0;
};

/// Bernoulli-samples the training windows (keep probability p), maps the kept
/// windows through batch_graphs and averages. An empty draw is retried with a
/// derived seed, at most `max_retries` times.
inline NormalPattern sample_normal_pattern(const MixerModel& model, const WindowList& windows,
                                           double p, std::uint64_t seed, double h,
                                           double epsilon = 1e-6, std::size_t workers = 1,
                                           std::size_t max_retries = 10,
                                           const McOptions& mc = {}) {
    if (!(p > 0.0) || p > 1.0) throw ConfigError("bernoulli_p must be in (0, 1]");
    if (windows.empty()) throw DataError("no training windows to sample from");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");

    WindowList kept;
    for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
        // attempt 0 draws from the seed itself so callers can reproduce the mask
        Rng rng(attempt == 0 ? seed : derive_seed(seed, attempt));
        kept.clear();
        for (const Window& w : windows)
            if (rng.bernoulli(p)) kept.push_back(w);
        if (!kept.empty()) break;
    }
    if (kept.empty())
        throw SamplingError("Bernoulli sampling kept zero windows after retries; increase p");

    std::vector<SparseCausalGraph> graphs = batch_graphs(model, kept, h, workers, mc);
    NormalPattern pattern;
    pattern.n = model.config.n_channels;
    pattern.mean_graph.assign(pattern.n * pattern.n, 0.0);
    for (const SparseCausalGraph& g : graphs)
        for (std::size_t i = 0; i < pattern.mean_graph.size(); ++i)
            pattern.mean_graph[i] += g.values[i];
    const double inv = 1.0 / static_cast<double>(graphs.size());
    for (double& v : pattern.mean_graph) v *= inv;
    pattern.n_samples = graphs.size();
    pattern.bernoulli_p = p;
    pattern.epsilon = epsilon;
    return pattern;
}

namespace detail {

inline void check_match(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw ShapeError(std::string(what) + ": size " + std::to_string(a) +
                         " does not match pattern size " + std::to_string(b));
}

}  // namespace detail

/// Relative L1 deviation of a test graph from the normal pattern, summed over
/// all entries.
inline double causal_deviation(const SparseCausalGraph& test, const NormalPattern& normal) {
    detail::check_match(test.n, normal.n, "causal_deviation");
    double s = 0.0;
    for (std::size_t i = 0; i < test.values.size(); ++i)
        s += std::fabs(test.values[i] - normal.mean_graph[i]) /
             (normal.mean_graph[i] + normal.epsilon);
    return s;
}

/// Diagonal-only deviation: how far each channel's self-dependence strayed
/// from its normal value.
inline double time_deviation(const SparseCausalGraph& test, const NormalPattern& normal) {
    detail::check_match(test.n, normal.n, "time_deviation");
    double s = 0.0;
    for (std::size_t i = 0; i < test.n; ++i)
        s += std::fabs(test.at(i, i) - normal.at(i, i)) / (normal.at(i, i) + normal.epsilon);
    return s;
}

/// Entrywise |test - normal|, exported for per-window diagnostics.
inline Tensor deviation_matrix(const SparseCausalGraph& test, const NormalPattern& normal) {
    detail::check_match(test.n, normal.n, "deviation_matrix");
    Tensor d({test.n, test.n});
    for (std::size_t i = 0; i < test.values.size(); ++i)
        d[i] = std::fabs(test.values[i] - normal.mean_graph[i]);
    return d;
}

/// Mixes causal and temporal deviations into the final score series.
inline ScoreSeries combine(std::vector<double> sc, std::vector<double> st, double beta,
                           std::vector<std::size_t> timestamps = {}) {
    if (sc.size() != st.size())
        throw ShapeError("combine: sc length " + std::to_string(sc.size()) +
                         " != st length " + std::to_string(st.size()));
    if (!timestamps.empty() && timestamps.size() != sc.size())
        throw ShapeError("combine: timestamps length does not match scores");
    if (!(beta >= 0.0)) throw ConfigError("beta must be >= 0");
    ScoreSeries series;
    series.beta = beta;
    series.sc = std::move(sc);
    series.st = std::move(st);
    series.timestamps = std::move(timestamps);
    series.s.resize(series.sc.size());
    for (std::size_t k = 0; k < series.s.size(); ++k)
        series.s[k] = series.sc[k] + beta * series.st[k];
    return series;
}

/// Full scoring pass: per-window causal graph, deviations against the normal
/// pattern, combined score. Parallel over windows with deterministic output.
inline ScoreSeries score_windows(const MixerModel& model, const WindowList& windows,
                                 const NormalPattern& normal, double h, double beta,
                                 std::size_t workers = 1, const McOptions& mc = {}) {
    detail::check_match(model.config.n_channels, normal.n, "score_windows");
    std::vector<double> sc(windows.size()), st(windows.size());
    std::vector<std::size_t> ts(windows.size());
    parallel_for(windows.size(), workers, [&](std::size_t k) {
        SparseCausalGraph g = window_graph(model, windows[k], h, mc);
        sc[k] = causal_deviation(g, normal);
        st[k] = time_deviation(g, normal);
        ts[k] = windows[k].target_index;
    });
    return combine(std::move(sc), std::move(st), beta, std::move(ts));
}

/// Plain prediction-error score (sum of channel losses), the baseline the
/// causal scores are measured against.
inline std::vector<double> prediction_error_scores(const MixerModel& model,
                                                   const WindowList& windows,
                                                   std::size_t workers = 1) {
    std::vector<double> out(windows.size());
    parallel_for(windows.size(), workers, [&](std::size_t k) {
        Tensor cl = channel_loss(forward(model, windows[k].input), windows[k].target);
        out[k] = sum_all(cl)[0];
    });
    return out;
}

}  // namespace gcad
