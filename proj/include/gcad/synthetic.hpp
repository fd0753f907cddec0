#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "gcad/data.hpp"
#include "gcad/errors.hpp"
#include "gcad/rng.hpp"

namespace gcad {

// ---------------------------------------------------------------------------
// Synthetic VAR benchmark with a known causal graph and injected anomalies.
// The verification oracle for causality discovery and deviation scoring.
// ---------------------------------------------------------------------------

enum class AnomalyKind { SeverEdge, Spike, Rewire };

/// Structural edit applied during [start, end), indices relative to the test
/// segment. sever_edge(i,j) zeroes the i->j coefficients; rewire(i,j->i,k)
/// moves them onto i->k; spike(i, magnitude) adds an offset to channel i that
/// feeds back into the recurrence.
struct AnomalyEvent {
    std::size_t start = 0;
    std::size_t end = 0;
    AnomalyKind kind = AnomalyKind::SeverEdge;
    std::size_t i = 0;
    std::size_t j = 0;
    std::size_t k = 0;
    double magnitude = 0.0;
};

struct SynthSpec {
    std::size_t n_channels = 5;
    std::size_t train_length = 10000;
    std::size_t test_length = 5000;
    std::size_t var_order = 2;
    // coefficient of cause channel i on effect channel j at lag l+1
    std::vector<double> coefficients;  // [(l * N + i) * N + j]
    std::vector<std::uint8_t> adjacency;  // optional; derived when empty
    double noise_std = 0.1;
    enum class Nonlinearity { None, Tanh } nonlinearity = Nonlinearity::None;
    std::vector<AnomalyEvent> anomalies;
    std::uint64_t seed = 1;

    double coeff(std::size_t lag, std::size_t i, std::size_t j) const {
        return coefficients[(lag * n_channels + i) * n_channels + j];
    }

    std::vector<std::uint8_t> derived_adjacency() const {
        std::vector<std::uint8_t> adj(n_channels * n_channels, 0);
        for (std::size_t i = 0; i < n_channels; ++i)
            for (std::size_t j = 0; j < n_channels; ++j) {
                if (i == j) continue;
                for (std::size_t l = 0; l < var_order; ++l)
                    if (coeff(l, i, j) != 0.0) adj[i * n_channels + j] = 1;
            }
        return adj;
    }
};

namespace detail {

inline double frobenius(const std::vector<double>& m) {
    double s = 0.0;
    for (double v : m) s += v * v;
    return std::sqrt(s);
}

inline std::vector<double> square_matrix(const std::vector<double>& m, std::size_t d) {
    std::vector<double> out(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t k = 0; k < d; ++k) {
            const double v = m[i * d + k];
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) out[i * d + j] += v * m[k * d + j];
        }
    return out;
}

// Spectral radius by normalized repeated squaring:
// rho = lim ||A^(2^k)||_F ^ (1/2^k). Converges from above, which makes the
// stationarity check conservative.
inline double spectral_radius(std::vector<double> m, std::size_t d) {
    double norm = frobenius(m);
    if (norm == 0.0) return 0.0;
    for (double& v : m) v /= norm;
    double log_scale = std::log(norm);
    double weight = 1.0;
    for (int it = 0; it < 40; ++it) {
        m = square_matrix(m, d);
        const double s = frobenius(m);
        if (s == 0.0) return 0.0;  // nilpotent
        for (double& v : m) v /= s;
        weight *= 0.5;
        log_scale = log_scale + weight * std::log(s);
    }
    return std::exp(log_scale);
}

// Companion-form spectral radius of a coefficient set laid out like
// SynthSpec::coefficients.
inline double companion_radius(const std::vector<double>& coeffs, std::size_t n,
                               std::size_t order) {
    const std::size_t d = n * order;
    std::vector<double> companion(d * d, 0.0);
    for (std::size_t l = 0; l < order; ++l)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                // row = effect j, column = cause i at lag l+1
                companion[j * d + (l * n + i)] = coeffs[(l * n + i) * n + j];
    for (std::size_t l = 1; l < order; ++l)
        for (std::size_t i = 0; i < n; ++i) companion[(l * n + i) * d + (l - 1) * n + i] = 1.0;
    return spectral_radius(companion, d);
}

}  // namespace detail

inline double companion_spectral_radius(const SynthSpec& spec) {
    return detail::companion_radius(spec.coefficients, spec.n_channels, spec.var_order);
}

namespace detail {

// Coefficients after applying every anomaly active in `active`.
inline std::vector<double> edited_coefficients(const SynthSpec& spec,
                                               const std::vector<const AnomalyEvent*>& active) {
    std::vector<double> c = spec.coefficients;
    const std::size_t n = spec.n_channels;
    for (const AnomalyEvent* a : active) {
        for (std::size_t l = 0; l < spec.var_order; ++l) {
            double& src = c[(l * n + a->i) * n + a->j];
            if (a->kind == AnomalyKind::SeverEdge) {
                src = 0.0;
            } else if (a->kind == AnomalyKind::Rewire) {
                c[(l * n + a->i) * n + a->k] = src;
                src = 0.0;
            }
        }
    }
    return c;
}

}  // namespace detail

inline void validate(const SynthSpec& spec) {
    const std::size_t n = spec.n_channels;
    if (n < 1) throw ConfigError("synthetic spec: n_channels must be >= 1");
    if (spec.var_order < 1) throw ConfigError("synthetic spec: var_order must be >= 1");
    if (spec.train_length <= spec.var_order || spec.test_length < 1)
        throw ConfigError("synthetic spec: lengths too short for the VAR order");
    if (spec.coefficients.size() != spec.var_order * n * n)
        throw ConfigError("synthetic spec: coefficient count must be var_order * N * N");
    if (!(spec.noise_std >= 0.0)) throw ConfigError("synthetic spec: noise_std must be >= 0");
    if (!spec.adjacency.empty()) {
        if (spec.adjacency.size() != n * n)
            throw ConfigError("synthetic spec: adjacency must be N x N");
        if (spec.adjacency != spec.derived_adjacency())
            throw ConfigError("synthetic spec: adjacency disagrees with coefficients");
    }
    for (const AnomalyEvent& a : spec.anomalies) {
        if (a.start >= a.end || a.end > spec.test_length)
            throw ConfigError("synthetic spec: anomaly interval outside [0, test_length)");
        if (a.i >= n || (a.kind != AnomalyKind::Spike && a.j >= n) ||
            (a.kind == AnomalyKind::Rewire && (a.k >= n || a.k == a.j)))
            throw ConfigError("synthetic spec: anomaly channel out of range");
    }

    const double rho = companion_spectral_radius(spec);
    if (!(rho < 1.0))
        throw ConfigError("synthetic spec is not stationary (companion spectral radius " +
                          std::to_string(rho) + " >= 1)");
    // structural edits must not destabilize the interval they cover
    for (const AnomalyEvent& a : spec.anomalies) {
        if (a.kind == AnomalyKind::Spike) continue;
        std::vector<const AnomalyEvent*> active{&a};
        const double r =
            detail::companion_radius(detail::edited_coefficients(spec, active), n, spec.var_order);
        if (!(r < 1.0))
            throw ConfigError("synthetic spec: anomaly edit makes the system unstable");
    }
}

struct SynthResult {
    Dataset train;  // anomaly-free, no labels
    Dataset test;   // labels flag the anomaly intervals
};

/// Simulates x_t = phi(sum_l C_l^T x_{t-l}) + noise. The first var_order rows
/// are standard-normal seed states, so the recurrence holds exactly from row
/// var_order onward. The test segment continues from the train tail with the
/// anomaly edits applied inside their intervals.
inline SynthResult generate_synthetic(const SynthSpec& spec) {
    validate(spec);
    const std::size_t n = spec.n_channels;
    const std::size_t order = spec.var_order;
    const std::size_t total = spec.train_length + spec.test_length;
    Rng rng(spec.seed);

    std::vector<double> series(total * n, 0.0);
    for (std::size_t t = 0; t < order; ++t)
        for (std::size_t i = 0; i < n; ++i) series[t * n + i] = rng.normal();

    std::vector<double> coeffs = spec.coefficients;
    bool edited = false;
    for (std::size_t t = order; t < total; ++t) {
        const bool in_test = t >= spec.train_length;
        const std::size_t test_t = in_test ? t - spec.train_length : 0;

        std::vector<const AnomalyEvent*> active;
        if (in_test)
            for (const AnomalyEvent& a : spec.anomalies)
                if (test_t >= a.start && test_t < a.end) active.push_back(&a);
        if (!active.empty()) {
            coeffs = detail::edited_coefficients(spec, active);
            edited = true;
        } else if (edited) {
            coeffs = spec.coefficients;
            edited = false;
        }

        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < order; ++l) {
                const double* prev = &series[(t - 1 - l) * n];
                for (std::size_t i = 0; i < n; ++i) s += coeffs[(l * n + i) * n + j] * prev[i];
            }
            if (spec.nonlinearity == SynthSpec::Nonlinearity::Tanh) s = std::tanh(s);
            if (spec.noise_std > 0.0) s += spec.noise_std * rng.normal();
            series[t * n + j] = s;
        }
        for (const AnomalyEvent* a : active)
            if (a->kind == AnomalyKind::Spike) series[t * n + a->i] += a->magnitude;
    }

    SynthResult out;
    out.train.rows = spec.train_length;
    out.train.cols = n;
    out.train.values.assign(series.begin(),
                            series.begin() + static_cast<std::ptrdiff_t>(spec.train_length * n));
    out.test.rows = spec.test_length;
    out.test.cols = n;
    out.test.values.assign(series.begin() + static_cast<std::ptrdiff_t>(spec.train_length * n),
                           series.end());
    for (std::size_t i = 0; i < n; ++i) {
        out.train.channel_names.push_back("ch" + std::to_string(i));
        out.test.channel_names.push_back("ch" + std::to_string(i));
    }
    out.test.labels.assign(spec.test_length, 0);
    for (const AnomalyEvent& a : spec.anomalies)
        for (std::size_t t = a.start; t < a.end; ++t) out.test.labels[t] = 1;
    return out;
}

/// Desk-scale default benchmark: 5 channels, VAR(2), 6 true edges, three
/// 200-step anomaly intervals (sever, rewire, sever).
inline SynthSpec default_benchmark_spec() {
    SynthSpec spec;
    spec.n_channels = 5;
    spec.train_length = 10000;
    spec.test_length = 5000;
    spec.var_order = 2;
    spec.noise_std = 0.1;
    spec.seed = 1;
    spec.coefficients.assign(2 * 5 * 5, 0.0);
    auto set = [&](std::size_t lag, std::size_t i, std::size_t j, double v) {
        spec.coefficients[(lag * 5 + i) * 5 + j] = v;
    };
    // channel 0 is a slowly varying exogenous driver; the rest carry enough
    // self-dependence that their diagonal effects stay visible
    set(0, 0, 0, 0.9);
    set(1, 0, 0, 0.05);
    for (std::size_t i = 1; i < 5; ++i) {
        set(0, i, i, 0.3);
        set(1, i, i, 0.1);
    }
    // six true cross edges, acyclic so stationarity is inherited from the
    // per-channel AR roots
    set(0, 0, 1, 2.0);
    set(0, 1, 2, 1.2);
    set(0, 2, 3, -0.6);
    set(1, 0, 3, 0.8);
    set(0, 3, 4, 0.9);
    set(1, 1, 4, 0.5);

    spec.anomalies = {
        AnomalyEvent{1000, 1200, AnomalyKind::SeverEdge, 0, 1, 0, 0.0},
        AnomalyEvent{2400, 2600, AnomalyKind::Rewire, 0, 1, 2, 0.0},
        AnomalyEvent{3800, 4000, AnomalyKind::SeverEdge, 1, 2, 0, 0.0},
    };
    return spec;
}

}  // namespace gcad
