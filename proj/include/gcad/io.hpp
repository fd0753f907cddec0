#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gcad/data.hpp"
#include "gcad/errors.hpp"
#include "gcad/eval.hpp"
#include "gcad/mixer.hpp"
#include "gcad/scoring.hpp"
#include "gcad/synthetic.hpp"

namespace gcad::io {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

inline json tensor_to_json(const Tensor& t) {
    if (t.rank() == 1) {
        return json(t.values());
    }
    json rows = json::array();
    for (std::size_t r = 0; r < t.dim(0); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < t.dim(1); ++c) row.push_back(t.at(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Tensor tensor_from_json(const json& j, std::vector<std::size_t> shape,
                               const std::string& name) {
    Tensor t(shape);
    try {
        if (shape.size() == 1) {
            if (!j.is_array() || j.size() != shape[0]) throw DataError("");
            for (std::size_t i = 0; i < shape[0]; ++i) t[i] = j.at(i).get<double>();
        } else {
            if (!j.is_array() || j.size() != shape[0]) throw DataError("");
            for (std::size_t r = 0; r < shape[0]; ++r) {
                const json& row = j.at(r);
                if (!row.is_array() || row.size() != shape[1]) throw DataError("");
                for (std::size_t c = 0; c < shape[1]; ++c) t.at(r, c) = row.at(c).get<double>();
            }
        }
    } catch (const json::exception&) {
        throw DataError("weight array '" + name + "' is malformed");
    } catch (const DataError&) {
        throw DataError("weight array '" + name + "' does not match the declared shape");
    }
    return t;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Model artifact
// ---------------------------------------------------------------------------

struct ModelArtifact {
    MixerModel model;
    MinMaxStats stats;
    std::vector<std::string> channel_names;
};

inline void save_model(const ModelArtifact& art, const std::string& path) {
    const MixerConfig& cfg = art.model.config;
    json j;
    j["format"] = "gcad-model";
    j["n_channels"] = cfg.n_channels;
    j["max_lag"] = cfg.max_lag;
    j["config"] = {{"n_channels", cfg.n_channels},
                   {"max_lag", cfg.max_lag},
                   {"n_layers", cfg.n_layers},
                   {"temporal_hidden", cfg.temporal_hidden},
                   {"feature_hidden", cfg.feature_hidden},
                   {"learning_rate", cfg.learning_rate},
                   {"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"seed", cfg.seed}};
    j["normalization"] = {{"min", art.stats.lo},
                          {"max", art.stats.hi},
                          {"channel_names", art.channel_names}};
    json layers = json::array();
    for (const MixerLayer& l : art.model.layers)
        layers.push_back({{"temporal_w1", tensor_to_json(l.t_w1)},
                          {"temporal_b1", tensor_to_json(l.t_b1)},
                          {"temporal_w2", tensor_to_json(l.t_w2)},
                          {"temporal_b2", tensor_to_json(l.t_b2)},
                          {"feature_w1", tensor_to_json(l.f_w1)},
                          {"feature_b1", tensor_to_json(l.f_b1)},
                          {"feature_w2", tensor_to_json(l.f_w2)},
                          {"feature_b2", tensor_to_json(l.f_b2)}});
    j["weights"] = {{"layers", std::move(layers)},
                    {"head_w", tensor_to_json(art.model.head_w)},
                    {"head_b", tensor_to_json(art.model.head_b)}};
    write_json_file(j, path);
}

inline ModelArtifact load_model(const std::string& path) {
    json j = load_json_file(path);
    try {
        if (j.value("format", "") != "gcad-model")
            throw DataError("'" + path + "' is not a model file");
        const json& jc = j.at("config");
        MixerConfig cfg;
        cfg.n_channels = jc.at("n_channels").get<std::size_t>();
        cfg.max_lag = jc.at("max_lag").get<std::size_t>();
        cfg.n_layers = jc.at("n_layers").get<std::size_t>();
        cfg.temporal_hidden = jc.at("temporal_hidden").get<std::size_t>();
        cfg.feature_hidden = jc.at("feature_hidden").get<std::size_t>();
        cfg.learning_rate = jc.at("learning_rate").get<double>();
        cfg.epochs = jc.at("epochs").get<std::size_t>();
        cfg.batch_size = jc.at("batch_size").get<std::size_t>();
        cfg.seed = jc.at("seed").get<std::uint64_t>();
        cfg.validate();

        ModelArtifact art;
        art.model.config = cfg;
        const std::size_t n = cfg.n_channels, lag = cfg.max_lag;
        const json& jw = j.at("weights");
        const json& jl = jw.at("layers");
        if (!jl.is_array() || jl.size() != cfg.n_layers)
            throw DataError("layer count does not match config");
        for (std::size_t l = 0; l < cfg.n_layers; ++l) {
            const json& e = jl.at(l);
            MixerLayer layer;
            layer.t_w1 = tensor_from_json(e.at("temporal_w1"), {lag, cfg.temporal_hidden},
                                          "temporal_w1");
            layer.t_b1 = tensor_from_json(e.at("temporal_b1"), {cfg.temporal_hidden},
                                          "temporal_b1");
            layer.t_w2 = tensor_from_json(e.at("temporal_w2"), {cfg.temporal_hidden, lag},
                                          "temporal_w2");
            layer.t_b2 = tensor_from_json(e.at("temporal_b2"), {lag}, "temporal_b2");
            layer.f_w1 = tensor_from_json(e.at("feature_w1"), {n, cfg.feature_hidden},
                                          "feature_w1");
            layer.f_b1 = tensor_from_json(e.at("feature_b1"), {cfg.feature_hidden},
                                          "feature_b1");
            layer.f_w2 = tensor_from_json(e.at("feature_w2"), {cfg.feature_hidden, n},
                                          "feature_w2");
            layer.f_b2 = tensor_from_json(e.at("feature_b2"), {n}, "feature_b2");
            art.model.layers.push_back(std::move(layer));
        }
        art.model.head_w = tensor_from_json(jw.at("head_w"), {n * lag, n}, "head_w");
        art.model.head_b = tensor_from_json(jw.at("head_b"), {n}, "head_b");

        const json& jn = j.at("normalization");
        art.stats.lo = jn.at("min").get<std::vector<double>>();
        art.stats.hi = jn.at("max").get<std::vector<double>>();
        art.channel_names = jn.at("channel_names").get<std::vector<std::string>>();
        if (art.stats.lo.size() != n || art.stats.hi.size() != n)
            throw DataError("normalization stats do not match n_channels");
        for (const Tensor* p : art.model.parameters())
            if (!p->all_finite()) throw DataError("model weights contain non-finite values");
        return art;
    } catch (const json::exception& e) {
        throw DataError("model file '" + path + "' is malformed: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Normal-pattern artifact
// ---------------------------------------------------------------------------

struct PatternArtifact {
    NormalPattern pattern;
    std::size_t max_lag = 0;
    double threshold = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_windows_total = 0;
};

inline void save_pattern(const PatternArtifact& art, const std::string& path) {
    json j;
    j["format"] = "gcad-pattern";
    j["n_channels"] = art.pattern.n;
    j["max_lag"] = art.max_lag;
    j["threshold"] = art.threshold;
    j["epsilon"] = art.pattern.epsilon;
    j["bernoulli_p"] = art.pattern.bernoulli_p;
    j["seed"] = art.seed;
    j["n_samples"] = art.pattern.n_samples;
    j["n_windows_total"] = art.n_windows_total;
    Tensor m({art.pattern.n, art.pattern.n}, art.pattern.mean_graph);
    j["mean_graph"] = tensor_to_json(m);
    write_json_file(j, path);
}

inline PatternArtifact load_pattern(const std::string& path) {
    json j = load_json_file(path);
    try {
        if (j.value("format", "") != "gcad-pattern")
            throw DataError("'" + path + "' is not a pattern file");
        PatternArtifact art;
        art.pattern.n = j.at("n_channels").get<std::size_t>();
        art.max_lag = j.at("max_lag").get<std::size_t>();
        art.threshold = j.at("threshold").get<double>();
        art.pattern.epsilon = j.at("epsilon").get<double>();
        art.pattern.bernoulli_p = j.at("bernoulli_p").get<double>();
        art.seed = j.at("seed").get<std::uint64_t>();
        art.pattern.n_samples = j.at("n_samples").get<std::size_t>();
        art.n_windows_total = j.at("n_windows_total").get<std::size_t>();
        Tensor m = tensor_from_json(j.at("mean_graph"), {art.pattern.n, art.pattern.n},
                                    "mean_graph");
        art.pattern.mean_graph = m.values();
        return art;
    } catch (const json::exception& e) {
        throw DataError("pattern file '" + path + "' is malformed: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Matrices, scores, reports
// ---------------------------------------------------------------------------

inline void write_matrix_csv(const std::vector<double>& values, std::size_t n,
                             const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    std::string buf;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) buf += ',';
            detail::format_value(buf, values[i * n + j]);
        }
        buf += '\n';
    }
    out << buf;
}

inline void write_matrix_json(const std::vector<double>& values, std::size_t n,
                              const std::string& path) {
    write_json_file(tensor_to_json(Tensor({n, n}, values)), path);
}

inline void write_scores_csv(const ScoreSeries& s, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    std::string buf = "t,sc,st,s\n";
    for (std::size_t k = 0; k < s.s.size(); ++k) {
        buf += std::to_string(s.timestamps[k]);
        buf += ',';
        detail::format_value(buf, s.sc[k]);
        buf += ',';
        detail::format_value(buf, s.st[k]);
        buf += ',';
        detail::format_value(buf, s.s[k]);
        buf += '\n';
    }
    out << buf;
    if (!out) throw DataError("write to '" + path + "' failed");
}

inline ScoreSeries read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,sc,st,s")
        throw DataError("'" + path + "' does not look like a scores file (header '" + line +
                        "')");
    ScoreSeries s;
    std::size_t file_line = 1;
    while (std::getline(in, line)) {
        ++file_line;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = gcad::detail::split_line(line);
        if (cells.size() != 4)
            throw DataError("line " + std::to_string(file_line) + ": expected 4 cells");
        s.timestamps.push_back(static_cast<std::size_t>(
            gcad::detail::parse_cell(cells[0], file_line, "t")));
        s.sc.push_back(gcad::detail::parse_cell(cells[1], file_line, "sc"));
        s.st.push_back(gcad::detail::parse_cell(cells[2], file_line, "st"));
        s.s.push_back(gcad::detail::parse_cell(cells[3], file_line, "s"));
    }
    return s;
}

inline json eval_report_to_json(const EvalReport& r) {
    return json{{"auroc", r.auroc},
                {"auprc", r.auprc},
                {"n_scored", r.n_scored},
                {"n_positive", r.n_positive}};
}

// ---------------------------------------------------------------------------
// Synthetic spec / ground truth
// ---------------------------------------------------------------------------

inline json synth_spec_to_json(const SynthSpec& spec) {
    json j;
    j["n_channels"] = spec.n_channels;
    j["train_length"] = spec.train_length;
    j["test_length"] = spec.test_length;
    j["var_order"] = spec.var_order;
    j["noise_std"] = spec.noise_std;
    j["nonlinearity"] = spec.nonlinearity == SynthSpec::Nonlinearity::Tanh ? "tanh" : "none";
    j["seed"] = spec.seed;
    json coeffs = json::array();
    for (std::size_t l = 0; l < spec.var_order; ++l) {
        json m = json::array();
        for (std::size_t i = 0; i < spec.n_channels; ++i) {
            json row = json::array();
            for (std::size_t jj = 0; jj < spec.n_channels; ++jj)
                row.push_back(spec.coeff(l, i, jj));
            m.push_back(std::move(row));
        }
        coeffs.push_back(std::move(m));
    }
    j["coefficients"] = std::move(coeffs);
    json anomalies = json::array();
    for (const AnomalyEvent& a : spec.anomalies) {
        json e;
        e["start"] = a.start;
        e["end"] = a.end;
        switch (a.kind) {
            case AnomalyKind::SeverEdge:
                e["kind"] = "sever_edge";
                e["i"] = a.i;
                e["j"] = a.j;
                break;
            case AnomalyKind::Rewire:
                e["kind"] = "rewire";
                e["i"] = a.i;
                e["j"] = a.j;
                e["k"] = a.k;
                break;
            case AnomalyKind::Spike:
                e["kind"] = "spike";
                e["i"] = a.i;
                e["magnitude"] = a.magnitude;
                break;
        }
        anomalies.push_back(std::move(e));
    }
    j["anomalies"] = std::move(anomalies);
    return j;
}

inline SynthSpec synth_spec_from_json(const json& j) {
    try {
        SynthSpec spec;
        spec.n_channels = j.at("n_channels").get<std::size_t>();
        spec.train_length = j.at("train_length").get<std::size_t>();
        spec.test_length = j.at("test_length").get<std::size_t>();
        spec.var_order = j.at("var_order").get<std::size_t>();
        spec.noise_std = j.value("noise_std", 0.0);
        const std::string nl = j.value("nonlinearity", "none");
        if (nl == "tanh")
            spec.nonlinearity = SynthSpec::Nonlinearity::Tanh;
        else if (nl == "none")
            spec.nonlinearity = SynthSpec::Nonlinearity::None;
        else
            throw ConfigError("nonlinearity must be 'none' or 'tanh'");
        spec.seed = j.value("seed", std::uint64_t{1});

        const json& jc = j.at("coefficients");
        const std::size_t n = spec.n_channels;
        if (!jc.is_array() || jc.size() != spec.var_order)
            throw ConfigError("coefficients must hold var_order matrices");
        spec.coefficients.assign(spec.var_order * n * n, 0.0);
        for (std::size_t l = 0; l < spec.var_order; ++l)
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t jj = 0; jj < n; ++jj)
                    spec.coefficients[(l * n + i) * n + jj] =
                        jc.at(l).at(i).at(jj).get<double>();

        if (j.contains("adjacency")) {
            spec.adjacency.assign(n * n, 0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t jj = 0; jj < n; ++jj)
                    spec.adjacency[i * n + jj] =
                        j.at("adjacency").at(i).at(jj).get<int>() != 0;
        }
        if (j.contains("anomalies")) {
            for (const json& e : j.at("anomalies")) {
                AnomalyEvent a;
                a.start = e.at("start").get<std::size_t>();
                a.end = e.at("end").get<std::size_t>();
                const std::string kind = e.at("kind").get<std::string>();
                if (kind == "sever_edge") {
                    a.kind = AnomalyKind::SeverEdge;
                    a.i = e.at("i").get<std::size_t>();
                    a.j = e.at("j").get<std::size_t>();
                } else if (kind == "rewire") {
                    a.kind = AnomalyKind::Rewire;
                    a.i = e.at("i").get<std::size_t>();
                    a.j = e.at("j").get<std::size_t>();
                    a.k = e.at("k").get<std::size_t>();
                } else if (kind == "spike") {
                    a.kind = AnomalyKind::Spike;
                    a.i = e.at("i").get<std::size_t>();
                    a.magnitude = e.at("magnitude").get<double>();
                } else {
                    throw ConfigError("unknown anomaly kind '" + kind + "'");
                }
                spec.anomalies.push_back(a);
            }
        }
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("synthetic spec is malformed: ") + e.what());
    }
}

/// Ground truth emitted next to generated datasets: adjacency, coefficients
/// and the anomaly intervals (test-relative indices).
inline void write_truth(const SynthSpec& spec, const std::string& path) {
    json j = synth_spec_to_json(spec);
    json adj = json::array();
    const auto a = spec.adjacency.empty() ? spec.derived_adjacency() : spec.adjacency;
    for (std::size_t i = 0; i < spec.n_channels; ++i) {
        json row = json::array();
        for (std::size_t jj = 0; jj < spec.n_channels; ++jj)
            row.push_back(static_cast<int>(a[i * spec.n_channels + jj]));
        adj.push_back(std::move(row));
    }
    j["adjacency"] = std::move(adj);
    write_json_file(j, path);
}

}  // namespace gcad::io
