#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "gcad/errors.hpp"
#include "gcad/mixer.hpp"

namespace gcad {

/// Resolved pipeline configuration. One JSON document drives every
/// subcommand; flags override individual fields. n_channels and the hidden
/// sizes may be left at 0 to be inferred from the data / defaults.
struct RunConfig {
    std::string train_csv;
    std::string test_csv;
    std::string model_path = "model.json";
    std::string pattern_path = "normal_pattern.json";
    std::string out_dir = ".";
    std::string label_column = "label";

    MixerConfig mixer;

    double threshold_h = 0.0;
    double epsilon = 1e-6;
    double beta = 0.0;
    double bernoulli_p = 0.2;
    std::size_t stride = 1;
    double train_fraction = 0.8;
    std::size_t workers = 0;  // 0 -> GCAD_WORKERS or serial
    std::size_t mc_samples = 0;
    double mc_sigma = 0.01;

    RunConfig() {
        mixer.n_channels = 0;  // inferred from the training data
        mixer.max_lag = 4;
    }

    std::uint64_t seed() const { return mixer.seed; }

    void validate() const {
        if (mixer.max_lag < 1) throw ConfigError("max_lag must be >= 1");
        if (mixer.n_layers < 1) throw ConfigError("n_layers must be >= 1");
        if (!(mixer.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (mixer.epochs < 1) throw ConfigError("epochs must be >= 1");
        if (mixer.batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (threshold_h < 0.0) throw ConfigError("h must be >= 0");
        if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
        if (beta < 0.0) throw ConfigError("beta must be >= 0");
        if (!(bernoulli_p > 0.0) || bernoulli_p > 1.0)
            throw ConfigError("p must be in (0, 1]");
        if (stride < 1) throw ConfigError("stride must be >= 1");
        if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
            throw ConfigError("train_fraction must be in (0, 1)");
        if (!(mc_sigma >= 0.0)) throw ConfigError("mc_sigma must be >= 0");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{
            {"train_csv", train_csv},
            {"test_csv", test_csv},
            {"model_path", model_path},
            {"pattern_path", pattern_path},
            {"out_dir", out_dir},
            {"label_column", label_column},
            {"mixer",
             {{"n_channels", mixer.n_channels},
              {"max_lag", mixer.max_lag},
              {"n_layers", mixer.n_layers},
              {"temporal_hidden", mixer.temporal_hidden},
              {"feature_hidden", mixer.feature_hidden},
              {"learning_rate", mixer.learning_rate},
              {"epochs", mixer.epochs},
              {"batch_size", mixer.batch_size},
              {"seed", mixer.seed}}},
            {"h", threshold_h},
            {"epsilon", epsilon},
            {"beta", beta},
            {"p", bernoulli_p},
            {"stride", stride},
            {"train_fraction", train_fraction},
            {"workers", workers},
            {"mc_samples", mc_samples},
            {"mc_sigma", mc_sigma}};
    }

    static RunConfig from_json(const nlohmann::json& j) {
        try {
            RunConfig c;
            c.train_csv = j.value("train_csv", c.train_csv);
            c.test_csv = j.value("test_csv", c.test_csv);
            c.model_path = j.value("model_path", c.model_path);
            c.pattern_path = j.value("pattern_path", c.pattern_path);
            c.out_dir = j.value("out_dir", c.out_dir);
            c.label_column = j.value("label_column", c.label_column);
            if (j.contains("mixer")) {
                const auto& m = j.at("mixer");
                c.mixer.n_channels = m.value("n_channels", c.mixer.n_channels);
                c.mixer.max_lag = m.value("max_lag", c.mixer.max_lag);
                c.mixer.n_layers = m.value("n_layers", c.mixer.n_layers);
                c.mixer.temporal_hidden = m.value("temporal_hidden", c.mixer.temporal_hidden);
                c.mixer.feature_hidden = m.value("feature_hidden", c.mixer.feature_hidden);
                c.mixer.learning_rate = m.value("learning_rate", c.mixer.learning_rate);
                c.mixer.epochs = m.value("epochs", c.mixer.epochs);
                c.mixer.batch_size = m.value("batch_size", c.mixer.batch_size);
                c.mixer.seed = m.value("seed", c.mixer.seed);
            }
            c.threshold_h = j.value("h", c.threshold_h);
            c.epsilon = j.value("epsilon", c.epsilon);
            c.beta = j.value("beta", c.beta);
            c.bernoulli_p = j.value("p", c.bernoulli_p);
            c.stride = j.value("stride", c.stride);
            c.train_fraction = j.value("train_fraction", c.train_fraction);
            c.workers = j.value("workers", c.workers);
            c.mc_samples = j.value("mc_samples", c.mc_samples);
            c.mc_sigma = j.value("mc_sigma", c.mc_sigma);
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("run config is malformed: ") + e.what());
        }
    }
};

}  // namespace gcad
