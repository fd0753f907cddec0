// gcad: sliding-window anomaly detection from Granger-causal pattern
// deviations. Subcommands: synth | train | pattern | score | eval.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gcad/causality.hpp"
#include "gcad/data.hpp"
#include "gcad/eval.hpp"
#include "gcad/io.hpp"
#include "gcad/mixer.hpp"
#include "gcad/parallel.hpp"
#include "gcad/run_config.hpp"
#include "gcad/scoring.hpp"
#include "gcad/synthetic.hpp"

namespace fs = std::filesystem;
using gcad::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;   // config / contract errors
constexpr int kExitRuntime = 3;  // runtime / numeric errors

struct CommonFlags {
    std::string config_path;
    std::optional<std::string> train_csv, test_csv, model_path, pattern_path, out_dir,
        label_column;
    std::optional<std::size_t> n_channels, max_lag, n_layers, temporal_hidden, feature_hidden,
        epochs, batch_size, stride, workers, mc_samples;
    std::optional<double> learning_rate, h, epsilon, beta, p, train_fraction, mc_sigma;
    std::optional<std::uint64_t> seed;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON run configuration; flags override it");
    cmd->add_option("--train-csv", f.train_csv, "training data (normal operation)");
    cmd->add_option("--test-csv", f.test_csv, "test data");
    cmd->add_option("--model", f.model_path, "model file path");
    cmd->add_option("--pattern", f.pattern_path, "normal-pattern file path");
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_option("--label-column", f.label_column, "label column name (default 'label')");
    cmd->add_option("--channels", f.n_channels, "channel count (default: inferred)");
    cmd->add_option("--tau", f.max_lag, "window length / maximum lag");
    cmd->add_option("--layers", f.n_layers, "mixing layer count");
    cmd->add_option("--temporal-hidden", f.temporal_hidden, "temporal MLP hidden size");
    cmd->add_option("--feature-hidden", f.feature_hidden, "feature MLP hidden size");
    cmd->add_option("--lr", f.learning_rate, "SGD learning rate");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--batch-size", f.batch_size, "minibatch size");
    cmd->add_option("--stride", f.stride, "window stride");
    cmd->add_option("--workers", f.workers, "worker threads (or GCAD_WORKERS)");
    cmd->add_option("--threshold", f.h, "sparsification threshold h");
    cmd->add_option("--epsilon", f.epsilon, "deviation denominator epsilon");
    cmd->add_option("--beta", f.beta, "temporal deviation weight");
    cmd->add_option("--p", f.p, "Bernoulli keep probability for pattern sampling");
    cmd->add_option("--train-fraction", f.train_fraction, "train/validation split fraction");
    cmd->add_option("--mc-samples", f.mc_samples,
                    "Monte-Carlo perturbations per window (0 = single-point)");
    cmd->add_option("--mc-sigma", f.mc_sigma, "Monte-Carlo perturbation stddev");
    cmd->add_option("--seed", f.seed, "master seed");
}

RunConfig resolve_config(const CommonFlags& f) {
    RunConfig c;
    if (!f.config_path.empty()) c = RunConfig::from_json(gcad::io::load_json_file(f.config_path));
    if (f.train_csv) c.train_csv = *f.train_csv;
    if (f.test_csv) c.test_csv = *f.test_csv;
    if (f.model_path) c.model_path = *f.model_path;
    if (f.pattern_path) c.pattern_path = *f.pattern_path;
    if (f.out_dir) c.out_dir = *f.out_dir;
    if (f.label_column) c.label_column = *f.label_column;
    if (f.n_channels) c.mixer.n_channels = *f.n_channels;
    if (f.max_lag) c.mixer.max_lag = *f.max_lag;
    if (f.n_layers) c.mixer.n_layers = *f.n_layers;
    if (f.temporal_hidden) c.mixer.temporal_hidden = *f.temporal_hidden;
    if (f.feature_hidden) c.mixer.feature_hidden = *f.feature_hidden;
    if (f.learning_rate) c.mixer.learning_rate = *f.learning_rate;
    if (f.epochs) c.mixer.epochs = *f.epochs;
    if (f.batch_size) c.mixer.batch_size = *f.batch_size;
    if (f.seed) c.mixer.seed = *f.seed;
    if (f.stride) c.stride = *f.stride;
    if (f.workers) c.workers = *f.workers;
    if (f.h) c.threshold_h = *f.h;
    if (f.epsilon) c.epsilon = *f.epsilon;
    if (f.beta) c.beta = *f.beta;
    if (f.p) c.bernoulli_p = *f.p;
    if (f.train_fraction) c.train_fraction = *f.train_fraction;
    if (f.mc_samples) c.mc_samples = *f.mc_samples;
    if (f.mc_sigma) c.mc_sigma = *f.mc_sigma;
    c.validate();
    return c;
}

void write_resolved_config(const RunConfig& c) {
    fs::create_directories(c.out_dir);
    gcad::io::write_json_file(c.to_json(), (fs::path(c.out_dir) / "resolved_config.json").string());
}

// artifact outputs: explicit directories are respected, bare filenames land
// in out_dir
fs::path place_output(const std::string& out_dir, const std::string& path) {
    fs::path p(path);
    if (p.has_parent_path()) {
        fs::create_directories(p.parent_path());
        return p;
    }
    return fs::path(out_dir) / p;
}

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw gcad::ConfigError(std::string(what) + " path is not set");
    if (!fs::exists(path))
        throw gcad::DataError(std::string(what) + " file '" + path + "' does not exist");
}

// windows for the train/validation halves of the normal data, normalized with
// train statistics
struct PreparedTraining {
    gcad::WindowList train;
    gcad::WindowList val;
    gcad::MinMaxStats stats;
    std::vector<std::string> channel_names;
    std::size_t n_channels = 0;
};

PreparedTraining prepare_training(const RunConfig& cfg) {
    require_file(cfg.train_csv, "training CSV");
    gcad::Dataset raw = gcad::load_csv(cfg.train_csv);
    if (cfg.mixer.n_channels != 0 && cfg.mixer.n_channels != raw.cols)
        throw gcad::ConfigError("config expects " + std::to_string(cfg.mixer.n_channels) +
                                " channels but '" + cfg.train_csv + "' has " +
                                std::to_string(raw.cols));
    auto [head, tail] = gcad::split_train_val(raw, cfg.train_fraction);
    gcad::MinMaxStats stats = gcad::minmax_fit(head);
    gcad::Dataset ntrain = gcad::minmax_apply(head, stats, /*clip=*/false);
    gcad::Dataset nval = gcad::minmax_apply(tail, stats, /*clip=*/true);

    PreparedTraining out;
    out.stats = stats;
    out.channel_names = raw.channel_names;
    out.n_channels = raw.cols;
    out.train = gcad::make_windows(ntrain, cfg.mixer.max_lag, cfg.stride);
    if (nval.rows > cfg.mixer.max_lag)
        out.val = gcad::make_windows(nval, cfg.mixer.max_lag, cfg.stride);
    return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
    gcad::SynthSpec spec = spec_path.empty()
                               ? gcad::default_benchmark_spec()
                               : gcad::io::synth_spec_from_json(gcad::io::load_json_file(spec_path));
    gcad::SynthResult result = gcad::generate_synthetic(spec);
    fs::create_directories(out_dir);
    gcad::write_csv(result.train, (fs::path(out_dir) / "train.csv").string());
    gcad::write_csv(result.test, (fs::path(out_dir) / "test.csv").string());
    gcad::io::write_truth(spec, (fs::path(out_dir) / "truth.json").string());
    std::cout << "wrote " << result.train.rows << " train rows and " << result.test.rows
              << " test rows to " << out_dir << "\n";
    return kExitOk;
}

int cmd_train(const RunConfig& cfg) {
    PreparedTraining prep = prepare_training(cfg);
    gcad::MixerConfig mixer = cfg.mixer;
    mixer.n_channels = prep.n_channels;

    gcad::TrainLog log;
    gcad::MixerModel model =
        gcad::train(prep.train, mixer, prep.val.empty() ? nullptr : &prep.val, &log);

    write_resolved_config(cfg);
    const fs::path out(cfg.out_dir);
    const fs::path model_file = place_output(cfg.out_dir, cfg.model_path);
    gcad::io::save_model({model, prep.stats, prep.channel_names}, model_file.string());

    std::ofstream tl(out / "train_log.csv");
    tl << "epoch,train_mse,val_mse\n";
    for (std::size_t e = 0; e < log.epochs.size(); ++e) {
        char buf[96];
        if (log.epochs[e].val_mse)
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", e, log.epochs[e].train_mse,
                          *log.epochs[e].val_mse);
        else
            std::snprintf(buf, sizeof(buf), "%zu,%.17g,\n", e, log.epochs[e].train_mse);
        tl << buf;
    }
    std::cout << "trained " << log.epochs.size() << " epochs; final train MSE "
              << log.epochs.back().train_mse << "; model written to " << model_file.string()
              << "\n";
    return kExitOk;
}

int cmd_pattern(const RunConfig& cfg) {
    require_file(cfg.model_path, "model");
    gcad::io::ModelArtifact art = gcad::io::load_model(cfg.model_path);

    require_file(cfg.train_csv, "training CSV");
    gcad::Dataset raw = gcad::load_csv(cfg.train_csv);
    if (raw.cols != art.model.config.n_channels)
        throw gcad::DataError("model expects " + std::to_string(art.model.config.n_channels) +
                              " channels but '" + cfg.train_csv + "' has " +
                              std::to_string(raw.cols));
    auto [head, tail] = gcad::split_train_val(raw, cfg.train_fraction);
    gcad::Dataset ntrain = gcad::minmax_apply(head, art.stats, /*clip=*/false);
    gcad::WindowList windows = gcad::make_windows(ntrain, art.model.config.max_lag, cfg.stride);

    const gcad::McOptions mc{cfg.mc_samples, cfg.mc_sigma, cfg.seed()};
    gcad::NormalPattern pattern = gcad::sample_normal_pattern(
        art.model, windows, cfg.bernoulli_p, cfg.seed(), cfg.threshold_h, cfg.epsilon,
        gcad::resolve_workers(cfg.workers), 10, mc);

    write_resolved_config(cfg);
    gcad::io::save_pattern({pattern, art.model.config.max_lag, cfg.threshold_h, cfg.seed(),
                            windows.size()},
                           place_output(cfg.out_dir, cfg.pattern_path).string());
    std::cout << "sampled " << pattern.n_samples << " of " << windows.size()
              << " training windows into the normal pattern\n";
    return kExitOk;
}

int cmd_score(const RunConfig& cfg, const std::vector<std::size_t>& dump_indices) {
    require_file(cfg.model_path, "model");
    require_file(cfg.pattern_path, "pattern");
    gcad::io::ModelArtifact art = gcad::io::load_model(cfg.model_path);
    gcad::io::PatternArtifact pat = gcad::io::load_pattern(cfg.pattern_path);
    if (pat.pattern.n != art.model.config.n_channels)
        throw gcad::DataError("pattern has " + std::to_string(pat.pattern.n) +
                              " channels but the model has " +
                              std::to_string(art.model.config.n_channels));
    if (pat.max_lag != art.model.config.max_lag)
        throw gcad::DataError("pattern was built at max_lag " + std::to_string(pat.max_lag) +
                              " but the model uses " +
                              std::to_string(art.model.config.max_lag));

    require_file(cfg.test_csv, "test CSV");
    gcad::Dataset raw = gcad::load_csv(cfg.test_csv);
    if (raw.cols != art.model.config.n_channels)
        throw gcad::DataError("model expects " + std::to_string(art.model.config.n_channels) +
                              " channels but '" + cfg.test_csv + "' has " +
                              std::to_string(raw.cols));
    gcad::Dataset ntest = gcad::minmax_apply(raw, art.stats, /*clip=*/true);
    gcad::WindowList windows = gcad::make_windows(ntest, art.model.config.max_lag, cfg.stride);

    // the pattern artifact owns the sparsification threshold and epsilon
    const gcad::McOptions mc{cfg.mc_samples, cfg.mc_sigma, cfg.seed()};
    gcad::ScoreSeries scores = gcad::score_windows(art.model, windows, pat.pattern,
                                                   pat.threshold, cfg.beta,
                                                   gcad::resolve_workers(cfg.workers), mc);

    write_resolved_config(cfg);
    const fs::path out(cfg.out_dir);
    gcad::io::write_scores_csv(scores, (out / "scores.csv").string());

    for (std::size_t t : dump_indices) {
        bool found = false;
        for (std::size_t k = 0; k < windows.size(); ++k) {
            if (windows[k].target_index != t) continue;
            gcad::SparseCausalGraph g =
                gcad::window_graph(art.model, windows[k], pat.threshold, mc);
            gcad::Tensor d = gcad::deviation_matrix(g, pat.pattern);
            const std::string stem = "deviation_" + std::to_string(t);
            gcad::io::write_matrix_csv(d.values(), pat.pattern.n, (out / (stem + ".csv")).string());
            gcad::io::write_matrix_json(d.values(), pat.pattern.n,
                                        (out / (stem + ".json")).string());
            found = true;
            break;
        }
        if (!found)
            throw gcad::ConfigError("--dump-matrix " + std::to_string(t) +
                                    ": no window has that target index");
    }

    std::cout << "scored " << scores.s.size() << " windows into "
              << (out / "scores.csv").string() << "\n";
    return kExitOk;
}

int cmd_eval(const RunConfig& cfg, const std::string& scores_path, const std::string& out_path) {
    require_file(scores_path, "scores CSV");
    gcad::ScoreSeries scores = gcad::io::read_scores_csv(scores_path);
    require_file(cfg.test_csv, "test CSV");
    gcad::Dataset test = gcad::load_csv(cfg.test_csv, cfg.label_column);
    if (!test.has_labels())
        throw gcad::DataError("'" + cfg.test_csv + "' has no label column");

    std::vector<std::uint8_t> labels;
    labels.reserve(scores.s.size());
    for (std::size_t t : scores.timestamps) {
        if (t >= test.labels.size())
            throw gcad::DataError("score timestamp " + std::to_string(t) +
                                  " is outside the labelled test range");
        labels.push_back(test.labels[t]);
    }
    gcad::EvalReport report = gcad::evaluate(scores.s, labels);
    const auto j = gcad::io::eval_report_to_json(report);
    std::cout << j.dump(2) << "\n";
    if (!out_path.empty()) gcad::io::write_json_file(j, out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Granger-causality anomaly detection for multivariate time series"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    std::string synth_spec_path, synth_out_dir = ".";
    synth->add_option("--spec", synth_spec_path,
                      "synthetic spec JSON (default: built-in benchmark)");
    synth->add_option("--out-dir", synth_out_dir, "output directory");

    CommonFlags train_flags, pattern_flags, score_flags, eval_flags;
    auto* train = app.add_subcommand("train", "train the window predictor on normal data");
    add_common_flags(train, train_flags);

    auto* pattern = app.add_subcommand("pattern", "sample the normal causal pattern");
    add_common_flags(pattern, pattern_flags);

    auto* score = app.add_subcommand("score", "score test windows against the normal pattern");
    add_common_flags(score, score_flags);
    std::vector<std::size_t> dump_indices;
    score->add_option("--dump-matrix", dump_indices,
                      "export the deviation matrix for these target indices");

    auto* eval = app.add_subcommand("eval", "compute AUROC/AUPRC from scores and labels");
    add_common_flags(eval, eval_flags);
    std::string scores_path = "scores.csv", eval_out;
    eval->add_option("--scores", scores_path, "scores CSV produced by `score`");
    eval->add_option("--out", eval_out, "also write the report JSON here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (synth->parsed()) return cmd_synth(synth_spec_path, synth_out_dir);
        if (train->parsed()) return cmd_train(resolve_config(train_flags));
        if (pattern->parsed()) return cmd_pattern(resolve_config(pattern_flags));
        if (score->parsed()) return cmd_score(resolve_config(score_flags), dump_indices);
        if (eval->parsed()) return cmd_eval(resolve_config(eval_flags), scores_path, eval_out);
    } catch (const gcad::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gcad::ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gcad::ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gcad::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const gcad::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitOk;
}
