#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "gcad/data.hpp"
#include "gcad/parallel.hpp"
#include "gcad/io.hpp"
#include "gcad/synthetic.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
    const char* env = std::getenv("GCAD_BIN");
    return env ? env : "./build/gcad";
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_binary() + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() /
               ("gcad_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& name = "") const { return (path / name).string(); }
};

// small synthetic spec file for fast pipeline runs
void write_small_spec(const fs::path& p, double edge = 1.2, std::uint64_t seed = 3) {
    gcad::SynthSpec spec;
    spec.n_channels = 3;
    spec.train_length = 400;
    spec.test_length = 200;
    spec.var_order = 1;
    spec.noise_std = 0.1;
    spec.seed = seed;
    spec.coefficients = {0.6, edge, 0.0, 0.0, 0.3, 0.8, 0.0, 0.0, 0.3};
    spec.anomalies = {gcad::AnomalyEvent{80, 140, gcad::AnomalyKind::SeverEdge, 0, 1, 0, 0.0}};
    gcad::io::write_json_file(gcad::io::synth_spec_to_json(spec), p.string());
}

}  // namespace

TEST_CASE("synth writes datasets and ground truth", "[cli]") {
    TempDir dir;
    write_small_spec(dir.path / "spec.json");
    REQUIRE(run_cli("synth --spec " + dir.str("spec.json") + " --out-dir " + dir.str()) == 0);

    gcad::Dataset train = gcad::load_csv(dir.str("train.csv"));
    gcad::Dataset test = gcad::load_csv(dir.str("test.csv"));
    CHECK(train.rows == 400);
    CHECK(test.rows == 200);
    CHECK(test.has_labels());

    auto truth = gcad::io::load_json_file(dir.str("truth.json"));
    CHECK(truth.at("adjacency").size() == 3);
    CHECK(truth.at("anomalies").size() == 1);

    // repeated seed: identical bytes
    REQUIRE(run_cli("synth --spec " + dir.str("spec.json") + " --out-dir " + dir.str("again")) ==
            0);
    CHECK(slurp(dir.path / "train.csv") == slurp(dir.path / "again" / "train.csv"));
    CHECK(slurp(dir.path / "test.csv") == slurp(dir.path / "again" / "test.csv"));
}

TEST_CASE("synth rejects unstable specs with exit 2", "[cli]") {
    TempDir dir;
    write_small_spec(dir.path / "bad.json");
    auto j = gcad::io::load_json_file(dir.str("bad.json"));
    j["coefficients"][0][0][0] = 1.3;  // explosive self-loop
    gcad::io::write_json_file(j, dir.str("bad.json"));
    CHECK(run_cli("synth --spec " + dir.str("bad.json") + " --out-dir " + dir.str()) == 2);
}

TEST_CASE("train pipeline: missing file, determinism, constant fit", "[cli][slow]") {
    TempDir dir;
    CHECK(run_cli("train --train-csv " + dir.str("nope.csv") + " --out-dir " + dir.str()) == 2);

    // constant dataset fits to machine precision after normalization
    {
        std::ofstream out(dir.str("const.csv"));
        out << "a,b\n";
        for (int t = 0; t < 60; ++t) out << "3.5,1.25\n";
    }
    REQUIRE(run_cli("train --train-csv " + dir.str("const.csv") + " --out-dir " + dir.str("c") +
                    " --tau 2 --layers 1 --epochs 5 --seed 5") == 0);
    // last train_log row: epoch,train_mse,val_mse
    std::string log = slurp(dir.path / "c" / "train_log.csv");
    std::stringstream ss(log);
    std::string line, last;
    std::getline(ss, line);  // header
    while (std::getline(ss, line))
        if (!line.empty()) last = line;
    const auto first_comma = last.find(',');
    const auto second_comma = last.find(',', first_comma + 1);
    const double final_mse =
        std::stod(last.substr(first_comma + 1, second_comma - first_comma - 1));
    CHECK(final_mse <= 1e-6);

    // identical config + seed -> byte-identical model files
    write_small_spec(dir.path / "spec.json");
    REQUIRE(run_cli("synth --spec " + dir.str("spec.json") + " --out-dir " + dir.str("data")) ==
            0);
    const std::string common = " --train-csv " + dir.str("data/train.csv") +
                               " --tau 2 --layers 1 --epochs 8 --lr 0.02 --seed 9";
    REQUIRE(run_cli("train --out-dir " + dir.str("m1") + common) == 0);
    REQUIRE(run_cli("train --out-dir " + dir.str("m2") + common) == 0);
    const std::string m1 = slurp(dir.path / "m1" / "model.json");
    CHECK(!m1.empty());
    CHECK(m1 == slurp(dir.path / "m2" / "model.json"));
}

TEST_CASE("pattern: sample counts, determinism and preconditions", "[cli][slow]") {
    TempDir dir;
    write_small_spec(dir.path / "spec.json");
    REQUIRE(run_cli("synth --spec " + dir.str("spec.json") + " --out-dir " + dir.str("data")) ==
            0);
    const std::string common = " --train-csv " + dir.str("data/train.csv") +
                               " --tau 2 --layers 1 --epochs 5 --lr 0.02 --seed 9";
    REQUIRE(run_cli("train --out-dir " + dir.str("m") + common) == 0);
    const std::string model = " --model " + dir.str("m/model.json");

    // p = 1 keeps every window: 0.8 * 400 = 320 rows -> 318 windows at tau 2
    REQUIRE(run_cli("pattern --out-dir " + dir.str("p1") + model + common + " --p 1") == 0);
    auto art = gcad::io::load_pattern(dir.str("p1/normal_pattern.json"));
    CHECK(art.pattern.n_samples == art.n_windows_total);
    CHECK(art.pattern.n_samples == 318);

    REQUIRE(run_cli("pattern --out-dir " + dir.str("p2") + model + common + " --p 0.4") == 0);
    REQUIRE(run_cli("pattern --out-dir " + dir.str("p3") + model + common + " --p 0.4") == 0);
    CHECK(slurp(dir.path / "p2" / "normal_pattern.json") ==
          slurp(dir.path / "p3" / "normal_pattern.json"));

    CHECK(run_cli("pattern --out-dir " + dir.str("p4") + model + common + " --p 0") == 2);
}

TEST_CASE("score and eval: columns, dump matrix, exit codes", "[cli][slow]") {
    TempDir dir;
    write_small_spec(dir.path / "spec.json");
    REQUIRE(run_cli("synth --spec " + dir.str("spec.json") + " --out-dir " + dir.str("data")) ==
            0);
    const std::string common = " --train-csv " + dir.str("data/train.csv") +
                               " --test-csv " + dir.str("data/test.csv") +
                               " --tau 2 --layers 1 --epochs 10 --lr 0.02 --seed 9";
    REQUIRE(run_cli("train --out-dir " + dir.str("m") + common) == 0);
    const std::string artifacts = " --model " + dir.str("m/model.json") + " --pattern " +
                                  dir.str("m/normal_pattern.json");
    REQUIRE(run_cli("pattern --out-dir " + dir.str("m") + artifacts + common + " --p 0.5") == 0);

    // beta = 0: the s column equals sc; all scores are non-negative
    REQUIRE(run_cli("score --out-dir " + dir.str("s0") + artifacts + common + " --beta 0") == 0);
    auto s0 = gcad::io::read_scores_csv(dir.str("s0/scores.csv"));
    REQUIRE(!s0.s.empty());
    CHECK(s0.s == s0.sc);
    for (double v : s0.s) CHECK(v >= 0.0);

    // dump-matrix writes the deviation matrix files for the requested index
    REQUIRE(run_cli("score --out-dir " + dir.str("sd") + artifacts + common +
                    " --dump-matrix " + std::to_string(s0.timestamps[3])) == 0);
    CHECK(fs::exists(dir.path / "sd" /
                     ("deviation_" + std::to_string(s0.timestamps[3]) + ".csv")));
    CHECK(fs::exists(dir.path / "sd" /
                     ("deviation_" + std::to_string(s0.timestamps[3]) + ".json")));

    // eval prints both metrics in range and writes the report
    REQUIRE(run_cli("eval --scores " + dir.str("s0/scores.csv") + " --test-csv " +
                    dir.str("data/test.csv") + " --out " + dir.str("report.json")) == 0);
    auto rep = gcad::io::load_json_file(dir.str("report.json"));
    const double roc = rep.at("auroc").get<double>();
    const double prc = rep.at("auprc").get<double>();
    CHECK((roc >= 0.0 && roc <= 1.0));
    CHECK((prc >= 0.0 && prc <= 1.0));

    // artifact disagreement: pattern from tau=3 model against tau=2 model
    const std::string common3 = " --train-csv " + dir.str("data/train.csv") +
                                " --test-csv " + dir.str("data/test.csv") +
                                " --tau 3 --layers 1 --epochs 5 --lr 0.02 --seed 9";
    REQUIRE(run_cli("train --out-dir " + dir.str("m3") + common3) == 0);
    REQUIRE(run_cli("pattern --out-dir " + dir.str("m3") + " --model " +
                    dir.str("m3/model.json") + " --pattern " +
                    dir.str("m3/normal_pattern.json") + common3 + " --p 0.5") == 0);
    CHECK(run_cli("score --out-dir " + dir.str("bad") + " --model " + dir.str("m/model.json") +
                  " --pattern " + dir.str("m3/normal_pattern.json") + common) == 2);

    // labels with no positives in the scored span -> exit 3
    {
        gcad::Dataset test = gcad::load_csv(dir.str("data/test.csv"));
        test.labels.assign(test.rows, 0);
        gcad::write_csv(test, dir.str("nolabel.csv"));
    }
    CHECK(run_cli("eval --scores " + dir.str("s0/scores.csv") + " --test-csv " +
                  dir.str("nolabel.csv")) == 3);
}

TEST_CASE("scoring constant data against its own pattern gives zero scores", "[cli]") {
    TempDir dir;
    {
        std::ofstream out(dir.str("const.csv"));
        out << "a,b\n";
        for (int t = 0; t < 40; ++t) out << "2.0,5.0\n";
    }
    const std::string common = " --train-csv " + dir.str("const.csv") + " --test-csv " +
                               dir.str("const.csv") + " --tau 2 --layers 1 --epochs 3 --seed 4";
    REQUIRE(run_cli("train --out-dir " + dir.str("m") + common) == 0);
    const std::string artifacts = " --model " + dir.str("m/model.json") + " --pattern " +
                                  dir.str("m/normal_pattern.json");
    REQUIRE(run_cli("pattern --out-dir " + dir.str("m") + artifacts + common + " --p 1") == 0);
    REQUIRE(run_cli("score --out-dir " + dir.str("s") + artifacts + common +
                    " --dump-matrix 10") == 0);

    // every window is identical, so every graph equals the pattern exactly
    auto s = gcad::io::read_scores_csv(dir.str("s/scores.csv"));
    for (double v : s.s) CHECK(v == 0.0);
    gcad::Dataset d = gcad::load_csv(dir.str("s/deviation_10.csv"));
    for (double v : d.values) CHECK(v == 0.0);
}

TEST_CASE("workers flag does not change scores", "[cli][slow]") {
    TempDir dir;
    write_small_spec(dir.path / "spec.json");
    REQUIRE(run_cli("synth --spec " + dir.str("spec.json") + " --out-dir " + dir.str("data")) ==
            0);
    const std::string common = " --train-csv " + dir.str("data/train.csv") +
                               " --test-csv " + dir.str("data/test.csv") +
                               " --tau 2 --layers 1 --epochs 5 --lr 0.02 --seed 9";
    REQUIRE(run_cli("train --out-dir " + dir.str("m") + common) == 0);
    const std::string artifacts = " --model " + dir.str("m/model.json") + " --pattern " +
                                  dir.str("m/normal_pattern.json");
    REQUIRE(run_cli("pattern --out-dir " + dir.str("m") + artifacts + common) == 0);
    REQUIRE(run_cli("score --out-dir " + dir.str("w1") + artifacts + common + " --workers 1") ==
            0);
    REQUIRE(run_cli("score --out-dir " + dir.str("w4") + artifacts + common + " --workers 4") ==
            0);
    CHECK(slurp(dir.path / "w1" / "scores.csv") == slurp(dir.path / "w4" / "scores.csv"));
}

TEST_CASE("GCAD_WORKERS is the fallback for unset worker counts", "[cli]") {
    ::setenv("GCAD_WORKERS", "3", 1);
    CHECK(gcad::resolve_workers(0) == 3);
    CHECK(gcad::resolve_workers(2) == 2);  // explicit value wins
    ::setenv("GCAD_WORKERS", "junk", 1);
    CHECK(gcad::resolve_workers(0) == 1);
    ::unsetenv("GCAD_WORKERS");
    CHECK(gcad::resolve_workers(0) == 1);
}
