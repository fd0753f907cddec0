#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gcad/causality.hpp"
#include "testutil.hpp"

using gcad::CausalityMatrix;
using gcad::GradientTensor;
using gcad::MixerConfig;
using gcad::MixerModel;
using gcad::SparseCausalGraph;
using gcad::Tensor;
using gcad::Window;
using gcad::WindowList;

namespace {

CausalityMatrix random_matrix(std::size_t n, gcad::Rng& rng, double lo = 0.0, double hi = 1.0) {
    CausalityMatrix a(n);
    for (double& v : a.values) v = rng.uniform(lo, hi);
    return a;
}

}  // namespace

TEST_CASE("quantify of a zero gradient tensor is the zero matrix", "[causality]") {
    GradientTensor g(3, 4);
    CausalityMatrix a = gcad::quantify(g);
    for (double v : a.values) CHECK(v == 0.0);
}

TEST_CASE("quantify averages absolute gradients over lags", "[causality]") {
    GradientTensor g(2, 2);
    g.at(0, 1, 0) = 3.0;
    g.at(0, 1, 1) = -1.0;
    CausalityMatrix a = gcad::quantify(g);
    CHECK(a.at(0, 1) == 2.0);
    CHECK(a.at(0, 0) == 0.0);
    CHECK(a.at(1, 0) == 0.0);
    CHECK(a.at(1, 1) == 0.0);
}

TEST_CASE("quantify matches the per-entry loop oracle", "[causality]") {
    gcad::Rng rng(301);
    GradientTensor g(4, 3);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t l = 0; l < 3; ++l) g.at(i, j, l) = rng.uniform(-2, 2);
    CausalityMatrix a = gcad::quantify(g);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0.0;
            for (std::size_t l = 0; l < 3; ++l) s += std::fabs(g.at(i, j, l));
            CHECK(a.at(i, j) == Catch::Approx(s / 3.0).margin(1e-15));
        }
}

TEST_CASE("quantify is non-negative and sign-flip invariant", "[causality]") {
    gcad::Rng rng(307);
    GradientTensor g(3, 2), flipped(3, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 2; ++l) {
                double v = rng.uniform(-1, 1);
                g.at(i, j, l) = v;
                flipped.at(i, j, l) = -v;
            }
    CausalityMatrix a = gcad::quantify(g);
    CausalityMatrix b = gcad::quantify(flipped);
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        CHECK(a.values[k] >= 0.0);
        CHECK(a.values[k] == b.values[k]);
    }
}

TEST_CASE("sparsify worked example", "[causality]") {
    CausalityMatrix a(2);
    a.at(0, 0) = 2;
    a.at(0, 1) = 3;
    a.at(1, 0) = 1;
    a.at(1, 1) = 4;

    SparseCausalGraph g = gcad::sparsify(a, 0.0);
    CHECK(g.at(0, 0) == 2.0);
    CHECK(g.at(0, 1) == 2.0);
    CHECK(g.at(1, 0) == 0.0);
    CHECK(g.at(1, 1) == 4.0);

    SparseCausalGraph cut = gcad::sparsify(a, 2.5);
    CHECK(cut.at(0, 0) == 0.0);
    CHECK(cut.at(0, 1) == 0.0);
    CHECK(cut.at(1, 0) == 0.0);
    CHECK(cut.at(1, 1) == 4.0);
}

TEST_CASE("sparsify cancels symmetric matrices off the diagonal", "[causality]") {
    gcad::Rng rng(311);
    CausalityMatrix a(4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = i; j < 4; ++j) {
            double v = rng.uniform(0, 2);
            a.at(i, j) = v;
            a.at(j, i) = v;
        }
    SparseCausalGraph g = gcad::sparsify(a, 0.0);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j)
            CHECK(g.at(i, j) == (i == j ? a.at(i, i) : 0.0));
}

TEST_CASE("sparsify rejects negative thresholds", "[causality]") {
    CausalityMatrix a(2);
    CHECK_THROWS_AS(gcad::sparsify(a, -0.1), gcad::ConfigError);
}

TEST_CASE("sparsify properties: antisymmetry, idempotence, monotone support", "[causality]") {
    gcad::Rng rng(313);
    for (int round = 0; round < 200; ++round) {
        const std::size_t n = 2 + rng.next_below(5);
        CausalityMatrix a = random_matrix(n, rng);
        const double h1 = rng.uniform(0.0, 0.3);
        const double h2 = h1 + rng.uniform(0.0, 0.3);

        SparseCausalGraph g1 = gcad::sparsify(a, h1);
        SparseCausalGraph g2 = gcad::sparsify(a, h2);

        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i != j) CHECK(std::min(g1.at(i, j), g1.at(j, i)) == 0.0);
                CHECK((g1.at(i, j) == 0.0 || g1.at(i, j) >= h1));
                // support shrinks as h grows
                if (g2.at(i, j) != 0.0) CHECK(g1.at(i, j) != 0.0);
            }

        // one-sided matrices pass through unchanged
        CausalityMatrix as_matrix(n);
        as_matrix.values = g1.values;
        SparseCausalGraph again = gcad::sparsify(as_matrix, h1);
        CHECK(again.values == g1.values);
    }
}

TEST_CASE("batch_graphs composes the three stages in order", "[causality]") {
    MixerConfig cfg;
    cfg.n_channels = 3;
    cfg.max_lag = 2;
    cfg.n_layers = 1;
    cfg.seed = 71;
    MixerModel m = MixerModel::init(cfg);
    gcad::Rng rng(73);
    for (Tensor* p : m.parameters())
        for (std::size_t i = 0; i < p->numel(); ++i) (*p)[i] = rng.uniform(-0.6, 0.6);

    CHECK(gcad::batch_graphs(m, WindowList{}, 0.0).empty());

    Window w{testutil::random_tensor({3, 2}, rng), testutil::random_tensor({3}, rng), 2};
    auto graphs = gcad::batch_graphs(m, WindowList{w}, 0.01);
    REQUIRE(graphs.size() == 1);
    SparseCausalGraph manual =
        gcad::sparsify(gcad::quantify(gcad::input_gradients(m, w.input, w.target)), 0.01);
    CHECK(graphs[0] == manual);
}

TEST_CASE("batch_graphs is identical across worker counts", "[causality]") {
    MixerConfig cfg;
    cfg.n_channels = 3;
    cfg.max_lag = 2;
    cfg.n_layers = 1;
    cfg.seed = 79;
    MixerModel m = MixerModel::init(cfg);
    gcad::Rng rng(83);
    for (Tensor* p : m.parameters())
        for (std::size_t i = 0; i < p->numel(); ++i) (*p)[i] = rng.uniform(-0.6, 0.6);

    WindowList windows;
    for (int k = 0; k < 40; ++k)
        windows.push_back(Window{testutil::random_tensor({3, 2}, rng),
                                 testutil::random_tensor({3}, rng),
                                 static_cast<std::size_t>(k + 2)});

    auto serial = gcad::batch_graphs(m, windows, 0.005, 1);
    auto parallel = gcad::batch_graphs(m, windows, 0.005, 4);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t k = 0; k < serial.size(); ++k) CHECK(serial[k] == parallel[k]);
}

TEST_CASE("batch_graphs reports the failing window index", "[causality]") {
    MixerConfig cfg;
    cfg.n_channels = 2;
    cfg.max_lag = 2;
    cfg.n_layers = 1;
    MixerModel m = MixerModel::init(cfg);
    WindowList windows;
    gcad::Rng rng(89);
    for (int k = 0; k < 3; ++k)
        windows.push_back(Window{testutil::random_tensor({2, 2}, rng),
                                 testutil::random_tensor({2}, rng),
                                 static_cast<std::size_t>(k + 2)});
    windows[1].input = Tensor({3, 2});  // wrong channel count

    CHECK_THROWS_MATCHES(gcad::batch_graphs(m, windows, 0.0), gcad::ShapeError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("window 1")));
}

TEST_CASE("quantify recovers the only true edge of a linear VAR", "[causality][slow]") {
    // forced linear system with the single causal edge 0 -> 1
    const std::size_t n = 3, T = 3200;
    const double c = 1.5;
    gcad::Rng rng(97);
    std::vector<std::array<double, 3>> xs(T);
    xs[0] = {rng.normal(), rng.normal(), rng.normal()};
    for (std::size_t t = 1; t < T; ++t) {
        xs[t][0] = rng.normal();
        xs[t][1] = c * xs[t - 1][0] + rng.normal();
        xs[t][2] = rng.normal();
    }

    const std::size_t lag = 2;
    WindowList windows;
    for (std::size_t t = lag; t < T; ++t) {
        Tensor w({n, lag});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < lag; ++l) w.at(i, l) = xs[t - lag + l][i];
        Tensor y({n});
        for (std::size_t i = 0; i < n; ++i) y[i] = xs[t][i];
        windows.push_back(Window{w, y, t});
    }
    WindowList train(windows.begin(), windows.begin() + 2500);
    WindowList test(windows.begin() + 2500, windows.end());

    MixerConfig cfg;
    cfg.n_channels = n;
    cfg.max_lag = lag;
    cfg.n_layers = 1;
    cfg.learning_rate = 0.01;
    cfg.epochs = 40;
    cfg.batch_size = 32;
    cfg.seed = 101;
    MixerModel m = gcad::train(train, cfg);

    std::size_t wins = 0;
    for (const Window& w : test) {
        CausalityMatrix a = gcad::quantify(gcad::input_gradients(m, w.input, w.target));
        bool top = true;
        for (std::size_t i = 0; i < n && top; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if ((i == 0 && j == 1) || (i == 0 && j == 0) || (i == 1 && j == 1)) continue;
                if (a.at(0, 1) <= a.at(i, j)) {
                    top = false;
                    break;
                }
            }
        if (top) ++wins;
    }
    const double fraction = static_cast<double>(wins) / static_cast<double>(test.size());
    CHECK(fraction >= 0.95);
}

TEST_CASE("Monte-Carlo quantification: zero samples equals the plain path", "[causality]") {
    MixerConfig cfg;
    cfg.n_channels = 3;
    cfg.max_lag = 2;
    cfg.n_layers = 1;
    cfg.seed = 103;
    MixerModel m = MixerModel::init(cfg);
    gcad::Rng rng(107);
    for (Tensor* p : m.parameters())
        for (std::size_t i = 0; i < p->numel(); ++i) (*p)[i] = rng.uniform(-0.6, 0.6);
    Window w{testutil::random_tensor({3, 2}, rng), testutil::random_tensor({3}, rng), 5};

    CausalityMatrix plain = gcad::quantify(gcad::input_gradients(m, w.input, w.target));
    CausalityMatrix mc0 = gcad::quantify_mc(m, w.input, w.target, 0, 0.1, 1);
    CHECK(plain == mc0);

    // perturbed averaging is deterministic under a fixed seed and entrywise
    // non-negative
    CausalityMatrix a = gcad::quantify_mc(m, w.input, w.target, 8, 0.05, 42);
    CausalityMatrix b = gcad::quantify_mc(m, w.input, w.target, 8, 0.05, 42);
    CHECK(a == b);
    for (double v : a.values) CHECK(v >= 0.0);

    // window_graph honours the option and stays order/worker deterministic
    gcad::McOptions mc{4, 0.05, 9};
    WindowList ws(6, w);
    auto serial = gcad::batch_graphs(m, ws, 0.0, 1, mc);
    auto parallel = gcad::batch_graphs(m, ws, 0.0, 3, mc);
    CHECK(serial.size() == parallel.size());
    for (std::size_t k = 0; k < serial.size(); ++k) CHECK(serial[k] == parallel[k]);
}
