#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "gcad/eval.hpp"
#include "gcad/rng.hpp"

using Labels = std::vector<std::uint8_t>;
using Scores = std::vector<double>;

namespace {

// O(n^2) pairwise oracle with the identical final division, so agreement is
// exact, not approximate.
double auroc_oracle(const Scores& s, const Labels& l) {
    unsigned long long twice_wins = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!l[i]) continue;
        ++pos;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (l[j]) continue;
            if (s[i] > s[j])
                twice_wins += 2;
            else if (s[i] == s[j])
                twice_wins += 1;
        }
    }
    for (std::size_t j = 0; j < s.size(); ++j) neg += l[j] ? 0 : 1;
    return static_cast<double>(twice_wins) /
           (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

// Exhaustive threshold enumeration: every distinct score is a threshold,
// counts recomputed from scratch at each one.
double auprc_oracle(const Scores& s, const Labels& l) {
    Scores thresholds = s;
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    unsigned long long pos = 0;
    for (auto v : l) pos += v ? 1 : 0;

    double area = 0.0;
    unsigned long long prev_tp = 0;
    for (double th : thresholds) {
        unsigned long long tp = 0, fp = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if (s[i] >= th) (l[i] ? tp : fp) += 1;
        const double recall_step = static_cast<double>(tp - prev_tp) / static_cast<double>(pos);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += recall_step * precision;
        prev_tp = tp;
    }
    return area;
}

}  // namespace

TEST_CASE("auroc on perfectly separated scores", "[eval]") {
    CHECK(gcad::auroc({1, 2, 3, 4}, {0, 0, 1, 1}) == 1.0);
    CHECK(gcad::auroc({4, 3, 2, 1}, {0, 0, 1, 1}) == 0.0);
}

TEST_CASE("all-tied scores give auroc 0.5 and auprc equal to positive rate", "[eval]") {
    Scores s(10, 3.25);
    Labels l = {0, 1, 0, 0, 1, 0, 0, 0, 1, 0};
    CHECK(gcad::auroc(s, l) == 0.5);
    CHECK(gcad::auprc(s, l) == 0.3);
}

TEST_CASE("perfect separation gives auprc 1", "[eval]") {
    CHECK(gcad::auprc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0);
}

TEST_CASE("metrics match brute-force oracles exactly", "[eval]") {
    gcad::Rng rng(701);
    for (int round = 0; round < 40; ++round) {
        const std::size_t n = 5 + rng.next_below(46);  // up to 50 points
        Scores s;
        Labels l;
        bool saw_pos = false, saw_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // coarse grid forces plenty of ties
            s.push_back(std::floor(rng.uniform(0, 8)) / 4.0);
            l.push_back(rng.bernoulli(0.4) ? 1 : 0);
            (l.back() ? saw_pos : saw_neg) = true;
        }
        if (!saw_pos) l[0] = 1;
        if (!saw_neg) l[1 % n] = 0;

        CHECK(gcad::auroc(s, l) == auroc_oracle(s, l));
        CHECK(gcad::auprc(s, l) == auprc_oracle(s, l));
    }
}

TEST_CASE("metrics are invariant under strictly increasing transforms", "[eval]") {
    gcad::Rng rng(709);
    Scores s;
    Labels l;
    for (int i = 0; i < 30; ++i) {
        s.push_back(std::floor(rng.uniform(-4, 4)));
        l.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    l[0] = 1;
    l[1] = 0;

    Scores affine, cubed;
    for (double v : s) {
        affine.push_back(2.0 * v + 3.0);
        cubed.push_back(v * v * v);  // strictly increasing, tie-preserving on integers
    }
    CHECK(gcad::auroc(affine, l) == gcad::auroc(s, l));
    CHECK(gcad::auroc(cubed, l) == gcad::auroc(s, l));
    CHECK(gcad::auprc(affine, l) == gcad::auprc(s, l));
    CHECK(gcad::auprc(cubed, l) == gcad::auprc(s, l));
}

TEST_CASE("auroc of negated scores is the complement", "[eval]") {
    gcad::Rng rng(719);
    for (int round = 0; round < 20; ++round) {
        Scores s;
        Labels l;
        for (int i = 0; i < 25; ++i) {
            s.push_back(std::floor(rng.uniform(0, 6)));
            l.push_back(rng.bernoulli(0.5) ? 1 : 0);
        }
        l[0] = 1;
        l[1] = 0;
        Scores neg;
        for (double v : s) neg.push_back(-v);
        CHECK(gcad::auroc(s, l) + gcad::auroc(neg, l) == 1.0);
    }
}

TEST_CASE("degenerate evaluation inputs are rejected", "[eval]") {
    CHECK_THROWS_AS(gcad::auroc({1, 2}, {1, 1}), gcad::EvalError);
    CHECK_THROWS_AS(gcad::auroc({1, 2}, {0, 0}), gcad::EvalError);
    CHECK_THROWS_AS(gcad::auprc({1, 2}, {1, 1}), gcad::EvalError);
    CHECK_THROWS_AS(gcad::auroc({1, 2, 3}, {0, 1}), gcad::ShapeError);
    CHECK_THROWS_AS(gcad::auroc({}, {}), gcad::EvalError);
}

TEST_CASE("evaluate fills the report", "[eval]") {
    gcad::EvalReport r = gcad::evaluate({1, 2, 3, 4}, {0, 0, 1, 1});
    CHECK(r.auroc == 1.0);
    CHECK(r.auprc == 1.0);
    CHECK(r.n_scored == 4);
    CHECK(r.n_positive == 2);
}
