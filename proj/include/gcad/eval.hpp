#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "gcad/errors.hpp"

namespace gcad {

/// Threshold-free detection metrics over the scored timestamps.
struct EvalReport {
    double auroc = 0.0;
    double auprc = 0.0;
    std::size_t n_scored = 0;
    std::size_t n_positive = 0;
};

namespace detail {

inline void check_eval_inputs(const std::vector<double>& scores,
                              const std::vector<std::uint8_t>& labels) {
    if (scores.size() != labels.size())
        throw ShapeError("scores and labels lengths differ");
    if (scores.empty()) throw EvalError("nothing to evaluate");
    std::size_t pos = 0;
    for (std::uint8_t l : labels) pos += l ? 1 : 0;
    if (pos == 0 || pos == labels.size())
        throw EvalError("labels contain a single class; AUROC/AUPRC undefined");
}

// Indices sorted by descending score; ties keep index order (irrelevant to
// both metrics, which group ties).
inline std::vector<std::size_t> sort_descending(const std::vector<double>& scores) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return idx;
}

}  // namespace detail

/// Probability that a random positive outranks a random negative, ties
/// counting one half (the rank-sum formulation). The numerator is kept in
/// exact integer arithmetic, so the result equals brute-force pair counting
/// bit for bit.
inline double auroc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    detail::check_eval_inputs(scores, labels);
    const auto idx = detail::sort_descending(scores);

    unsigned long long pos_total = 0, neg_total = 0;
    for (std::uint8_t l : labels) (l ? pos_total : neg_total) += 1;

    // walk score groups from high to low; positives in a group beat every
    // negative strictly below and tie the negatives inside the group
    unsigned long long twice_wins = 0;
    unsigned long long neg_seen = 0;
    std::size_t g = 0;
    while (g < idx.size()) {
        std::size_t h = g;
        unsigned long long gp = 0, gn = 0;
        while (h < idx.size() && scores[idx[h]] == scores[idx[g]]) {
            (labels[idx[h]] ? gp : gn) += 1;
            ++h;
        }
        twice_wins += gp * (2 * (neg_total - neg_seen - gn) + gn);
        neg_seen += gn;
        g = h;
    }
    return static_cast<double>(twice_wins) /
           (2.0 * static_cast<double>(pos_total) * static_cast<double>(neg_total));
}

/// Area under the precision-recall step curve, descending-score sweep with
/// tied scores grouped into a single threshold step:
/// sum over groups of (recall_k - recall_{k-1}) * precision_k.
inline double auprc(const std::vector<double>& scores, const std::vector<std::uint8_t>& labels) {
    detail::check_eval_inputs(scores, labels);
    const auto idx = detail::sort_descending(scores);

    unsigned long long pos_total = 0;
    for (std::uint8_t l : labels) pos_total += l ? 1 : 0;

    double area = 0.0;
    unsigned long long tp = 0, fp = 0;
    std::size_t g = 0;
    while (g < idx.size()) {
        std::size_t h = g;
        unsigned long long gp = 0, gn = 0;
        while (h < idx.size() && scores[idx[h]] == scores[idx[g]]) {
            (labels[idx[h]] ? gp : gn) += 1;
            ++h;
        }
        tp += gp;
        fp += gn;
        const double recall_step = static_cast<double>(gp) / static_cast<double>(pos_total);
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        area += recall_step * precision;
        g = h;
    }
    return area;
}

inline EvalReport evaluate(const std::vector<double>& scores,
                           const std::vector<std::uint8_t>& labels) {
    EvalReport r;
    r.auroc = auroc(scores, labels);
    r.auprc = auprc(scores, labels);
    r.n_scored = scores.size();
    for (std::uint8_t l : labels) r.n_positive += l ? 1 : 0;
    return r;
}

}  // namespace gcad
