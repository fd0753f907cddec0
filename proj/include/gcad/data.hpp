#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gcad/errors.hpp"
#include "gcad/tensor.hpp"
#include "gcad/window.hpp"

namespace gcad {

/// A multivariate series: T observations of N channels, with optional 0/1
/// anomaly labels. Values are row-major (time outermost).
struct Dataset {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    std::vector<std::uint8_t> labels;  // empty, or one flag per row
    std::vector<std::string> channel_names;

    double at(std::size_t t, std::size_t i) const { return values[t * cols + i]; }
    double& at(std::size_t t, std::size_t i) { return values[t * cols + i]; }
    bool has_labels() const { return !labels.empty(); }
};

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

inline double parse_cell(const std::string& cell, std::size_t file_line,
                         const std::string& column) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t')) --end;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc{} || ptr != end)
        throw DataError("line " + std::to_string(file_line) + ", column '" + column +
                        "': cannot parse '" + cell + "' as a number");
    return v;
}

inline void format_value(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace detail

/// Loads a comma-delimited file with a header row. A column named "label"
/// (or the explicitly requested column) becomes the 0/1 label vector; all
/// remaining columns are channels. Rows with NaN are rejected.
inline Dataset load_csv(const std::string& path,
                        const std::optional<std::string>& label_column = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw DataError("'" + path + "' is empty (no header row)");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = detail::split_line(line);
    const std::string label_name = label_column.value_or("label");
    std::size_t label_idx = header.size();
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == label_name) label_idx = i;
    if (label_column && label_idx == header.size())
        throw ConfigError("label column '" + *label_column + "' not found in '" + path + "'");

    Dataset d;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (i != label_idx) d.channel_names.push_back(header[i]);
    d.cols = d.channel_names.size();
    if (d.cols == 0) throw DataError("'" + path + "' has no value columns");

    const bool has_labels = label_idx < header.size();
    std::size_t file_line = 1;
    while (std::getline(in, line)) {
        ++file_line;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells = detail::split_line(line);
        if (cells.size() != header.size())
            throw DataError("line " + std::to_string(file_line) + ": expected " +
                            std::to_string(header.size()) + " cells, got " +
                            std::to_string(cells.size()));
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i == label_idx) {
                const double v = detail::parse_cell(cells[i], file_line, header[i]);
                if (v != 0.0 && v != 1.0)
                    throw DataError("line " + std::to_string(file_line) +
                                    ": label must be 0 or 1, got '" + cells[i] + "'");
                d.labels.push_back(v != 0.0);
            } else {
                const double v = detail::parse_cell(cells[i], file_line, header[i]);
                if (!std::isfinite(v))
                    throw DataError("line " + std::to_string(file_line) + ", column '" +
                                    header[i] + "': non-finite value rejected");
                d.values.push_back(v);
            }
        }
        ++d.rows;
    }
    if (has_labels && d.labels.size() != d.rows)
        throw DataError("'" + path + "': label count does not match row count");
    return d;
}

/// Writes a dataset back to CSV with 17 significant digits, which round-trips
/// doubles exactly. Labels, when present, become a final "label" column.
inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    std::string buf;
    for (std::size_t i = 0; i < d.cols; ++i) {
        if (i) buf += ',';
        buf += d.channel_names.empty() ? ("ch" + std::to_string(i)) : d.channel_names[i];
    }
    if (d.has_labels()) buf += ",label";
    buf += '\n';
    for (std::size_t t = 0; t < d.rows; ++t) {
        for (std::size_t i = 0; i < d.cols; ++i) {
            if (i) buf += ',';
            detail::format_value(buf, d.at(t, i));
        }
        if (d.has_labels()) {
            buf += ',';
            buf += d.labels[t] ? '1' : '0';
        }
        buf += '\n';
    }
    out << buf;
    if (!out) throw DataError("write to '" + path + "' failed");
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

struct MinMaxStats {
    std::vector<double> lo, hi;
};

inline MinMaxStats minmax_fit(const Dataset& train) {
    if (train.rows == 0) throw DataError("cannot fit normalization on an empty dataset");
    MinMaxStats s;
    s.lo.assign(train.cols, std::numeric_limits<double>::infinity());
    s.hi.assign(train.cols, -std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < train.rows; ++t)
        for (std::size_t i = 0; i < train.cols; ++i) {
            s.lo[i] = std::min(s.lo[i], train.at(t, i));
            s.hi[i] = std::max(s.hi[i], train.at(t, i));
        }
    return s;
}

/// (x - min) / (max - min) per channel. Constant channels map to 0. When
/// `clip` is set (for data outside the fitting split), results are clipped to
/// [-1, 2] to bound out-of-range excursions.
inline Dataset minmax_apply(const Dataset& d, const MinMaxStats& s, bool clip) {
    if (s.lo.size() != d.cols) throw ShapeError("normalization stats do not match dataset");
    Dataset out = d;
    for (std::size_t t = 0; t < d.rows; ++t)
        for (std::size_t i = 0; i < d.cols; ++i) {
            const double range = s.hi[i] - s.lo[i];
            double v = range > 0.0 ? (d.at(t, i) - s.lo[i]) / range : 0.0;
            if (clip) v = std::min(2.0, std::max(-1.0, v));
            out.at(t, i) = v;
        }
    return out;
}

/// Normalizes the training split and any number of other splits with the
/// training statistics.
inline std::pair<Dataset, std::vector<Dataset>> minmax_normalize(
    const Dataset& train, const std::vector<Dataset>& others, MinMaxStats* stats_out = nullptr) {
    MinMaxStats s = minmax_fit(train);
    std::vector<Dataset> rest;
    rest.reserve(others.size());
    for (const Dataset& d : others) rest.push_back(minmax_apply(d, s, /*clip=*/true));
    if (stats_out) *stats_out = s;
    return {minmax_apply(train, s, /*clip=*/false), std::move(rest)};
}

// ---------------------------------------------------------------------------
// Splitting and windowing
// ---------------------------------------------------------------------------

/// Contiguous prefix/suffix split preserving temporal order.
inline std::pair<Dataset, Dataset> split_train_val(const Dataset& d, double fraction) {
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw ConfigError("split fraction must be in (0, 1)");
    const std::size_t cut = static_cast<std::size_t>(fraction * static_cast<double>(d.rows));
    Dataset head, tail;
    head.cols = tail.cols = d.cols;
    head.channel_names = tail.channel_names = d.channel_names;
    head.rows = cut;
    tail.rows = d.rows - cut;
    head.values.assign(d.values.begin(), d.values.begin() + cut * d.cols);
    tail.values.assign(d.values.begin() + cut * d.cols, d.values.end());
    if (d.has_labels()) {
        head.labels.assign(d.labels.begin(), d.labels.begin() + cut);
        tail.labels.assign(d.labels.begin() + cut, d.labels.end());
    }
    return {std::move(head), std::move(tail)};
}

/// Sliding windows with the given stride: input columns are
/// x[t-max_lag] .. x[t-1] (oldest first), the target is x[t].
inline WindowList make_windows(const Dataset& d, std::size_t max_lag, std::size_t stride = 1) {
    if (max_lag < 1) throw ConfigError("max_lag must be >= 1");
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (d.rows <= max_lag)
        throw DataError("series length " + std::to_string(d.rows) +
                        " is too short for max_lag " + std::to_string(max_lag));
    WindowList out;
    for (std::size_t t = max_lag; t < d.rows; t += stride) {
        Tensor x({d.cols, max_lag});
        for (std::size_t i = 0; i < d.cols; ++i)
            for (std::size_t l = 0; l < max_lag; ++l) x.at(i, l) = d.at(t - max_lag + l, i);
        Tensor y({d.cols});
        for (std::size_t i = 0; i < d.cols; ++i) y[i] = d.at(t, i);
        out.push_back(Window{std::move(x), std::move(y), t});
    }
    return out;
}

}  // namespace gcad
