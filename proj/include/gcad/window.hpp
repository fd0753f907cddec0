#pragma once

#include <cstddef>
#include <vector>

#include "gcad/tensor.hpp"

namespace gcad {

/// One supervised sliding-window sample: the lagged input block (channels x
/// lags, column 0 oldest), the observed next step, and the absolute index of
/// that step in the source series.
struct Window {
    Tensor input;   // n_channels x max_lag
    Tensor target;  // n_channels
    std::size_t target_index = 0;
};

using WindowList = std::vector<Window>;

}  // namespace gcad
