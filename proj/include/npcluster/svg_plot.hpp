#pragma once

#include <string>

#include "npcluster/core_data.hpp"

namespace npcluster::cli {

// tab20 colours; label j (in ascending label order) takes entry j mod 20.
inline constexpr const char* kPalette[20] = {
    "#1f77b4", "#aec7e8", "#ff7f0e", "#ffbb78", "#2ca02c", "#98df8a", "#d62728",
    "#ff9896", "#9467bd", "#c5b0d5", "#8c564b", "#c49c94", "#e377c2", "#f7b6d2",
    "#7f7f7f", "#c7c7c7", "#bcbd22", "#dbdb8d", "#17becf", "#9edae5",
};

// Scatter plot of a 2-D embedding: one <circle> per point, a legend of
// coloured <rect> swatches. Output depends only on the inputs.
std::string render_scatter_svg(const EmbeddingMatrix& embedding, const LabelVector& labels);

}  // namespace npcluster::cli
