#include "npcluster/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>

#include "npcluster/errors.hpp"

namespace npcluster::cli {

namespace {

constexpr double kPlotSize = 600.0;
constexpr double kLegendWidth = 140.0;
constexpr double kLegendRow = 18.0;
constexpr double kMargin = 0.05;

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace

std::string render_scatter_svg(const EmbeddingMatrix& embedding, const LabelVector& labels) {
    if (embedding.cols() != 2) throw PreconditionError("plot requires p=2");
    const std::size_t n = embedding.rows();
    if (labels.size() != n) {
        throw PreconditionError("plot: " + std::to_string(labels.size()) + " labels for " + std::to_string(n) +
                                " points");
    }

    std::map<Label, std::size_t> colour_of;
    for (auto l : labels) colour_of.emplace(l, 0);
    std::size_t slot = 0;
    for (auto& [label, c] : colour_of) c = slot++ % 20;

    double xmin = embedding(0, 0), xmax = xmin, ymin = embedding(0, 1), ymax = ymin;
    for (std::size_t i = 1; i < n; ++i) {
        xmin = std::min(xmin, embedding(i, 0));
        xmax = std::max(xmax, embedding(i, 0));
        ymin = std::min(ymin, embedding(i, 1));
        ymax = std::max(ymax, embedding(i, 1));
    }
    const double w = xmax > xmin ? xmax - xmin : 1.0;
    const double h = ymax > ymin ? ymax - ymin : 1.0;
    const double vx = xmin - kMargin * w, vw = w * (1.0 + 2.0 * kMargin);
    // y is flipped so larger values plot upwards.
    const double vy = -ymax - kMargin * h, vh = h * (1.0 + 2.0 * kMargin);
    const double radius = 0.004 * std::max(vw, vh);

    const double height = std::max(kPlotSize, kLegendRow * (static_cast<double>(colour_of.size()) + 1.0));
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kPlotSize + kLegendWidth) + "\" height=\"" +
           num(height) + "\">\n";
    out += "<rect x=\"0\" y=\"0\" width=\"" + num(kPlotSize + kLegendWidth) + "\" height=\"" + num(height) +
           "\" fill=\"#ffffff\"/>\n";
    out += "<svg x=\"0\" y=\"0\" width=\"" + num(kPlotSize) + "\" height=\"" + num(kPlotSize) + "\" viewBox=\"" +
           num(vx) + " " + num(vy) + " " + num(vw) + " " + num(vh) + "\">\n";
    for (std::size_t i = 0; i < n; ++i) {
        out += "<circle cx=\"" + num(embedding(i, 0)) + "\" cy=\"" + num(-embedding(i, 1)) + "\" r=\"" +
               num(radius) + "\" fill=\"" + kPalette[colour_of[labels[i]]] + "\"/>\n";
    }
    out += "</svg>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    std::size_t row = 0;
    for (const auto& [label, c] : colour_of) {
        const double y = kLegendRow * (static_cast<double>(row) + 0.5);
        out += "<rect class=\"legend-entry\" x=\"" + num(kPlotSize + 10.0) + "\" y=\"" + num(y) +
               "\" width=\"12\" height=\"12\" fill=\"" + kPalette[c] + "\"/>";
        out += "<text x=\"" + num(kPlotSize + 28.0) + "\" y=\"" + num(y + 10.0) + "\">" + std::to_string(label) +
               "</text>\n";
        ++row;
    }
    out += "</g>\n</svg>\n";
    return out;
}

}  // namespace npcluster::cli
