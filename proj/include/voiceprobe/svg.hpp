#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "voiceprobe/errors.hpp"

namespace voiceprobe {

// One legend entry worth of points sharing a color.
struct ScatterSeries {
    std::string label;
    std::string color;  // "#rrggbb"
    std::vector<std::pair<double, double>> points;
};

inline constexpr const char* kCategoricalPalette[] = {
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// Sequential stops for decade coloring, dark to light.
inline constexpr const char* kSequentialPalette[] = {
    "#440154", "#46327e", "#365c8d", "#277f8e", "#1fa187",
    "#4ac16d", "#a0da39", "#fde725"};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace detail

// Deterministic static scatter plot: one <circle> per data point, legend
// swatches drawn as <rect> so point counts stay countable.
inline void write_scatter_svg(const std::string& path, const std::vector<ScatterSeries>& series,
                              const std::string& x_label, const std::string& y_label) {
    const double width = 640.0, height = 480.0;
    const double left = 60.0, right = 150.0, top = 30.0, bottom = 50.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;

    double x_min = 0.0, x_max = 1.0, y_min = 0.0, y_max = 1.0;
    bool first = true;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                x_min = x_max = x;
                y_min = y_max = y;
                first = false;
            }
            x_min = std::min(x_min, x);
            x_max = std::max(x_max, x);
            y_min = std::min(y_min, y);
            y_max = std::max(y_max, y);
        }
    }
    if (first) throw EmptyInputError("write_scatter_svg: no points");
    if (x_max - x_min < 1e-12) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if (y_max - y_min < 1e-12) {
        y_min -= 0.5;
        y_max += 0.5;
    }
    const auto map_x = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
    const auto map_y = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };

    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"white\"/>\n";
    // axes
    out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
        << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
        << top + plot_h << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << left << "\" y=\"" << height - 16 << "\" font-size=\"11\">"
        << detail::svg_num(x_min) << "</text>\n";
    out << "<text x=\"" << left + plot_w - 30 << "\" y=\"" << height - 16
        << "\" font-size=\"11\">" << detail::svg_num(x_max) << "</text>\n";
    out << "<text x=\"8\" y=\"" << top + plot_h << "\" font-size=\"11\">"
        << detail::svg_num(y_min) << "</text>\n";
    out << "<text x=\"8\" y=\"" << top + 10 << "\" font-size=\"11\">" << detail::svg_num(y_max)
        << "</text>\n";
    out << "<text x=\"" << left + plot_w / 2 - 20 << "\" y=\"" << height - 4
        << "\" font-size=\"13\">" << x_label << "</text>\n";
    out << "<text x=\"14\" y=\"" << top + plot_h / 2
        << "\" font-size=\"13\" transform=\"rotate(-90 14 " << top + plot_h / 2 << ")\">"
        << y_label << "</text>\n";

    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            out << "<circle cx=\"" << detail::svg_num(map_x(x)) << "\" cy=\""
                << detail::svg_num(map_y(y)) << "\" r=\"3\" fill=\"" << s.color
                << "\" fill-opacity=\"0.7\"/>\n";
        }
    }

    double ly = top + 10.0;
    const double lx = left + plot_w + 14.0;
    for (const auto& s : series) {
        out << "<rect x=\"" << lx << "\" y=\"" << ly - 9 << "\" width=\"12\" height=\"12\" fill=\""
            << s.color << "\"/>\n";
        out << "<text x=\"" << lx + 18 << "\" y=\"" << ly + 1 << "\" font-size=\"12\">" << s.label
            << "</text>\n";
        ly += 18.0;
    }
    out << "</svg>\n";
    if (!out) throw FormatError("write failed for " + path);
}

}  // namespace voiceprobe
