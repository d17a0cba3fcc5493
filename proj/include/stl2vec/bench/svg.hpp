#pragma once

// Minimal static SVG output for training curves and trajectories.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "stl2vec/bench/world.hpp"

namespace stl2vec::bench::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

inline const char* colour(std::size_t k) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};
    return palette[k % 7];
}

inline void line_chart(std::ostream& os, const std::vector<Series>& series, const std::string& title,
                       const std::string& xlabel, const std::string& ylabel, const std::string& comment = {}) {
    const double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series) {
        for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
        for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
    }
    if (!(x1 > x0)) x1 = x0 + 1;
    if (!(y1 > y0)) y1 = y0 + 1;
    auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    if (!comment.empty()) os << "<!-- " << comment << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
       << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n"
       << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
       << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    if (y0 < 0 && y1 > 0) {
        os << "<line x1=\"" << L << "\" y1=\"" << py(0) << "\" x2=\"" << W - R << "\" y2=\"" << py(0)
           << "\" stroke=\"#999\" stroke-dasharray=\"4\"/>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
        os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\" font-size=\"11\">" << xv
           << "</text>\n<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
           << std::round(yv * 100) / 100 << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\" font-size=\"12\">"
       << xlabel << "</text>\n<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" font-size=\"12\" transform=\"rotate(-90 16 "
       << (T + H - B) / 2 << ")\" text-anchor=\"middle\">" << ylabel << "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        os << "<polyline fill=\"none\" stroke=\"" << colour(k) << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        os << "\"/>\n<text x=\"" << W - R + 10 << "\" y=\"" << T + 18 * k + 10 << "\" font-size=\"12\" fill=\""
           << colour(k) << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
}

/// Regions, initial set and planar trajectories (qx, qy) in world coordinates.
inline void world_plot(std::ostream& os, const RegionMap& map, const std::vector<std::vector<Eigen::VectorXd>>& paths,
                       const std::vector<std::string>& labels, const std::string& comment = {}) {
    const double S = 50, pad = 30, side = 10;
    auto px = [&](double x) { return pad + x * S; };
    auto py = [&](double y) { return pad + (side - y) * S; };
    const double size = 2 * pad + side * S;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 220 << "\" height=\"" << size << "\">\n";
    if (!comment.empty()) os << "<!-- " << comment << " -->\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    auto rect = [&](const Rect& r, const char* fill, const char* stroke) {
        os << "<rect x=\"" << px(r.xlo) << "\" y=\"" << py(r.yhi) << "\" width=\"" << (r.xhi - r.xlo) * S
           << "\" height=\"" << (r.yhi - r.ylo) * S << "\" fill=\"" << fill << "\" stroke=\"" << stroke << "\"/>\n";
    };
    for (int i = 1; i <= 4; ++i) {
        for (int j = 1; j <= 4; ++j) rect(map.subregion(i, j), "#f2f2f2", "#bbb");
        const Rect& r = map.region(i);
        rect(r, "none", "black");
        os << "<text x=\"" << px(r.xlo) + 4 << "\" y=\"" << py(r.yhi) - 4 << "\" font-size=\"12\">Reg " << i << "</text>\n";
    }
    rect(map.initial, "#dde8ff", "#1f3fbf");
    for (std::size_t k = 0; k < paths.size(); ++k) {
        os << "<polyline fill=\"none\" stroke=\"" << colour(k) << "\" stroke-width=\"2\" points=\"";
        for (const auto& x : paths[k]) os << px(x(0)) << ',' << py(x(1)) << ' ';
        os << "\"/>\n";
        if (k < labels.size()) {
            os << "<text x=\"" << size + 5 << "\" y=\"" << 20 + 16 * k << "\" font-size=\"11\" fill=\"" << colour(k)
               << "\">" << labels[k] << "</text>\n";
        }
    }
    os << "</svg>\n";
}

}  // namespace stl2vec::bench::svg
