#pragma once

#include "connlatent/common.hpp"
#include "connlatent/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace connlatent {

// Minimal standalone SVG charts for the loss-curve, ROC and permutation
// histogram artifacts. 640x480 canvas, labeled axes, no dependencies.
namespace svg {

struct Frame {
    double x0, x1, y0, y1;  // data ranges
    static constexpr double width = 640, height = 480;
    static constexpr double left = 70, right = 20, top = 30, bottom = 55;

    double px(double x) const {
        return left + (x - x0) / (x1 - x0 == 0 ? 1 : x1 - x0) * (width - left - right);
    }
    double py(double y) const {
        return height - bottom - (y - y0) / (y1 - y0 == 0 ? 1 : y1 - y0) * (height - top - bottom);
    }
};

inline std::string header() {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
           "viewBox=\"0 0 640 480\">\n<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
}

inline std::string axes(const Frame& f, const std::string& title, const std::string& xlabel,
                        const std::string& ylabel) {
    std::ostringstream out;
    out << "<line x1=\"" << f.left << "\" y1=\"" << Frame::height - Frame::bottom << "\" x2=\""
        << Frame::width - Frame::right << "\" y2=\"" << Frame::height - Frame::bottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << f.left << "\" y1=\"" << Frame::top << "\" x2=\"" << f.left << "\" y2=\""
        << Frame::height - Frame::bottom << "\" stroke=\"black\"/>\n";
    out << "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    out << "<text x=\"355\" y=\"470\" text-anchor=\"middle\" font-size=\"13\">" << xlabel << "</text>\n";
    out << "<text x=\"18\" y=\"250\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 250)\">"
        << ylabel << "</text>\n";
    auto tick = [&](double value, bool x_axis, double pos) {
        if (x_axis)
            out << "<text x=\"" << pos << "\" y=\"" << Frame::height - Frame::bottom + 18
                << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt_double(value, 4) << "</text>\n";
        else
            out << "<text x=\"" << f.left - 6 << "\" y=\"" << pos + 4
                << "\" text-anchor=\"end\" font-size=\"11\">" << fmt_double(value, 4) << "</text>\n";
    };
    tick(f.x0, true, f.px(f.x0));
    tick(f.x1, true, f.px(f.x1));
    tick(f.y0, false, f.py(f.y0));
    tick(f.y1, false, f.py(f.y1));
    return out.str();
}

inline void write_line_chart(const std::string& path, const std::vector<std::pair<double, double>>& points,
                             const std::string& title, const std::string& xlabel, const std::string& ylabel,
                             const std::string& color = "#1f6fb2") {
    if (points.empty()) throw DataError("cannot chart an empty series");
    Frame f{points.front().first, points.front().first, points.front().second, points.front().second};
    for (const auto& [x, y] : points) {
        f.x0 = std::min(f.x0, x);
        f.x1 = std::max(f.x1, x);
        f.y0 = std::min(f.y0, y);
        f.y1 = std::max(f.y1, y);
    }
    if (f.x0 == f.x1) f.x1 = f.x0 + 1;
    if (f.y0 == f.y1) f.y1 = f.y0 + 1;

    std::ostringstream out;
    out << header() << axes(f, title, xlabel, ylabel);
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : points) out << fmt_double(f.px(x), 8) << ',' << fmt_double(f.py(y), 8) << ' ';
    out << "\"/>\n</svg>\n";
    write_text_file(path, out.str());
}

inline void write_histogram(const std::string& path, const std::vector<double>& values, int bins,
                            double observed, const std::string& title, const std::string& xlabel) {
    if (values.empty()) throw DataError("cannot chart an empty histogram");
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    lo = std::min(lo, observed);
    hi = std::max(hi, observed);
    if (lo == hi) hi = lo + 1;
    const double bin_width = (hi - lo) / bins;

    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double v : values) {
        int b = static_cast<int>((v - lo) / bin_width);
        b = std::clamp(b, 0, bins - 1);
        counts[static_cast<std::size_t>(b)]++;
    }
    const int peak = *std::max_element(counts.begin(), counts.end());

    Frame f{lo, hi, 0.0, static_cast<double>(peak)};
    std::ostringstream out;
    out << header() << axes(f, title, xlabel, "count");
    for (int b = 0; b < bins; ++b) {
        const double x = lo + b * bin_width;
        const double w = f.px(x + bin_width) - f.px(x);
        const double y = f.py(counts[static_cast<std::size_t>(b)]);
        out << "<rect x=\"" << fmt_double(f.px(x), 8) << "\" y=\"" << fmt_double(y, 8) << "\" width=\""
            << fmt_double(w, 8) << "\" height=\"" << fmt_double(f.py(0) - y, 8)
            << "\" fill=\"#7f9fc4\" stroke=\"white\"/>\n";
    }
    out << "<line x1=\"" << fmt_double(f.px(observed), 8) << "\" y1=\"" << Frame::top << "\" x2=\""
        << fmt_double(f.px(observed), 8) << "\" y2=\"" << Frame::height - Frame::bottom
        << "\" stroke=\"red\" stroke-dasharray=\"6,4\" stroke-width=\"1.5\"/>\n";
    out << "</svg>\n";
    write_text_file(path, out.str());
}

}  // namespace svg

}  // namespace connlatent
