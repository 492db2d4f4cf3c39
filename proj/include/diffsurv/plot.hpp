#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffsurv/kaplan_meier.hpp"
#include "diffsurv/summary.hpp"

namespace diffsurv {

struct PlotSeries {
    CurveEstimate curve;
    std::string label;
};

struct PlotOverlay {
    StepCurve steps;
    std::string label;
};

namespace detail {

inline const char* plot_color(std::size_t i) {
    static const char* colors[] = {"#1f6fb2", "#c23b22", "#2e8b57", "#8a2be2", "#b8860b", "#444444"};
    return colors[i % 6];
}

inline std::string fmt_tick(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

}  // namespace detail

/// Self-contained SVG of mean curves with shaded pointwise bands and optional
/// step-function overlays. All numbers plotted come straight from the curve
/// estimates, which are what the CSV exports contain.
inline void export_plot(const std::vector<PlotSeries>& series,
                        const std::vector<PlotOverlay>& overlays, const std::string& path,
                        const std::string& y_label = "") {
    if (series.empty()) throw std::invalid_argument("export_plot: no curves to draw");
    for (const auto& s : series)
        if (s.curve.times != series.front().curve.times)
            throw std::invalid_argument("export_plot: curves must share a grid");

    const double w = 640, h = 420, ml = 60, mr = 16, mt = 28, mb = 44;
    double x_lo = series.front().curve.times.front();
    double x_hi = series.front().curve.times.back();
    double y_lo = 0.0, y_hi = 0.0;
    for (const auto& s : series)
        for (std::size_t k = 0; k < s.curve.times.size(); ++k)
            y_hi = std::max({y_hi, s.curve.band_hi[k], s.curve.mean[k]});
    for (const auto& o : overlays) {
        for (const double t : o.steps.times) x_hi = std::max(x_hi, t);
        y_hi = std::max(y_hi, 1.0);
    }
    if (!(y_hi > y_lo)) y_hi = 1.0;
    y_hi *= 1.04;

    auto X = [&](double t) { return ml + (t - x_lo) / (x_hi - x_lo) * (w - ml - mr); };
    auto Y = [&](double v) { return h - mb - (v - y_lo) / (y_hi - y_lo) * (h - mt - mb); };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot file: " + path);
    out.precision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

    // axes and ticks
    out << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
        << h - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
        << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double t = x_lo + (x_hi - x_lo) * i / 5.0;
        const double v = y_lo + (y_hi - y_lo) * i / 5.0;
        out << "<line x1=\"" << X(t) << "\" y1=\"" << h - mb << "\" x2=\"" << X(t) << "\" y2=\""
            << h - mb + 4 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << X(t) << "\" y=\"" << h - mb + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::fmt_tick(t) << "</text>\n";
        out << "<line x1=\"" << ml - 4 << "\" y1=\"" << Y(v) << "\" x2=\"" << ml << "\" y2=\""
            << Y(v) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << Y(v) + 4
            << "\" font-size=\"11\" text-anchor=\"end\">" << detail::fmt_tick(v) << "</text>\n";
    }
    if (!y_label.empty())
        out << "<text x=\"" << ml << "\" y=\"" << mt - 10 << "\" font-size=\"12\">" << y_label
            << "</text>\n";

    // bands then means, so lines stay visible
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& c = series[i].curve;
        out << "<polygon fill=\"" << detail::plot_color(i) << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
        for (std::size_t k = 0; k < c.times.size(); ++k)
            out << X(c.times[k]) << "," << Y(c.band_hi[k]) << " ";
        for (std::size_t k = c.times.size(); k-- > 0;)
            out << X(c.times[k]) << "," << Y(c.band_lo[k]) << " ";
        out << "\"/>\n";
    }
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& c = series[i].curve;
        out << "<polyline fill=\"none\" stroke=\"" << detail::plot_color(i)
            << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t k = 0; k < c.times.size(); ++k)
            out << X(c.times[k]) << "," << Y(c.mean[k]) << " ";
        out << "\"/>\n";
    }
    for (std::size_t i = 0; i < overlays.size(); ++i) {
        const auto& s = overlays[i].steps;
        out << "<path fill=\"none\" stroke=\"" << detail::plot_color(i)
            << "\" stroke-width=\"1.2\" stroke-dasharray=\"5,3\" d=\"";
        double prev_v = 1.0;
        out << "M" << X(x_lo) << " " << Y(prev_v);
        for (std::size_t k = 0; k < s.times.size(); ++k) {
            out << " L" << X(s.times[k]) << " " << Y(prev_v);
            out << " L" << X(s.times[k]) << " " << Y(s.values[k]);
            prev_v = s.values[k];
        }
        out << " L" << X(x_hi) << " " << Y(prev_v);
        out << "\"/>\n";
    }

    // legend
    double ly = mt + 8;
    for (std::size_t i = 0; i < series.size(); ++i) {
        out << "<line x1=\"" << w - mr - 150 << "\" y1=\"" << ly << "\" x2=\"" << w - mr - 126
            << "\" y2=\"" << ly << "\" stroke=\"" << detail::plot_color(i)
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << w - mr - 120 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
            << series[i].label << "</text>\n";
        ly += 16;
    }
    for (std::size_t i = 0; i < overlays.size(); ++i) {
        out << "<line x1=\"" << w - mr - 150 << "\" y1=\"" << ly << "\" x2=\"" << w - mr - 126
            << "\" y2=\"" << ly << "\" stroke=\"" << detail::plot_color(i)
            << "\" stroke-width=\"1.2\" stroke-dasharray=\"5,3\"/>\n";
        out << "<text x=\"" << w - mr - 120 << "\" y=\"" << ly + 4 << "\" font-size=\"11\">"
            << overlays[i].label << "</text>\n";
        ly += 16;
    }
    out << "</svg>\n";
}

}  // namespace diffsurv
