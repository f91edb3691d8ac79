#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "probctl/trace.hpp"

namespace probctl {

namespace plot_detail {

struct Extent {
    double lo = 0.0;
    double hi = 1.0;
};

inline Extent padded(double lo, double hi) {
    if (!(lo < hi)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

inline double nice_step(double span, int target_ticks) {
    const double rough = span / target_ticks;
    const double mag = std::pow(10.0, std::floor(std::log10(rough)));
    for (double mult : {1.0, 2.0, 5.0, 10.0})
        if (rough <= mult * mag) return mult * mag;
    return 10.0 * mag;
}

inline std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

/// One axes panel at (x0, y0) with polyline series.
class Panel {
public:
    Panel(double x0, double y0, double width, double height, std::string title,
          std::string x_label, std::string y_label)
        : x0_(x0), y0_(y0), w_(width), h_(height), title_(std::move(title)),
          x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void add_series(const std::vector<double>& x, const std::vector<double>& y,
                    const std::string& color, const std::string& label) {
        series_.push_back({x, y, color, label});
    }

    void render(std::ostream& out) const {
        Extent ex, ey;
        bool first = true;
        for (const auto& s : series_) {
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (first) {
                    ex = {s.x[i], s.x[i]};
                    ey = {s.y[i], s.y[i]};
                    first = false;
                } else {
                    ex.lo = std::min(ex.lo, s.x[i]);
                    ex.hi = std::max(ex.hi, s.x[i]);
                    ey.lo = std::min(ey.lo, s.y[i]);
                    ey.hi = std::max(ey.hi, s.y[i]);
                }
            }
        }
        ex = padded(ex.lo, ex.hi);
        ey = padded(ey.lo, ey.hi);
        const double ml = 58, mr = 14, mt = 30, mb = 44; // margins inside the panel box
        const double px = x0_ + ml, py = y0_ + mt;
        const double pw = w_ - ml - mr, ph = h_ - mt - mb;
        const auto sx = [&](double v) { return px + (v - ex.lo) / (ex.hi - ex.lo) * pw; };
        const auto sy = [&](double v) { return py + ph - (v - ey.lo) / (ey.hi - ey.lo) * ph; };

        out << "<g class=\"panel\">\n";
        out << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << pw << "\" height=\"" << ph
            << "\" fill=\"white\" stroke=\"#444\"/>\n";
        out << "<text x=\"" << x0_ + w_ / 2 << "\" y=\"" << y0_ + 18
            << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << title_
            << "</text>\n";

        const double xstep = nice_step(ex.hi - ex.lo, 5);
        for (double t = std::ceil(ex.lo / xstep) * xstep; t <= ex.hi + 1e-12; t += xstep) {
            out << "<line x1=\"" << sx(t) << "\" y1=\"" << py + ph << "\" x2=\"" << sx(t) << "\" y2=\""
                << py + ph + 4 << "\" stroke=\"#444\"/>\n";
            out << "<text x=\"" << sx(t) << "\" y=\"" << py + ph + 16
                << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
                << tick_label(t) << "</text>\n";
        }
        const double ystep = nice_step(ey.hi - ey.lo, 5);
        for (double t = std::ceil(ey.lo / ystep) * ystep; t <= ey.hi + 1e-12; t += ystep) {
            out << "<line x1=\"" << px - 4 << "\" y1=\"" << sy(t) << "\" x2=\"" << px << "\" y2=\""
                << sy(t) << "\" stroke=\"#444\"/>\n";
            out << "<text x=\"" << px - 6 << "\" y=\"" << sy(t) + 3
                << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">"
                << tick_label(t) << "</text>\n";
        }
        out << "<text x=\"" << px + pw / 2 << "\" y=\"" << y0_ + h_ - 8
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">" << x_label_
            << "</text>\n";
        out << "<text x=\"" << x0_ + 14 << "\" y=\"" << py + ph / 2
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\" transform=\"rotate(-90 "
            << x0_ + 14 << ' ' << py + ph / 2 << ")\">" << y_label_ << "</text>\n";

        double legend_y = py + 14;
        for (const auto& s : series_) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                out << sx(s.x[i]) << ',' << sy(s.y[i]) << ' ';
            out << "\"/>\n";
            if (!s.label.empty()) {
                out << "<line x1=\"" << px + pw - 86 << "\" y1=\"" << legend_y - 4 << "\" x2=\""
                    << px + pw - 70 << "\" y2=\"" << legend_y - 4 << "\" stroke=\"" << s.color
                    << "\"/>\n";
                out << "<text x=\"" << px + pw - 66 << "\" y=\"" << legend_y
                    << "\" font-size=\"10\" font-family=\"sans-serif\">" << s.label << "</text>\n";
                legend_y += 14;
            }
        }
        out << "</g>\n";
    }

private:
    struct Series {
        std::vector<double> x, y;
        std::string color;
        std::string label;
    };
    double x0_, y0_, w_, h_;
    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
};

} // namespace plot_detail

/// Writes one SVG with two panels per trace: actual output overlaid on the
/// desired output, and the tracking error against the step index.
inline void emit_plots(const std::vector<SimTrace>& traces, const std::string& path) {
    if (traces.empty()) throw std::invalid_argument("emit_plots: no traces given");
    for (const auto& t : traces)
        if (t.rows.empty()) throw std::invalid_argument("emit_plots: empty trace");

    const double panel_w = 560, panel_h = 360;
    const double width = 2 * panel_w + 40;
    const double height = static_cast<double>(traces.size()) * panel_h + 20;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write plot: " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

    for (std::size_t ti = 0; ti < traces.size(); ++ti) {
        const SimTrace& t = traces[ti];
        std::vector<double> k, y, y_d, e;
        k.reserve(t.rows.size());
        for (const TraceRow& row : t.rows) {
            k.push_back(row.k);
            y.push_back(row.y);
            y_d.push_back(row.y_d);
            e.push_back(row.e);
        }
        const std::string method = t.rows.front().method;
        const double row_y = 10 + static_cast<double>(ti) * panel_h;

        plot_detail::Panel left(10, row_y, panel_w, panel_h, method + ": output vs desired",
                                "step k", "output y");
        left.add_series(k, y, "#1f77b4", "y");
        left.add_series(k, y_d, "#d62728", "y_d");
        left.render(out);

        plot_detail::Panel right(30 + panel_w, row_y, panel_w, panel_h, method + ": tracking error",
                                 "step k", "error e");
        right.add_series(k, e, "#2ca02c", "");
        right.render(out);
    }
    out << "</svg>\n";
}

} // namespace probctl
