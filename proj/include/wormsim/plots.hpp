#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "composition.hpp"
#include "error.hpp"

namespace wormsim {

struct Series {
    std::string name;
    std::vector<double> y;
};

// Minimal SVG line chart; enough to eyeball a run.
inline void write_line_chart(const std::string& path, const std::string& title, const std::vector<double>& t,
                             const std::vector<Series>& series) {
    const double W = 720, H = 360, ml = 60, mr = 140, mt = 30, mb = 40;
    double x0 = t.empty() ? 0 : t.front(), x1 = t.empty() ? 1 : t.back();
    double y0 = 0, y1 = 0;
    bool first = true;
    for (const auto& s : series)
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            y0 = first ? v : std::min(y0, v);
            y1 = first ? v : std::max(y1, v);
            first = false;
        }
    if (x1 <= x0) x1 = x0 + 1;
    if (y1 <= y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }
    auto X = [&](double v) { return ml + (v - x0) / (x1 - x0) * (W - ml - mr); };
    auto Y = [&](double v) { return H - mb - (v - y0) / (y1 - y0) * (H - mt - mb); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    char buf[160];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << ml << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#888\"/>\n", ml,
                  mt, W - ml - mr, H - mt - mb);
    os << buf;
    for (int k = 0; k <= 4; ++k) {
        double yv = y0 + (y1 - y0) * k / 4.0, xv = x0 + (x1 - x0) * k / 4.0;
        std::snprintf(buf, sizeof buf, "<text x=\"4\" y=\"%.1f\" font-size=\"10\">%.3g</text>\n", Y(yv) + 3, yv);
        os << buf;
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"10\">%.3g</text>\n", X(xv) - 8,
                      H - mb + 14, xv);
        os << buf;
    }
    std::size_t stride = std::max<std::size_t>(1, t.size() / 1500);
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* c = colors[s % 7];
        os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t k = 0; k < t.size() && k < series[s].y.size(); k += stride) {
            double v = series[s].y[k];
            if (!std::isfinite(v)) continue;
            std::snprintf(buf, sizeof buf, "%.1f,%.1f ", X(t[k]), Y(v));
            os << buf;
        }
        os << "\"/>\n";
        std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" fill=\"%s\">%s</text>\n",
                      W - mr + 8, mt + 14.0 * (s + 1), c, series[s].name.c_str());
        os << buf;
    }
    os << "</svg>\n";
}

// rates.svg, delays.svg and (with a plant) plant.svg under dir.
inline void plot_trace(const SimTrace& tr, const std::string& dir) {
    std::vector<double> t;
    for (const auto& r : tr.rows) t.push_back(r.t);
    std::vector<Series> rates, delays;
    std::size_t p = 0;
    for (std::size_t i = 0; i < tr.source_ids.size(); ++i)
        for (std::size_t j = 0; j < tr.paths_per_source[i]; ++j, ++p) {
            std::string name = "s" + std::to_string(tr.source_ids[i]) + " p" + std::to_string(j + 1);
            Series r{name, {}}, q{name, {}};
            for (const auto& row : tr.rows) {
                r.y.push_back(row.r[p]);
                q.y.push_back(row.q[p]);
            }
            rates.push_back(std::move(r));
            delays.push_back(std::move(q));
        }
    write_line_chart(dir + "/rates.svg", "path rates", t, rates);
    write_line_chart(dir + "/delays.svg", "path delays", t, delays);
    if (tr.has_plant) {
        Series x{"x(t)", {}};
        for (const auto& row : tr.rows) x.y.push_back(row.x_plant);
        write_line_chart(dir + "/plant.svg", "plant state", t, {x});
    }
}

}  // namespace wormsim
