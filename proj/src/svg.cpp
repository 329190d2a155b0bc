#include "sclab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sclab/common.hpp"

namespace sclab::svg {

namespace {

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759",
                          "#76b7b2", "#edc948", "#b07aa1", "#9c755f"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

void BarChart::write(const std::string& path) const {
    if (categories.empty() || series.empty()) throw DataError("bar chart needs data");
    for (const auto& s : series)
        if (s.values.size() != categories.size())
            throw DataError("series '" + s.label + "' length mismatch");

    const double w = 720, h = 420;
    const double ml = 70, mr = 20, mt = 48, mb = 64;
    const double pw = w - ml - mr, ph = h - mt - mb;

    double vmax = 0.0;
    for (const auto& s : series)
        for (size_t i = 0; i < s.values.size(); ++i) {
            double e = i < s.errors.size() ? s.errors[i] : 0.0;
            vmax = std::max(vmax, s.values[i] + e);
        }
    if (vmax <= 0.0) vmax = 1.0;
    // round the axis up to a tidy step
    double step = std::pow(10.0, std::floor(std::log10(vmax)));
    if (vmax / step > 5.0) step *= 2.0;
    if (vmax / step < 2.0) step /= 2.0;
    double ymax = step * std::ceil(vmax / step + 0.25);

    auto ypix = [&](double v) { return mt + ph * (1.0 - v / ymax); };

    std::ofstream f(path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
    f << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    f << "<text x=\"" << num(w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">"
      << title << "</text>\n";

    for (double v = 0.0; v <= ymax + 1e-12; v += step) {
        double y = ypix(v);
        f << "<line x1=\"" << num(ml) << "\" y1=\"" << num(y) << "\" x2=\"" << num(w - mr)
          << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\"/>\n";
        f << "<text x=\"" << num(ml - 8) << "\" y=\"" << num(y + 4)
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick_label(v)
          << "</text>\n";
    }
    f << "<text x=\"16\" y=\"" << num(mt + ph / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
      << num(mt + ph / 2) << ")\">" << y_label << "</text>\n";

    const size_t ncat = categories.size(), nser = series.size();
    const double slot = pw / static_cast<double>(ncat);
    const double group_w = slot * 0.8;
    const double bar_w = group_w / static_cast<double>(nser);
    for (size_t c = 0; c < ncat; ++c) {
        double gx = ml + slot * static_cast<double>(c) + (slot - group_w) / 2;
        for (size_t s = 0; s < nser; ++s) {
            double v = series[s].values[c];
            double x = gx + bar_w * static_cast<double>(s);
            double y = ypix(std::max(v, 0.0));
            double bh = ph + mt - y;
            f << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(bar_w * 0.92)
              << "\" height=\"" << num(std::max(bh, 0.0)) << "\" fill=\""
              << kPalette[s % 8] << "\"/>\n";
            if (c < series[s].errors.size() && series[s].errors[c] > 0.0) {
                double e = series[s].errors[c];
                double cx = x + bar_w * 0.46;
                f << "<line x1=\"" << num(cx) << "\" y1=\"" << num(ypix(v - e)) << "\" x2=\""
                  << num(cx) << "\" y2=\"" << num(ypix(v + e)) << "\" stroke=\"#333333\"/>\n";
                for (double end : {v - e, v + e})
                    f << "<line x1=\"" << num(cx - 3) << "\" y1=\"" << num(ypix(end)) << "\" x2=\""
                      << num(cx + 3) << "\" y2=\"" << num(ypix(end)) << "\" stroke=\"#333333\"/>\n";
            }
        }
        f << "<text x=\"" << num(gx + group_w / 2) << "\" y=\"" << num(mt + ph + 18)
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
          << categories[c] << "</text>\n";
    }

    double lx = ml, ly = h - 18;
    for (size_t s = 0; s < nser; ++s) {
        f << "<rect x=\"" << num(lx) << "\" y=\"" << num(ly - 10) << "\" width=\"12\" height=\"12\" fill=\""
          << kPalette[s % 8] << "\"/>\n";
        f << "<text x=\"" << num(lx + 16) << "\" y=\"" << num(ly)
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].label << "</text>\n";
        lx += 18.0 + 8.0 * static_cast<double>(series[s].label.size()) + 24.0;
    }
    f << "<line x1=\"" << num(ml) << "\" y1=\"" << num(mt + ph) << "\" x2=\"" << num(w - mr)
      << "\" y2=\"" << num(mt + ph) << "\" stroke=\"#333333\"/>\n";
    f << "</svg>\n";
}

}  // namespace sclab::svg
