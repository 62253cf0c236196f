#include "fdgd/svg.hpp"

#include "fdgd/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace fdgd::svg {

namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 440.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

constexpr std::array<const char*, 10> kPalette = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                                  "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void add(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (!(hi > lo)) {
            const double w = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
            lo -= w;
            hi += w;
        }
    }
};

}  // namespace

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series) {
    auto ty = [&](double v) { return spec.log_y ? std::log10(v) : v; };
    auto usable = [&](double v) { return std::isfinite(v) && (!spec.log_y || v > 0.0); };

    Range xr;
    Range yr;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) {
            throw DimensionError("svg: series x and y lengths differ");
        }
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (usable(s.y[i]) && std::isfinite(s.x[i])) {
                xr.add(s.x[i]);
                yr.add(ty(s.y[i]));
            }
        }
    }
    if (spec.reference && usable(*spec.reference)) {
        yr.add(ty(*spec.reference));
    }
    if (!(xr.hi >= xr.lo)) {
        xr = Range{0.0, 1.0};
    }
    if (!(yr.hi >= yr.lo)) {
        yr = Range{0.0, 1.0};
    }
    xr.pad();
    yr.pad();
    if (spec.log_y) {
        yr.lo = std::floor(yr.lo);
        yr.hi = std::ceil(yr.hi);
        if (yr.hi == yr.lo) {
            yr.hi += 1.0;
        }
    }

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double v) { return kTop + ph - (v - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
       << "\" viewBox=\"0 0 " << num(kWidth) << " " << num(kHeight) << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << num(kWidth) << "\" height=\"" << num(kHeight)
       << "\" fill=\"white\"/>\n";
    os << "<text x=\"" << num(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"16\">"
       << escape(spec.title) << "</text>\n";
    os << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\""
       << num(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int t = 0; t <= 4; ++t) {
        const double xv = xr.lo + (xr.hi - xr.lo) * t / 4.0;
        os << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(kTop + ph + 18)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << tick(xv) << "</text>\n";
    }
    if (spec.log_y) {
        for (double e = yr.lo; e <= yr.hi + 0.5; e += 1.0) {
            os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(py(e)) << "\" x2=\"" << num(kLeft + pw)
               << "\" y2=\"" << num(py(e)) << "\" stroke=\"#dddddd\"/>\n";
            os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(e) + 4)
               << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">1e" << static_cast<int>(e)
               << "</text>\n";
        }
    } else {
        for (int t = 0; t <= 4; ++t) {
            const double yv = yr.lo + (yr.hi - yr.lo) * t / 4.0;
            os << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(py(yv) + 4)
               << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick(yv) << "</text>\n";
        }
    }
    os << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 16)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(spec.x_label)
       << "</text>\n";
    os << "<text x=\"18\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"13\" transform=\"rotate(-90 18 "
       << num(kTop + ph / 2) << ")\">" << escape(spec.y_label) << "</text>\n";

    if (spec.reference && usable(*spec.reference)) {
        const double yv = py(ty(*spec.reference));
        os << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(yv) << "\" x2=\"" << num(kLeft + pw) << "\" y2=\""
           << num(yv) << "\" stroke=\"black\" stroke-dasharray=\"6,4\"/>\n";
        os << "<text x=\"" << num(kLeft + pw + 8) << "\" y=\"" << num(yv + 4)
           << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(spec.reference_label) << "</text>\n";
    }

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kPalette[s % kPalette.size()];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (!usable(series[s].y[i])) {
                continue;
            }
            os << (first ? "" : " ") << num(px(series[s].x[i])) << "," << num(py(ty(series[s].y[i])));
            first = false;
        }
        os << "\"/>\n";
        if (s < 12) {
            const double ly = kTop + 12 + 16.0 * static_cast<double>(s);
            os << "<line x1=\"" << num(kLeft + pw + 8) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(kLeft + pw + 28)
               << "\" y2=\"" << num(ly) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
            os << "<text x=\"" << num(kLeft + pw + 32) << "\" y=\"" << num(ly + 4)
               << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(series[s].label) << "</text>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace fdgd::svg
