#include "turb/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "turb/errors.hpp"

namespace turb::plot {

namespace {

constexpr double kW = 760, kH = 520;
constexpr double kLeft = 86, kRight = 30, kTop = 48, kBottom = 64;

const char* kPalette[6] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#8c564b"};

std::string num(double x) {
    char b[40];
    std::snprintf(b, sizeof b, "%.6g", x);
    return b;
}

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void take(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (lo > hi) {
            lo = 0;
            hi = 1;
        }
        if (lo == hi) {
            lo -= 1;
            hi += 1;
        }
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
};

// largest of 1/2/5 * 10^k not above the raw step
double nice_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {5.0, 2.0, 1.0})
        if (m * mag <= raw + 1e-12 * mag) return m * mag;
    return mag;
}

} // namespace

void write_svg(const std::string& path, const Figure& fig) {
    Range rx, ry;
    for (const auto& s : fig.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            rx.take(s.x[i]);
            ry.take(s.y[i]);
            if (i < s.yerr.size() && std::isfinite(s.y[i])) {
                ry.take(s.y[i] - s.yerr[i]);
                ry.take(s.y[i] + s.yerr[i]);
            }
        }
    rx.finish();
    ry.finish();

    const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
    auto X = [&](double v) {
        return kLeft + (v - rx.lo) / (rx.hi - rx.lo) * pw;
    };
    auto Y = [&](double v) {
        return kTop + ph - (v - ry.lo) / (ry.hi - ry.lo) * ph;
    };

    std::ofstream f(path);
    if (!f) throw FormatError("cannot open " + path + " for writing");
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW
      << "\" height=\"" << kH << "\" viewBox=\"0 0 " << kW << " " << kH
      << "\">\n";
    f << "<rect width=\"" << kW << "\" height=\"" << kH
      << "\" fill=\"white\"/>\n";
    f << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";

    f << "<g font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\">\n";
    const double sx = nice_step(rx.hi - rx.lo, 6);
    for (double t = std::ceil(rx.lo / sx) * sx; t <= rx.hi + 1e-9 * sx;
         t += sx) {
        const double px = X(t);
        f << "<line x1=\"" << num(px) << "\" y1=\"" << kTop + ph << "\" x2=\""
          << num(px) << "\" y2=\"" << kTop + ph + 5
          << "\" stroke=\"#333\"/>\n";
        f << "<line x1=\"" << num(px) << "\" y1=\"" << kTop << "\" x2=\""
          << num(px) << "\" y2=\"" << kTop + ph
          << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
        f << "<text x=\"" << num(px) << "\" y=\"" << kTop + ph + 20
          << "\" text-anchor=\"middle\">" << num(t == 0 ? 0 : t)
          << "</text>\n";
    }
    const double sy = nice_step(ry.hi - ry.lo, 6);
    for (double t = std::ceil(ry.lo / sy) * sy; t <= ry.hi + 1e-9 * sy;
         t += sy) {
        const double py = Y(t);
        f << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << num(py) << "\" x2=\""
          << kLeft << "\" y2=\"" << num(py) << "\" stroke=\"#333\"/>\n";
        f << "<line x1=\"" << kLeft << "\" y1=\"" << num(py) << "\" x2=\""
          << kLeft + pw << "\" y2=\"" << num(py)
          << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
        f << "<text x=\"" << kLeft - 9 << "\" y=\"" << num(py + 4)
          << "\" text-anchor=\"end\">" << num(t == 0 ? 0 : t) << "</text>\n";
    }
    f << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 16
      << "\" text-anchor=\"middle\">" << esc(fig.xlabel) << "</text>\n";
    f << "<text x=\"20\" y=\"" << kTop + ph / 2
      << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 "
      << kTop + ph / 2 << ")\">" << esc(fig.ylabel) << "</text>\n";
    f << "<text x=\"" << kW / 2
      << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << esc(fig.title) << "</text>\n";
    f << "</g>\n";

    for (std::size_t si = 0; si < fig.series.size(); ++si) {
        const auto& s = fig.series[si];
        const std::string color =
            s.color.empty() ? kPalette[si % 6] : s.color;
        f << "<g stroke=\"" << color << "\" fill=\"none\" stroke-width=\"1.6\""
          << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << ">\n";
        bool open = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const bool ok = std::isfinite(s.x[i]) && std::isfinite(s.y[i]);
            if (ok && !open) {
                f << "<polyline points=\"";
                open = true;
            }
            if (ok) f << num(X(s.x[i])) << "," << num(Y(s.y[i])) << " ";
            if (!ok && open) {
                f << "\"/>\n";
                open = false;
            }
        }
        if (open) f << "\"/>\n";
        for (std::size_t i = 0; i < s.yerr.size() && i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || s.yerr[i] <= 0) continue;
            const double px = X(s.x[i]);
            f << "<line x1=\"" << num(px) << "\" y1=\""
              << num(Y(s.y[i] - s.yerr[i])) << "\" x2=\"" << num(px)
              << "\" y2=\"" << num(Y(s.y[i] + s.yerr[i])) << "\"/>\n";
        }
        f << "</g>\n";
        if (s.markers) {
            f << "<g fill=\"" << color << "\">\n";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
                    f << "<circle cx=\"" << num(X(s.x[i])) << "\" cy=\""
                      << num(Y(s.y[i])) << "\" r=\"2.6\"/>\n";
            f << "</g>\n";
        }
    }

    double ly = kTop + 16;
    f << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t si = 0; si < fig.series.size(); ++si) {
        const auto& s = fig.series[si];
        if (s.label.empty()) continue;
        const std::string color =
            s.color.empty() ? kPalette[si % 6] : s.color;
        const double lx = kLeft + pw - 170;
        f << "<line x1=\"" << lx << "\" y1=\"" << ly - 4 << "\" x2=\""
          << lx + 26 << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color
          << "\" stroke-width=\"2\""
          << (s.dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
        f << "<text x=\"" << lx + 32 << "\" y=\"" << ly
          << "\" fill=\"#222\">" << esc(s.label) << "</text>\n";
        ly += 18;
    }
    f << "</g>\n</svg>\n";
    if (!f) throw FormatError("short write to " + path);
}

} // namespace turb::plot
