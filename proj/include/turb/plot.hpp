#pragma once

#include <string>
#include <vector>

// Line plots emitted as self-contained SVG, no external renderer involved.

namespace turb::plot {

struct Series {
    std::string label;
    std::string color;          // empty picks from a fixed palette
    std::vector<double> x, y;   // NaN y breaks the line
    std::vector<double> yerr;   // optional error bars, same length as y
    bool dashed = false;
    bool markers = true;
};

struct Figure {
    std::string title, xlabel, ylabel;
    std::vector<Series> series;
};

/// Throws FormatError when the file cannot be written.
void write_svg(const std::string& path, const Figure& fig);

} // namespace turb::plot
