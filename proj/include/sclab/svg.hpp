#pragma once

#include <string>
#include <vector>

namespace sclab::svg {

struct Series {
    std::string label;
    std::vector<double> values;  // one per category
    std::vector<double> errors;  // optional, same length (std error bars)
};

// Grouped vertical bar chart written as a standalone SVG file. Output is
// plain text assembled in fixed order, so identical inputs give identical
// bytes.
struct BarChart {
    std::string title;
    std::string y_label;
    std::vector<std::string> categories;
    std::vector<Series> series;

    void write(const std::string& path) const;
};

}  // namespace sclab::svg
