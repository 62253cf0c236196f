#pragma once

#include <optional>
#include <string>
#include <vector>

namespace fdgd::svg {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_y = false;
    std::optional<double> reference;  // horizontal dashed line
    std::string reference_label;
};

// Standalone SVG line chart. On a log axis nonpositive points are dropped.
// Output is a pure function of the inputs (fixed number formatting).
[[nodiscard]] std::string line_plot(const PlotSpec& spec, const std::vector<Series>& series);

[[nodiscard]] std::string escape(const std::string& text);

}  // namespace fdgd::svg
