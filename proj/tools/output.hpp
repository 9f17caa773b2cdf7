#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace got::cli {

// Fixed-format number rendering so reruns produce identical bytes.
std::string num(double v, int digits = 9);

class CsvWriter {
public:
    CsvWriter(std::uint64_t seed, std::vector<std::string> columns);
    // Values are appended in column order.
    CsvWriter& cell(double v);
    CsvWriter& cell(long long v);
    CsvWriter& cell(std::string_view v);
    void end_row();
    const std::string& str() const { return text_; }

private:
    std::string text_;
    std::size_t columns_;
    std::size_t filled_ = 0;
};

// Minimal SVG document in data coordinates with y pointing up.
class SvgCanvas {
public:
    SvgCanvas(double xmin, double ymin, double xmax, double ymax, double pixels_per_unit, std::uint64_t seed,
              std::string title);
    void rect(double x, double y, double w, double h, std::string_view fill);
    void polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke, double width,
                  double opacity = 1.0);
    void circle(double x, double y, double r, std::string_view fill);
    void text(double x, double y, std::string_view s, double size = 12.0);
    std::string str() const;

private:
    double px(double x) const;
    double py(double y) const;

    double xmin_, ymin_, xmax_, ymax_, scale_;
    std::string body_;
    std::string header_;
};

// Line chart with optional log axes; points are (x, y) series.
std::string line_chart(const std::vector<std::vector<std::pair<double, double>>>& series,
                       const std::vector<std::string>& labels, bool log_x, bool log_y, std::uint64_t seed,
                       const std::string& title, const std::string& x_label, const std::string& y_label);

}  // namespace got::cli
