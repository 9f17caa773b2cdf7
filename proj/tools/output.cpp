#include "output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace got::cli {

std::string num(double v, int digits) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

namespace {

std::string escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

}  // namespace

CsvWriter::CsvWriter(std::uint64_t seed, std::vector<std::string> columns) : columns_(columns.size()) {
    text_ = "# seed=" + std::to_string(seed) + "\n";
    for (std::size_t i = 0; i < columns.size(); ++i) text_ += (i ? "," : "") + columns[i];
    text_ += "\n";
}

CsvWriter& CsvWriter::cell(double v) { return cell(std::string_view(num(v))); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::string_view(std::to_string(v))); }

CsvWriter& CsvWriter::cell(std::string_view v) {
    if (filled_ == columns_) throw std::logic_error("too many CSV cells in a row");
    if (filled_++) text_ += ",";
    text_ += v;
    return *this;
}

void CsvWriter::end_row() {
    if (filled_ != columns_) throw std::logic_error("incomplete CSV row");
    text_ += "\n";
    filled_ = 0;
}

SvgCanvas::SvgCanvas(double xmin, double ymin, double xmax, double ymax, double pixels_per_unit, std::uint64_t seed,
                     std::string title)
    : xmin_(xmin), ymin_(ymin), xmax_(xmax), ymax_(ymax), scale_(pixels_per_unit) {
    const double w = (xmax - xmin) * scale_;
    const double h = (ymax - ymin) * scale_;
    header_ = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w, 6) + "\" height=\"" + num(h, 6) +
              "\" viewBox=\"0 0 " + num(w, 6) + " " + num(h, 6) + "\">\n<!-- seed=" + std::to_string(seed) +
              " -->\n<title>" + escape(title) + "</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

double SvgCanvas::px(double x) const { return (x - xmin_) * scale_; }
double SvgCanvas::py(double y) const { return (ymax_ - y) * scale_; }

void SvgCanvas::rect(double x, double y, double w, double h, std::string_view fill) {
    body_ += "<rect x=\"" + num(px(x), 6) + "\" y=\"" + num(py(y + h), 6) + "\" width=\"" + num(w * scale_, 6) +
             "\" height=\"" + num(h * scale_, 6) + "\" fill=\"" + std::string(fill) + "\"/>\n";
}

void SvgCanvas::polyline(const std::vector<std::pair<double, double>>& pts, std::string_view stroke, double width,
                         double opacity) {
    body_ += "<polyline fill=\"none\" stroke=\"" + std::string(stroke) + "\" stroke-width=\"" + num(width, 4) +
             "\" stroke-opacity=\"" + num(opacity, 3) + "\" points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i)
        body_ += (i ? " " : "") + num(px(pts[i].first), 6) + "," + num(py(pts[i].second), 6);
    body_ += "\"/>\n";
}

void SvgCanvas::circle(double x, double y, double r, std::string_view fill) {
    body_ += "<circle cx=\"" + num(px(x), 6) + "\" cy=\"" + num(py(y), 6) + "\" r=\"" + num(r, 4) + "\" fill=\"" +
             std::string(fill) + "\"/>\n";
}

void SvgCanvas::text(double x, double y, std::string_view s, double size) {
    body_ += "<text x=\"" + num(px(x), 6) + "\" y=\"" + num(py(y), 6) + "\" font-family=\"sans-serif\" font-size=\"" +
             num(size, 4) + "\">" + escape(s) + "</text>\n";
}

std::string SvgCanvas::str() const { return header_ + body_ + "</svg>\n"; }

std::string line_chart(const std::vector<std::vector<std::pair<double, double>>>& series,
                       const std::vector<std::string>& labels, bool log_x, bool log_y, std::uint64_t seed,
                       const std::string& title, const std::string& x_label, const std::string& y_label) {
    auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (auto [x, y] : s) {
            if ((log_x && !(x > 0)) || (log_y && !(y > 0)) || !std::isfinite(x) || !std::isfinite(y)) continue;
            x0 = std::min(x0, tx(x));
            x1 = std::max(x1, tx(x));
            y0 = std::min(y0, ty(y));
            y1 = std::max(y1, ty(y));
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
    const double padx = 0.08 * (x1 - x0), pady = 0.08 * (y1 - y0);
    x0 -= padx;
    x1 += padx;
    y0 -= pady;
    y1 += pady;
    // Plot in a unit box scaled to 480 x 320 pixels, with margins for labels.
    const double W = 480, H = 320, M = 60;
    auto X = [&](double v) { return M + (tx(v) - x0) / (x1 - x0) * W; };
    auto Y = [&](double v) { return M + H - (ty(v) - y0) / (y1 - y0) * H; };

    std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(W + 2 * M, 6) + "\" height=\"" +
                      num(H + 2 * M, 6) + "\">\n<!-- seed=" + std::to_string(seed) + " -->\n<title>" + escape(title) +
                      "</title>\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<rect x=\"" + num(M, 6) + "\" y=\"" + num(M, 6) + "\" width=\"" + num(W, 6) + "\" height=\"" + num(H, 6) +
           "\" fill=\"none\" stroke=\"black\"/>\n";
    out += "<text x=\"" + num(M + W / 2, 6) + "\" y=\"" + num(M + H + 40, 6) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + escape(x_label) + "</text>\n";
    out += "<text x=\"16\" y=\"" + num(M + H / 2, 6) + "\" transform=\"rotate(-90 16 " + num(M + H / 2, 6) +
           ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + escape(y_label) + "</text>\n";
    out += "<text x=\"" + num(M + W / 2, 6) + "\" y=\"30\" text-anchor=\"middle\" font-family=\"sans-serif\" "
           "font-size=\"15\">" + escape(title) + "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        const double vx = log_x ? std::pow(10.0, fx) : fx, vy = log_y ? std::pow(10.0, fy) : fy;
        out += "<text x=\"" + num(M + W * k / 4.0, 6) + "\" y=\"" + num(M + H + 18, 6) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" + num(vx, 3) + "</text>\n";
        out += "<text x=\"" + num(M - 6, 6) + "\" y=\"" + num(M + H - H * k / 4.0 + 3, 6) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + num(vy, 3) + "</text>\n";
    }
    static const char* colours[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* c = colours[s % 5];
        std::string pts;
        for (auto [x, y] : series[s]) {
            if ((log_x && !(x > 0)) || (log_y && !(y > 0)) || !std::isfinite(x) || !std::isfinite(y)) continue;
            pts += (pts.empty() ? "" : " ") + num(X(x), 6) + "," + num(Y(y), 6);
            out += "<circle cx=\"" + num(X(x), 6) + "\" cy=\"" + num(Y(y), 6) + "\" r=\"3\" fill=\"" + c + "\"/>\n";
        }
        out += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.5\" points=\"" + pts +
               "\"/>\n";
        if (s < labels.size())
            out += "<text x=\"" + num(M + W - 8, 6) + "\" y=\"" + num(M + 16 + 14.0 * s, 6) +
                   "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + c + "\">" +
                   escape(labels[s]) + "</text>\n";
    }
    return out + "</svg>\n";
}

}  // namespace got::cli
