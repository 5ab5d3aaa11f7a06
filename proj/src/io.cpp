#include "eimlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace eimlab {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace

std::string csv_to_string(const CsvTable& table) {
    std::ostringstream out;
    for (std::size_t i = 0; i < table.header.size(); ++i)
        out << (i ? "," : "") << csv_field(table.header[i]);
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw std::invalid_argument("csv_to_string: row width mismatch");
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << csv_field(row[i]);
        out << '\n';
    }
    return out.str();
}

void write_csv(const std::string& path, const CsvTable& table) {
    write_text_atomic(path, csv_to_string(table));
}

namespace {

unsigned char to_byte(double v) {
    const double clamped = std::min(1.0, std::max(0.0, v));
    return static_cast<unsigned char>(std::lround(clamped * 255.0));
}

} // namespace

void write_ppm(const std::string& path, const Raster& raster) {
    const long rows = raster[0].rows(), cols = raster[0].cols();
    std::string data;
    data.reserve(static_cast<std::size_t>(rows * cols * 3) + 32);
    data += "P6\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j)
            for (int ch = 0; ch < 3; ++ch)
                data += static_cast<char>(to_byte(raster[ch](i, j)));
    write_text_atomic(path, data);
}

void write_pgm(const std::string& path, const Eigen::MatrixXd& gray) {
    const long rows = gray.rows(), cols = gray.cols();
    std::string data;
    data.reserve(static_cast<std::size_t>(rows * cols) + 32);
    data += "P5\n" + std::to_string(cols) + " " + std::to_string(rows) + "\n255\n";
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j)
            data += static_cast<char>(to_byte(gray(i, j)));
    write_text_atomic(path, data);
}

namespace {

constexpr double kW = 640.0, kH = 400.0;
constexpr double kLeft = 60.0, kRight = 20.0, kTop = 40.0, kBottom = 40.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b"};

std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void span_of(const std::vector<double>& vals, double& lo, double& hi) {
    for (double v : vals) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
}

std::string svg_header(const std::string& title) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 640 400\">\n";
    out << "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
    out << "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"14\">"
        << title << "</text>\n";
    return out.str();
}

} // namespace

void write_line_chart(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series) {
    if (series.empty())
        throw std::invalid_argument("write_line_chart: no series");
    double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            throw std::invalid_argument("write_line_chart: bad series " + s.label);
        span_of(s.x, xlo, xhi);
        span_of(s.y, ylo, yhi);
    }
    if (xhi <= xlo)
        xhi = xlo + 1.0;
    if (yhi <= ylo)
        yhi = ylo + 1.0;

    auto px = [&](double x) { return kLeft + (x - xlo) / (xhi - xlo) * (kW - kLeft - kRight); };
    auto py = [&](double y) {
        return kH - kBottom - (y - ylo) / (yhi - ylo) * (kH - kTop - kBottom);
    };

    std::ostringstream out;
    out << svg_header(title);
    out << "<rect x=\"" << svg_num(kLeft) << "\" y=\"" << svg_num(kTop) << "\" width=\""
        << svg_num(kW - kLeft - kRight) << "\" height=\"" << svg_num(kH - kTop - kBottom)
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << svg_num(kLeft) << "\" y=\"" << svg_num(kH - 12.0)
        << "\" font-family=\"monospace\" font-size=\"11\">" << format_double(xlo)
        << "</text>\n";
    out << "<text x=\"" << svg_num(kW - kRight) << "\" y=\"" << svg_num(kH - 12.0)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << format_double(xhi) << "</text>\n";
    out << "<text x=\"" << svg_num(kLeft - 6.0) << "\" y=\"" << svg_num(kH - kBottom)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << format_double(ylo) << "</text>\n";
    out << "<text x=\"" << svg_num(kLeft - 6.0) << "\" y=\"" << svg_num(kTop + 4.0)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << format_double(yhi) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 6];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << (i ? " " : "") << svg_num(px(s.x[i])) << "," << svg_num(py(s.y[i]));
        out << "\"/>\n";
        out << "<text x=\"" << svg_num(kLeft + 8.0) << "\" y=\""
            << svg_num(kTop + 16.0 + 14.0 * static_cast<double>(si)) << "\" fill=\"" << color
            << "\" font-family=\"monospace\" font-size=\"11\">" << s.label << "</text>\n";
    }
    out << "</svg>\n";
    write_text_atomic(path, out.str());
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& labels, const std::vector<double>& values) {
    if (labels.size() != values.size() || labels.empty())
        throw std::invalid_argument("write_bar_chart: label/value mismatch");
    double ylo = 0.0, yhi = -1e300;
    span_of(values, ylo, yhi);
    if (yhi <= ylo)
        yhi = ylo + 1.0;

    const double span = kW - kLeft - kRight;
    const double slot = span / static_cast<double>(labels.size());
    auto py = [&](double y) {
        return kH - kBottom - (y - ylo) / (yhi - ylo) * (kH - kTop - kBottom);
    };

    std::ostringstream out;
    out << svg_header(title);
    out << "<line x1=\"" << svg_num(kLeft) << "\" y1=\"" << svg_num(kH - kBottom) << "\" x2=\""
        << svg_num(kW - kRight) << "\" y2=\"" << svg_num(kH - kBottom)
        << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << svg_num(kLeft - 6.0) << "\" y=\"" << svg_num(kTop + 4.0)
        << "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">"
        << format_double(yhi) << "</text>\n";
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double x0 = kLeft + slot * static_cast<double>(i) + 0.15 * slot;
        const double y0 = py(values[i]);
        out << "<rect x=\"" << svg_num(x0) << "\" y=\"" << svg_num(y0) << "\" width=\""
            << svg_num(0.7 * slot) << "\" height=\"" << svg_num(kH - kBottom - y0)
            << "\" fill=\"" << kPalette[i % 6] << "\"/>\n";
        out << "<text x=\"" << svg_num(x0 + 0.35 * slot) << "\" y=\"" << svg_num(kH - 12.0)
            << "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">"
            << labels[i] << "</text>\n";
    }
    out << "</svg>\n";
    write_text_atomic(path, out.str());
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

void write_text_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw std::runtime_error("write_text_atomic: cannot open " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out)
            throw std::runtime_error("write_text_atomic: short write to " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("read_text: cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

} // namespace eimlab
