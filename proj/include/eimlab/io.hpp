#ifndef EIMLAB_IO_HPP
#define EIMLAB_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "eimlab/scene.hpp"

namespace eimlab {

std::string format_double(double v); // shortest round-trippable, %.12g

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

// RFC-4180 quoting, LF line endings, '.' decimal point.
std::string csv_to_string(const CsvTable& table);
void write_csv(const std::string& path, const CsvTable& table);

void write_ppm(const std::string& path, const Raster& raster);        // binary P6
void write_pgm(const std::string& path, const Eigen::MatrixXd& gray); // binary P5

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Fixed-viewBox polyline chart; output bytes depend only on the data.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::vector<PlotSeries>& series);

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::vector<std::string>& labels, const std::vector<double>& values);

std::uint64_t fnv1a(const std::string& bytes);

// write-then-rename so readers never observe a partial file
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

} // namespace eimlab

#endif
