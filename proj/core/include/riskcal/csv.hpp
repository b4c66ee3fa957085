#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace riskcal {

// Shortest round-trip decimal form ("0.7", "14", "1e-09").
std::string format_number(double x);

std::vector<std::string> split_csv_line(std::string_view line);
// Non-empty lines of a text file/string, CR stripped.
std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<std::string> split_lines(std::string_view text);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

double parse_double(std::string_view token);

// Header-free square matrix.
Eigen::MatrixXd parse_matrix_csv(std::string_view text);
std::string matrix_to_csv(const Eigen::MatrixXd& m);

// Newline-separated reals.
std::vector<double> load_real_sequence(const std::filesystem::path& path);

}  // namespace riskcal
