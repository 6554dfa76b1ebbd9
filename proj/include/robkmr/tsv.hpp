#pragma once

// Tab-separated text I/O. Missing values ("NA" or an empty field) are read
// as quiet NaN. Numbers are written in the shortest form that round-trips.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace robkmr {

/// A matrix with a header row and a leading label column.
struct LabeledMatrix {
  std::string corner;  ///< first header field, e.g. "feature_id"
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  Eigen::MatrixXd values;
};

std::vector<std::string> split_tabs(std::string_view line);

/// Parses one numeric field; "NA" and "" give NaN. Throws Parse otherwise.
double parse_number(std::string_view field);

/// Shortest decimal representation that parses back to the same double.
std::string format_roundtrip(double value);

/// printf("%.*g") with NaN written as "NA".
std::string format_sig(double value, int digits = 6);

std::string read_text(const std::string& path);

/// Writes to a temporary file in the same directory, then renames.
void write_text_atomic(const std::string& path, const std::string& content);

LabeledMatrix read_labeled_tsv(const std::string& path);
std::string format_labeled_tsv(const LabeledMatrix& m);

/// Two-column string table with a header row; returns the data rows.
std::vector<std::pair<std::string, std::string>> read_pairs_tsv(const std::string& path,
                                                                 std::string* header_second = nullptr);

/// Headerless numeric matrix. Blank lines and lines starting with '#' are
/// skipped; every row must have the same width.
Eigen::MatrixXd read_numeric_tsv(const std::string& path);
std::string format_numeric_tsv(const Eigen::MatrixXd& m);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace robkmr
