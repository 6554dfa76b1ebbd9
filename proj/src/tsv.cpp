#include "robkmr/tsv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "robkmr/error.hpp"

namespace robkmr {

namespace {

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> out;
  std::string_view rest(text);
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    out.push_back(strip_cr(rest.substr(0, nl)));
    if (nl == std::string_view::npos) break;
    rest.remove_prefix(nl + 1);
  }
  return out;
}

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line + 1) + ": ";
}

}  // namespace

std::vector<std::string> split_tabs(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

double parse_number(std::string_view field) {
  while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
  while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
  if (field.empty() || field == "NA") return std::numeric_limits<double>::quiet_NaN();
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::Parse, "not a number: '" + std::string(field) + "'");
  }
  return value;
}

std::string format_roundtrip(double value) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  (void)ec;
  return std::string(buf, ptr);
}

std::string format_sig(double value, int digits) {
  if (std::isnan(value)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, value);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(ErrorCode::Io, "read failed for '" + path + "'");
  return ss.str();
}

void write_text_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open '" + tmp + "' for writing");
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "write failed for '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename '" + tmp + "' to '" + path + "': " + ec.message());
}

LabeledMatrix read_labeled_tsv(const std::string& path) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0].empty()) throw Error(ErrorCode::Parse, path + ": missing header row");

  LabeledMatrix m;
  auto header = split_tabs(lines[0]);
  m.corner = header[0];
  m.col_ids.assign(header.begin() + 1, header.end());
  if (m.col_ids.empty()) throw Error(ErrorCode::Parse, path + ": header has no data columns");

  std::vector<std::vector<double>> rows;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    auto fields = split_tabs(lines[l]);
    if (fields.size() != m.col_ids.size() + 1) {
      throw Error(ErrorCode::Parse, where(path, l) + "expected " + std::to_string(m.col_ids.size() + 1) +
                                        " fields, found " + std::to_string(fields.size()));
    }
    m.row_ids.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(m.col_ids.size());
    for (std::size_t j = 1; j < fields.size(); ++j) {
      try {
        row.push_back(parse_number(fields[j]));
      } catch (const Error& e) {
        throw Error(ErrorCode::Parse, where(path, l) + e.what());
      }
    }
    rows.push_back(std::move(row));
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.col_ids.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

std::string format_labeled_tsv(const LabeledMatrix& m) {
  std::string out = m.corner;
  for (const auto& c : m.col_ids) out += '\t' + c;
  out += '\n';
  for (Eigen::Index i = 0; i < m.values.rows(); ++i) {
    out += m.row_ids[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < m.values.cols(); ++j) out += '\t' + format_roundtrip(m.values(i, j));
    out += '\n';
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_pairs_tsv(const std::string& path, std::string* header_second) {
  const std::string text = read_text(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::Parse, path + ": missing header row");
  const auto header = split_tabs(lines[0]);
  if (header.size() != 2) throw Error(ErrorCode::Parse, path + ": header must have exactly two fields");
  if (header_second) *header_second = header[1];
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t l = 1; l < lines.size(); ++l) {
    if (lines[l].empty()) continue;
    auto fields = split_tabs(lines[l]);
    if (fields.size() != 2) throw Error(ErrorCode::Parse, where(path, l) + "expected two fields");
    out.emplace_back(std::move(fields[0]), std::move(fields[1]));
  }
  return out;
}

Eigen::MatrixXd read_numeric_tsv(const std::string& path) {
  const std::string text = read_text(path);
  std::vector<std::vector<double>> rows;
  const auto lines = lines_of(text);
  for (std::size_t l = 0; l < lines.size(); ++l) {
    if (lines[l].empty() || lines[l].front() == '#') continue;
    std::vector<double> row;
    for (const auto& f : split_tabs(lines[l])) {
      double v = 0.0;
      try {
        v = parse_number(f);
      } catch (const Error& e) {
        throw Error(ErrorCode::Parse, where(path, l) + e.what());
      }
      if (std::isnan(v)) throw Error(ErrorCode::Parse, where(path, l) + "missing value");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::Parse, where(path, l) + "ragged row");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::Parse, path + ": no data rows");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

std::string format_numeric_tsv(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += '\t';
      out += format_roundtrip(m(i, j));
    }
    out += '\n';
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace robkmr
