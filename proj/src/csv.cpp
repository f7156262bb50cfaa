#include "cpd/csv.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cpd {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& column) {
  const std::string t = trim(cell);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size()) {
    throw std::runtime_error("csv: non-numeric cell in column '" + column +
                             "' at data row " + std::to_string(row + 1));
  }
  return value;
}

struct ParsedCsv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

ParsedCsv parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  ParsedCsv parsed;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("csv: '" + path + "' is empty");
  parsed.header = split_line(line);
  for (auto& h : parsed.header) h = trim(h);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != parsed.header.size()) {
      throw std::runtime_error(
          "csv: row " + std::to_string(parsed.rows.size() + 1) + " has " +
          std::to_string(fields.size()) + " fields, header has " +
          std::to_string(parsed.header.size()));
    }
    parsed.rows.push_back(std::move(fields));
  }
  return parsed;
}

std::size_t column_index(const ParsedCsv& csv, const std::string& name) {
  const auto it = std::find(csv.header.begin(), csv.header.end(), name);
  if (it == csv.header.end())
    throw std::runtime_error("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - csv.header.begin());
}

std::vector<std::size_t> feature_indices(const ParsedCsv& csv,
                                         const CsvSchema& schema,
                                         std::optional<std::size_t> label_idx) {
  std::vector<std::size_t> idx;
  if (schema.feature_columns.empty()) {
    for (std::size_t i = 0; i < csv.header.size(); ++i) {
      if (!label_idx || i != *label_idx) idx.push_back(i);
    }
  } else {
    for (const auto& name : schema.feature_columns)
      idx.push_back(column_index(csv, name));
  }
  if (idx.empty()) throw std::runtime_error("csv: no feature columns");
  return idx;
}

}  // namespace

LabeledData ingest_csv(const std::string& path, const CsvSchema& schema) {
  if (!schema.label_column)
    throw std::runtime_error("ingest_csv: schema needs a label column");
  const ParsedCsv csv = parse_file(path);
  const std::size_t label_idx = column_index(csv, *schema.label_column);
  const auto features = feature_indices(csv, schema, label_idx);

  LabeledData out;
  for (std::size_t f : features) out.feature_names.push_back(csv.header[f]);

  std::vector<std::size_t> bg_rows, tg_rows;
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    const double label = parse_cell(csv.rows[r][label_idx], r, *schema.label_column);
    if (label == 0.0) {
      bg_rows.push_back(r);
    } else if (label == 1.0) {
      tg_rows.push_back(r);
    } else {
      throw std::runtime_error("csv: unknown label '" +
                               trim(csv.rows[r][label_idx]) + "' at data row " +
                               std::to_string(r + 1) + " (expected 0 or 1)");
    }
  }

  const auto fill = [&](const std::vector<std::size_t>& which, Matrix& m) {
    m = Matrix(which.size(), features.size());
    for (std::size_t i = 0; i < which.size(); ++i) {
      for (std::size_t j = 0; j < features.size(); ++j) {
        m.at(i, j) = parse_cell(csv.rows[which[i]][features[j]], which[i],
                                csv.header[features[j]]);
      }
    }
  };
  fill(bg_rows, out.background);
  fill(tg_rows, out.target);
  return out;
}

Matrix read_csv_matrix(const std::string& path, const CsvSchema& schema) {
  const ParsedCsv csv = parse_file(path);
  std::optional<std::size_t> label_idx;
  if (schema.label_column) label_idx = column_index(csv, *schema.label_column);
  const auto features = feature_indices(csv, schema, label_idx);
  Matrix m(csv.rows.size(), features.size());
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    for (std::size_t j = 0; j < features.size(); ++j) {
      m.at(r, j) = parse_cell(csv.rows[r][features[j]], r, csv.header[features[j]]);
    }
  }
  return m;
}

void write_csv_matrix(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& column_names) {
  std::string out;
  out.reserve(m.rows * m.cols * 12);
  if (!column_names.empty()) {
    if (column_names.size() != m.cols)
      throw std::invalid_argument("write_csv_matrix: column name count mismatch");
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out += ',';
      out += column_names[j];
    }
  } else {
    for (std::size_t j = 0; j < m.cols; ++j) {
      if (j) out += ',';
      out += "x" + std::to_string(j);
    }
  }
  out += '\n';
  char buf[40];
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t j = 0; j < m.cols; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m.at(r, j));
      if (j) out += ',';
      out += buf;
    }
    out += '\n';
  }
  atomic_write_text(path, out);
}

void atomic_write_text(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() /
                       (target.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("csv: cannot write '" + tmp.string() + "'");
    out << content;
    if (!out) throw std::runtime_error("csv: write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

}  // namespace cpd
