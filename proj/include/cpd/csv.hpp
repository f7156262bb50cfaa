#pragma once

// CSV interchange: comma-separated, header row, UTF-8, one observation per
// row, optional integer label column. Export keeps 17 significant digits so a
// write/read round trip is exact.

#include <optional>
#include <string>
#include <vector>

#include "cpd/matrix.hpp"

namespace cpd {

struct CsvSchema {
  // Empty means every column except the label column, in file order.
  std::vector<std::string> feature_columns;
  std::optional<std::string> label_column;
};

struct LabeledData {
  Matrix background;  // label 0
  Matrix target;      // label 1
  std::vector<std::string> feature_names;
};

// Partition the rows of a labeled CSV by its binary label column. Schema
// errors (missing column, non-numeric cell, unknown label) report the
// offending row/column.
LabeledData ingest_csv(const std::string& path, const CsvSchema& schema);

// Unlabeled observation matrix, same parsing rules.
Matrix read_csv_matrix(const std::string& path, const CsvSchema& schema = {});

void write_csv_matrix(const std::string& path, const Matrix& m,
                      const std::vector<std::string>& column_names = {});

// Atomic replace: write to a temp file in the same directory, then rename.
void atomic_write_text(const std::string& path, const std::string& content);

}  // namespace cpd
