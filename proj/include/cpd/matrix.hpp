#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace cpd {

// Row-major dense matrix of doubles. Rows are observations throughout.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * cols, cols};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }

  bool empty() const { return rows == 0 || cols == 0; }
};

// Ordered stream of d-dimensional observations. change_point, when set, is the
// number of leading rows drawn from the pre-change distribution.
struct ObservationSequence {
  Matrix data;
  std::optional<std::int64_t> change_point;
  std::uint64_t seed = 0;

  std::int64_t length() const { return static_cast<std::int64_t>(data.rows); }
  int dim() const { return static_cast<int>(data.cols); }
};

}  // namespace cpd
