#include "cpd/stacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace cpd {

namespace {

// Rejects non-integral products like alpha * w up front.
int exact_fraction(double ratio, int total, const char* what) {
  const double v = ratio * total;
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9 || r < 1.0)
    throw std::invalid_argument(std::string(what) + " must be a positive integer");
  return static_cast<int>(r);
}

}  // namespace

void WindowConfig::validate() const {
  if (window_length <= 0) throw std::invalid_argument("window_length must be positive");
  if (!(split_ratio > 0.0 && split_ratio < 1.0))
    throw std::invalid_argument("split_ratio must be in (0, 1)");
  if (stride <= 0 || stride % 2 != 0)
    throw std::invalid_argument("stride must be a positive even integer");
  if (stride > window_length)
    throw std::invalid_argument("stride must not exceed window_length");
  if (train_every <= 0) throw std::invalid_argument("train_every must be positive");
  if (burn_in < 0) throw std::invalid_argument("burn_in must be nonnegative");
  exact_fraction(split_ratio, window_length, "split_ratio * window_length");
  exact_fraction(1.0 - split_ratio, window_length, "(1 - split_ratio) * window_length");
  exact_fraction(split_ratio, stride, "split_ratio * stride");
  exact_fraction(1.0 - split_ratio, stride, "(1 - split_ratio) * stride");
}

int WindowConfig::train_capacity() const {
  return exact_fraction(split_ratio, window_length, "split_ratio * window_length");
}
int WindowConfig::test_capacity() const {
  return exact_fraction(1.0 - split_ratio, window_length,
                        "(1 - split_ratio) * window_length");
}
int WindowConfig::train_per_stride() const {
  return exact_fraction(split_ratio, stride, "split_ratio * stride");
}
int WindowConfig::test_per_stride() const {
  return exact_fraction(1.0 - split_ratio, stride, "(1 - split_ratio) * stride");
}

RowRing::RowRing(int capacity, int dim)
    : capacity_(capacity), dim_(dim),
      data_(static_cast<std::size_t>(capacity) * dim) {
  if (capacity <= 0 || dim <= 0)
    throw std::invalid_argument("RowRing: capacity and dim must be positive");
}

void RowRing::push(std::span<const double> row) {
  if (static_cast<int>(row.size()) != dim_)
    throw std::invalid_argument("RowRing: row dimension mismatch");
  int slot;
  if (size_ < capacity_) {
    slot = (head_ + size_) % capacity_;
    ++size_;
  } else {
    slot = head_;  // overwrite oldest
    head_ = (head_ + 1) % capacity_;
  }
  std::copy(row.begin(), row.end(),
            data_.begin() + static_cast<std::size_t>(slot) * dim_);
}

void RowRing::clear() {
  size_ = 0;
  head_ = 0;
}

std::span<const double> RowRing::row(int i) const {
  if (i < 0 || i >= size_) throw std::out_of_range("RowRing: index out of range");
  const int slot = (head_ + i) % capacity_;
  return {data_.data() + static_cast<std::size_t>(slot) * dim_,
          static_cast<std::size_t>(dim_)};
}

SlidingStacks::SlidingStacks(const WindowConfig& config, int dim)
    : train_stream(config.train_capacity(), dim),
      test_stream(config.test_capacity(), dim),
      train_ref(config.train_capacity(), dim),
      test_ref(config.test_capacity(), dim) {}

void SlidingStacks::clear() {
  train_stream.clear();
  test_stream.clear();
  train_ref.clear();
  test_ref.clear();
}

ReferencePool::ReferencePool(Matrix samples, std::uint64_t draw_seed)
    : samples_(std::move(samples)), draw_seed_(draw_seed) {
  if (samples_.rows == 0) throw std::invalid_argument("ReferencePool: empty pool");
}

void ReferencePool::draw(int count, std::mt19937_64& rng,
                         std::vector<int>& idx_out) const {
  if (count > size())
    throw std::invalid_argument("ReferencePool: draw larger than pool");
  idx_out.clear();
  std::uniform_int_distribution<int> pick(0, size() - 1);
  std::unordered_set<int> seen;
  seen.reserve(static_cast<std::size_t>(count) * 2);
  while (static_cast<int>(idx_out.size()) < count) {
    const int i = pick(rng);
    if (seen.insert(i).second) idx_out.push_back(i);
  }
}

void ingest_stride(SlidingStacks& stacks, const WindowConfig& config,
                   const Matrix& stream_batch, const ReferencePool& pool,
                   std::mt19937_64& ref_rng) {
  const int s = config.stride;
  if (static_cast<int>(stream_batch.rows) != s)
    throw std::invalid_argument("ingest_stride: batch size must equal stride");
  const int to_train = config.train_per_stride();

  for (int r = 0; r < s; ++r) {
    auto row = stream_batch.row(static_cast<std::size_t>(r));
    if (r < to_train) {
      stacks.train_stream.push(row);
    } else {
      stacks.test_stream.push(row);
    }
  }

  thread_local std::vector<int> idx;
  pool.draw(s, ref_rng, idx);
  for (int r = 0; r < s; ++r) {
    auto row = pool.row(idx[static_cast<std::size_t>(r)]);
    if (r < to_train) {
      stacks.train_ref.push(row);
    } else {
      stacks.test_ref.push(row);
    }
  }
}

}  // namespace cpd
