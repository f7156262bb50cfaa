#pragma once

// Sliding training/testing stacks for the windowed network detectors. Stream
// and reference data are buffered in parallel: each stride contributes
// alpha*s observations to the training side and (1-alpha)*s to the testing
// side, with matching fresh draws from the reference pool, and the oldest
// entries are evicted once a buffer is at capacity.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "cpd/matrix.hpp"

namespace cpd {

struct WindowConfig {
  int window_length = 200;   // w, observations
  double split_ratio = 0.5;  // alpha, training fraction
  int stride = 10;           // s, observations per statistic, even
  int train_every = 1;       // strides between training passes
  int burn_in = 0;           // warm-up observations drawn from the pool

  void validate() const;  // throws std::invalid_argument

  int train_capacity() const;   // alpha * w
  int test_capacity() const;    // (1 - alpha) * w
  int train_per_stride() const; // alpha * s
  int test_per_stride() const;  // (1 - alpha) * s
};

// Fixed-capacity ring of d-dimensional rows; oldest evicted first.
class RowRing {
 public:
  RowRing(int capacity, int dim);

  void push(std::span<const double> row);
  void clear();
  int size() const { return size_; }
  int capacity() const { return capacity_; }
  bool full() const { return size_ == capacity_; }
  // i = 0 is the oldest retained row.
  std::span<const double> row(int i) const;

 private:
  int capacity_;
  int dim_;
  int size_ = 0;
  int head_ = 0;  // slot of the oldest row
  std::vector<double> data_;
};

struct SlidingStacks {
  RowRing train_stream;
  RowRing test_stream;
  RowRing train_ref;
  RowRing test_ref;

  SlidingStacks(const WindowConfig& config, int dim);

  bool train_full() const { return train_stream.full() && train_ref.full(); }
  bool test_full() const { return test_stream.full() && test_ref.full(); }
  void clear();
};

// Pre-change observations available in abundance; draws are without
// replacement within one request and independent across requests.
class ReferencePool {
 public:
  ReferencePool(Matrix samples, std::uint64_t draw_seed);

  int size() const { return static_cast<int>(samples_.rows); }
  int dim() const { return static_cast<int>(samples_.cols); }
  std::uint64_t draw_seed() const { return draw_seed_; }
  std::span<const double> row(int i) const { return samples_.row(i); }
  const Matrix& samples() const { return samples_; }

  // `count` distinct row indices into idx_out.
  void draw(int count, std::mt19937_64& rng, std::vector<int>& idx_out) const;

 private:
  Matrix samples_;
  std::uint64_t draw_seed_;
};

// One stride of stream data into the stacks plus matching reference draws.
void ingest_stride(SlidingStacks& stacks, const WindowConfig& config,
                   const Matrix& stream_batch, const ReferencePool& pool,
                   std::mt19937_64& ref_rng);

}  // namespace cpd
