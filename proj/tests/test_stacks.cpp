#include <doctest.h>

#include <set>

#include "cpd/rng.hpp"
#include "cpd/stacks.hpp"

using namespace cpd;

namespace {

Matrix tagged_batch(int rows, int dim, double tag) {
  Matrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(dim));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < dim; ++c) m.at(r, c) = tag + r;
  }
  return m;
}

ReferencePool small_pool(int n, int dim, std::uint64_t seed) {
  Matrix rows(static_cast<std::size_t>(n), static_cast<std::size_t>(dim));
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < dim; ++c) rows.at(r, c) = 1000.0 + r;
  }
  return ReferencePool(std::move(rows), seed);
}

}  // namespace

TEST_CASE("window config validation") {
  WindowConfig ok{.window_length = 200, .split_ratio = 0.5, .stride = 10};
  ok.validate();
  CHECK(ok.train_capacity() == 100);
  CHECK(ok.test_capacity() == 100);
  CHECK(ok.train_per_stride() == 5);
  CHECK(ok.test_per_stride() == 5);

  WindowConfig odd_stride{.window_length = 200, .split_ratio = 0.5, .stride = 9};
  CHECK_THROWS(odd_stride.validate());
  WindowConfig big_stride{.window_length = 8, .split_ratio = 0.5, .stride = 10};
  CHECK_THROWS(big_stride.validate());
  WindowConfig frac{.window_length = 10, .split_ratio = 0.35, .stride = 2};
  CHECK_THROWS(frac.validate());  // 0.35 * 2 not integral
  WindowConfig bad_alpha{.window_length = 10, .split_ratio = 1.0, .stride = 2};
  CHECK_THROWS(bad_alpha.validate());
}

TEST_CASE("ring buffer evicts oldest first") {
  RowRing ring(3, 1);
  const auto push = [&](double v) {
    const double row[1] = {v};
    ring.push(std::span<const double>(row, 1));
  };
  push(1);
  push(2);
  CHECK(!ring.full());
  push(3);
  CHECK(ring.full());
  CHECK(ring.row(0)[0] == 1.0);
  push(4);
  CHECK(ring.row(0)[0] == 2.0);
  CHECK(ring.row(2)[0] == 4.0);
  CHECK(ring.size() == 3);
}

TEST_CASE("half the stride goes to training, half to testing at alpha 0.5") {
  WindowConfig cfg{.window_length = 40, .split_ratio = 0.5, .stride = 10};
  cfg.validate();
  SlidingStacks stacks(cfg, 2);
  auto pool = small_pool(100, 2, 7);
  auto rng = make_rng(1);

  ingest_stride(stacks, cfg, tagged_batch(10, 2, 0.0), pool, rng);
  CHECK(stacks.train_stream.size() == 5);
  CHECK(stacks.test_stream.size() == 5);
  CHECK(stacks.train_ref.size() == 5);
  CHECK(stacks.test_ref.size() == 5);
  // First five rows of the batch land in the training stream, in order.
  for (int i = 0; i < 5; ++i) CHECK(stacks.train_stream.row(i)[0] == i);
  for (int i = 0; i < 5; ++i) CHECK(stacks.test_stream.row(i)[0] == 5.0 + i);

  CHECK_THROWS(ingest_stride(stacks, cfg, tagged_batch(9, 2, 0.0), pool, rng));
}

TEST_CASE("general split ratio sends alpha*s to the training stack") {
  WindowConfig cfg{.window_length = 50, .split_ratio = 0.2, .stride = 10};
  cfg.validate();
  CHECK(cfg.train_per_stride() == 2);
  CHECK(cfg.test_per_stride() == 8);
  SlidingStacks stacks(cfg, 1);
  auto pool = small_pool(60, 1, 7);
  auto rng = make_rng(2);
  ingest_stride(stacks, cfg, tagged_batch(10, 1, 100.0), pool, rng);
  CHECK(stacks.train_stream.size() == 2);
  CHECK(stacks.test_stream.size() == 8);
}

TEST_CASE("non-overlapping window: one ingest fills every buffer exactly") {
  WindowConfig cfg{.window_length = 10, .split_ratio = 0.5, .stride = 10};
  cfg.validate();
  SlidingStacks stacks(cfg, 1);
  auto pool = small_pool(40, 1, 3);
  auto rng = make_rng(3);
  ingest_stride(stacks, cfg, tagged_batch(10, 1, 0.0), pool, rng);
  CHECK(stacks.train_full());
  CHECK(stacks.test_full());
  // Next ingest replaces everything.
  ingest_stride(stacks, cfg, tagged_batch(10, 1, 50.0), pool, rng);
  for (int i = 0; i < 5; ++i) {
    CHECK(stacks.train_stream.row(i)[0] >= 50.0);
    CHECK(stacks.test_stream.row(i)[0] >= 50.0);
  }
}

TEST_CASE("after w/s ingests nothing from the first stride remains") {
  WindowConfig cfg{.window_length = 40, .split_ratio = 0.5, .stride = 10};
  cfg.validate();
  SlidingStacks stacks(cfg, 1);
  auto pool = small_pool(100, 1, 5);
  auto rng = make_rng(5);

  // Oracle: explicit FIFO queues with the same capacities.
  std::vector<double> train_queue, test_queue;
  const int w_over_s = cfg.window_length / cfg.stride;
  for (int t = 0; t <= w_over_s; ++t) {
    const Matrix batch = tagged_batch(10, 1, 100.0 * t);
    ingest_stride(stacks, cfg, batch, pool, rng);
    for (int r = 0; r < 5; ++r) train_queue.push_back(batch.at(r, 0));
    for (int r = 5; r < 10; ++r) test_queue.push_back(batch.at(r, 0));
    while (static_cast<int>(train_queue.size()) > cfg.train_capacity())
      train_queue.erase(train_queue.begin());
    while (static_cast<int>(test_queue.size()) > cfg.test_capacity())
      test_queue.erase(test_queue.begin());
    for (int i = 0; i < static_cast<int>(train_queue.size()); ++i)
      CHECK(stacks.train_stream.row(i)[0] == train_queue[i]);
    for (int i = 0; i < static_cast<int>(test_queue.size()); ++i)
      CHECK(stacks.test_stream.row(i)[0] == test_queue[i]);
  }
  // Stride-0 rows carried tags < 100; none may survive.
  for (int i = 0; i < stacks.train_stream.size(); ++i)
    CHECK(stacks.train_stream.row(i)[0] >= 100.0);
  for (int i = 0; i < stacks.test_stream.size(); ++i)
    CHECK(stacks.test_stream.row(i)[0] >= 100.0);
}

TEST_CASE("stream sample count is conserved across the two stream buffers") {
  WindowConfig cfg{.window_length = 20, .split_ratio = 0.5, .stride = 4};
  cfg.validate();
  SlidingStacks stacks(cfg, 1);
  auto pool = small_pool(50, 1, 9);
  auto rng = make_rng(9);
  int ingested = 0;
  for (int t = 0; t < 12; ++t) {
    ingest_stride(stacks, cfg, tagged_batch(4, 1, 10.0 * t), pool, rng);
    ingested += 4;
    const int held = stacks.train_stream.size() + stacks.test_stream.size();
    CHECK(held == std::min(ingested, cfg.window_length));
  }
}

TEST_CASE("pool draws are distinct within a request") {
  auto pool = small_pool(20, 1, 11);
  auto rng = make_rng(11);
  std::vector<int> idx;
  pool.draw(15, rng, idx);
  CHECK(idx.size() == 15);
  CHECK(std::set<int>(idx.begin(), idx.end()).size() == 15);
  CHECK_THROWS(pool.draw(21, rng, idx));
}
