#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "evorl/thread_pool.hpp"

using namespace evorl;

TEST_CASE("for_each_index covers every index exactly once") {
  for (const int w : {1, 2, 4, 7}) {
    ThreadPool pool(w);
    std::vector<std::atomic<int>> hits(1000);
    pool.for_each_index(1000, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);
  }
}

TEST_CASE("parallel_map_indexed yields results in index order") {
  ThreadPool pool(4);
  const auto out =
      parallel_map_indexed<int>(pool, 257, [](std::size_t i) { return static_cast<int>(i * i); });
  REQUIRE(out.size() == 257);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
}

TEST_CASE("results are identical across worker counts") {
  const auto run = [](int workers) {
    ThreadPool pool(workers);
    return parallel_map_indexed<double>(pool, 512,
                                        [](std::size_t i) { return std::sin(0.1 * i) * i; });
  };
  const auto base = run(1);
  for (const int w : {2, 3, 8}) CHECK(run(w) == base);
}

TEST_CASE("empty job and n smaller than workers") {
  ThreadPool pool(8);
  pool.for_each_index(0, [](std::size_t) { throw std::logic_error("not reached"); });
  std::vector<int> out(3, 0);
  pool.for_each_index(3, [&](std::size_t i) { out[i] = 1; });
  CHECK(std::accumulate(out.begin(), out.end(), 0) == 3);
}

TEST_CASE("lowest-index exception wins") {
  ThreadPool pool(4);
  for (int trial = 0; trial < 20; ++trial) {
    try {
      pool.for_each_index(100, [&](std::size_t i) {
        if (i == 17 || i == 63 || i == 99) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected throw");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "17");
    }
  }
}

TEST_CASE("pool survives a throwing job and runs the next one") {
  ThreadPool pool(3);
  CHECK_THROWS(pool.for_each_index(10, [](std::size_t i) {
    if (i == 0) throw std::runtime_error("boom");
  }));
  std::atomic<int> n{0};
  pool.for_each_index(50, [&](std::size_t) { n.fetch_add(1); });
  CHECK(n.load() == 50);
}

TEST_CASE("workers=1 runs inline on the caller thread") {
  ThreadPool pool(1);
  const auto caller = std::this_thread::get_id();
  std::vector<std::thread::id> ids(8);
  pool.for_each_index(8, [&](std::size_t i) { ids[i] = std::this_thread::get_id(); });
  for (const auto& id : ids) CHECK(id == caller);
}

TEST_CASE("nested pools: inner single-worker pool inside outer tasks") {
  ThreadPool outer(4);
  std::vector<std::vector<int>> results(6);
  outer.for_each_index(6, [&](std::size_t i) {
    ThreadPool inner(1);
    results[i] = parallel_map_indexed<int>(
        inner, 10, [&](std::size_t j) { return static_cast<int>(i * 100 + j); });
  });
  for (std::size_t i = 0; i < results.size(); ++i) {
    REQUIRE(results[i].size() == 10);
    for (std::size_t j = 0; j < 10; ++j) CHECK(results[i][j] == static_cast<int>(i * 100 + j));
  }
}

TEST_CASE("workers=0 picks hardware concurrency") {
  ThreadPool pool(0);
  CHECK(pool.workers() >= 1);
}
