#include <doctest.h>

#include <atomic>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "dstdoctor/parallel.hpp"

using namespace dstdoctor;

TEST_CASE("effective_jobs resolves zero to the hardware count") {
  CHECK(effective_jobs(1) == 1);
  CHECK(effective_jobs(8) == 8);
  CHECK(effective_jobs(0) >= 1);
}

TEST_CASE("parallel_for covers every index exactly once") {
  for (unsigned jobs : {1u, 2u, 7u}) {
    std::vector<int> visits(257, 0);
    parallel_for(visits.size(), jobs, [&](std::size_t i) { ++visits[i]; });
    CHECK(std::accumulate(visits.begin(), visits.end(), 0) == 257);
    for (int v : visits) CHECK(v == 1);
  }
}

TEST_CASE("parallel_for with zero work returns immediately") {
  bool called = false;
  parallel_for(0, 4, [&](std::size_t) { called = true; });
  CHECK_FALSE(called);
}

TEST_CASE("a worker exception propagates to the caller") {
  auto boom = [](std::size_t i) {
    if (i == 13) throw std::runtime_error("boom");
  };
  CHECK_THROWS_WITH_AS(parallel_for(64, 4, boom), "boom", std::runtime_error);
  CHECK_THROWS_WITH_AS(parallel_for(64, 1, boom), "boom", std::runtime_error);
}

TEST_CASE("results land in per-index slots regardless of worker count") {
  std::vector<std::size_t> out_seq(100), out_par(100);
  parallel_for(100, 1, [&](std::size_t i) { out_seq[i] = i * i; });
  parallel_for(100, 8, [&](std::size_t i) { out_par[i] = i * i; });
  CHECK(out_seq == out_par);
}
