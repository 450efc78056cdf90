#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "serlab/rng.hpp"

using namespace serlab;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("split does not depend on parent draws") {
  Rng parent(7);
  const Rng child_before = parent.split(3);
  parent.next_u64();
  parent.next_u64();
  const Rng child_after = parent.split(3);
  CHECK(child_before.state() == child_after.state());
}

TEST_CASE("distinct tags give distinct streams") {
  Rng parent(7);
  std::set<std::uint64_t> states;
  for (std::uint64_t tag = 0; tag < 1000; ++tag) {
    states.insert(parent.split(tag).state());
  }
  CHECK(states.size() == 1000);
}

TEST_CASE("uniform stays in [0,1) and uniform_pos in (0,1]") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    const double v = rng.uniform_pos();
    CHECK(v > 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("normal has roughly standard moments") {
  Rng rng(123);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum2 += x * x;
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("below covers its range without spilling") {
  Rng rng(99);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t v = rng.below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("state round trip resumes the stream") {
  Rng a(5);
  a.next_u64();
  Rng b(a.state());
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> v2 = v1;
  Rng r1(11), r2(11);
  shuffle(v1, r1);
  shuffle(v2, r2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8});
}
