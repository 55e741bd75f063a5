#include "doctest.h"
#include "flowbench/rng.hpp"

#include <cmath>
#include <set>

using namespace flowbench;

TEST_CASE("same seed gives the same stream") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derive_seed separates labelled streams") {
  auto s1 = derive_seed(7, "alpha");
  auto s2 = derive_seed(7, "beta");
  auto s3 = derive_seed(7, "alpha", 1);
  CHECK(s1 != s2);
  CHECK(s1 != s3);
  CHECK(derive_seed(7, "alpha") == s1);
}

TEST_CASE("uniform_below stays in range and covers values") {
  Rng rng(3);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto v = rng.uniform_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("normal moments are roughly standard") {
  Rng rng(11);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sumsq += x * x;
  }
  double mean = sum / n;
  double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("sample_without_replacement yields distinct in-range values") {
  Rng rng(9);
  auto xs = rng.sample_without_replacement(100, 50);
  std::set<std::uint64_t> seen(xs.begin(), xs.end());
  CHECK(seen.size() == 50);
  for (auto x : xs) CHECK(x < 100);
}
