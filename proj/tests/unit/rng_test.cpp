#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "advrat/rng.hpp"

using advrat::Rng;

TEST(Rng, SameSeedSameSequence) {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, StreamsDependOnLabelAndIndexOnly) {
  Rng root(7);
  Rng consumed(7);
  for (int i = 0; i < 10; ++i) consumed();
  EXPECT_EQ(root.stream("x", 3)(), consumed.stream("x", 3)());
  EXPECT_NE(root.stream("x", 3)(), root.stream("x", 4)());
  EXPECT_NE(root.stream("x", 3)(), root.stream("y", 3)());
}

TEST(Rng, Fnv1aKnownValues) {
  static_assert(advrat::fnv1a("") == 0xcbf29ce484222325ULL);
  EXPECT_EQ(advrat::fnv1a("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(advrat::fnv1a("foobar"), 0x85944171f73967e8ULL);
}

TEST(Rng, UniformIndexCoversRangeEvenly) {
  Rng r(1);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[r.uniform_index(3)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 400);
}

TEST(Rng, UniformInUnitInterval) {
  Rng r(2);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(Rng, NormalMoments) {
  Rng r(3);
  const int n = 50000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.03);
}

TEST(Rng, ShuffleIsPermutation) {
  Rng r(4);
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  r.shuffle(w.begin(), w.end());
  EXPECT_NE(v, w);
  std::sort(w.begin(), w.end());
  EXPECT_EQ(v, w);
}
