#include <cmath>
#include <vector>

#include <doctest.h>

#include "filterlab/rng.hpp"

using namespace filterlab;

TEST_CASE("streams are deterministic and position-addressable") {
  RngStream a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(123);
  RngStream d = c.child(7);
  RngStream e = RngStream(123).child(7);
  CHECK(d.next_u64() == e.next_u64());
  CHECK(RngStream(1).next_u64() != RngStream(2).next_u64());
}

TEST_CASE("child streams decorrelate from parents and siblings") {
  RngStream root(99);
  auto c0 = root.child(0);
  auto c1 = root.child(1);
  CHECK(c0.next_u64() != c1.next_u64());
}

TEST_CASE("uniform and gaussian moments") {
  RngStream s(2024);
  const int n = 200000;
  double mean_u = 0.0;
  for (int i = 0; i < n; ++i) mean_u += s.next_double();
  mean_u /= n;
  CHECK(std::abs(mean_u - 0.5) < 5.0 / std::sqrt(12.0 * n));

  double m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = s.next_gaussian();
    m1 += g;
    m2 += g * g;
  }
  m1 /= n;
  m2 /= n;
  CHECK(std::abs(m1) < 5.0 / std::sqrt(double(n)));
  CHECK(std::abs(m2 - 1.0) < 5.0 * std::sqrt(2.0 / n));
}
