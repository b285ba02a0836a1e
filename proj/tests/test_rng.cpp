#include <cmath>
#include <vector>

#include "coalflow/rng.hpp"
#include "doctest.h"

using namespace coalflow;

TEST_SUITE_BEGIN("rng");

TEST_CASE("streams are deterministic and replayable") {
  RngStream a = make_stream(42, "tag", 3);
  RngStream b = make_stream(42, "tag", 3);
  for (int i = 0; i < 100; ++i) CHECK(a.u64() == b.u64());
}

TEST_CASE("distinct replicas and tags give distinct streams") {
  RngStream a = make_stream(42, "tag", 0);
  RngStream b = make_stream(42, "tag", 1);
  RngStream c = make_stream(42, "other", 0);
  CHECK(a.u64() != b.u64());
  CHECK(a.u64() != c.u64());
}

TEST_CASE("fork does not disturb the parent sequence") {
  RngStream a = make_stream(9, "x");
  RngStream b = make_stream(9, "x");
  (void)a.fork("child");
  for (int i = 0; i < 16; ++i) CHECK(a.u64() == b.u64());
}

TEST_CASE("uniform and normal moments") {
  RngStream rng = make_stream(1, "moments");
  const int n = 200000;
  double su = 0, suu = 0, sn = 0, snn = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    const double z = rng.normal();
    su += u;
    suu += u * u;
    sn += z;
    snn += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(suu / n - 0.25 == doctest::Approx(1.0 / 12).epsilon(0.03));
  CHECK(std::fabs(sn / n) < 0.01);
  CHECK(snn / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below is in range and roughly uniform") {
  RngStream rng = make_stream(4, "below");
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(c == doctest::Approx(10000).epsilon(0.08));
}

TEST_SUITE_END();
