#include <algorithm>
#include <cmath>
#include <vector>

#include "coalflow/rng.hpp"
#include "coalflow/step_map.hpp"
#include "doctest.h"

using namespace coalflow;

namespace {

// Random nondecreasing step map on [-w, w] for property tests.
MonotoneStepMap random_map(RngStream& rng, double w = 4.0, int max_cells = 8) {
  const int cells = 1 + static_cast<int>(rng.below(max_cells));
  std::vector<double> breaks{-w};
  for (int i = 1; i < cells; ++i) {
    breaks.push_back(rng.uniform(-w, w));
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  breaks.push_back(w);
  std::vector<double> values;
  double v = rng.uniform(-w, 0.0);
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    values.push_back(v);
    v += rng.uniform(0.0, 1.0);
  }
  return make_map(breaks, values, {-w, w});
}

// Independent feasibility oracle for the Levy distance: dense x-sampling
// instead of the breakpoint scan used by the implementation.
bool levy_feasible_oracle(const MonotoneStepMap& f, const MonotoneStepMap& g,
                          double bound, double eps) {
  const MonotoneStepMap fc = clamp_values(f, bound);
  const MonotoneStepMap gc = clamp_values(g, bound);
  const Window w = f.window();
  std::vector<double> xs;
  const int n = 2000;
  for (int i = 0; i <= n; ++i) {
    xs.push_back(w.lo + (w.hi - w.lo) * i / n);
  }
  for (double b : fc.breakpoints()) {
    for (double x : {b - eps - 1e-12, b - eps, b + eps, b + eps + 1e-12}) {
      if (x >= w.lo && x <= w.hi) xs.push_back(x);
    }
  }
  for (double b : gc.breakpoints()) {
    if (b >= w.lo && b <= w.hi) xs.push_back(b);
  }
  for (double x : xs) {
    const double gx = evaluate_clamped(gc, x);
    const double fx = evaluate_clamped(fc, x);
    if (gx > evaluate_clamped(fc, x + eps) + eps + 1e-15) return false;
    if (gx < evaluate_clamped(fc, x - eps) - eps - 1e-15) return false;
    if (fx > evaluate_clamped(gc, x + eps) + eps + 1e-15) return false;
    if (fx < evaluate_clamped(gc, x - eps) - eps - 1e-15) return false;
  }
  return true;
}

double levy_tilde_oracle(const MonotoneStepMap& f, const MonotoneStepMap& g,
                         double bound) {
  // coarse-to-fine epsilon grid
  double lo = 0.0, hi = 2.0 * bound;
  for (int refine = 0; refine < 3; ++refine) {
    const int n = 200;
    double new_hi = hi;
    for (int i = 0; i <= n; ++i) {
      const double eps = lo + (hi - lo) * i / n;
      if (levy_feasible_oracle(f, g, bound, eps)) {
        new_hi = eps;
        break;
      }
    }
    const double step = (hi - lo) / n;
    lo = std::max(0.0, new_hi - step);
    hi = new_hi;
  }
  return hi;
}

}  // namespace

TEST_SUITE_BEGIN("step_map");

TEST_CASE("make_map constructs, merges, validates") {
  const MonotoneStepMap m = make_map({0, 1, 2}, {0.4, 1.2}, {0, 2});
  CHECK(m.cell_count() == 2);
  CHECK(m.window() == Window{0, 2});

  const MonotoneStepMap merged = make_map({0, 1, 2}, {0.7, 0.7}, {0, 2});
  CHECK(merged.cell_count() == 1);
  CHECK(merged.values()[0] == 0.7);
  CHECK(merged.window() == Window{0, 2});

  CHECK_THROWS_AS(make_map({0, 1, 2}, {1.0, 0.5}, {0, 2}), NonMonotoneInput);
  CHECK_THROWS_AS(make_map({0, 1, 1.0, 2}, {1, 2, 3}, {0, 2}),
                  NonMonotoneInput);
  CHECK_THROWS_AS(make_map({0, 1, 2}, {0.4, 1.2}, {0, 3}), WindowMismatch);
}

TEST_CASE("evaluate is right-continuous and windowed") {
  const MonotoneStepMap m = make_map({0, 1, 2}, {0.4, 1.2}, {0, 2});
  CHECK(evaluate(m, 1.0) == 1.2);
  CHECK(evaluate(m, 0.999) == 0.4);
  CHECK(evaluate(m, 0.0) == 0.4);
  CHECK(evaluate(m, 2.0) == 1.2);  // window end belongs to the last cell
  CHECK_THROWS_AS(evaluate(m, 2.5), OutOfWindow);
  CHECK_THROWS_AS(evaluate(m, -0.1), OutOfWindow);
  CHECK(evaluate_clamped(m, 2.5) == 1.2);
  CHECK(evaluate_clamped(m, -7.0) == 0.4);
}

TEST_CASE("compose evaluates g after f and coalesces") {
  const MonotoneStepMap f = make_map({0, 1, 2}, {0.4, 1.2}, {0, 2});
  const MonotoneStepMap g = make_map({0, 1, 2}, {0.7, 1.1}, {0, 2});
  const MonotoneStepMap gf = compose(g, f);
  CHECK(evaluate(gf, 0.5) == 0.7);
  CHECK(evaluate(gf, 1.5) == 1.1);
  CHECK(gf.cell_count() == 2);

  const MonotoneStepMap f2 = make_map({0, 1, 2}, {0.4, 0.8}, {0, 2});
  const MonotoneStepMap gf2 = compose(g, f2);
  CHECK(gf2.cell_count() == 1);  // both f2 values land in g's first cell
  CHECK(gf2.values()[0] == 0.7);
  CHECK(gf2.window() == Window{0, 2});

  // identity-like grid whose breakpoints contain f's values: composition
  // with it reproduces f exactly
  const std::vector<double> idb{0, 0.25, 0.4, 0.5, 0.75, 1.0, 1.2, 1.5, 2.0};
  std::vector<double> idv(idb.begin(), idb.end() - 1);
  const MonotoneStepMap id = make_map(idb, idv, {0, 2});
  const MonotoneStepMap idf = compose(id, f);
  CHECK(evaluate(idf, 0.3) == 0.4);
  CHECK(evaluate(idf, 1.7) == 1.2);
  CHECK(idf.cell_count() == f.cell_count());

  const MonotoneStepMap tiny = make_map({0, 1}, {5.0}, {0, 1});
  CHECK_THROWS_AS(compose(g, tiny), RangeEscapesWindow);
}

TEST_CASE("rescale scales domain and range") {
  const MonotoneStepMap m = make_map({0, 2}, {1.0}, {0, 2});
  const MonotoneStepMap r = rescale(m, 2.0);
  CHECK(r.window() == Window{0, 1});
  CHECK(r.values()[0] == 0.5);
  CHECK(rescale(m, 1.0) == m);
  CHECK_THROWS_AS(rescale(m, 0.0), NonPositiveScale);
  CHECK_THROWS_AS(rescale(m, -1.0), NonPositiveScale);

  RngStream rng = make_stream(77, "rescale");
  for (int rep = 0; rep < 20; ++rep) {
    const MonotoneStepMap f = random_map(rng);
    const double a = std::exp(rng.uniform(-1, 1));
    const double b = std::exp(rng.uniform(-1, 1));
    const MonotoneStepMap lhs = rescale(rescale(f, a), b);
    const MonotoneStepMap rhs = rescale(f, a * b);
    REQUIRE(lhs.cell_count() == rhs.cell_count());
    for (std::size_t i = 0; i < lhs.cell_count(); ++i) {
      CHECK(lhs.values()[i] == doctest::Approx(rhs.values()[i]).epsilon(1e-12));
      CHECK(lhs.breakpoints()[i] ==
            doctest::Approx(rhs.breakpoints()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("image_points lists distinct values in order") {
  CHECK(image_points(make_map({0, 2}, {0.7}, {0, 2})) ==
        std::vector<double>{0.7});
  CHECK(image_points(make_map({0, 1, 2}, {0.4, 1.2}, {0, 2})) ==
        std::vector<double>{0.4, 1.2});

  // coalescence through composition strictly shrinks the image
  const MonotoneStepMap f = make_map({0, 1, 2}, {0.4, 0.8}, {0, 2});
  const MonotoneStepMap g = make_map({0, 1, 2}, {0.7, 1.1}, {0, 2});
  CHECK(image_points(compose(g, f)).size() < image_points(f).size());
}

TEST_CASE("composition preserves monotonicity and absorbs coalescence") {
  RngStream rng = make_stream(101, "compose-props");
  for (int rep = 0; rep < 50; ++rep) {
    const MonotoneStepMap f = random_map(rng);
    MonotoneStepMap g = random_map(rng, 12.0);  // wide enough window
    const MonotoneStepMap gf = compose(g, f);
    // monotone in x
    double prev = evaluate(gf, f.window().lo);
    for (int i = 1; i <= 100; ++i) {
      const double x =
          f.window().lo + f.window().length() * i / 100.0;
      const double y = evaluate(gf, x);
      CHECK(y >= prev);
      prev = y;
    }
    // coalescence absorbing: equal values stay equal under any further map
    const MonotoneStepMap h = random_map(rng, 30.0);
    const MonotoneStepMap hgf = compose(h, gf);
    for (int i = 0; i < 99; ++i) {
      const double x = f.window().lo + f.window().length() * i / 100.0;
      const double y = f.window().lo + f.window().length() * (i + 1) / 100.0;
      if (evaluate(gf, x) == evaluate(gf, y)) {
        CHECK(evaluate(hgf, x) == evaluate(hgf, y));
      }
    }
    // image of the composition comes from g's image
    const auto gi = image_points(g);
    for (double v : image_points(gf)) {
      CHECK(std::find(gi.begin(), gi.end(), v) != gi.end());
    }
  }
}

TEST_CASE("levy_tilde examples and certified bisection") {
  const MonotoneStepMap zero = make_map({-4, 4}, {0.0}, {-4, 4});
  CHECK(levy_tilde(zero, zero, 3.0) == 0.0);

  for (double c : {0.5, 1.5, 2.5}) {
    const MonotoneStepMap constant = make_map({-4, 4}, {c}, {-4, 4});
    // for constants 0 and c within the cutoff the infimum is exactly c
    CHECK(levy_tilde(zero, constant, 3.0) == doctest::Approx(c).epsilon(1e-7));
    CHECK(levy_tilde(constant, zero, 3.0) ==
          doctest::Approx(levy_tilde(zero, constant, 3.0)).epsilon(1e-6));
  }

  const MonotoneStepMap other = make_map({-4, 0, 4}, {-1.0, 1.0}, {-4, 4});
  CHECK_THROWS_AS(
      levy_tilde(zero, make_map({-3, 3}, {0.0}, {-3, 3}), 1.0),
      WindowMismatch);
  CHECK(levy_tilde(zero, other, 2.0) > 0.0);
}

TEST_CASE("levy_tilde agrees with the brute-force oracle") {
  RngStream rng = make_stream(55, "levy-oracle");
  for (int rep = 0; rep < 15; ++rep) {
    const MonotoneStepMap f = random_map(rng);
    const MonotoneStepMap g = random_map(rng);
    const double bound = 3.0;
    const double fast = levy_tilde(f, g, bound, 1e-9);
    const double slow = levy_tilde_oracle(f, g, bound);
    CHECK(fast == doctest::Approx(slow).epsilon(0.02));
    // symmetry within tolerance
    CHECK(fast == doctest::Approx(levy_tilde(g, f, bound, 1e-9)).epsilon(1e-6));
  }
}

TEST_CASE("levy_metric examples") {
  const MonotoneStepMap zero = make_map({-4, 4}, {0.0}, {-4, 4});
  CHECK(levy_metric(zero, zero).value == 0.0);
  CHECK(levy_metric(zero, zero).tail_bound ==
        doctest::Approx(std::pow(2.0, -30)));

  // f = 0, g = c with |c| <= 1: every clamped Levy distance equals c, so
  // d = c * (1 - 2^-b_max)
  for (double c : {0.3, 0.8, 1.0}) {
    const MonotoneStepMap constant = make_map({-4, 4}, {c}, {-4, 4});
    const LevyMetricResult r = levy_metric(zero, constant);
    CHECK(r.value ==
          doctest::Approx(c * (1.0 - std::pow(2.0, -30))).epsilon(1e-6));
  }
}

TEST_CASE("levy_metric axioms on random maps") {
  RngStream rng = make_stream(57, "levy-axioms");
  const LevyMetricParams params{20, 1e-9};
  for (int rep = 0; rep < 10; ++rep) {
    const MonotoneStepMap f = random_map(rng);
    const MonotoneStepMap g = random_map(rng);
    const MonotoneStepMap h = random_map(rng);
    const double fg = levy_metric(f, g, params).value;
    const double gf = levy_metric(g, f, params).value;
    const double fh = levy_metric(f, h, params).value;
    const double hg = levy_metric(h, g, params).value;
    CHECK(fg >= 0.0);
    CHECK(std::fabs(fg - gf) < 2e-6);
    CHECK(fg <= fh + hg + 3e-6);
    CHECK(levy_metric(f, f, params).value == 0.0);
  }
}

TEST_CASE("restrict and widest_preimage") {
  const MonotoneStepMap m =
      make_map({0, 1, 2, 3}, {0.5, 1.5, 2.5}, {0, 3});
  const MonotoneStepMap r = restrict_map(m, {0.5, 2.5});
  CHECK(r.window() == Window{0.5, 2.5});
  CHECK(evaluate(r, 0.5) == 0.5);
  CHECK(evaluate(r, 2.2) == 2.5);
  CHECK_THROWS_AS(restrict_map(m, {-1.0, 2.0}), WindowMismatch);

  const Window pre = widest_preimage(m, 1.0, 3.0);
  CHECK(pre.lo == 1.0);
  CHECK(pre.hi == 3.0);
  CHECK_THROWS_AS(widest_preimage(m, 5.0, 6.0), WindowExhausted);
}

TEST_CASE("serialization round-trips bit-exactly") {
  RngStream rng = make_stream(91, "serialize");
  for (int rep = 0; rep < 20; ++rep) {
    const MonotoneStepMap m = random_map(rng);
    CHECK(map_from_csv(map_to_csv(m)) == m);
    CHECK(map_from_json(map_to_json(m)) == m);
  }
}

TEST_CASE("map_from_vector builds the induced step map") {
  const MonotoneStepMap m =
      map_from_vector({0.0, 1.0, 2.0}, {0.3, 0.3, 1.1});
  CHECK(evaluate(m, 0.5) == 0.3);
  CHECK(evaluate(m, 1.5) == 0.3);
  CHECK(image_points(m) == std::vector<double>{0.3, 1.1});
}

TEST_SUITE_END();
