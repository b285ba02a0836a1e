#include <algorithm>
#include <cmath>
#include <vector>

#include "coalflow/map_model.hpp"
#include "coalflow/rng.hpp"
#include "coalflow/stats.hpp"
#include "doctest.h"

using namespace coalflow;

TEST_SUITE_BEGIN("map_model");

TEST_CASE("sorted assignment by hand") {
  // proposals (1, 0) on cells 0,1: cell0 -> 0, cell1 -> 1
  CHECK(sorted_assignment({1.0, 0.0}) == std::vector<double>{0.0, 1.0});
  // tie: proposals on cells 0,1,2 with xi = (+1, -1, -1): v = (1, 0, 1)
  CHECK(sorted_assignment({1.0, 0.0, 1.0}) ==
        std::vector<double>{0.0, 1.0, 1.0});
}

TEST_CASE("assignment locality: far proposals never move interior values") {
  RngStream rng = make_stream(13, "locality");
  const double L = 1.0;  // lattice jump bound
  const int margin = static_cast<int>(2 * L) + 2;
  for (int rep = 0; rep < 200; ++rep) {
    const int n = 20;
    std::vector<double> proposals(n);
    for (int k = 0; k < n; ++k) {
      proposals[k] = k + (rng.bernoulli(0.5) ? L : -L);
    }
    const auto base = sorted_assignment(proposals);
    // extend on both sides with arbitrary valid proposals
    std::vector<double> extended;
    const int ext = 5;
    for (int k = -ext; k < 0; ++k) {
      extended.push_back(k + rng.uniform(-L, L));
    }
    extended.insert(extended.end(), proposals.begin(), proposals.end());
    for (int k = n; k < n + ext; ++k) {
      extended.push_back(k + rng.uniform(-L, L));
    }
    const auto wide = sorted_assignment(extended);
    for (int k = margin; k < n - margin; ++k) {
      CHECK(base[k] == wide[k + ext]);
    }
  }
}

TEST_CASE("sample_map produces valid monotone maps with bounded displacement") {
  for (const MapModel& model :
       {MapModel::lattice_shuffle(), MapModel::continuous_shift()}) {
    RngStream rng = make_stream(17, model.name());
    for (int rep = 0; rep < 200; ++rep) {
      const MonotoneStepMap m = sample_map(model, {-6.0, 6.0}, rng);
      CHECK(m.window().lo == -6.0);
      CHECK(m.window().hi == 6.0);
      const auto& b = m.breakpoints();
      const auto& v = m.values();
      for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] >= v[i - 1]);
      // every value within jump bound + half cell of its cell center
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double center = 0.5 * (b[i] + b[i + 1]);
        CHECK(std::fabs(v[i] - center) <=
              model.jump_bound() + 0.5 * (b[i + 1] - b[i]) + 1e-12);
      }
    }
  }
  RngStream tiny_rng = make_stream(17, "tiny-window");
  CHECK_THROWS_AS(sample_map(MapModel::lattice_shuffle(), {0.0, 0.5}, tiny_rng),
                  WindowTooSmall);
}

TEST_CASE("lattice psi law is the exact enumerated law") {
  const MapModel model = MapModel::lattice_shuffle();
  const PsiLaw law = exact_psi_law(model);
  REQUIRE(law.exact);
  REQUIRE(law.support == std::vector<double>{-1.0, 0.0, 1.0});
  CHECK(law.probs[0] == 0.25);
  CHECK(law.probs[1] == 0.5);
  CHECK(law.probs[2] == 0.25);
  CHECK(law.mean == 0.0);
  CHECK(law.variance == 0.5);
  CHECK(model.sigma2() == 0.5);
  CHECK(model.sigma2_exact());
}

TEST_CASE("lattice MC histogram agrees with the exact law") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(19, "mc-vs-exact");
  const std::size_t reps = 200000;
  std::vector<std::int64_t> counts(3, 0);
  const std::vector<double> origin{0.0};
  for (std::size_t r = 0; r < reps; ++r) {
    const double psi = push_points(model, origin, rng)[0];
    ++counts[static_cast<int>(psi) + 1];
  }
  CHECK(chi2_gof_test(counts, {0.25, 0.5, 0.25}) > 0.01);
}

TEST_CASE("continuous psi law is centered with finite support") {
  const MapModel model = MapModel::continuous_shift();
  const PsiLaw law = exact_psi_law(model, 100000);
  CHECK_FALSE(law.exact);
  CHECK(std::fabs(law.mean) <= 3.0 * law.mean_stderr);
  CHECK(law.variance > 0.0);
  for (double v : law.support) {
    CHECK(std::fabs(v) <= model.jump_bound() + 1.0);
  }
  CHECK(model.sigma2() > 0.0);
  CHECK_FALSE(model.sigma2_exact());
}

TEST_CASE("push_points matches sample_map evaluation in law") {
  // single-point displacement freq vs exact law (lattice)
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(23, "push-vs-map");
  std::vector<std::int64_t> counts(3, 0);
  for (int r = 0; r < 60000; ++r) {
    const MonotoneStepMap m = sample_map(model, {-2.0, 2.0}, rng);
    const double psi = evaluate(m, 0.0);
    ++counts[static_cast<int>(psi) + 1];
  }
  CHECK(chi2_gof_test(counts, {0.25, 0.5, 0.25}) > 0.01);
}

TEST_CASE("push_points keeps order and handles shared windows") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(29, "order");
  for (int rep = 0; rep < 2000; ++rep) {
    const std::vector<double> pts{-3.0, -1.0, 0.0, 0.0, 4.0};
    const auto out = push_points(model, pts, rng);
    REQUIRE(out.size() == pts.size());
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i] >= out[i - 1]);
    CHECK(out[2] == out[3]);  // same point, same cell
  }
  CHECK_THROWS_AS(push_points(model, {1.0, 0.0}, rng), UnorderedStarts);
}

TEST_CASE("stationarity: displacement law equal at cells 0 and 17") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(31, "stationarity");
  std::vector<std::int64_t> at0(3, 0), at17(3, 0);
  for (int r = 0; r < 40000; ++r) {
    const auto out = push_points(model, {0.0, 17.0}, rng);
    ++at0[static_cast<int>(out[0] - 0.0) + 1];
    ++at17[static_cast<int>(out[1] - 17.0) + 1];
  }
  CHECK(chi2_two_sample_test(at0, at17) > 0.01);
}

TEST_CASE("finite range: distant displacements uncorrelated") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(37, "range");
  const double sep = 2.0 * model.sort_radius() + 2.0 + 10.0;
  const int n = 50000;
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (int r = 0; r < n; ++r) {
    const auto out = push_points(model, {0.0, sep}, rng);
    const double x = out[0], y = out[1] - sep;
    sx += x;
    sy += y;
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  const double mx = sx / n, my = sy / n;
  const double corr = (sxy / n - mx * my) /
                      std::sqrt((sxx / n - mx * mx) * (syy / n - my * my));
  CHECK(std::fabs(corr) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("successive displacements at a fixed point are iid with law mu") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(41, "iid");
  std::vector<std::int64_t> counts(3, 0);
  std::vector<double> pt{0.0};
  const int steps = 60000;
  std::int64_t lag_equal = 0;
  int prev = 0;
  for (int k = 0; k < steps; ++k) {
    const auto next = push_points(model, pt, rng);
    const int jump = static_cast<int>(next[0] - pt[0]);
    ++counts[jump + 1];
    if (k > 0 && jump == prev) ++lag_equal;
    prev = jump;
    pt = next;
  }
  CHECK(chi2_gof_test(counts, {0.25, 0.5, 0.25}) > 0.01);
  // lag-1 collision frequency for iid steps with this law: 1/4+1/16+1/16
  const double expected = 0.375;
  const double se = std::sqrt(expected * (1 - expected) / steps);
  CHECK(std::fabs(static_cast<double>(lag_equal) / (steps - 1) - expected) <
        4.0 * se);
}

TEST_CASE("validate_assumptions passes for both stock models") {
  for (const MapModel& model :
       {MapModel::lattice_shuffle(), MapModel::continuous_shift()}) {
    RngStream rng = make_stream(43, model.name());
    const AssumptionReport report = validate_assumptions(model, 1000, rng);
    CHECK(report.passed());
    CHECK_NOTHROW(report.throw_if_failed());
    for (const auto& item : report.items) {
      if (item.name == "A1_coalescence_gap_1" &&
          model.kind() == ModelKind::kLatticeShuffle) {
        CHECK(item.value > 0.05);
      }
    }
  }
}

TEST_CASE("a biased jump law fails A2") {
  const MapModel model = MapModel::lattice_shuffle(0.1);
  RngStream rng = make_stream(47, "bias");
  const AssumptionReport report = validate_assumptions(model, 1000, rng);
  CHECK_FALSE(report.passed());
  CHECK_THROWS_AS(report.throw_if_failed(), AssumptionViolated);
  bool a2_failed = false;
  for (const auto& item : report.items) {
    if (item.name == "A2_mean_zero") a2_failed = !item.passed;
  }
  CHECK(a2_failed);
}

TEST_CASE("model spec round-trip and psi-law csv") {
  const MapModel model = MapModel::lattice_shuffle();
  const MapModel back = model_from_spec(model_to_spec(model));
  CHECK(back.kind() == model.kind());
  CHECK(back.bias() == model.bias());
  CHECK_THROWS_AS(model_from_spec("schema = 1\nkind = nope\n"), ConfigError);
  CHECK_THROWS_AS(model_from_spec("schema = 1\nkind = lattice_shuffle\nzz = 1\n"),
                  ConfigError);
  const std::string csv = psi_law_to_csv(exact_psi_law(model));
  CHECK(csv.find("value,probability") == 0);
  CHECK(csv.find("0.5") != std::string::npos);
}

TEST_SUITE_END();
