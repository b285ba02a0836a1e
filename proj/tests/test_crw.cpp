#include <cmath>
#include <vector>

#include "coalflow/crw.hpp"
#include "coalflow/rng.hpp"
#include "coalflow/stats.hpp"
#include "doctest.h"

using namespace coalflow;

TEST_SUITE_BEGIN("crw");

TEST_CASE("iterate_maps: one step has the sampled-map law") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(61, "iter1");
  std::vector<std::int64_t> counts(3, 0);
  for (int r = 0; r < 40000; ++r) {
    const MonotoneStepMap m = iterate_maps(model, 1, {-3.0, 3.0}, rng);
    ++counts[static_cast<int>(evaluate(m, 0.0)) + 1];
  }
  CHECK(chi2_gof_test(counts, {0.25, 0.5, 0.25}) > 0.01);
}

TEST_CASE("iterate_maps: two steps give the two-fold convolution marginal") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(62, "iter2");
  std::vector<std::int64_t> counts(5, 0);
  for (int r = 0; r < 40000; ++r) {
    const MonotoneStepMap m = iterate_maps(model, 2, {-3.0, 3.0}, rng);
    ++counts[static_cast<int>(evaluate(m, 0.0)) + 2];
  }
  // mu * mu for mu = {1/4, 1/2, 1/4}
  CHECK(chi2_gof_test(counts,
                      {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16}) >
        0.01);
}

TEST_CASE("iterate_maps: image never grows along one composition chain") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(63, "image");
  for (int r = 0; r < 50; ++r) {
    RngStream s = rng.fork("rep", r);
    MonotoneStepMap composed = sample_map(model, {-8.0, 8.0}, s);
    std::size_t prev = image_points(composed).size();
    for (int k = 1; k < 16; ++k) {
      const MonotoneStepMap next =
          sample_map(model,
                     {composed.min_value() - 1.0, composed.max_value() + 1.0},
                     s);
      composed = compose(next, composed);
      const std::size_t count = image_points(composed).size();
      REQUIRE(count <= prev);
      prev = count;
    }
  }
}

TEST_CASE("simulate_crw: single-point increments are iid with law mu") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(64, "m1");
  const DiscretePathBundle b = simulate_crw(model, {0.0}, 50000, rng);
  std::vector<std::int64_t> counts(3, 0);
  for (int k = 1; k <= b.steps(); ++k) {
    ++counts[static_cast<int>(b.positions[k][0] - b.positions[k - 1][0]) + 1];
  }
  CHECK(chi2_gof_test(counts, {0.25, 0.5, 0.25}) > 0.01);
}

TEST_CASE("simulate_crw: two walkers from gap 1 coalesce quickly") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(65, "m2");
  int coalesced = 0;
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) {
    RngStream s = rng.fork("rep", r);
    const DiscretePathBundle b = simulate_crw(model, {0.0, 1.0}, 25, s);
    if (b.positions.back()[0] == b.positions.back()[1]) ++coalesced;
  }
  CHECK(coalesced > 0);
  CHECK(static_cast<double>(coalesced) / reps > 0.5);  // gap-1 lattice merges fast
}

TEST_CASE("simulate_crw: ordered starts stay ordered at every step") {
  const MapModel model = MapModel::continuous_shift();
  RngStream rng = make_stream(66, "order");
  const std::vector<double> starts{-4.0, -1.5, -1.5, 0.25, 3.0};
  for (int r = 0; r < 2000; ++r) {
    RngStream s = rng.fork("rep", r);
    const DiscretePathBundle b = simulate_crw(model, starts, 20, s);
    for (int k = 0; k <= b.steps(); ++k) {
      for (std::size_t i = 1; i < starts.size(); ++i) {
        REQUIRE(b.positions[k][i] >= b.positions[k][i - 1]);
      }
    }
  }
  CHECK_THROWS_AS(simulate_crw(model, {1.0, 0.0}, 5, rng), UnorderedStarts);
}

TEST_CASE("gap chain: absorbing start, nonnegativity, absorption") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(67, "gap");
  const GapChain zero = gap_chain(model, 0.0, 100, rng);
  CHECK(zero.states.size() == 1);
  CHECK(zero.hit_index(0.0).value() == 0);

  for (int r = 0; r < 500; ++r) {
    RngStream s = rng.fork("rep", r);
    const GapChain chain = gap_chain(model, 6.0, 200, s);
    for (double x : chain.states) REQUIRE(x >= 0.0);
    if (chain.absorbed) {
      REQUIRE(chain.states.back() == 0.0);
      REQUIRE(chain.state_at(150 + chain.n_max) == 0.0);
    }
  }
  CHECK_THROWS_AS(gap_chain(model, -1.0, 10, rng), BadParams);
}

TEST_CASE("gap chain tail decays with a diffusive log-log slope") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(68, "tail");
  const std::vector<int> horizons{8, 16, 32, 64, 128, 256, 512};
  std::vector<int> survived(horizons.size(), 0);
  const int reps = 4000;
  for (int r = 0; r < reps; ++r) {
    RngStream s = rng.fork("rep", r);
    const GapChain chain = gap_chain(model, 4.0, 512, s);
    const auto tau = chain.hit_index(0.0);
    for (std::size_t t = 0; t < horizons.size(); ++t) {
      if (!tau || *tau > horizons[t]) ++survived[t];
    }
  }
  std::vector<RatePoint> pts;
  for (std::size_t t = 0; t < horizons.size(); ++t) {
    pts.push_back({static_cast<double>(horizons[t]),
                   static_cast<double>(survived[t]) / reps});
  }
  RngStream boot = make_stream(68, "boot");
  const RateFit fit = fit_power_law(pts, boot);
  const double slope = -fit.exponent;
  CHECK(slope > -0.65);
  CHECK(slope < -0.35);
}

TEST_CASE("gap chain is monotone in the initial gap under shared maps") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(69, "coupled");
  for (int r = 0; r < 400; ++r) {
    RngStream s = rng.fork("rep", r);
    std::vector<double> pts{0.0, 2.0, 8.0};
    int tau2 = -1, tau8 = -1;
    for (int k = 1; k <= 400; ++k) {
      pts = push_points(model, pts, s);
      if (tau2 < 0 && pts[1] == pts[0]) tau2 = k;
      if (tau8 < 0 && pts[2] == pts[0]) tau8 = k;
      REQUIRE(pts[1] - pts[0] <= pts[2] - pts[0]);
      if (tau8 >= 0) break;
    }
    if (tau8 >= 0) REQUIRE(tau2 >= 0);
    if (tau2 >= 0 && tau8 >= 0) REQUIRE(tau2 <= tau8);
  }
}

TEST_CASE("rescaled transport: CLT marginal, order, coalescence trend") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(70, "rescaled");

  // W1 of the one-point marginal at n = 400 against the standard normal
  const int reps = 4000;
  std::vector<double> marginal(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream s = rng.fork("clt", r);
    marginal[r] = rescaled_transport(model, 400, {0.0}, s)[0];
  }
  CHECK(w1_to_standard_normal(marginal) < 0.05);

  // order preserved, and the gap-1 coalescence frequency converges to the
  // CBM value 2(1 - Phi(1/sqrt(2))) ~= 0.4795 (this model approaches it from
  // above: one-step ties boost small-n coalescence)
  const double cbm_value = 2.0 * (1.0 - norm_cdf(1.0 / std::sqrt(2.0)));
  double prev_gap_to_limit = 1.0;
  double final_freq = 0.0;
  for (int n : {16, 64, 256}) {
    int coalesced = 0;
    const int freq_reps = 3000;
    for (int r = 0; r < freq_reps; ++r) {
      RngStream s = rng.fork("freq" + std::to_string(n), r);
      const auto v = rescaled_transport(model, n, {0.0, 1.0}, s);
      REQUIRE(v[1] >= v[0]);
      if (v[0] == v[1]) ++coalesced;
    }
    final_freq = static_cast<double>(coalesced) / freq_reps;
    const double gap_to_limit = std::fabs(final_freq - cbm_value);
    CHECK(gap_to_limit < prev_gap_to_limit + 0.03);
    prev_gap_to_limit = gap_to_limit;
  }
  CHECK(std::fabs(final_freq - cbm_value) < 0.05);
}

TEST_CASE("single-point marginal variance is sigma^2 n") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(71, "variance");
  const int n = 256, reps = 30000;
  std::vector<double> terminal(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream s = rng.fork("rep", r);
    terminal[r] = crw_terminal(model, {0.0}, n, s)[0];
  }
  const MeanVar mv = mean_var(terminal);
  CHECK(std::fabs(mv.mean) < 3.5 * mv.stderr_mean);
  CHECK(mv.variance ==
        doctest::Approx(model.sigma2() * n).epsilon(0.03));
}

TEST_CASE("iterate-then-evaluate agrees with simulate_crw in distribution") {
  const MapModel model = MapModel::lattice_shuffle();
  RngStream rng = make_stream(72, "identity");
  const std::vector<double> grid{-2.0, 0.0, 3.0};
  const int n = 16, reps = 1500;
  std::vector<std::vector<double>> via_maps(reps), via_walk(reps);
  for (int r = 0; r < reps; ++r) {
    RngStream s1 = rng.fork("maps", r);
    const MonotoneStepMap m = iterate_maps(model, n, {-4.0, 4.0}, s1);
    via_maps[r] = {evaluate(m, grid[0]), evaluate(m, grid[1]),
                   evaluate(m, grid[2])};
    RngStream s2 = rng.fork("walk", r);
    via_walk[r] = crw_terminal(model, grid, n, s2);
  }
  RngStream perm = make_stream(72, "perm");
  CHECK(energy_test(via_maps, via_walk, perm) > 0.01);
}

TEST_SUITE_END();
