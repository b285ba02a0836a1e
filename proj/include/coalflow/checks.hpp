#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coalflow/map_model.hpp"
#include "coalflow/rng.hpp"

namespace coalflow {

enum class BoundSide { kUpper, kLower };

// Statistical check of a theoretical bound.  The verdict is a pure function
// of (empirical_value, stderr, theoretical_bound, side) with a fixed 3-sigma
// margin; everything else is reporting.
struct BoundCheckReport {
  std::string name;
  BoundSide side = BoundSide::kUpper;
  double theoretical_bound = 0.0;
  double empirical_value = 0.0;
  double stderr_value = 0.0;
  bool passed = false;
  std::string detail;
  std::vector<std::pair<std::string, double>> extras;

  static bool verdict(BoundSide side, double empirical, double bound,
                      double stderr_value) {
    return side == BoundSide::kUpper
               ? empirical <= bound + 3.0 * stderr_value
               : empirical >= bound - 3.0 * stderr_value;
  }

  double extra(const std::string& key) const;
  std::string to_json() const;
};

std::string reports_to_json(const std::vector<BoundCheckReport>& reports);

// Brownian passage-time / maximum bounds, with exact reflection values
// recorded in extras ("exact").  Hitting is detected on a fine grid with the
// Brownian-bridge crossing correction.  Returns two reports:
//   [0] P(tau_a >= T)  <= sqrt(2/pi) a / sqrt(nu T)
//   [1] P(B*_T >= a)   <= sqrt(2/pi) (sqrt(nu T)/a) exp(-a^2 / (2 nu T))
std::vector<BoundCheckReport> reflection_check(double a, double T, double nu,
                                               std::size_t reps,
                                               RngStream& rng,
                                               double dt = 1e-4);

// Gap-chain absorption tail: fits the constant on the smallest horizon and
// verifies P(tau_0 > T) <= C x0^(2 p0) / T^p on the held-out horizons.
// The fitted log-log slope of the tail is recorded in extras ("slope").
BoundCheckReport gap_tail_check(const MapModel& model, double x0,
                                const std::vector<int>& T_grid, double p,
                                double p0, std::size_t reps, RngStream& rng);

// Maximal displacement of the single-point walk: envelope
// C (sqrt(n)/M exp(-M^2/18n) + n^-p), C fitted on the smallest M.
BoundCheckReport displacement_check(const MapModel& model, int n,
                                    const std::vector<double>& M_grid,
                                    std::size_t reps, RngStream& rng);

// Separation of the two collision times of three coalescing Brownian
// particles started at (0, 1, 2): estimates P(|tau_- - tau_+| < a) over
// a_grid and requires its log-log slope to be at least p - 0.1.  The
// probability for each a is estimated conditionally on the first collision:
// given the surviving gap g at that moment, the second collision happens
// within time a with probability 2 (1 - Phi(g / sqrt(2a))).
BoundCheckReport three_particle_check(const std::vector<double>& a_grid,
                                      double p, std::size_t reps, double dt,
                                      RngStream& rng);

// Lyapunov drift of the gap chain: conditional mean of
// X_{k+1}^{2 p0} - X_k^{2 p0} given X_k = x, estimated per bin over
// x in (A, 40], must be <= 0 within 3 stderr in every bin.  A common lambda
// fitting the -lambda x^(2 p0 - 2) envelope over the significantly negative
// bins is recorded in extras ("lambda").
BoundCheckReport drift_condition_check(const MapModel& model, double p0,
                                       double A, std::size_t reps_per_bin,
                                       RngStream& rng);

}  // namespace coalflow
