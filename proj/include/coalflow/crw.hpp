#pragma once

#include <optional>
#include <vector>

#include "coalflow/map_model.hpp"
#include "coalflow/rng.hpp"
#include "coalflow/step_map.hpp"

namespace coalflow {

// Composition of n freshly sampled maps, materialized as a step map exact on
// `window`.  Each step samples the next map on the (cell-aligned) range of
// current values, so composition never escapes a window.  Cost grows with
// n * window size; trajectory work should use simulate_crw instead.
MonotoneStepMap iterate_maps(const MapModel& model, int n, Window window,
                             RngStream& rng);

// m-point coalescing random walk trajectories: positions of the starting
// points pushed through the same sampled map at every step.
struct DiscretePathBundle {
  std::vector<double> starts;
  std::vector<std::vector<double>> positions;  // [step][particle], step 0 = starts
  int steps() const { return static_cast<int>(positions.size()) - 1; }
};

DiscretePathBundle simulate_crw(const MapModel& model,
                                const std::vector<double>& starts, int n,
                                RngStream& rng);

// Terminal positions only.
std::vector<double> crw_terminal(const MapModel& model,
                                 const std::vector<double>& starts, int n,
                                 RngStream& rng);

// Gap Markov chain X_k = Psi_{k,0}(x0) - Psi_{k,0}(0) >= 0, absorbing at 0.
// States are recorded until absorption or n_max, whichever is first.
struct GapChain {
  std::vector<double> states;  // X_0 .. X_{last recorded}
  bool absorbed = false;       // last recorded state is 0
  int n_max = 0;

  double state_at(int k) const;               // 0 beyond absorption
  std::optional<int> hit_index(double h) const;  // first k with X_k <= h
};

GapChain gap_chain(const MapModel& model, double x0, int n_max,
                   RngStream& rng);

// Diffusively rescaled transport map values on a grid:
//   (sigma^2 n)^(-1/2) * Psi_{n,0}((sigma^2 n)^(1/2) * y_i),
// using the model's recorded sigma^2 in place of the unit normalization.
std::vector<double> rescaled_transport(const MapModel& model, int n,
                                       const std::vector<double>& grid,
                                       RngStream& rng);

}  // namespace coalflow
