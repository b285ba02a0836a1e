#include "coalflow/crw.hpp"

#include <algorithm>
#include <cmath>

#include "coalflow/errors.hpp"

namespace coalflow {

MonotoneStepMap iterate_maps(const MapModel& model, int n, Window window,
                             RngStream& rng) {
  if (n < 1) throw BadParams("iterate_maps: n >= 1");
  MonotoneStepMap composed = sample_map(model, window, rng);
  for (int k = 1; k < n; ++k) {
    const Window value_range{composed.min_value() - 1.0,
                             composed.max_value() + 1.0};
    const MonotoneStepMap next = sample_map(model, value_range, rng);
    composed = compose(next, composed);
  }
  return composed;
}

DiscretePathBundle simulate_crw(const MapModel& model,
                                const std::vector<double>& starts, int n,
                                RngStream& rng) {
  if (n < 0) throw BadParams("simulate_crw: n >= 0");
  DiscretePathBundle b;
  b.starts = starts;
  b.positions.reserve(n + 1);
  b.positions.push_back(starts);
  std::vector<double> pts = starts;
  for (int k = 0; k < n; ++k) {
    pts = push_points(model, pts, rng);
    b.positions.push_back(pts);
  }
  return b;
}

std::vector<double> crw_terminal(const MapModel& model,
                                 const std::vector<double>& starts, int n,
                                 RngStream& rng) {
  std::vector<double> pts = starts;
  for (int k = 0; k < n; ++k) pts = push_points(model, pts, rng);
  return pts;
}

double GapChain::state_at(int k) const {
  if (k < static_cast<int>(states.size())) return states[k];
  return absorbed ? 0.0 : states.back();
}

std::optional<int> GapChain::hit_index(double h) const {
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k] <= h) return static_cast<int>(k);
  }
  return std::nullopt;
}

GapChain gap_chain(const MapModel& model, double x0, int n_max,
                   RngStream& rng) {
  if (x0 < 0.0) throw BadParams("gap_chain: x0 >= 0");
  GapChain chain;
  chain.n_max = n_max;
  chain.states.push_back(x0);
  std::vector<double> pts{0.0, x0};
  for (int k = 0; k < n_max && pts[0] != pts[1]; ++k) {
    pts = push_points(model, pts, rng);
    chain.states.push_back(pts[1] - pts[0]);
  }
  chain.absorbed = chain.states.back() == 0.0;
  return chain;
}

std::vector<double> rescaled_transport(const MapModel& model, int n,
                                       const std::vector<double>& grid,
                                       RngStream& rng) {
  if (n < 1) throw BadParams("rescaled_transport: n >= 1");
  const double scale = std::sqrt(model.sigma2() * n);
  std::vector<double> starts(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) starts[i] = scale * grid[i];
  std::vector<double> terminal = crw_terminal(model, starts, n, rng);
  for (auto& v : terminal) v /= scale;
  return terminal;
}

}  // namespace coalflow
