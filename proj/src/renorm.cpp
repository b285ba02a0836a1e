#include "coalflow/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coalflow/cbm.hpp"
#include "coalflow/errors.hpp"

namespace coalflow {

MapEnsemble model_generation0(const MapModel& model, Window window,
                              std::size_t size, RngStream& rng) {
  MapEnsemble e;
  e.generation = 0;
  e.provenance = model.name();
  e.samples.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    RngStream s = rng.fork("gen0", i);
    e.samples.push_back(sample_map(model, window, s));
  }
  e.window = e.samples.front().window();
  return e;
}

MapEnsemble renormalize_once(const MapEnsemble& ensemble, RngStream& rng) {
  const std::size_t n = ensemble.samples.size();
  if (n < 2 || n % 2 != 0) {
    throw OddEnsemble("renormalize_once: ensemble size must be even, >= 2");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);

  const double root2 = std::sqrt(2.0);
  MapEnsemble out;
  out.generation = ensemble.generation + 1;
  out.provenance = ensemble.provenance;
  out.samples.reserve(n / 2);
  Window common{-1e300, 1e300};
  for (std::size_t p = 0; p < n; p += 2) {
    const MonotoneStepMap& f = ensemble.samples[order[p]];
    const MonotoneStepMap& g = ensemble.samples[order[p + 1]];
    const Window gw = g.window();
    Window usable;
    try {
      usable = widest_preimage(f, gw.lo, gw.hi);
    } catch (const WindowExhausted&) {
      throw WindowExhausted(
          "renormalize_once: no subwindow of f maps into g's window");
    }
    const MonotoneStepMap composed = compose(g, restrict_map(f, usable));
    const MonotoneStepMap scaled = rescale(composed, root2);
    common.lo = std::max(common.lo, scaled.window().lo);
    common.hi = std::min(common.hi, scaled.window().hi);
    out.samples.push_back(scaled);
  }
  if (!(common.lo < common.hi)) {
    throw WindowExhausted("renormalize_once: common window is empty");
  }
  for (auto& m : out.samples) m = restrict_map(m, common);
  out.window = common;
  return out;
}

std::vector<std::vector<double>> cbm_reference_ensemble(
    const std::vector<double>& grid, double T, double dt, std::size_t size,
    RngStream& rng) {
  std::vector<std::vector<double>> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    RngStream s = rng.fork("cbm-ref", i);
    out.push_back(transport_map_sample(grid, T, dt, s));
  }
  return out;
}

std::vector<std::vector<double>> renormalize_reference(
    const std::vector<double>& grid, double T, double dt, std::size_t size,
    RngStream& rng) {
  const double root2 = std::sqrt(2.0);
  std::vector<double> scaled_grid(grid);
  for (auto& y : scaled_grid) y *= root2;
  std::vector<std::vector<double>> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) {
    RngStream sf = rng.fork("renorm-ref-f", i);
    RngStream sg = rng.fork("renorm-ref-g", i);
    const std::vector<double> f = transport_map_sample(scaled_grid, T, dt, sf);
    std::vector<double> distinct(f);
    distinct.erase(std::unique(distinct.begin(), distinct.end()),
                   distinct.end());
    const std::vector<double> g = transport_map_sample(distinct, T, dt, sg);
    std::vector<double> composed(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      const std::size_t pos = static_cast<std::size_t>(
          std::lower_bound(distinct.begin(), distinct.end(), f[k]) -
          distinct.begin());
      composed[k] = g[pos] / root2;
    }
    out.push_back(std::move(composed));
  }
  return out;
}

double required_gen0_halfwidth(const MapModel& model, int generations,
                               const std::vector<double>& grid) {
  double span = 0.0;
  for (double y : grid) span = std::max(span, std::fabs(y));
  // Final window must cover the grid in the sigma-hat view.  Going back
  // through the flow, each generation multiplies the needed half-width by
  // sqrt(2) and loses a slack for the value wander of a generation-k map,
  // which is O(sigma) in its own rescaled coordinates (a 2^k-step walk shrunk
  // by 2^(-k/2)), plus cell alignment.
  double half =
      span * std::max(model.sigma_hat(), 1.0 / model.sigma_hat()) + 2.0;
  const double wander = 6.0 * model.sigma_hat() + 2.0;
  for (int k = 0; k < generations; ++k) {
    half = half * std::sqrt(2.0) + wander;
  }
  return half;
}

std::vector<std::vector<double>> ensemble_grid_view(
    const MapEnsemble& e, const std::vector<double>& grid, double sigma_hat) {
  // A generation-m map is the pure-R rescaling 2^(-m/2) Psi(2^(m/2) x);
  // evaluating map(sigma y) / sigma converts to the sigma-hat-normalized
  // diffusive scale used by rescaled_transport, so the fixed point is the
  // time-1 CBM transport map.
  std::vector<std::vector<double>> out;
  out.reserve(e.samples.size());
  for (const auto& m : e.samples) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double x = grid[i] * sigma_hat;
      if (!m.window().contains(x)) {
        throw WindowExhausted("ensemble_grid_view: window lost the grid");
      }
      // snapped evaluation: rescaled lattice breakpoints and the grid
      // position are computed through different floating routes
      v[i] = evaluate_snapped(m, x) / sigma_hat;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<GenerationDiagnostics> renorm_flow(
    const MapModel& model, int generations, std::size_t ensemble_size,
    const std::vector<double>& grid, std::size_t reference_size,
    double reference_dt, RngStream& rng) {
  if (generations < 0) throw BadParams("renorm_flow: generations >= 0");
  const std::size_t need = ensemble_size << generations;
  const double half = required_gen0_halfwidth(model, generations, grid);
  RngStream gen_rng = rng.fork("gen0-ensemble");
  MapEnsemble current =
      model_generation0(model, {-half, half}, need, gen_rng);

  RngStream ref_rng = rng.fork("reference");
  const auto reference =
      cbm_reference_ensemble(grid, 1.0, reference_dt, reference_size, ref_rng);

  std::vector<GenerationDiagnostics> out;
  RngStream boot_rng = rng.fork("bootstrap");
  for (int gen = 0; gen <= generations; ++gen) {
    const auto view = ensemble_grid_view(current, grid, model.sigma_hat());
    GenerationDiagnostics gd;
    gd.generation = gen;
    gd.ensemble_size = current.samples.size();
    gd.diagnostics = ensemble_diagnostics(view, reference, boot_rng);
    out.push_back(std::move(gd));
    if (gen < generations) {
      RngStream pair_rng = rng.fork("pairing", gen);
      current = renormalize_once(current, pair_rng);
    }
  }
  return out;
}

}  // namespace coalflow
