#pragma once

#include <string>
#include <vector>

#include "coalflow/map_model.hpp"
#include "coalflow/rng.hpp"
#include "coalflow/stats.hpp"
#include "coalflow/step_map.hpp"

namespace coalflow {

struct MapEnsemble {
  std::vector<MonotoneStepMap> samples;  // common window
  Window window;
  int generation = 0;  // number of renormalization steps applied
  std::string provenance;
};

// Generation-0 ensemble: i.i.d. one-step maps on a common window.
MapEnsemble model_generation0(const MapModel& model, Window window,
                              std::size_t size, RngStream& rng);

// One renormalization step: a uniformly random disjoint pairing; each pair
// (f, g) becomes rescale(compose(g, f), sqrt(2)).  Before composing, f is
// restricted to the widest subwindow whose values stay inside g's window; the
// output ensemble is restricted to the common window across pairs.  The
// ensemble size halves.  Throws OddEnsemble / WindowExhausted.
MapEnsemble renormalize_once(const MapEnsemble& ensemble, RngStream& rng);

// CBM transport-map vectors on a grid at time T: the reference (fixed-point)
// ensemble for the diagnostics.
std::vector<std::vector<double>> cbm_reference_ensemble(
    const std::vector<double>& grid, double T, double dt, std::size_t size,
    RngStream& rng);

// One renormalization step applied to the CBM transport law itself, via fresh
// independent CBM draws: f sampled at sqrt(2) * grid, g sampled at f's image
// points, composed and divided by sqrt(2).  By Brownian scaling this has
// exactly the law of the reference ensemble; the fixed-point test compares
// the two.
std::vector<std::vector<double>> renormalize_reference(
    const std::vector<double>& grid, double T, double dt, std::size_t size,
    RngStream& rng);

// Generation-0 half-width needed so that `generations` renormalization steps
// keep every map defined on the evaluation grid (sigma-hat view included).
double required_gen0_halfwidth(const MapModel& model, int generations,
                               const std::vector<double>& grid);

// Evaluation of a generation ensemble on the grid in the sigma-hat view:
// sigma * map(y / sigma), which matches the time-1 CBM normalization used by
// rescaled_transport.  Throws WindowExhausted when the window cannot cover
// the grid.
std::vector<std::vector<double>> ensemble_grid_view(const MapEnsemble& e,
                                                    const std::vector<double>& grid,
                                                    double sigma_hat);

struct GenerationDiagnostics {
  int generation = 0;
  std::size_t ensemble_size = 0;
  std::vector<Diagnostic> diagnostics;
};

// Renormalization flow: applies R `generations` times to a generation-0
// ensemble and reports the finite-dimensional discrepancy diagnostics against
// a CBM reference ensemble at every generation (generation 0 included).
std::vector<GenerationDiagnostics> renorm_flow(
    const MapModel& model, int generations, std::size_t ensemble_size,
    const std::vector<double>& grid, std::size_t reference_size,
    double reference_dt, RngStream& rng);

}  // namespace coalflow
