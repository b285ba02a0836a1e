#pragma once

#include <string>
#include <vector>

#include "coalflow/errors.hpp"

namespace coalflow {

struct Window {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double x) const { return lo <= x && x <= hi; }
  bool contains(const Window& w) const { return lo <= w.lo && w.hi <= hi; }
  bool operator==(const Window& o) const { return lo == o.lo && hi == o.hi; }
};

// A nondecreasing step function on a finite validity window.
//
// Cells are [breaks[i], breaks[i+1]) carrying value values[i]; the first and
// last breakpoints coincide with the window ends.  Evaluation is
// right-continuous at breakpoints; the window's right end belongs to the last
// cell.  Adjacent cells with equal values are merged at construction: exact
// equality for lattice-valued maps, and a relative tolerance of 1e-12
// otherwise.  Coalescence of continuous-valued maps only arises through
// composition (two cells landing in one cell of the outer map), which
// produces exactly equal values, so the tolerance never decides anything
// there.
//
// Instances are immutable after construction and safe to share across
// threads; every operation below is a pure function.
class MonotoneStepMap {
 public:
  MonotoneStepMap() = default;

  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }
  Window window() const { return {breaks_.front(), breaks_.back()}; }
  std::size_t cell_count() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double min_value() const { return values_.front(); }
  double max_value() const { return values_.back(); }

  bool operator==(const MonotoneStepMap& o) const {
    return breaks_ == o.breaks_ && values_ == o.values_;
  }

  static constexpr double kMergeRelTol = 1e-12;

 private:
  friend MonotoneStepMap make_map(const std::vector<double>&,
                                  const std::vector<double>&, Window);
  std::vector<double> breaks_;  // size cells + 1, strictly increasing
  std::vector<double> values_;  // nondecreasing, adjacent values distinct
};

// Values treated as one cell when exactly equal or within relative 1e-12.
bool values_coalesced(double a, double b);

// Constructs a normalized map.  `breakpoints` must be strictly increasing and
// span exactly `window`; `values` (one per cell) must be nondecreasing.
// Throws NonMonotoneInput or WindowMismatch.
MonotoneStepMap make_map(const std::vector<double>& breakpoints,
                         const std::vector<double>& values, Window window);

// Value of the cell containing x; right-continuous at breakpoints.
// Throws OutOfWindow for x outside the window.
double evaluate(const MonotoneStepMap& m, double x);

// Evaluation with the argument clamped into the window.  Used where the Levy
// metric needs the canonical constant extension beyond the window.
double evaluate_clamped(const MonotoneStepMap& m, double x);

// Evaluation with the argument snapped to a breakpoint within relative
// tolerance.  Rescaled lattice maps carry breakpoints like k / sqrt(2)^m;
// a grid position computed through a different floating route can land one
// ulp to the wrong side of such a boundary, and snapping restores the
// right-continuous convention there.  Throws OutOfWindow.
double evaluate_snapped(const MonotoneStepMap& m, double x,
                        double rel_tol = 1e-12);

// (g o f)(x) = g(f(x)).  Result breakpoints are a subset of f's; merging of
// equal values is how coalescence appears at the map level.  Every value of f
// must lie inside g's window, otherwise RangeEscapesWindow.
MonotoneStepMap compose(const MonotoneStepMap& g, const MonotoneStepMap& f);

// Diffusive-type rescaling: result(x) = map(s * x) / s, window scaled by 1/s.
// Throws NonPositiveScale.
MonotoneStepMap rescale(const MonotoneStepMap& m, double s);

// Distinct cell values in increasing order (the image point set).
std::vector<double> image_points(const MonotoneStepMap& m);

// Restriction to a subwindow (cells clipped). Throws WindowMismatch when sub
// is not contained in the map's window.
MonotoneStepMap restrict_map(const MonotoneStepMap& m, Window sub);

// Cutoff map: values clamped to [-bound, bound], then re-merged.
MonotoneStepMap clamp_values(const MonotoneStepMap& m, double bound);

// Largest subwindow on which all of m's values lie in [value_lo, value_hi].
// Throws WindowExhausted when no cell qualifies.
Window widest_preimage(const MonotoneStepMap& m, double value_lo,
                       double value_hi);

// Step map induced by a monotone vector sample on a grid: cells
// [grid[i], grid[i+1]) with value values[i]; the last grid point closes the
// window.  Requires grid strictly increasing and values nondecreasing, with
// values.size() == grid.size(); the final value is absorbed into the last
// cell when it equals values[n-2], otherwise a terminal half-cell is added.
MonotoneStepMap map_from_vector(const std::vector<double>& grid,
                                const std::vector<double>& values);

struct LevyMetricParams {
  int b_max = 30;         // series truncation index; tail <= 2^-b_max
  double eps_tol = 1e-9;  // bisection tolerance for each Levy distance
};

// Levy distance between two step maps sharing a window, after clamping both
// through the cutoff at `bound`:
//   inf { eps > 0 : f(x-eps)-eps <= g(x) <= f(x+eps)+eps  for all x }.
// Feasibility of a given eps is decided exactly by scanning the merged
// breakpoint set, so the bisection brackets the infimum to within eps_tol;
// the returned value is feasible.  Throws WindowMismatch.
double levy_tilde(const MonotoneStepMap& f, const MonotoneStepMap& g,
                  double bound, double eps_tol = 1e-9);

struct LevyMetricResult {
  double value = 0.0;       // truncated series
  double tail_bound = 0.0;  // guaranteed truncation error, 2^-b_max
};

// Generalized Levy metric: sum over B = 1..b_max of
//   min(levy_tilde(clamp_B f, clamp_B g), 1) / 2^B.
LevyMetricResult levy_metric(const MonotoneStepMap& f,
                             const MonotoneStepMap& g,
                             const LevyMetricParams& params = {});

// Serialization.  CSV has one cell per row: lo,hi,value.  Both forms
// round-trip bit-exactly.
std::string map_to_csv(const MonotoneStepMap& m);
MonotoneStepMap map_from_csv(const std::string& csv);
std::string map_to_json(const MonotoneStepMap& m);
MonotoneStepMap map_from_json(const std::string& json);

}  // namespace coalflow
