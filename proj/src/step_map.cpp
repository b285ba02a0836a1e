#include "coalflow/step_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"

namespace coalflow {

bool values_coalesced(double a, double b) {
  if (a == b) return true;
  const double scale = std::max(std::fabs(a), std::fabs(b));
  return std::fabs(a - b) <= MonotoneStepMap::kMergeRelTol * scale;
}

MonotoneStepMap make_map(const std::vector<double>& breakpoints,
                         const std::vector<double>& values, Window window) {
  if (breakpoints.size() < 2 || values.size() + 1 != breakpoints.size()) {
    throw NonMonotoneInput("make_map: need n+1 breakpoints for n >= 1 cells");
  }
  for (std::size_t i = 1; i < breakpoints.size(); ++i) {
    if (!(breakpoints[i - 1] < breakpoints[i])) {
      throw NonMonotoneInput("make_map: breakpoints not strictly increasing");
    }
  }
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[i - 1]) {
      throw NonMonotoneInput("make_map: values decrease");
    }
  }
  if (breakpoints.front() != window.lo || breakpoints.back() != window.hi) {
    throw WindowMismatch("make_map: window ends do not match breakpoints");
  }

  MonotoneStepMap m;
  m.breaks_.reserve(breakpoints.size());
  m.values_.reserve(values.size());
  m.breaks_.push_back(breakpoints.front());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!m.values_.empty() && values_coalesced(m.values_.back(), values[i])) {
      m.breaks_.back() = breakpoints[i + 1];  // extend the merged cell
    } else {
      m.values_.push_back(values[i]);
      m.breaks_.push_back(breakpoints[i + 1]);
    }
  }
  return m;
}

namespace {

// Index of the cell containing x, assuming x inside the window.
std::size_t cell_index(const MonotoneStepMap& m, double x) {
  const auto& b = m.breakpoints();
  // right-continuous: cell i covers [b[i], b[i+1]); hi belongs to last cell
  auto it = std::upper_bound(b.begin(), b.end(), x);
  std::size_t i = static_cast<std::size_t>(it - b.begin());
  if (i == 0) i = 1;                       // x == lo
  if (i == b.size()) i = b.size() - 1;     // x == hi
  return i - 1;
}

}  // namespace

double evaluate(const MonotoneStepMap& m, double x) {
  if (m.empty()) throw OutOfWindow("evaluate: empty map");
  const Window w = m.window();
  if (!(w.lo <= x && x <= w.hi)) {
    throw OutOfWindow("evaluate: x outside validity window");
  }
  return m.values()[cell_index(m, x)];
}

double evaluate_clamped(const MonotoneStepMap& m, double x) {
  const Window w = m.window();
  return m.values()[cell_index(m, std::clamp(x, w.lo, w.hi))];
}

double evaluate_snapped(const MonotoneStepMap& m, double x, double rel_tol) {
  const Window w = m.window();
  const double slack = rel_tol * std::max(1.0, std::fabs(x));
  if (x < w.lo - slack || x > w.hi + slack) {
    throw OutOfWindow("evaluate_snapped: x outside validity window");
  }
  const double clamped = std::clamp(x, w.lo, w.hi);
  const auto& b = m.breakpoints();
  std::size_t idx = cell_index(m, clamped);
  // a right-continuous boundary owns its cell: x within slack below b[idx+1]
  // means the intended argument was the boundary itself
  if (idx + 1 < m.cell_count() && b[idx + 1] - clamped <= slack) ++idx;
  return m.values()[idx];
}

MonotoneStepMap compose(const MonotoneStepMap& g, const MonotoneStepMap& f) {
  const Window gw = g.window();
  if (f.min_value() < gw.lo || f.max_value() > gw.hi) {
    throw RangeEscapesWindow("compose: value of f escapes g's window");
  }
  std::vector<double> vals(f.cell_count());
  for (std::size_t i = 0; i < f.cell_count(); ++i) {
    vals[i] = g.values()[cell_index(g, f.values()[i])];
  }
  return make_map(f.breakpoints(), vals, f.window());
}

MonotoneStepMap rescale(const MonotoneStepMap& m, double s) {
  if (!(s > 0.0)) throw NonPositiveScale("rescale: scale must be positive");
  if (s == 1.0) return m;
  std::vector<double> b(m.breakpoints()), v(m.values());
  for (auto& x : b) x /= s;
  for (auto& x : v) x /= s;
  return make_map(b, v, {b.front(), b.back()});
}

std::vector<double> image_points(const MonotoneStepMap& m) {
  return m.values();  // already distinct and increasing after merge
}

MonotoneStepMap restrict_map(const MonotoneStepMap& m, Window sub) {
  if (!m.window().contains(sub) || !(sub.lo < sub.hi)) {
    throw WindowMismatch("restrict_map: subwindow not inside map window");
  }
  const auto& b = m.breakpoints();
  const std::size_t first = cell_index(m, sub.lo);
  std::size_t last = cell_index(m, sub.hi);
  if (b[last] == sub.hi && last > first) --last;  // hi on a boundary: cell ends there
  std::vector<double> nb, nv;
  nb.push_back(sub.lo);
  for (std::size_t i = first; i <= last; ++i) {
    nv.push_back(m.values()[i]);
    nb.push_back(std::min(b[i + 1], sub.hi));
  }
  nb.back() = sub.hi;
  return make_map(nb, nv, sub);
}

MonotoneStepMap clamp_values(const MonotoneStepMap& m, double bound) {
  std::vector<double> v(m.values());
  for (auto& x : v) x = std::clamp(x, -bound, bound);
  return make_map(m.breakpoints(), v, m.window());
}

Window widest_preimage(const MonotoneStepMap& m, double value_lo,
                       double value_hi) {
  const auto& v = m.values();
  std::size_t first = 0, last = v.size();
  while (first < v.size() && v[first] < value_lo) ++first;
  while (last > first && v[last - 1] > value_hi) --last;
  if (first >= last) {
    throw WindowExhausted("widest_preimage: no cell maps into range");
  }
  return {m.breakpoints()[first], m.breakpoints()[last]};
}

MonotoneStepMap map_from_vector(const std::vector<double>& grid,
                                const std::vector<double>& values) {
  if (grid.size() != values.size() || grid.size() < 2) {
    throw ShapeMismatch("map_from_vector: need matching grid/values, n >= 2");
  }
  std::vector<double> b(grid);
  std::vector<double> v(values);
  if (values_coalesced(v[v.size() - 2], v.back())) {
    v.pop_back();  // final point joins the last cell
  } else {
    b.push_back(grid.back() + (grid.back() - grid.front()) /
                                  static_cast<double>(grid.size() - 1));
  }
  return make_map(b, v, {b.front(), b.back()});
}

namespace {

// Feasibility of a given eps in the Levy distance definition, decided exactly
// on the merged breakpoint set.  Both maps are extended beyond their common
// window by their boundary values (clamped argument), and the condition is
// imposed in both orders; on the full line the two orders are equivalent, and
// the symmetric windowed form keeps the metric axioms exact (the triangle
// inequality survives clamping because the maps are monotone).
bool levy_feasible(const MonotoneStepMap& f, const MonotoneStepMap& g,
                   double eps) {
  const Window w = f.window();
  std::vector<double> xs;
  xs.reserve(3 * (f.breakpoints().size() + g.breakpoints().size()) + 2);
  xs.push_back(w.lo);
  xs.push_back(w.hi);
  for (const auto* m : {&f, &g}) {
    for (double b : m->breakpoints()) {
      for (double x : {b, b - eps, b + eps}) {
        if (x > w.lo && x < w.hi) xs.push_back(x);
      }
    }
  }
  for (double x : xs) {
    const double gx = evaluate_clamped(g, x);
    const double fx = evaluate_clamped(f, x);
    if (gx > evaluate_clamped(f, x + eps) + eps) return false;
    if (gx < evaluate_clamped(f, x - eps) - eps) return false;
    if (fx > evaluate_clamped(g, x + eps) + eps) return false;
    if (fx < evaluate_clamped(g, x - eps) - eps) return false;
  }
  return true;
}

}  // namespace

double levy_tilde(const MonotoneStepMap& f, const MonotoneStepMap& g,
                  double bound, double eps_tol) {
  if (!(f.window() == g.window())) {
    throw WindowMismatch("levy_tilde: maps live on different windows");
  }
  if (!(eps_tol > 0.0) || !(bound > 0.0)) {
    throw BadParams("levy_tilde: bound and eps_tol must be positive");
  }
  const MonotoneStepMap fc = clamp_values(f, bound);
  const MonotoneStepMap gc = clamp_values(g, bound);
  if (levy_feasible(fc, gc, 0.0)) return 0.0;
  double lo = 0.0, hi = 2.0 * bound;  // eps = 2B is always feasible
  while (hi - lo > eps_tol) {
    const double mid = 0.5 * (lo + hi);
    (levy_feasible(fc, gc, mid) ? hi : lo) = mid;
  }
  return hi;  // feasible, within eps_tol of the infimum
}

LevyMetricResult levy_metric(const MonotoneStepMap& f,
                             const MonotoneStepMap& g,
                             const LevyMetricParams& params) {
  if (params.b_max < 1 || !(params.eps_tol > 0.0)) {
    throw BadParams("levy_metric: b_max >= 1 and eps_tol > 0 required");
  }
  const double vmax =
      std::max({std::fabs(f.min_value()), std::fabs(f.max_value()),
                std::fabs(g.min_value()), std::fabs(g.max_value())});
  LevyMetricResult r;
  r.tail_bound = std::pow(2.0, -params.b_max);
  double weight = 1.0;
  double saturated = -1.0;  // clamp is a no-op once bound >= vmax
  for (int b = 1; b <= params.b_max; ++b) {
    weight *= 0.5;
    double term;
    if (saturated >= 0.0) {
      term = saturated;
    } else {
      term = std::min(levy_tilde(f, g, static_cast<double>(b), params.eps_tol),
                      1.0);
      if (static_cast<double>(b) >= vmax) saturated = term;
    }
    r.value += weight * term;
  }
  return r;
}

namespace {

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string map_to_csv(const MonotoneStepMap& m) {
  std::string out = "lo,hi,value\n";
  for (std::size_t i = 0; i < m.cell_count(); ++i) {
    out += fmt_double(m.breakpoints()[i]);
    out += ',';
    out += fmt_double(m.breakpoints()[i + 1]);
    out += ',';
    out += fmt_double(m.values()[i]);
    out += '\n';
  }
  return out;
}

MonotoneStepMap map_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // header
  std::vector<double> breaks, vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    double lo, hi, v;
    if (std::sscanf(line.c_str(), "%lg,%lg,%lg", &lo, &hi, &v) != 3) {
      throw ShapeMismatch("map_from_csv: bad row: " + line);
    }
    if (breaks.empty()) breaks.push_back(lo);
    breaks.push_back(hi);
    vals.push_back(v);
  }
  if (vals.empty()) throw ShapeMismatch("map_from_csv: no cells");
  return make_map(breaks, vals, {breaks.front(), breaks.back()});
}

std::string map_to_json(const MonotoneStepMap& m) {
  nlohmann::json j;
  j["window"] = {m.window().lo, m.window().hi};
  j["breakpoints"] = m.breakpoints();
  j["values"] = m.values();
  return j.dump();
}

MonotoneStepMap map_from_json(const std::string& json) {
  const auto j = nlohmann::json::parse(json);
  std::vector<double> b = j.at("breakpoints").get<std::vector<double>>();
  std::vector<double> v = j.at("values").get<std::vector<double>>();
  Window w{j.at("window")[0].get<double>(), j.at("window")[1].get<double>()};
  return make_map(b, v, w);
}

}  // namespace coalflow
