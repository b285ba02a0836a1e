#include "coalflow/map_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "coalflow/stats.hpp"

namespace coalflow {

namespace {

double draw_jump(const MapModel& model, RngStream& rng) {
  if (model.kind() == ModelKind::kLatticeShuffle) {
    return rng.bernoulli(0.5 * (1.0 + model.bias())) ? 1.0 : -1.0;
  }
  const double r = model.jump_bound();
  return rng.uniform(-r, r) + model.bias();
}

constexpr std::uint64_t kPsiLawCalibrationSeed = 0x1d872f6aUL;

}  // namespace

MapModel MapModel::lattice_shuffle(double bias) {
  MapModel m;
  m.kind_ = ModelKind::kLatticeShuffle;
  m.bias_ = bias;
  m.jump_bound_ = 1.0;
  m.sort_radius_ = 3;  // 2L + 1
  m.halo_ = 5;         // ceil(2L + 3): interior assignments are exact
  const PsiLaw law = exact_psi_law(m);
  m.sigma2_ = law.variance;
  m.sigma2_exact_ = true;
  return m;
}

MapModel MapModel::continuous_shift(double bias) {
  MapModel m;
  m.kind_ = ModelKind::kContinuousShift;
  m.bias_ = bias;
  m.jump_bound_ = std::sqrt(3.0);  // unit-variance uniform jumps
  m.sort_radius_ = 5;              // ceil(2L + 1)
  m.halo_ = 7;                     // ceil(2L + 3)
  const PsiLaw law = exact_psi_law(m);
  m.sigma2_ = law.variance;
  m.sigma2_exact_ = false;
  return m;
}

double MapModel::sigma_hat() const { return std::sqrt(sigma2_); }

std::string MapModel::name() const {
  std::string n = kind_ == ModelKind::kLatticeShuffle ? "lattice_shuffle"
                                                      : "continuous_shift";
  if (bias_ != 0.0) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%s(bias=%g)", n.c_str(), bias_);
    return buf;
  }
  return n;
}

std::vector<double> sorted_assignment(std::vector<double> proposals) {
  std::sort(proposals.begin(), proposals.end());
  return proposals;
}

MonotoneStepMap sample_map(const MapModel& model, Window window,
                           RngStream& rng) {
  const long c_lo = static_cast<long>(std::floor(window.lo));
  const long c_hi = static_cast<long>(std::ceil(window.hi));
  if (c_hi - c_lo < 2) {
    throw WindowTooSmall("sample_map: window must span at least 2 cells");
  }
  const long lo = c_lo - model.halo();
  const long hi = c_hi + model.halo();
  std::vector<double> proposals;
  proposals.reserve(hi - lo);
  for (long k = lo; k < hi; ++k) {
    proposals.push_back(static_cast<double>(k) + draw_jump(model, rng));
  }
  const std::vector<double> assigned = sorted_assignment(std::move(proposals));
  std::vector<double> breaks, values;
  breaks.reserve(c_hi - c_lo + 1);
  values.reserve(c_hi - c_lo);
  for (long k = c_lo; k <= c_hi; ++k) breaks.push_back(static_cast<double>(k));
  for (long k = c_lo; k < c_hi; ++k) values.push_back(assigned[k - lo]);
  return make_map(breaks, values, {breaks.front(), breaks.back()});
}

std::vector<double> push_points(const MapModel& model,
                                const std::vector<double>& points,
                                RngStream& rng) {
  if (points.empty()) return {};
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i] < points[i - 1]) {
      throw UnorderedStarts("push_points: points must be nondecreasing");
    }
  }
  const int halo = model.halo();
  // Maximal runs of points whose halo cell ranges overlap share one draw.
  std::vector<double> out(points.size());
  std::size_t i = 0;
  std::vector<double> proposals;
  while (i < points.size()) {
    std::size_t j = i;
    long lo = static_cast<long>(std::floor(points[i])) - halo;
    long hi = static_cast<long>(std::floor(points[i])) + halo + 1;
    while (j + 1 < points.size()) {
      const long c = static_cast<long>(std::floor(points[j + 1]));
      if (c - halo <= hi) {
        hi = std::max(hi, c + halo + 1);
        ++j;
      } else {
        break;
      }
    }
    proposals.clear();
    for (long k = lo; k < hi; ++k) {
      proposals.push_back(static_cast<double>(k) + draw_jump(model, rng));
    }
    const std::vector<double> assigned =
        sorted_assignment(std::move(proposals));
    for (std::size_t p = i; p <= j; ++p) {
      const long c = static_cast<long>(std::floor(points[p]));
      out[p] = assigned[c - lo];
    }
    i = j + 1;
  }
  return out;
}

namespace {

PsiLaw lattice_psi_law(const MapModel& model) {
  const int halo = model.halo();
  const int cells = 2 * halo + 1;  // cells -halo .. +halo
  const double p_up = 0.5 * (1.0 + model.bias());
  std::map<double, double> law;
  std::vector<double> proposals(cells);
  for (std::uint64_t pattern = 0; pattern < (1ULL << cells); ++pattern) {
    double weight = 1.0;
    for (int c = 0; c < cells; ++c) {
      const bool up = (pattern >> c) & 1ULL;
      weight *= up ? p_up : (1.0 - p_up);
      proposals[c] = static_cast<double>(c - halo) + (up ? 1.0 : -1.0);
    }
    if (weight == 0.0) continue;
    std::sort(proposals.begin(), proposals.end());
    law[proposals[halo]] += weight;  // value at cell 0
  }
  PsiLaw out;
  out.exact = true;
  for (const auto& [v, p] : law) {
    out.support.push_back(v);
    out.probs.push_back(p);
    out.mean += v * p;
  }
  for (std::size_t k = 0; k < out.support.size(); ++k) {
    const double d = out.support[k] - out.mean;
    out.variance += d * d * out.probs[k];
  }
  return out;
}

PsiLaw continuous_psi_law(const MapModel& model, std::size_t reps) {
  RngStream rng = make_stream(kPsiLawCalibrationSeed, model.name());
  const double span = model.jump_bound() + 1.5;
  const int bins = 2 * static_cast<int>(std::ceil(span / 0.1));
  const double bin_w = 2.0 * span / bins;
  std::vector<double> counts(bins, 0.0);
  CompensatedSum sum, sumsq;
  const std::vector<double> origin{0.0};
  for (std::size_t r = 0; r < reps; ++r) {
    const double psi = push_points(model, origin, rng)[0];
    sum.add(psi);
    sumsq.add(psi * psi);
    const int b = std::clamp(
        static_cast<int>(std::floor((psi + span) / bin_w)), 0, bins - 1);
    counts[b] += 1.0;
  }
  PsiLaw out;
  out.exact = false;
  out.n_samples = reps;
  const double n = static_cast<double>(reps);
  out.mean = sum.value() / n;
  out.variance = sumsq.value() / n - out.mean * out.mean;
  out.mean_stderr = std::sqrt(out.variance / n);
  for (int b = 0; b < bins; ++b) {
    if (counts[b] == 0.0) continue;
    out.support.push_back(-span + (b + 0.5) * bin_w);
    out.probs.push_back(counts[b] / n);
  }
  return out;
}

}  // namespace

PsiLaw exact_psi_law(const MapModel& model, std::size_t mc_reps) {
  if (model.kind() == ModelKind::kLatticeShuffle) {
    return lattice_psi_law(model);
  }
  return continuous_psi_law(model, mc_reps);
}

bool AssumptionReport::passed() const {
  for (const auto& it : items) {
    if (!it.passed) return false;
  }
  return true;
}

void AssumptionReport::throw_if_failed() const {
  for (const auto& it : items) {
    if (!it.passed) {
      throw AssumptionViolated("assumption failed: " + it.name + " (" +
                               it.detail + ")");
    }
  }
}

AssumptionReport validate_assumptions(const MapModel& model, std::size_t reps,
                                      RngStream& rng) {
  if (reps < 1000) throw BadParams("validate_assumptions: reps >= 1000");
  AssumptionReport report;

  for (const double gap : {1.0, 5.0, 20.0}) {
    const int horizon = static_cast<int>(std::ceil(4.0 * gap * gap));
    std::size_t coalesced = 0;
    for (std::size_t r = 0; r < reps; ++r) {
      std::vector<double> pts{0.0, gap};
      for (int k = 0; k < horizon; ++k) {
        pts = push_points(model, pts, rng);
        if (pts[0] == pts[1]) {
          ++coalesced;
          break;
        }
      }
    }
    const double freq =
        static_cast<double>(coalesced) / static_cast<double>(reps);
    char buf[96];
    std::snprintf(buf, sizeof(buf),
                  "gap %g coalesced in %d steps with frequency %.4f", gap,
                  horizon, freq);
    char name[32];
    std::snprintf(name, sizeof(name), "A1_coalescence_gap_%g", gap);
    report.items.push_back({name, freq > 0.0, freq, buf});
  }

  const PsiLaw law = exact_psi_law(model, std::max<std::size_t>(reps, 100000));
  {
    const bool pass = law.exact ? law.mean == 0.0
                                : std::fabs(law.mean) <= 3.0 * law.mean_stderr;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "mean %.6g (%s)", law.mean,
                  law.exact ? "exact" : "estimated");
    report.items.push_back({"A2_mean_zero", pass, law.mean, buf});
  }
  {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "sigma^2 recorded as %.6g, not forced to 1",
                  law.variance);
    report.items.push_back(
        {"A2_variance_recorded", law.variance > 0.0, law.variance, buf});
  }
  {
    double max_abs = 0.0;
    for (double v : law.support) max_abs = std::max(max_abs, std::fabs(v));
    const double bound = model.jump_bound() + model.cell_width();
    char buf[96];
    std::snprintf(buf, sizeof(buf), "max |psi| %.4g <= %.4g", max_abs, bound);
    report.items.push_back(
        {"A3_bounded_support", max_abs <= bound + 1e-9, max_abs, buf});
  }
  {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "independent beyond %.0f cells",
                  model.dep_range());
    report.items.push_back(
        {"A4_finite_range", true, model.dep_range(), buf});
  }
  return report;
}

std::string model_to_spec(const MapModel& model) {
  std::ostringstream out;
  out << "schema = 1\n";
  out << "kind = "
      << (model.kind() == ModelKind::kLatticeShuffle ? "lattice_shuffle"
                                                     : "continuous_shift")
      << "\n";
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", model.bias());
  out << "bias = " << buf << "\n";
  return out.str();
}

MapModel model_from_spec(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::string kind;
  double bias = 0.0;
  bool saw_schema = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key, eq, value;
    if (!(ls >> key)) continue;
    if (!(ls >> eq >> value) || eq != "=") {
      throw ConfigError("model spec line " + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    if (key == "schema") {
      saw_schema = true;
      if (value != "1") {
        throw ConfigError("model spec line " + std::to_string(line_no) +
                          ": unsupported schema " + value);
      }
    } else if (key == "kind") {
      kind = value;
    } else if (key == "bias") {
      bias = std::stod(value);
    } else {
      throw ConfigError("model spec line " + std::to_string(line_no) +
                        ": unknown key '" + key + "'");
    }
  }
  if (!saw_schema) throw ConfigError("model spec: missing 'schema = 1'");
  if (kind == "lattice_shuffle") return MapModel::lattice_shuffle(bias);
  if (kind == "continuous_shift") return MapModel::continuous_shift(bias);
  throw ConfigError("model spec: unknown kind '" + kind + "'");
}

std::string psi_law_to_csv(const PsiLaw& law) {
  std::string out = "value,probability\n";
  char buf[80];
  for (std::size_t i = 0; i < law.support.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", law.support[i],
                  law.probs[i]);
    out += buf;
  }
  return out;
}

}  // namespace coalflow
