#include "coalflow/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coalflow {

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

double norm_pdf(double x) {
  static const double kInvSqrt2Pi = 0.3989422804014326779;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw BadParams("norm_quantile: p must be in (0,1)");
  }
  // Acklam's rational approximation, then one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = norm_cdf(x) - p;
  const double u = e / norm_pdf(x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

namespace {

double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double del = sum;
  for (int i = 0; i < 500; ++i) {
    ap += 1.0;
    del *= x / ap;
    sum += del;
    if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-15) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw BadParams("gamma_p: bad arguments");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_contfrac(a, x);
}

double chi2_sf(double x, double df) {
  if (x <= 0.0) return 1.0;
  return 1.0 - gamma_p(0.5 * df, 0.5 * x);
}

double kolmogorov_q(double lambda) {
  if (lambda < 1e-8) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Accumulators
// ---------------------------------------------------------------------------

void CompensatedSum::add(double x) {
  const double t = sum + x;
  if (std::fabs(sum) >= std::fabs(x)) {
    comp += (sum - t) + x;
  } else {
    comp += (x - t) + sum;
  }
  sum = t;
}

MeanVar mean_var(const std::vector<double>& xs) {
  if (xs.empty()) throw EmptySample("mean_var: empty sample");
  CompensatedSum s;
  for (double x : xs) s.add(x);
  MeanVar mv;
  mv.n = xs.size();
  mv.mean = s.value() / static_cast<double>(xs.size());
  CompensatedSum sq;
  for (double x : xs) sq.add((x - mv.mean) * (x - mv.mean));
  mv.variance = xs.size() > 1
                    ? sq.value() / static_cast<double>(xs.size() - 1)
                    : 0.0;
  mv.stderr_mean = std::sqrt(mv.variance / static_cast<double>(xs.size()));
  return mv;
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

namespace {

double ks_p_from_d(double d, double effective_n) {
  const double en = std::sqrt(effective_n);
  return kolmogorov_q((en + 0.12 + 0.11 / en) * d);
}

}  // namespace

double ks_test_2sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptySample("ks_test_2sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(static_cast<double>(i) / na -
                              static_cast<double>(j) / nb));
  }
  return ks_p_from_d(d, na * nb / (na + nb));
}

double ks_test_normal(std::vector<double> xs, double mu, double sigma) {
  if (xs.empty()) throw EmptySample("ks_test_normal");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = norm_cdf((xs[i] - mu) / sigma);
    d = std::max(d, std::fabs(static_cast<double>(i + 1) / n - f));
    d = std::max(d, std::fabs(f - static_cast<double>(i) / n));
  }
  return ks_p_from_d(d, n);
}

double chi2_gof_test(const std::vector<std::int64_t>& counts,
                     const std::vector<double>& probs) {
  if (counts.size() != probs.size() || counts.empty()) {
    throw ShapeMismatch("chi2_gof_test: size mismatch");
  }
  const double n = static_cast<double>(
      std::accumulate(counts.begin(), counts.end(), std::int64_t{0}));
  double stat = 0.0;
  int dof = -1;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double expected = n * probs[i];
    if (expected <= 0.0) {
      if (counts[i] != 0) return 0.0;  // impossible category observed
      continue;
    }
    const double diff = static_cast<double>(counts[i]) - expected;
    stat += diff * diff / expected;
    ++dof;
  }
  if (dof < 1) return 1.0;
  return chi2_sf(stat, dof);
}

double chi2_two_sample_test(const std::vector<std::int64_t>& counts_a,
                            const std::vector<std::int64_t>& counts_b) {
  if (counts_a.size() != counts_b.size() || counts_a.empty()) {
    throw ShapeMismatch("chi2_two_sample_test: size mismatch");
  }
  const double na = static_cast<double>(
      std::accumulate(counts_a.begin(), counts_a.end(), std::int64_t{0}));
  const double nb = static_cast<double>(
      std::accumulate(counts_b.begin(), counts_b.end(), std::int64_t{0}));
  double stat = 0.0;
  int dof = -1;
  for (std::size_t i = 0; i < counts_a.size(); ++i) {
    const double pooled =
        static_cast<double>(counts_a[i] + counts_b[i]) / (na + nb);
    if (pooled <= 0.0) continue;
    const double ea = na * pooled, eb = nb * pooled;
    const double da = static_cast<double>(counts_a[i]) - ea;
    const double db = static_cast<double>(counts_b[i]) - eb;
    stat += da * da / ea + db * db / eb;
    ++dof;
  }
  if (dof < 1) return 1.0;
  return chi2_sf(stat, dof);
}

double two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2,
                           std::int64_t n2) {
  if (n1 <= 0 || n2 <= 0) throw EmptySample("two_proportion_test");
  const double p1 = static_cast<double>(k1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(k2) / static_cast<double>(n2);
  const double pooled =
      static_cast<double>(k1 + k2) / static_cast<double>(n1 + n2);
  const double se = std::sqrt(pooled * (1.0 - pooled) *
                              (1.0 / static_cast<double>(n1) +
                               1.0 / static_cast<double>(n2)));
  if (se == 0.0) return 1.0;
  const double z = (p1 - p2) / se;
  return 2.0 * (1.0 - norm_cdf(std::fabs(z)));
}

namespace {

double energy_statistic(const std::vector<double>& dist, std::size_t n_total,
                        const std::vector<std::size_t>& idx, std::size_t na) {
  auto d = [&](std::size_t i, std::size_t j) {
    return dist[idx[i] * n_total + idx[j]];
  };
  const std::size_t nb = n_total - na;
  double within_a = 0.0, within_b = 0.0, across = 0.0;
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = i + 1; j < na; ++j) within_a += d(i, j);
  for (std::size_t i = na; i < n_total; ++i)
    for (std::size_t j = i + 1; j < n_total; ++j) within_b += d(i, j);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = na; j < n_total; ++j) across += d(i, j);
  const double fa = static_cast<double>(na), fb = static_cast<double>(nb);
  return 2.0 * across / (fa * fb) - 2.0 * within_a / (fa * fa) -
         2.0 * within_b / (fb * fb);
}

}  // namespace

double energy_test(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b, RngStream& rng,
                   int n_permutations, std::size_t max_points) {
  if (a.empty() || b.empty()) throw EmptySample("energy_test");
  auto subsample = [&](const std::vector<std::vector<double>>& src) {
    if (src.size() <= max_points) return src;
    std::vector<std::vector<double>> out;
    out.reserve(max_points);
    const double step =
        static_cast<double>(src.size()) / static_cast<double>(max_points);
    for (std::size_t i = 0; i < max_points; ++i) {
      out.push_back(src[static_cast<std::size_t>((i + 0.5) * step)]);
    }
    return out;
  };
  const auto sa = subsample(a);
  const auto sb = subsample(b);
  const std::size_t na = sa.size(), n = sa.size() + sb.size();
  std::vector<std::vector<double>> pool = sa;
  pool.insert(pool.end(), sb.begin(), sb.end());
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < pool[i].size(); ++k) {
        const double diff = pool[i][k] - pool[j][k];
        s += diff * diff;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(s);
    }
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const double observed = energy_statistic(dist, n, idx, na);
  int at_least = 1;  // include the observed arrangement
  for (int p = 0; p < n_permutations; ++p) {
    shuffle(idx, rng);
    if (energy_statistic(dist, n, idx, na) >= observed) ++at_least;
  }
  return static_cast<double>(at_least) /
         static_cast<double>(n_permutations + 1);
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

namespace {

std::vector<double> quantile_thin(const std::vector<double>& sorted,
                                  std::size_t m) {
  std::vector<double> out(m);
  const double step =
      static_cast<double>(sorted.size()) / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = sorted[static_cast<std::size_t>((i + 0.5) * step)];
  }
  return out;
}

double w1_sorted(const std::vector<double>& a, const std::vector<double>& b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(std::fabs(a[i] - b[i]));
  return s.value() / static_cast<double>(a.size());
}

}  // namespace

double w1_empirical(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw EmptySample("w1_empirical: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a.size() != b.size()) {
    if (a.size() > b.size()) {
      a = quantile_thin(a, b.size());
    } else {
      b = quantile_thin(b, a.size());
    }
  }
  return w1_sorted(a, b);
}

double w1_to_standard_normal(std::vector<double> xs) {
  if (xs.empty()) throw EmptySample("w1_to_standard_normal");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  // A(t) = integral of Phi = t Phi(t) + phi(t);  B(t) = integral of (1 - Phi)
  // from t to infinity = phi(t) - t (1 - Phi(t)).
  auto int_phi = [](double t) { return t * norm_cdf(t) + norm_pdf(t); };
  auto tail = [](double t) { return norm_pdf(t) - t * (1.0 - norm_cdf(t)); };
  double total = int_phi(xs.front());  // level 0 piece: integral of Phi below
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double c = static_cast<double>(i) / n;
    const double lo = xs[i - 1], hi = xs[i];
    if (lo == hi) continue;
    // integral over [lo, hi] of |c - Phi(t)|
    const double tstar = std::clamp(norm_quantile(c), lo, hi);
    // below tstar: Phi <= c, integrand c - Phi; above: Phi - c
    const double below = c * (tstar - lo) - (int_phi(tstar) - int_phi(lo));
    const double above = (int_phi(hi) - int_phi(tstar)) - c * (hi - tstar);
    total += below + above;
  }
  total += tail(xs.back());  // level 1 piece: integral of 1 - Phi above
  return total;
}

std::vector<std::vector<double>> coalescence_curve(
    const std::vector<std::vector<double>>& vector_samples,
    std::size_t grid_size) {
  if (vector_samples.empty()) throw EmptySample("coalescence_curve");
  for (const auto& v : vector_samples) {
    if (v.size() != grid_size) {
      throw ShapeMismatch("coalescence_curve: sample size != grid size");
    }
  }
  std::vector<std::vector<double>> freq(grid_size,
                                        std::vector<double>(grid_size, 0.0));
  for (const auto& v : vector_samples) {
    for (std::size_t i = 0; i < grid_size; ++i) {
      for (std::size_t j = i; j < grid_size; ++j) {
        if (v[i] == v[j]) {
          freq[i][j] += 1.0;
          if (i != j) freq[j][i] += 1.0;
        }
      }
    }
  }
  const double n = static_cast<double>(vector_samples.size());
  for (auto& row : freq) {
    for (auto& f : row) f /= n;
  }
  return freq;
}

double point_density(const std::vector<MonotoneStepMap>& maps, Window window,
                     double trim) {
  if (maps.empty()) throw EmptySample("point_density");
  const Window trimmed{window.lo + trim, window.hi - trim};
  if (!(trimmed.lo < trimmed.hi)) {
    throw WindowMismatch("point_density: trim leaves empty window");
  }
  CompensatedSum s;
  for (const auto& m : maps) {
    const auto r = restrict_map(m, trimmed);
    s.add(static_cast<double>(image_points(r).size()) / trimmed.length());
  }
  return s.value() / static_cast<double>(maps.size());
}

EstimateWithCi bootstrap_mean_ci(const std::vector<double>& xs, RngStream& rng,
                                 int n_boot) {
  if (xs.empty()) throw EmptySample("bootstrap_mean_ci");
  EstimateWithCi e;
  e.n = xs.size();
  e.value = mean_var(xs).mean;
  std::vector<double> boots(n_boot);
  for (int b = 0; b < n_boot; ++b) {
    CompensatedSum s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      s.add(xs[rng.below(xs.size())]);
    }
    boots[b] = s.value() / static_cast<double>(xs.size());
  }
  std::sort(boots.begin(), boots.end());
  e.ci_lo = boots[static_cast<std::size_t>(0.025 * (n_boot - 1))];
  e.ci_hi = boots[static_cast<std::size_t>(0.975 * (n_boot - 1))];
  e.stderr_boot = mean_var(boots).variance > 0.0
                      ? std::sqrt(mean_var(boots).variance)
                      : 0.0;
  return e;
}

EstimateWithCi levy_distance_mc(const std::vector<MonotoneStepMap>& a,
                                const std::vector<MonotoneStepMap>& b,
                                const LevyMetricParams& params, Pairing pairing,
                                RngStream& rng, int n_boot) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeMismatch("levy_distance_mc: ensembles must match in size");
  }
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  if (pairing == Pairing::kIndependent) shuffle(perm, rng);
  std::vector<double> dists(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    dists[i] = levy_metric(a[i], b[perm[i]], params).value;
  }
  return bootstrap_mean_ci(dists, rng, n_boot);
}

// ---------------------------------------------------------------------------
// Power-law fit
// ---------------------------------------------------------------------------

namespace {

struct LineFit {
  double slope = 0.0;
  double r2 = 1.0;
  bool ok = false;
};

LineFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  LineFit f;
  const std::size_t n = x.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) return f;
  f.slope = sxy / sxx;
  f.r2 = syy == 0.0 ? 1.0 : std::max(0.0, sxy * sxy / (sxx * syy));
  f.ok = true;
  return f;
}

}  // namespace

RateFit fit_power_law(const std::vector<RatePoint>& points, RngStream& rng,
                      int n_boot) {
  if (points.size() < 4) {
    throw DegenerateInput("fit_power_law: need at least 4 points");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].distance > 0.0)) {
      throw DegenerateInput("fit_power_law: distances must be positive");
    }
    if (i > 0 && !(points[i].n > points[i - 1].n)) {
      throw DegenerateInput("fit_power_law: n must be strictly increasing");
    }
  }
  std::vector<double> lx(points.size()), ly(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    lx[i] = std::log(points[i].n);
    ly[i] = std::log(points[i].distance);
  }
  const LineFit base = ols(lx, ly);
  RateFit fit;
  fit.points = points;
  fit.exponent = -base.slope;
  fit.r2 = base.r2;

  std::vector<double> boots;
  boots.reserve(n_boot);
  std::vector<double> bx(points.size()), by(points.size());
  for (int b = 0; b < n_boot; ++b) {
    LineFit lf;
    for (int attempt = 0; attempt < 64 && !lf.ok; ++attempt) {
      for (std::size_t i = 0; i < points.size(); ++i) {
        const std::size_t k = rng.below(points.size());
        bx[i] = lx[k];
        by[i] = ly[k];
      }
      lf = ols(bx, by);
    }
    if (lf.ok) boots.push_back(-lf.slope);
  }
  std::sort(boots.begin(), boots.end());
  if (boots.empty()) {
    fit.ci_lo = fit.ci_hi = fit.exponent;
  } else {
    fit.ci_lo = boots[static_cast<std::size_t>(0.025 * (boots.size() - 1))];
    fit.ci_hi = boots[static_cast<std::size_t>(0.975 * (boots.size() - 1))];
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Ensemble diagnostics
// ---------------------------------------------------------------------------

namespace {

// Pair-coalescence bitmask per sample (pair (i,j), i<j, bit p = i*(2g-i-1)/2...)
std::vector<std::uint64_t> pair_masks(
    const std::vector<std::vector<double>>& ensemble, std::size_t g) {
  std::vector<std::uint64_t> masks(ensemble.size(), 0);
  for (std::size_t s = 0; s < ensemble.size(); ++s) {
    std::uint64_t m = 0;
    int bit = 0;
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = i + 1; j < g; ++j, ++bit) {
        if (ensemble[s][i] == ensemble[s][j]) m |= (1ULL << bit);
      }
    }
    masks[s] = m;
  }
  return masks;
}

double pair_curve_discrepancy(const std::vector<std::uint64_t>& ma,
                              const std::vector<std::uint64_t>& mb,
                              int n_pairs) {
  std::vector<double> fa(n_pairs, 0.0), fb(n_pairs, 0.0);
  for (auto m : ma) {
    while (m) {
      fa[__builtin_ctzll(m)] += 1.0;
      m &= m - 1;
    }
  }
  for (auto m : mb) {
    while (m) {
      fb[__builtin_ctzll(m)] += 1.0;
      m &= m - 1;
    }
  }
  double acc = 0.0;
  for (int p = 0; p < n_pairs; ++p) {
    acc += std::fabs(fa[p] / static_cast<double>(ma.size()) -
                     fb[p] / static_cast<double>(mb.size()));
  }
  return acc / static_cast<double>(n_pairs);
}

// Sorted resample via counting over sorted source values: O(n).
std::vector<double> sorted_resample(const std::vector<double>& sorted_src,
                                    RngStream& rng,
                                    std::vector<std::uint32_t>& scratch) {
  const std::size_t n = sorted_src.size();
  scratch.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++scratch[rng.below(n)];
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t c = 0; c < scratch[i]; ++c) out.push_back(sorted_src[i]);
  }
  return out;
}

}  // namespace

std::vector<Diagnostic> ensemble_diagnostics(
    const std::vector<std::vector<double>>& ensemble,
    const std::vector<std::vector<double>>& reference, RngStream& rng,
    int n_boot) {
  if (ensemble.empty() || reference.empty()) {
    throw EmptySample("ensemble_diagnostics");
  }
  const std::size_t g = ensemble.front().size();
  if (reference.front().size() != g) {
    throw ShapeMismatch("ensemble_diagnostics: grid size mismatch");
  }
  if (g < 2 || g > 11) {
    throw ShapeMismatch("ensemble_diagnostics: grid size must be in [2, 11]");
  }
  const int n_pairs = static_cast<int>(g * (g - 1) / 2);

  std::vector<Diagnostic> out;

  // pair-coalescence curve discrepancy
  {
    const auto ma = pair_masks(ensemble, g);
    const auto mb = pair_masks(reference, g);
    Diagnostic d;
    d.name = "pair_coalescence";
    d.n_samples = ensemble.size();
    d.value = pair_curve_discrepancy(ma, mb, n_pairs);
    std::vector<double> boots(n_boot);
    std::vector<std::uint64_t> ra(ma.size()), rb(mb.size());
    for (int b = 0; b < n_boot; ++b) {
      for (auto& m : ra) m = ma[rng.below(ma.size())];
      for (auto& m : rb) m = mb[rng.below(mb.size())];
      boots[b] = pair_curve_discrepancy(ra, rb, n_pairs);
    }
    std::sort(boots.begin(), boots.end());
    d.ci_lo = boots[static_cast<std::size_t>(0.025 * (n_boot - 1))];
    d.ci_hi = boots[static_cast<std::size_t>(0.975 * (n_boot - 1))];
    out.push_back(std::move(d));
  }

  // W1 of the component nearest the grid midpoint
  {
    const std::size_t mid = g / 2;
    std::vector<double> xa(ensemble.size()), xb(reference.size());
    for (std::size_t s = 0; s < ensemble.size(); ++s) xa[s] = ensemble[s][mid];
    for (std::size_t s = 0; s < reference.size(); ++s) {
      xb[s] = reference[s][mid];
    }
    std::sort(xa.begin(), xa.end());
    std::sort(xb.begin(), xb.end());
    Diagnostic d;
    d.name = "w1_point";
    d.n_samples = ensemble.size();
    d.value = w1_empirical(xa, xb);
    std::vector<double> boots(n_boot);
    std::vector<std::uint32_t> scratch;
    for (int b = 0; b < n_boot; ++b) {
      boots[b] = w1_empirical(sorted_resample(xa, rng, scratch),
                              sorted_resample(xb, rng, scratch));
    }
    std::sort(boots.begin(), boots.end());
    d.ci_lo = boots[static_cast<std::size_t>(0.025 * (n_boot - 1))];
    d.ci_hi = boots[static_cast<std::size_t>(0.975 * (n_boot - 1))];
    out.push_back(std::move(d));
  }

  return out;
}

}  // namespace coalflow
