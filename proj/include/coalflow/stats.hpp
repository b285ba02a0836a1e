#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "coalflow/errors.hpp"
#include "coalflow/rng.hpp"
#include "coalflow/step_map.hpp"

namespace coalflow {

// ---------------------------------------------------------------------------
// Special functions (standard numerics, accurate to ~1e-13)
// ---------------------------------------------------------------------------

double norm_pdf(double x);
double norm_cdf(double x);
double norm_quantile(double p);           // inverse of norm_cdf, p in (0,1)
double gamma_p(double a, double x);       // regularized lower incomplete gamma
double chi2_sf(double x, double df);      // survival function
double kolmogorov_q(double lambda);       // asymptotic Kolmogorov tail

// ---------------------------------------------------------------------------
// Order-independent accumulation (Neumaier compensated sum).  Folding partial
// sums in replica-index order makes aggregates reproducible to 1e-12 across
// thread counts.
// ---------------------------------------------------------------------------
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x);
  double value() const { return sum + comp; }
};

struct MeanVar {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double stderr_mean = 0.0;
  std::size_t n = 0;
};
MeanVar mean_var(const std::vector<double>& xs);

// ---------------------------------------------------------------------------
// Hypothesis-test helpers (p-values)
// ---------------------------------------------------------------------------

// Two-sample Kolmogorov-Smirnov (continuous data).
double ks_test_2sample(std::vector<double> a, std::vector<double> b);

// One-sample KS against N(mu, sigma^2).
double ks_test_normal(std::vector<double> xs, double mu, double sigma);

// Chi-square goodness of fit of counts against exact probabilities.
double chi2_gof_test(const std::vector<std::int64_t>& counts,
                     const std::vector<double>& probs);

// Two-sample chi-square homogeneity on matched categories.
double chi2_two_sample_test(const std::vector<std::int64_t>& counts_a,
                            const std::vector<std::int64_t>& counts_b);

// Two-proportion z-test (pooled).
double two_proportion_test(std::int64_t k1, std::int64_t n1, std::int64_t k2,
                           std::int64_t n2);

// Szekely-Rizzo energy test between vector samples, permutation p-value.
// Samples larger than max_points per group are uniformly subsampled first.
double energy_test(const std::vector<std::vector<double>>& a,
                   const std::vector<std::vector<double>>& b, RngStream& rng,
                   int n_permutations = 199, std::size_t max_points = 512);

// ---------------------------------------------------------------------------
// Distance diagnostics
// ---------------------------------------------------------------------------

// Exact empirical Wasserstein-1 on the line: mean |sorted a - sorted b|.
// Unequal sizes are reduced by deterministic quantile thinning of the larger
// sample.  Throws EmptySample.
double w1_empirical(std::vector<double> a, std::vector<double> b);

// Exact W1 between the empirical law of xs and N(0,1):
// integral of |F_hat - Phi|.
double w1_to_standard_normal(std::vector<double> xs);

// Pairwise exact-equality frequencies: entry (i,j) is the fraction of samples
// whose i-th and j-th components coincide.  Throws ShapeMismatch.
std::vector<std::vector<double>> coalescence_curve(
    const std::vector<std::vector<double>>& vector_samples,
    std::size_t grid_size);

// Mean count of distinct values per unit window length, after trimming
// `trim` off each end of the window.  Throws EmptySample / WindowMismatch.
double point_density(const std::vector<MonotoneStepMap>& maps, Window window,
                     double trim);

enum class Pairing { kIndexMatched, kIndependent };

struct EstimateWithCi {
  double value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double stderr_boot = 0.0;
  std::size_t n = 0;
};

// Mean generalized Levy distance over paired ensemble samples (an upper bound
// on the Wasserstein-1 distance of the two map laws under the metric d, for
// any pairing), with a percentile bootstrap CI.
EstimateWithCi levy_distance_mc(const std::vector<MonotoneStepMap>& a,
                                const std::vector<MonotoneStepMap>& b,
                                const LevyMetricParams& params, Pairing pairing,
                                RngStream& rng, int n_boot = 1000);

// ---------------------------------------------------------------------------
// Power-law rate fit
// ---------------------------------------------------------------------------

struct RatePoint {
  double n = 0.0;
  double distance = 0.0;
};

struct RateFit {
  double exponent = 0.0;  // K-hat = -slope of log(distance) vs log(n)
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double r2 = 0.0;
  std::vector<RatePoint> points;
};

// Least-squares log-log fit with a 1000-resample percentile bootstrap CI.
// Requires >= 4 points with strictly increasing n and positive distances;
// throws DegenerateInput otherwise.
RateFit fit_power_law(const std::vector<RatePoint>& points, RngStream& rng,
                      int n_boot = 1000);

// Percentile bootstrap CI for the mean of xs.
EstimateWithCi bootstrap_mean_ci(const std::vector<double>& xs, RngStream& rng,
                                 int n_boot = 1000);

// ---------------------------------------------------------------------------
// Named two-ensemble diagnostics used by the rate and renormalization
// experiments: finite-dimensional discrepancies between vector ensembles on a
// common grid, bootstrap CIs attached.
// ---------------------------------------------------------------------------
struct Diagnostic {
  std::string name;
  double value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n_samples = 0;
};

// "pair_coalescence": mean absolute difference of pair-coalescence
//   frequencies between the two ensembles, over all grid pairs i < j.
// "w1_point": two-sample W1 of the component nearest the grid midpoint.
std::vector<Diagnostic> ensemble_diagnostics(
    const std::vector<std::vector<double>>& ensemble,
    const std::vector<std::vector<double>>& reference, RngStream& rng,
    int n_boot = 1000);

}  // namespace coalflow
