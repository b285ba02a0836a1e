#include "coalflow/cbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "coalflow/errors.hpp"

namespace coalflow {

RankPermutation build_sigma(int m) {
  if (m < 1) throw BadParams("build_sigma: m >= 1");
  std::vector<int> idx(m);
  std::iota(idx.begin(), idx.end(), 1);
  auto dyadic = [](int i) {
    int p = 0;
    while ((i & 1) == 0) {
      i >>= 1;
      ++p;
    }
    return std::pair<int, int>{p, (i - 1) / 2};  // (p, i')
  };
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    const auto [pa, qa] = dyadic(a);
    const auto [pb, qb] = dyadic(b);
    if (pa != pb) return pa > pb;  // deeper dyadic level ranks higher
    return qa > qb;
  });
  RankPermutation sigma;
  sigma.m = m;
  sigma.sigma.assign(m, 0);
  for (int r = 0; r < m; ++r) sigma.sigma[idx[r] - 1] = r + 1;
  return sigma;
}

std::vector<std::vector<int>> ancestry_sets(const RankPermutation& sigma) {
  const int m = sigma.m;
  // previous/next smaller sigma value (higher-ranked neighbor), stack scans
  std::vector<int> lower(m + 1, 0), upper(m + 1, 0);  // 0 = none
  {
    std::vector<int> stack;
    for (int i = 1; i <= m; ++i) {
      while (!stack.empty() && sigma.rank(stack.back()) > sigma.rank(i)) {
        stack.pop_back();
      }
      lower[i] = stack.empty() ? 0 : stack.back();
      stack.push_back(i);
    }
    stack.clear();
    for (int i = m; i >= 1; --i) {
      while (!stack.empty() && sigma.rank(stack.back()) > sigma.rank(i)) {
        stack.pop_back();
      }
      upper[i] = stack.empty() ? 0 : stack.back();
      stack.push_back(i);
    }
  }
  std::vector<int> by_rank(m + 1, 0);
  for (int i = 1; i <= m; ++i) by_rank[sigma.rank(i)] = i;
  std::vector<std::vector<int>> sets(m);
  for (int r = 1; r <= m; ++r) {
    const int i = by_rank[r];
    const int rank_minus = lower[i] == 0 ? 0 : sigma.rank(lower[i]);
    const int rank_plus = upper[i] == 0 ? 0 : sigma.rank(upper[i]);
    std::vector<int> s;
    if (rank_minus == 0 && rank_plus == 0) {
      s = {i};
    } else {
      const int parent = rank_minus > rank_plus ? lower[i] : upper[i];
      s = sets[parent - 1];
      s.push_back(i);
      std::sort(s.begin(), s.end());
    }
    sets[i - 1] = std::move(s);
  }
  return sets;
}

PathBundle sample_bm_bundle(const std::vector<double>& starts, double T,
                            double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw NonPositiveDt("sample_bm_bundle: dt must be > 0");
  const int m = static_cast<int>(starts.size());
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  const double sd = std::sqrt(T / steps);
  PathBundle b;
  b.dt = T / steps;
  b.paths.assign(m, std::vector<double>(steps + 1));
  for (int i = 0; i < m; ++i) b.paths[i][0] = starts[i];
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < m; ++i) {
      b.paths[i][k + 1] = b.paths[i][k] + sd * rng.normal();
    }
  }
  return b;
}

int FollowerTable::leader_at(int particle, int step) const {
  const auto& js = jumps[particle - 1];
  int leader = js.front().second;
  for (const auto& [s, l] : js) {
    if (s > step) break;
    leader = l;
  }
  return leader;
}

bool check_follower_properties(const FollowerTable& table,
                               const RankPermutation& sigma,
                               const std::vector<double>& starts,
                               std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  const int m = table.particles;
  for (int i = 1; i <= m; ++i) {
    const int f0 = table.leader_at(i, 0);
    if (f0 > i && starts[f0 - 1] != starts[i - 1]) {
      return fail("property 1: f_i(0) > i without co-located start");
    }
    if (f0 != i && sigma.rank(f0) >= sigma.rank(i)) {
      return fail("property 1: initial leader not higher-ranked");
    }
    int prev_rank = sigma.rank(table.leader_at(i, 0));
    for (const auto& [s, l] : table.jumps[i - 1]) {
      if (sigma.rank(l) > prev_rank) {
        return fail("property 2: sigma(f_i) increased at step " +
                    std::to_string(s));
      }
      prev_rank = sigma.rank(l);
    }
  }
  for (int k = 0; k <= table.steps; ++k) {
    for (int i = 1; i <= m; ++i) {
      const int j = table.leader_at(i, k);
      if (table.leader_at(j, k) != j) {
        return fail("property 3: leader of leader differs");
      }
    }
  }
  for (int i = 1; i <= m; ++i) {
    for (int j = i + 1; j <= m; ++j) {
      bool joined = false;
      for (int k = 0; k <= table.steps; ++k) {
        const bool same = table.leader_at(i, k) == table.leader_at(j, k);
        if (joined && !same) {
          return fail("property 4: coalescence not absorbing");
        }
        joined = joined || same;
      }
    }
  }
  return true;
}

namespace {

// Spatially ordered clusters over contiguous particle ranges.
struct Clusters {
  std::vector<int> leader;  // particle id (0-based), min sigma in cluster
  std::vector<double> pos;
  std::vector<int> first;  // first particle index of each cluster
  std::vector<int> of;     // particle -> cluster

  int count() const { return static_cast<int>(leader.size()); }
};

Clusters init_clusters(const std::vector<double>& starts,
                       const RankPermutation& sigma, FollowerTable* table) {
  const int m = static_cast<int>(starts.size());
  for (int i = 1; i < m; ++i) {
    if (starts[i] < starts[i - 1]) {
      throw UnorderedStarts("starts must be nondecreasing");
    }
  }
  Clusters c;
  c.of.assign(m, 0);
  for (int i = 0; i < m;) {
    int j = i;
    int lead = i;
    while (j + 1 < m && starts[j + 1] == starts[i]) {
      ++j;
      if (sigma.rank(j + 1) < sigma.rank(lead + 1)) lead = j;
    }
    for (int p = i; p <= j; ++p) c.of[p] = c.count();
    c.leader.push_back(lead);
    c.pos.push_back(starts[i]);
    c.first.push_back(i);
    i = j + 1;
  }
  if (table) {
    table->particles = m;
    table->jumps.assign(m, {});
    for (int i = 0; i < m; ++i) {
      table->jumps[i].push_back({0, c.leader[c.of[i]] + 1});
    }
  }
  return c;
}

// One grid step of the collision rule.  q holds the tentative new position of
// each cluster (its leader's raw path); marks mixes grid-detected order
// violations with bridge coalescence draws.  Merging cascades until the
// cluster positions are strictly increasing again; merged clusters follow the
// highest-ranked leader.
void step_clusters(Clusters& c, std::vector<double>& q,
                   const RankPermutation& sigma, double dt, bool bridge,
                   RngStream* bridge_rng, FollowerTable* table, int step) {
  const int n = c.count();
  std::vector<char> mark(std::max(0, n - 1), 0);
  for (int k = 0; k + 1 < n; ++k) {
    if (q[k + 1] <= q[k]) {
      mark[k] = 1;
    } else if (bridge) {
      const double g0 = c.pos[k + 1] - c.pos[k];
      const double g1 = q[k + 1] - q[k];
      if (g0 > 0.0 &&
          bridge_rng->uniform01() < std::exp(-g0 * g1 / dt)) {
        mark[k] = 1;
      }
    }
  }

  // Stack sweep over original clusters; groups inherit the boundary mark of
  // their rightmost constituent.
  struct Group {
    int leader;
    double q;
    int last;  // rightmost original cluster
  };
  std::vector<Group> groups;
  groups.reserve(n);
  for (int k = 0; k < n; ++k) {
    Group g{c.leader[k], q[k], k};
    while (!groups.empty() &&
           (mark[groups.back().last] || groups.back().q >= g.q)) {
      const Group& top = groups.back();
      if (sigma.rank(top.leader + 1) < sigma.rank(g.leader + 1)) {
        g.leader = top.leader;
        g.q = top.q;
      }
      groups.pop_back();
    }
    groups.push_back(g);
  }

  if (static_cast<int>(groups.size()) == n) {
    c.pos = q;
    return;
  }

  Clusters next;
  next.of.assign(c.of.size(), 0);
  int orig = 0;
  for (const auto& g : groups) {
    const int idx = next.count();
    next.leader.push_back(g.leader);
    next.pos.push_back(g.q);
    next.first.push_back(c.first[orig]);
    for (; orig <= g.last; ++orig) {
      const int lo = c.first[orig];
      const int hi = orig + 1 < c.count() ? c.first[orig + 1]
                                          : static_cast<int>(c.of.size());
      const bool leader_changed = c.leader[orig] != g.leader;
      for (int p = lo; p < hi; ++p) {
        next.of[p] = idx;
        if (leader_changed && table) {
          table->jumps[p].push_back({step, g.leader + 1});
        }
      }
    }
  }
  c = std::move(next);
}

}  // namespace

std::pair<PathBundle, FollowerTable> collide(const PathBundle& bundle,
                                             const RankPermutation& sigma) {
  const int m = bundle.particles();
  const int steps = bundle.steps();
  std::vector<double> starts(m);
  for (int i = 0; i < m; ++i) starts[i] = bundle.paths[i][0];
  FollowerTable table;
  table.steps = steps;
  Clusters c = init_clusters(starts, sigma, &table);

  PathBundle out;
  out.dt = bundle.dt;
  out.paths.assign(m, std::vector<double>(steps + 1));
  for (int i = 0; i < m; ++i) out.paths[i][0] = c.pos[c.of[i]];

  std::vector<double> q;
  for (int k = 0; k < steps; ++k) {
    q.resize(c.count());
    for (int j = 0; j < c.count(); ++j) {
      q[j] = bundle.paths[c.leader[j]][k + 1];
    }
    step_clusters(c, q, sigma, bundle.dt, false, nullptr, &table, k + 1);
    for (int i = 0; i < m; ++i) out.paths[i][k + 1] = c.pos[c.of[i]];
  }
  return {std::move(out), std::move(table)};
}

std::pair<PathBundle, FollowerTable> simulate_cbm(
    const std::vector<double>& starts, double T, double dt,
    const RankPermutation& sigma, bool bridge, RngStream& rng) {
  if (!(dt > 0.0)) throw NonPositiveDt("simulate_cbm: dt must be > 0");
  RngStream path_rng = rng.fork("paths");
  RngStream bridge_rng = rng.fork("bridge");
  const PathBundle raw = sample_bm_bundle(starts, T, dt, path_rng);
  if (!bridge) {
    auto result = collide(raw, sigma);
    return result;
  }
  const int m = raw.particles();
  const int steps = raw.steps();
  FollowerTable table;
  table.steps = steps;
  Clusters c = init_clusters(starts, sigma, &table);
  PathBundle out;
  out.dt = raw.dt;
  out.paths.assign(m, std::vector<double>(steps + 1));
  for (int i = 0; i < m; ++i) out.paths[i][0] = c.pos[c.of[i]];
  std::vector<double> q;
  for (int k = 0; k < steps; ++k) {
    q.resize(c.count());
    for (int j = 0; j < c.count(); ++j) {
      q[j] = raw.paths[c.leader[j]][k + 1];
    }
    step_clusters(c, q, sigma, raw.dt, true, &bridge_rng, &table, k + 1);
    for (int i = 0; i < m; ++i) out.paths[i][k + 1] = c.pos[c.of[i]];
  }
  return {std::move(out), std::move(table)};
}

StreamedCbm run_cbm_stream(const std::vector<double>& starts, double T,
                           double dt, const RankPermutation& sigma,
                           bool bridge, RngStream& rng, PathDraw draw,
                           int stop_at_clusters) {
  if (!(dt > 0.0)) throw NonPositiveDt("run_cbm_stream: dt must be > 0");
  RngStream path_rng = rng.fork("paths");
  RngStream bridge_rng = rng.fork("bridge");
  const int m = static_cast<int>(starts.size());
  const int steps = std::max(1, static_cast<int>(std::llround(T / dt)));
  const double step_sd = std::sqrt(T / steps);

  FollowerTable table;
  table.steps = steps;
  Clusters c = init_clusters(starts, sigma, &table);
  std::vector<double> raw = starts;  // per-particle raw paths (kAllParticles)
  std::vector<double> q;

  int k = 0;
  for (; k < steps; ++k) {
    if (stop_at_clusters > 0 && c.count() <= stop_at_clusters) break;
    q.resize(c.count());
    if (draw == PathDraw::kAllParticles) {
      for (int i = 0; i < m; ++i) raw[i] += step_sd * path_rng.normal();
      for (int j = 0; j < c.count(); ++j) q[j] = raw[c.leader[j]];
    } else {
      for (int j = 0; j < c.count(); ++j) {
        q[j] = c.pos[j] + step_sd * path_rng.normal();
      }
    }
    step_clusters(c, q, sigma, T / steps, bridge, &bridge_rng, &table, k + 1);
  }

  StreamedCbm result;
  result.clusters = c.count();
  result.steps_run = k;
  result.terminal.resize(m);
  for (int i = 0; i < m; ++i) result.terminal[i] = c.pos[c.of[i]];
  table.steps = k;
  result.followers = std::move(table);
  return result;
}

std::vector<double> transport_map_sample(const std::vector<double>& starts,
                                         double T, double dt, RngStream& rng,
                                         bool bridge) {
  const RankPermutation sigma = build_sigma(static_cast<int>(starts.size()));
  return run_cbm_stream(starts, T, dt, sigma, bridge, rng).terminal;
}

}  // namespace coalflow
