#pragma once

#include <string>
#include <utility>
#include <vector>

#include "coalflow/rng.hpp"

namespace coalflow {

// Particle ranking. sigma[i-1] is the rank place of particle i (1 = highest
// rank); on collision everybody follows the smallest-sigma participant.
struct RankPermutation {
  int m = 0;
  std::vector<int> sigma;  // 1-based particle -> rank place

  int rank(int particle) const { return sigma[particle - 1]; }
};

// Dyadic ranking: writing i = (2i'+1) 2^p, particles with larger p rank
// higher, and among equal p larger i' ranks higher.  This orientation makes
// |ancestry(i)| = d - p exact (d = floor(log2 m) + 1) and keeps every
// ancestry set within log2(m) + 1 indices.
RankPermutation build_sigma(int m);

// Ancestry sets: all indices the follower function of particle i can attain.
// Computed by the neighbor recursion over the next-higher-ranked particles on
// each side.  Returned sets are sorted, 1-based.
std::vector<std::vector<int>> ancestry_sets(const RankPermutation& sigma);

// m raw trajectories on the uniform grid 0, dt, ..., steps*dt.
struct PathBundle {
  double dt = 0.0;
  std::vector<std::vector<double>> paths;  // [particle][grid index]

  int particles() const { return static_cast<int>(paths.size()); }
  int steps() const {
    return paths.empty() ? 0 : static_cast<int>(paths.front().size()) - 1;
  }
};

// Independent Brownian paths (variance dt per step), drawn step-major so a
// streaming consumer sees the same draw order.
PathBundle sample_bm_bundle(const std::vector<double>& starts, double T,
                            double dt, RngStream& rng);

// Piecewise-constant leader assignment per particle, stored as jump lists.
struct FollowerTable {
  int particles = 0;
  int steps = 0;
  // per particle: (grid index, leader), first entry at index 0
  std::vector<std::vector<std::pair<int, int>>> jumps;

  int leader_at(int particle, int step) const;  // 1-based particle, leader
};

// Checks follower properties: initial condition (f_i(0) <= i up to co-located
// starts), nonincreasing sigma of the leader, idempotence f_{f_i} = f_i, and
// absorption.  Returns false and fills `why` on first violation.
bool check_follower_properties(const FollowerTable& table,
                               const RankPermutation& sigma,
                               const std::vector<double>& starts,
                               std::string* why = nullptr);

// The collision-rule functional on a discrete bundle: particles stick on
// touch or crossing (order violation between consecutive grid times) and
// follow the highest-ranked participant thereafter.  Pure; no bridge draws.
// Throws UnorderedStarts.
std::pair<PathBundle, FollowerTable> collide(const PathBundle& bundle,
                                             const RankPermutation& sigma);

// Coalescing Brownian motion: independent BM paths run through the collision
// rule.  With bridge on, every adjacent uncoalesced cluster pair additionally
// coalesces with the Brownian-bridge crossing probability
// exp(-2 g0 g1 / (2 dt)) (the gap diffuses at rate 2), removing the O(sqrt(dt))
// grid-detection bias.  Path draws and bridge draws use independent child
// streams of `rng`.
std::pair<PathBundle, FollowerTable> simulate_cbm(
    const std::vector<double>& starts, double T, double dt,
    const RankPermutation& sigma, bool bridge, RngStream& rng);

enum class PathDraw {
  kLeadersOnly,   // draw increments only for live cluster leaders
  kAllParticles,  // draw for every particle; matches sample_bm_bundle draws
};

struct StreamedCbm {
  std::vector<double> terminal;  // per-particle positions at the last step run
  int clusters = 0;
  int steps_run = 0;
  FollowerTable followers;
};

// Streaming simulation without materializing paths.  Equivalent in law to
// simulate_cbm (bitwise equal to it under kAllParticles for the same stream);
// absorbed particles' raw increments are never read, so kLeadersOnly skips
// them.  stop_at_clusters > 0 stops early once the cluster count reaches it.
StreamedCbm run_cbm_stream(const std::vector<double>& starts, double T,
                           double dt, const RankPermutation& sigma,
                           bool bridge, RngStream& rng,
                           PathDraw draw = PathDraw::kLeadersOnly,
                           int stop_at_clusters = 0);

// Terminal values of the time-T transport map at the given starting points:
// simulate_cbm with the dyadic ranking, terminal column only.  Output is
// nondecreasing; coalesced entries are exactly equal.
std::vector<double> transport_map_sample(const std::vector<double>& starts,
                                         double T, double dt, RngStream& rng,
                                         bool bridge = true);

}  // namespace coalflow
