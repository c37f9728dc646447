#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace parps::makespan {

// n servers (vertices), jobs as d-vertex hyperedges; duplicates allowed
// (sampling is with replacement across jobs).
struct Hypergraph {
  int n = 0;
  int d = 0;
  std::vector<std::vector<std::int32_t>> edges;

  void validate() const;

  // text format: first line "n m d", then m lines of d vertex ids (0-based)
  std::string to_text() const;
  static Hypergraph from_text(std::string_view text);

  // floor(lambda*n) hyperedges, each an independent uniform d-subset
  static Hypergraph generate(int n, double lambda, int d, std::uint64_t seed);
};

struct CoreResult {
  int k = 0;
  std::vector<std::int32_t> vertices;      // retained, ascending
  std::vector<std::int32_t> edge_indices;  // retained, ascending
  bool empty = true;
};

// Maximal vertex-induced subgraph with all degrees >= k, by bucketed
// peeling in O(n + sum of edge sizes). Deletion order does not affect
// the result.
CoreResult k_core(const Hypergraph& h, int k);

// Largest k with a non-empty k-core: min-degree peeling, tracking the
// maximum minimum degree seen. 0 when the graph has no edges.
int max_core_number(const Hypergraph& h);

struct MakespanResult {
  double lower = 0.0;  // k*/d
  double upper = 0.0;  // k*
  std::optional<double> exact;
  int k_star = 0;
  // audit of the constructive peeling-order assignment x(v,e) = 1/k*
  bool assignment_feasible = false;
  double min_job_rate = 0.0;  // smallest total rate any job receives
};

// Bounds from the core number plus the peeling-order capacity assignment.
MakespanResult makespan_bounds(const Hypergraph& h);

// x(v,e) for the vertices of each edge, in edge order.
struct CapacityAssignment {
  std::vector<std::vector<std::pair<std::int32_t, double>>> per_edge;
};

// Optimal makespan of the capacity-assignment LP, to within eps: binary
// search on the makespan with a max-flow feasibility oracle (job arcs of
// capacity 1/T, unit server capacities; T feasible iff the flow saturates
// all job arcs). When `certificate` is given it receives the assignment
// realising the returned makespan.
double makespan_exact(const Hypergraph& h, double eps, CapacityAssignment* certificate = nullptr);

// Poisson-tail threshold inf_mu mu*(d-1)!/P(Z_mu >= k-1)^{d-1}; the
// k-core of the random d-uniform hypergraph emerges when lambda*d!
// crosses it.
double gamma_threshold(int k, int d);

struct PhasePoint {
  double lambda = 0.0;
  double nonempty_fraction = 0.0;
};

// Fraction of sampled hypergraphs with a non-empty k-core, per lambda.
std::vector<PhasePoint> core_phase_diagram(int n, int d, std::span<const double> lambdas,
                                           int trials, int k, std::uint64_t seed,
                                           int threads = 1);

}  // namespace parps::makespan
