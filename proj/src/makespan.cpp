#include "parps/makespan.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "parps/parallel.hpp"
#include "parps/rng.hpp"

namespace parps::makespan {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

void Hypergraph::validate() const {
  if (n < 1) throw std::invalid_argument("hypergraph: n must be positive");
  if (d < 1 || d > n) throw std::invalid_argument("hypergraph: need 1 <= d <= n");
  for (const auto& e : edges) {
    if (static_cast<int>(e.size()) != d) {
      throw std::invalid_argument("hypergraph: every edge must have exactly d vertices");
    }
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] < 0 || e[i] >= n) throw std::invalid_argument("hypergraph: vertex id out of range");
      if (i > 0 && e[i] <= e[i - 1]) {
        throw std::invalid_argument("hypergraph: edge vertices must be distinct and sorted");
      }
    }
  }
}

std::string Hypergraph::to_text() const {
  std::ostringstream os;
  os << n << " " << edges.size() << " " << d << "\n";
  for (const auto& e : edges) {
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (i) os << " ";
      os << e[i];
    }
    os << "\n";
  }
  return os.str();
}

Hypergraph Hypergraph::from_text(std::string_view text) {
  std::istringstream is{std::string(text)};
  Hypergraph h;
  std::size_t m = 0;
  if (!(is >> h.n >> m >> h.d)) throw std::invalid_argument("hypergraph: bad header line");
  h.edges.resize(m);
  for (auto& e : h.edges) {
    e.resize(static_cast<std::size_t>(h.d));
    for (auto& v : e) {
      if (!(is >> v)) throw std::invalid_argument("hypergraph: truncated edge list");
    }
    std::sort(e.begin(), e.end());
  }
  h.validate();
  return h;
}

Hypergraph Hypergraph::generate(int n, double lambda, int d, std::uint64_t seed) {
  if (n < 1 || d < 1 || d > n) throw std::invalid_argument("hypergraph: need 1 <= d <= n");
  if (!(lambda > 0.0)) throw std::invalid_argument("hypergraph: lambda must be positive");
  Hypergraph h;
  h.n = n;
  h.d = d;
  const auto m = static_cast<std::size_t>(std::floor(lambda * n));
  Rng rng(seed);
  h.edges.reserve(m);
  for (std::size_t i = 0; i < m; ++i) h.edges.push_back(sample_subset(rng, n, d));
  return h;
}

namespace {

struct Incidence {
  std::vector<std::vector<std::int32_t>> edges_of;  // vertex -> incident edge ids

  explicit Incidence(const Hypergraph& h) : edges_of(static_cast<std::size_t>(h.n)) {
    for (std::size_t e = 0; e < h.edges.size(); ++e) {
      for (std::int32_t v : h.edges[e]) {
        edges_of[static_cast<std::size_t>(v)].push_back(static_cast<std::int32_t>(e));
      }
    }
  }
};

}  // namespace

CoreResult k_core(const Hypergraph& h, int k) {
  h.validate();
  if (k < 0) throw std::invalid_argument("k_core: k must be nonnegative");

  CoreResult out;
  out.k = k;
  const Incidence inc(h);
  std::vector<int> deg(static_cast<std::size_t>(h.n));
  for (int v = 0; v < h.n; ++v) deg[static_cast<std::size_t>(v)] = static_cast<int>(inc.edges_of[static_cast<std::size_t>(v)].size());
  std::vector<char> removed(static_cast<std::size_t>(h.n), 0);
  std::vector<char> edge_dead(h.edges.size(), 0);

  std::vector<std::int32_t> stack;
  for (int v = 0; v < h.n; ++v) {
    if (deg[static_cast<std::size_t>(v)] < k) {
      stack.push_back(v);
      removed[static_cast<std::size_t>(v)] = 1;
    }
  }
  while (!stack.empty()) {
    const std::int32_t v = stack.back();
    stack.pop_back();
    for (std::int32_t e : inc.edges_of[static_cast<std::size_t>(v)]) {
      if (edge_dead[static_cast<std::size_t>(e)]) continue;
      edge_dead[static_cast<std::size_t>(e)] = 1;
      for (std::int32_t u : h.edges[static_cast<std::size_t>(e)]) {
        if (removed[static_cast<std::size_t>(u)]) continue;
        if (--deg[static_cast<std::size_t>(u)] < k) {
          removed[static_cast<std::size_t>(u)] = 1;
          stack.push_back(u);
        }
      }
    }
  }

  for (int v = 0; v < h.n; ++v) {
    if (!removed[static_cast<std::size_t>(v)]) out.vertices.push_back(v);
  }
  for (std::size_t e = 0; e < h.edges.size(); ++e) {
    if (!edge_dead[e]) out.edge_indices.push_back(static_cast<std::int32_t>(e));
  }
  out.empty = out.vertices.empty();
  return out;
}

namespace {

// Min-degree peeling with a bucket queue. Visits every vertex in order of
// its current degree; `on_eliminate(v, alive_incident_edges)` fires when v
// leaves, after which its surviving edges die.
void peel_min_degree(const Hypergraph& h,
                     const std::function<void(std::int32_t, const std::vector<std::int32_t>&)>& on_eliminate) {
  const Incidence inc(h);
  const auto n = static_cast<std::size_t>(h.n);
  std::vector<int> deg(n);
  int maxdeg = 0;
  for (std::size_t v = 0; v < n; ++v) {
    deg[v] = static_cast<int>(inc.edges_of[v].size());
    maxdeg = std::max(maxdeg, deg[v]);
  }
  std::vector<std::vector<std::int32_t>> bucket(static_cast<std::size_t>(maxdeg) + 1);
  for (std::size_t v = 0; v < n; ++v) bucket[static_cast<std::size_t>(deg[v])].push_back(static_cast<std::int32_t>(v));

  std::vector<char> removed(n, 0);
  std::vector<char> edge_dead(h.edges.size(), 0);
  std::vector<std::int32_t> alive;
  int cursor = 0;
  std::size_t left = n;
  while (left > 0) {
    while (cursor <= maxdeg && bucket[static_cast<std::size_t>(cursor)].empty()) ++cursor;
    auto& b = bucket[static_cast<std::size_t>(cursor)];
    const std::int32_t v = b.back();
    b.pop_back();
    if (removed[static_cast<std::size_t>(v)]) continue;
    if (deg[static_cast<std::size_t>(v)] != cursor) {
      // stale bucket entry; reinsert at the true (lower) degree
      bucket[static_cast<std::size_t>(deg[static_cast<std::size_t>(v)])].push_back(v);
      cursor = std::min(cursor, deg[static_cast<std::size_t>(v)]);
      continue;
    }
    removed[static_cast<std::size_t>(v)] = 1;
    --left;
    alive.clear();
    for (std::int32_t e : inc.edges_of[static_cast<std::size_t>(v)]) {
      if (!edge_dead[static_cast<std::size_t>(e)]) alive.push_back(e);
    }
    on_eliminate(v, alive);
    for (std::int32_t e : alive) {
      edge_dead[static_cast<std::size_t>(e)] = 1;
      for (std::int32_t u : h.edges[static_cast<std::size_t>(e)]) {
        if (!removed[static_cast<std::size_t>(u)]) {
          const int nd = --deg[static_cast<std::size_t>(u)];
          bucket[static_cast<std::size_t>(nd)].push_back(u);
          cursor = std::min(cursor, nd);
        }
      }
    }
  }
}

}  // namespace

int max_core_number(const Hypergraph& h) {
  h.validate();
  if (h.edges.empty()) return 0;
  const Incidence inc(h);
  int k_star = 0;
  // recompute each elimination degree from the alive incidence list
  peel_min_degree(h, [&](std::int32_t, const std::vector<std::int32_t>& alive) {
    k_star = std::max(k_star, static_cast<int>(alive.size()));
  });
  return k_star;
}

MakespanResult makespan_bounds(const Hypergraph& h) {
  h.validate();
  MakespanResult out;
  if (h.edges.empty()) {
    out.assignment_feasible = true;
    return out;
  }
  out.k_star = max_core_number(h);
  out.lower = static_cast<double>(out.k_star) / h.d;
  out.upper = static_cast<double>(out.k_star);

  // constructive assignment: when a vertex is eliminated, it devotes 1/k*
  // to each edge still incident on it
  const double share = 1.0 / out.k_star;
  std::vector<double> job_rate(h.edges.size(), 0.0);
  bool caps_ok = true;
  peel_min_degree(h, [&](std::int32_t, const std::vector<std::int32_t>& alive) {
    if (static_cast<int>(alive.size()) > out.k_star) caps_ok = false;
    for (std::int32_t e : alive) job_rate[static_cast<std::size_t>(e)] += share;
  });
  out.min_job_rate = *std::min_element(job_rate.begin(), job_rate.end());
  out.assignment_feasible = caps_ok && out.min_job_rate >= share - 1e-12;
  return out;
}

namespace {

// Dinic max flow on small dense-ish graphs with double capacities.
class MaxFlow {
 public:
  explicit MaxFlow(int nodes) : head_(static_cast<std::size_t>(nodes)) {}

  void add_edge(int u, int v, double cap) {
    head_[static_cast<std::size_t>(u)].push_back(static_cast<int>(arcs_.size()));
    arcs_.push_back({v, cap});
    head_[static_cast<std::size_t>(v)].push_back(static_cast<int>(arcs_.size()));
    arcs_.push_back({u, 0.0});
  }

  double solve(int s, int t) {
    double flow = 0.0;
    while (bfs(s, t)) {
      iter_.assign(head_.size(), 0);
      for (;;) {
        const double pushed = dfs(s, t, kInf);
        if (pushed <= 0.0) break;
        flow += pushed;
      }
    }
    return flow;
  }

  // arcs are stored as (forward, reverse) pairs; flow sits on the reverse cap
  int arc_count() const { return static_cast<int>(arcs_.size()) / 2; }
  double arc_flow(int idx) const { return arcs_[static_cast<std::size_t>(2 * idx + 1)].cap; }

 private:
  struct Arc {
    int to;
    double cap;
  };
  static constexpr double kEps = 1e-12;

  bool bfs(int s, int t) {
    level_.assign(head_.size(), -1);
    std::queue<int> q;
    q.push(s);
    level_[static_cast<std::size_t>(s)] = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int a : head_[static_cast<std::size_t>(u)]) {
        const Arc& arc = arcs_[static_cast<std::size_t>(a)];
        if (arc.cap > kEps && level_[static_cast<std::size_t>(arc.to)] < 0) {
          level_[static_cast<std::size_t>(arc.to)] = level_[static_cast<std::size_t>(u)] + 1;
          q.push(arc.to);
        }
      }
    }
    return level_[static_cast<std::size_t>(t)] >= 0;
  }

  double dfs(int u, int t, double limit) {
    if (u == t) return limit;
    for (auto& i = iter_[static_cast<std::size_t>(u)]; i < static_cast<int>(head_[static_cast<std::size_t>(u)].size()); ++i) {
      const int a = head_[static_cast<std::size_t>(u)][static_cast<std::size_t>(i)];
      Arc& arc = arcs_[static_cast<std::size_t>(a)];
      if (arc.cap <= kEps || level_[static_cast<std::size_t>(arc.to)] != level_[static_cast<std::size_t>(u)] + 1) continue;
      const double pushed = dfs(arc.to, t, std::min(limit, arc.cap));
      if (pushed > 0.0) {
        arc.cap -= pushed;
        arcs_[static_cast<std::size_t>(a ^ 1)].cap += pushed;
        return pushed;
      }
    }
    return 0.0;
  }

  std::vector<std::vector<int>> head_;
  std::vector<Arc> arcs_;
  std::vector<int> level_;
  std::vector<int> iter_;
};

// T is a feasible makespan iff every job can be served at rate 1/T under
// unit server capacities, i.e. the max flow saturates all job arcs.
bool makespan_feasible(const Hypergraph& h, double t_value, CapacityAssignment* certificate) {
  const int m = static_cast<int>(h.edges.size());
  const int source = 0;
  const int sink = 1 + m + h.n;
  MaxFlow net(sink + 1);
  const double need = 1.0 / t_value;
  std::vector<std::vector<int>> arc_of_edge(static_cast<std::size_t>(m));
  for (int e = 0; e < m; ++e) {
    net.add_edge(source, 1 + e, need);
    for (std::int32_t v : h.edges[static_cast<std::size_t>(e)]) {
      arc_of_edge[static_cast<std::size_t>(e)].push_back(net.arc_count());
      net.add_edge(1 + e, 1 + m + v, kInf);
    }
  }
  for (int v = 0; v < h.n; ++v) net.add_edge(1 + m + v, sink, 1.0);
  const double flow = net.solve(source, sink);
  const bool ok = flow >= m * need * (1.0 - 1e-9);
  if (ok && certificate != nullptr) {
    certificate->per_edge.assign(static_cast<std::size_t>(m), {});
    for (int e = 0; e < m; ++e) {
      const auto& edge = h.edges[static_cast<std::size_t>(e)];
      for (std::size_t i = 0; i < edge.size(); ++i) {
        certificate->per_edge[static_cast<std::size_t>(e)].emplace_back(
            edge[i], net.arc_flow(arc_of_edge[static_cast<std::size_t>(e)][i]));
      }
    }
  }
  return ok;
}

}  // namespace

double makespan_exact(const Hypergraph& h, double eps, CapacityAssignment* certificate) {
  h.validate();
  if (h.edges.empty()) throw std::invalid_argument("makespan_exact: need at least one edge");
  if (!(eps > 0.0)) throw std::invalid_argument("makespan_exact: eps must be positive");

  const int k_star = max_core_number(h);
  double lo = static_cast<double>(k_star) / h.d;
  double hi = static_cast<double>(k_star);
  if (makespan_feasible(h, lo, certificate)) return lo;
  while (hi - lo > eps) {
    const double mid = 0.5 * (lo + hi);
    if (makespan_feasible(h, mid, nullptr)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  if (certificate != nullptr) makespan_feasible(h, hi, certificate);
  return hi;
}

double gamma_threshold(int k, int d) {
  if (k < 2 || d < 2) throw std::invalid_argument("gamma_threshold: need k, d >= 2");

  // log of P(Z_mu >= k-1), tail summed upward from its first term
  auto log_tail = [k](double mu) {
    const int j0 = k - 1;
    double logterm = -mu + j0 * std::log(mu) - std::lgamma(j0 + 1.0);
    // sum term * (1 + mu/(j0+1) + ...) in linear space relative to term
    double rel = 1.0, add = 1.0;
    for (int j = j0 + 1; j < j0 + 10000; ++j) {
      add *= mu / j;
      rel += add;
      if (add < 1e-18 * rel && j > mu) break;
    }
    return logterm + std::log(rel);
  };
  double log_fact = std::lgamma(static_cast<double>(d));
  auto log_g = [&](double logmu) {
    const double mu = std::exp(logmu);
    return logmu + log_fact - (d - 1) * log_tail(mu);
  };

  // coarse scan over log mu, then golden-section refinement
  const double lo = std::log(1e-9), hi = std::log(100.0);
  const int grid = 400;
  int best = 0;
  double best_val = kInf;
  for (int i = 0; i <= grid; ++i) {
    const double x = lo + (hi - lo) * i / grid;
    const double v = log_g(x);
    if (v < best_val) {
      best_val = v;
      best = i;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / grid;
  double b = lo + (hi - lo) * std::min(grid, best + 1) / grid;
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  while (b - a > 1e-12) {
    const double c = b - gr * (b - a);
    const double e = a + gr * (b - a);
    if (log_g(c) < log_g(e)) {
      b = e;
    } else {
      a = c;
    }
  }
  return std::exp(log_g(0.5 * (a + b)));
}

std::vector<PhasePoint> core_phase_diagram(int n, int d, std::span<const double> lambdas,
                                           int trials, int k, std::uint64_t seed, int threads) {
  if (trials < 1) throw std::invalid_argument("core_phase_diagram: trials must be >= 1");
  std::vector<PhasePoint> out(lambdas.size());
  const int items = static_cast<int>(lambdas.size()) * trials;
  std::vector<char> nonempty(static_cast<std::size_t>(items), 0);

  run_items(items, threads, [&](int item) {
    const int li = item / trials;
    const auto h = Hypergraph::generate(n, lambdas[static_cast<std::size_t>(li)], d,
                                        derive_seed(seed, static_cast<std::uint64_t>(item)));
    nonempty[static_cast<std::size_t>(item)] = !k_core(h, k).empty;
  });

  for (std::size_t li = 0; li < lambdas.size(); ++li) {
    int cnt = 0;
    for (int t = 0; t < trials; ++t) cnt += nonempty[li * static_cast<std::size_t>(trials) + static_cast<std::size_t>(t)];
    out[li] = {lambdas[li], static_cast<double>(cnt) / trials};
  }
  return out;
}

}  // namespace parps::makespan
