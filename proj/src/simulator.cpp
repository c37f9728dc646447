#include "parps/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parps/parallel.hpp"
#include "parps/stats.hpp"

namespace parps::sim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Job-level state shared by the engines. Supports O(d) insertion/removal,
// O(1) uniform choice of a busy server and of a job within a server.
struct JobTable {
  struct Job {
    std::vector<std::int32_t> servers;
    std::vector<std::int32_t> slot;  // position inside each server's list
    double remaining = 0.0;          // workload engine only
    double rate = 0.0;               // workload engine only
    double arrival_time = 0.0;
  };

  explicit JobTable(int n) : lists(static_cast<std::size_t>(n)) {}

  std::vector<std::vector<std::int32_t>> lists;  // job ids per server
  std::vector<Job> jobs;
  std::vector<std::int32_t> busy;      // busy server ids
  std::vector<std::int32_t> busy_pos;  // server -> index in busy, or -1

  void init_busy() { busy_pos.assign(lists.size(), -1); }

  int queue_len(std::int32_t s) const { return static_cast<int>(lists[static_cast<std::size_t>(s)].size()); }
  int busy_count() const { return static_cast<int>(busy.size()); }
  int job_count() const { return static_cast<int>(jobs.size()); }

  std::int32_t add(std::vector<std::int32_t> servers, double remaining, double now) {
    const auto id = static_cast<std::int32_t>(jobs.size());
    Job job;
    job.servers = std::move(servers);
    job.remaining = remaining;
    job.arrival_time = now;
    job.slot.reserve(job.servers.size());
    for (std::int32_t s : job.servers) {
      auto& lst = lists[static_cast<std::size_t>(s)];
      if (lst.empty()) {
        busy_pos[static_cast<std::size_t>(s)] = static_cast<std::int32_t>(busy.size());
        busy.push_back(s);
      }
      job.slot.push_back(static_cast<std::int32_t>(lst.size()));
      lst.push_back(id);
    }
    jobs.push_back(std::move(job));
    return id;
  }

  void remove(std::int32_t id) {
    Job& job = jobs[static_cast<std::size_t>(id)];
    for (std::size_t k = 0; k < job.servers.size(); ++k) {
      const std::int32_t s = job.servers[k];
      auto& lst = lists[static_cast<std::size_t>(s)];
      const std::int32_t pos = job.slot[k];
      const std::int32_t moved = lst.back();
      lst[static_cast<std::size_t>(pos)] = moved;
      lst.pop_back();
      if (moved != id) {
        Job& m = jobs[static_cast<std::size_t>(moved)];
        for (std::size_t j = 0; j < m.servers.size(); ++j) {
          if (m.servers[j] == s) {
            m.slot[j] = pos;
            break;
          }
        }
      }
      if (lst.empty()) {
        const std::int32_t bp = busy_pos[static_cast<std::size_t>(s)];
        const std::int32_t last = busy.back();
        busy[static_cast<std::size_t>(bp)] = last;
        busy_pos[static_cast<std::size_t>(last)] = bp;
        busy.pop_back();
        busy_pos[static_cast<std::size_t>(s)] = -1;
      }
    }
    const auto last = static_cast<std::int32_t>(jobs.size()) - 1;
    if (id != last) {
      jobs[static_cast<std::size_t>(id)] = std::move(jobs[static_cast<std::size_t>(last)]);
      const Job& m = jobs[static_cast<std::size_t>(id)];
      for (std::size_t k = 0; k < m.servers.size(); ++k) {
        lists[static_cast<std::size_t>(m.servers[k])][static_cast<std::size_t>(m.slot[k])] = id;
      }
    }
    jobs.pop_back();
  }

  model::EmpiricalMeasure snapshot(double time) const {
    std::vector<int> q(lists.size());
    for (std::size_t s = 0; s < lists.size(); ++s) q[s] = static_cast<int>(lists[s].size());
    return model::EmpiricalMeasure::from_queue_lengths(std::span<const int>(q), time);
  }
};

// d distinct servers with `first` forced in; the remaining d-1 are uniform
// without replacement among the others.
std::vector<std::int32_t> subset_including(Rng& rng, int n, int d, std::int32_t first) {
  std::vector<std::int32_t> out{first};
  if (d > 1) {
    auto rest = sample_subset(rng, n - 1, d - 1);
    for (std::int32_t v : rest) out.push_back(v >= first ? v + 1 : v);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct SojournAccum {
  double sum = 0.0;
  std::int64_t count = 0;
  void record(double now, double arrival, double warmup) {
    if (arrival >= warmup) {
      sum += now - arrival;
      ++count;
    }
  }
};

QueueStats finalize(std::vector<model::EmpiricalMeasure> snaps, const SojournAccum& soj) {
  QueueStats out;
  out.snapshots = std::move(snaps);
  std::size_t kmax = 0;
  for (const auto& m : out.snapshots) kmax = std::max(kmax, m.counts.size());

  std::vector<double> snap_means;
  snap_means.reserve(out.snapshots.size());
  double pooled_total = 0.0;
  std::vector<double> pooled(std::max<std::size_t>(kmax, 1), 0.0);
  for (const auto& m : out.snapshots) {
    snap_means.push_back(m.mean());
    for (std::size_t k = 0; k < m.counts.size(); ++k) pooled[k] += m.counts[k];
    pooled_total += 1.0;
  }
  if (pooled_total > 0.0) {
    double acc = 0.0;
    out.empirical_cdf.resize(pooled.size());
    for (std::size_t k = 0; k < pooled.size(); ++k) {
      pooled[k] /= pooled_total;
      acc += pooled[k];
      out.empirical_cdf[k] = std::min(acc, 1.0);
    }
    if (!out.empirical_cdf.empty()) out.empirical_cdf.back() = 1.0;
    double mean = 0.0;
    for (std::size_t k = 0; k < pooled.size(); ++k) mean += static_cast<double>(k) * pooled[k];
    out.mean = mean;
  }
  const auto ci = stats::batch_means_ci(snap_means);
  out.mean_ci_halfwidth = ci.halfwidth;
  if (soj.count > 0) {
    out.mean_sojourn = soj.sum / static_cast<double>(soj.count);
    out.completed_jobs = soj.count;
  }
  return out;
}

void accumulate_pooled_counts(QueueStats& stats, int n) {
  std::size_t kmax = 0;
  for (const auto& m : stats.snapshots) kmax = std::max(kmax, m.counts.size());
  stats.pooled_histogram.assign(std::max<std::size_t>(kmax, 1), 0);
  for (const auto& m : stats.snapshots) {
    for (std::size_t k = 0; k < m.counts.size(); ++k) {
      stats.pooled_histogram[k] += std::llround(m.counts[k] * n);
    }
  }
}

void require_exponential(const model::SystemConfig& config, const char* engine) {
  if (!config.service_law.is_exponential()) {
    throw UnsupportedLawError(std::string(engine) +
                              " requires an exponential service law; use run_workload");
  }
}

}  // namespace

SnapshotPlan SnapshotPlan::defaults(const model::SystemConfig& config) {
  SnapshotPlan plan;
  const double relax = config.lambda < 1.0 ? 1.0 / (1.0 - config.lambda) : 1.0;
  plan.warmup = 10.0 * relax;
  plan.count = 100;
  plan.spacing = 5.0 * relax;
  return plan;
}

void SnapshotPlan::validate() const {
  if (count < 1) throw std::invalid_argument("snapshot plan: count must be >= 1");
  if (warmup < 0.0) throw std::invalid_argument("snapshot plan: warmup must be nonnegative");
  if (count > 1 && !(spacing > 0.0)) {
    throw std::invalid_argument("snapshot plan: spacing must be positive");
  }
}

QueueStats run_ctmc(const model::SystemConfig& config, const SnapshotPlan& plan) {
  config.validate();
  plan.validate();
  require_exponential(config, "run_ctmc");

  Rng rng(config.seed);
  JobTable tab(config.n);
  tab.init_busy();
  const double arrival_rate = config.n * config.lambda;
  const double service_scale = 1.0 / config.service_law.mean;

  std::vector<model::EmpiricalMeasure> snaps;
  snaps.reserve(static_cast<std::size_t>(plan.count));
  SojournAccum soj;
  double t = 0.0;
  int next_snap = 0;

  while (next_snap < plan.count) {
    const double rate = arrival_rate + tab.busy_count() * service_scale;
    const double te = t + rng.exponential(rate);
    while (next_snap < plan.count && plan.time_of(next_snap) <= te) {
      snaps.push_back(tab.snapshot(plan.time_of(next_snap)));
      ++next_snap;
    }
    if (next_snap >= plan.count) break;
    t = te;
    if (rng.uniform() * rate < arrival_rate) {
      tab.add(sample_subset(rng, config.n, config.d), 0.0, t);
    } else {
      const std::int32_t s = tab.busy[rng.below(static_cast<std::uint64_t>(tab.busy_count()))];
      const auto& lst = tab.lists[static_cast<std::size_t>(s)];
      const std::int32_t job = lst[rng.below(lst.size())];
      soj.record(t, tab.jobs[static_cast<std::size_t>(job)].arrival_time, plan.warmup);
      tab.remove(job);
    }
  }
  auto stats = finalize(std::move(snaps), soj);
  accumulate_pooled_counts(stats, config.n);
  return stats;
}

QueueStats run_uniformized(const model::SystemConfig& config, const SnapshotPlan& plan) {
  config.validate();
  plan.validate();
  require_exponential(config, "run_uniformized");

  Rng rng(config.seed);
  JobTable tab(config.n);
  tab.init_busy();
  const double service_scale = 1.0 / config.service_law.mean;
  const double rate = config.n * (config.lambda + service_scale);
  const double p_arrival = config.lambda / (config.lambda + service_scale);

  std::vector<model::EmpiricalMeasure> snaps;
  snaps.reserve(static_cast<std::size_t>(plan.count));
  SojournAccum soj;
  double t = 0.0;
  int next_snap = 0;

  while (next_snap < plan.count) {
    const double te = t + rng.exponential(rate);
    while (next_snap < plan.count && plan.time_of(next_snap) <= te) {
      snaps.push_back(tab.snapshot(plan.time_of(next_snap)));
      ++next_snap;
    }
    if (next_snap >= plan.count) break;
    t = te;
    const bool arrival = rng.uniform() < p_arrival;
    const auto s = static_cast<std::int32_t>(rng.below(static_cast<std::uint64_t>(config.n)));
    if (arrival) {
      tab.add(subset_including(rng, config.n, config.d, s), 0.0, t);
    } else {
      const auto& lst = tab.lists[static_cast<std::size_t>(s)];
      if (!lst.empty()) {
        const std::int32_t job = lst[rng.below(lst.size())];
        soj.record(t, tab.jobs[static_cast<std::size_t>(job)].arrival_time, plan.warmup);
        tab.remove(job);
      }
    }
  }
  auto stats = finalize(std::move(snaps), soj);
  accumulate_pooled_counts(stats, config.n);
  return stats;
}

QueueStats run_workload(const model::SystemConfig& config, const SnapshotPlan& plan) {
  config.validate();
  plan.validate();

  Rng rng(config.seed);
  JobTable tab(config.n);
  tab.init_busy();
  const double arrival_rate = config.n * config.lambda;

  std::vector<model::EmpiricalMeasure> snaps;
  snaps.reserve(static_cast<std::size_t>(plan.count));
  SojournAccum soj;
  double t = 0.0;
  double next_arrival = rng.exponential(arrival_rate);
  int next_snap = 0;

  auto recompute_rates = [&]() {
    for (auto& job : tab.jobs) {
      double r = 0.0;
      for (std::int32_t s : job.servers) r += 1.0 / tab.queue_len(s);
      job.rate = r;
    }
  };

  while (next_snap < plan.count) {
    // earliest completion under the current (frozen) rates
    double t_comp = kInf;
    std::int32_t comp_job = -1;
    for (std::int32_t j = 0; j < tab.job_count(); ++j) {
      const auto& job = tab.jobs[static_cast<std::size_t>(j)];
      const double fin = t + job.remaining / job.rate;
      if (fin < t_comp) {
        t_comp = fin;
        comp_job = j;
      }
    }
    const double te = std::min(next_arrival, t_comp);
    while (next_snap < plan.count && plan.time_of(next_snap) <= te) {
      snaps.push_back(tab.snapshot(plan.time_of(next_snap)));
      ++next_snap;
    }
    if (next_snap >= plan.count) break;

    const double dt = te - t;
    for (auto& job : tab.jobs) job.remaining = std::max(0.0, job.remaining - dt * job.rate);
    t = te;

    if (next_arrival <= t_comp) {
      auto servers = sample_subset(rng, config.n, config.d);
      const double work = config.service_law.sample(rng);
      tab.add(std::move(servers), work, t);
      next_arrival = t + rng.exponential(arrival_rate);
    } else {
      soj.record(t, tab.jobs[static_cast<std::size_t>(comp_job)].arrival_time, plan.warmup);
      tab.remove(comp_job);
    }
    recompute_rates();
  }
  auto stats = finalize(std::move(snaps), soj);
  accumulate_pooled_counts(stats, config.n);
  return stats;
}

QueueStats run(const model::SystemConfig& config, const SnapshotPlan& plan, Engine engine) {
  switch (engine) {
    case Engine::Ctmc:
      return run_ctmc(config, plan);
    case Engine::Uniformized:
      return run_uniformized(config, plan);
    case Engine::Workload:
      return run_workload(config, plan);
  }
  throw std::invalid_argument("run: unknown engine");
}

std::vector<model::EmpiricalMeasure> snapshots_at(const model::SystemConfig& config,
                                                  std::span<const double> times,
                                                  std::uint64_t seed) {
  config.validate();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] < times[i - 1])) {
      throw std::invalid_argument("snapshots_at: times must be sorted and nonnegative");
    }
  }
  require_exponential(config, "snapshots_at");

  Rng rng(seed);
  JobTable tab(config.n);
  tab.init_busy();
  const double arrival_rate = config.n * config.lambda;
  const double service_scale = 1.0 / config.service_law.mean;

  std::vector<model::EmpiricalMeasure> snaps;
  snaps.reserve(times.size());
  double t = 0.0;
  std::size_t next = 0;

  while (next < times.size()) {
    const double rate = arrival_rate + tab.busy_count() * service_scale;
    const double te = t + rng.exponential(rate);
    while (next < times.size() && times[next] <= te) {
      snaps.push_back(tab.snapshot(times[next]));
      ++next;
    }
    if (next >= times.size()) break;
    t = te;
    if (rng.uniform() * rate < arrival_rate) {
      tab.add(sample_subset(rng, config.n, config.d), 0.0, t);
    } else {
      const std::int32_t s = tab.busy[rng.below(static_cast<std::uint64_t>(tab.busy_count()))];
      const auto& lst = tab.lists[static_cast<std::size_t>(s)];
      tab.remove(lst[rng.below(lst.size())]);
    }
  }
  return snaps;
}

TransientCcdf transient_ccdf(const model::SystemConfig& config, std::span<const double> times,
                             int replicas, int kmax, int threads) {
  if (replicas < 1) throw std::invalid_argument("transient_ccdf: replicas must be >= 1");
  if (kmax < 0) throw std::invalid_argument("transient_ccdf: kmax must be >= 0");

  TransientCcdf out;
  out.times.assign(times.begin(), times.end());
  out.ybar.assign(times.size(), std::vector<double>(static_cast<std::size_t>(kmax) + 1, 0.0));

  std::vector<std::vector<std::vector<double>>> partial(
      static_cast<std::size_t>(replicas));
  run_items(replicas, threads, [&](int r) {
    auto snaps = snapshots_at(config, times, derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    auto& mine = partial[static_cast<std::size_t>(r)];
    mine.assign(times.size(), std::vector<double>(static_cast<std::size_t>(kmax) + 1, 0.0));
    for (std::size_t ti = 0; ti < snaps.size(); ++ti) {
      const auto cc = snaps[ti].ccdf();
      for (int k = 0; k <= kmax; ++k) {
        mine[ti][static_cast<std::size_t>(k)] =
            static_cast<std::size_t>(k) < cc.size() ? cc[static_cast<std::size_t>(k)] : 0.0;
      }
    }
  });

  for (const auto& mine : partial) {
    for (std::size_t ti = 0; ti < out.ybar.size(); ++ti) {
      for (std::size_t k = 0; k < out.ybar[ti].size(); ++k) out.ybar[ti][k] += mine[ti][k];
    }
  }
  for (auto& row : out.ybar) {
    for (auto& v : row) v /= static_cast<double>(replicas);
    row[0] = 1.0;
  }
  return out;
}

}  // namespace parps::sim
