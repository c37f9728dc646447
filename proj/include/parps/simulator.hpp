#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "parps/model.hpp"

namespace parps::sim {

// Raised when an engine is asked to run a service law it cannot handle.
class UnsupportedLawError : public std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// When and how often queue lengths are recorded. The defaults follow the
// relaxation time of the system: warmup 10/(1-lambda), one hundred
// snapshots spaced 5/(1-lambda) apart.
struct SnapshotPlan {
  double warmup = 0.0;
  int count = 1;
  double spacing = 1.0;

  static SnapshotPlan defaults(const model::SystemConfig& config);
  void validate() const;
  double time_of(int i) const { return warmup + i * spacing; }
};

// Snapshot-based queue-length statistics of one run.
struct QueueStats {
  std::vector<model::EmpiricalMeasure> snapshots;
  double mean = 0.0;               // pooled mean queue length
  double mean_ci_halfwidth = 0.0;  // 95%, batch means over snapshots
  std::vector<double> empirical_cdf;
  std::vector<std::int64_t> pooled_histogram;  // raw counts over all snapshots

  // sojourn bookkeeping for Little's-law checks: jobs arriving after the
  // warmup that completed before the run ended
  double mean_sojourn = 0.0;
  std::int64_t completed_jobs = 0;
};

enum class Engine { Ctmc, Uniformized, Workload };

// Direct exponential-clock simulation of the class process: next event is
// an arrival with probability n*lambda / (n*lambda + B), otherwise a
// departure of a class chosen proportionally to its rate (realised by
// picking a uniform busy server, then a uniform job at it).
// Exponential service only.
QueueStats run_ctmc(const model::SystemConfig& config, const SnapshotPlan& plan);

// Uniformised chain: events at constant total rate n*(lambda + 1/mean);
// an event is an arrival with probability lambda/(lambda + 1/mean), else a
// virtual service at a uniform server (no-op when the server is idle).
// Exponential service only.
QueueStats run_uniformized(const model::SystemConfig& config, const SnapshotPlan& plan);

// Workload engine: tracks each job's remaining work, served at rate
// sum_j 1/q_j which is piecewise constant between events. Any service law.
QueueStats run_workload(const model::SystemConfig& config, const SnapshotPlan& plan);

QueueStats run(const model::SystemConfig& config, const SnapshotPlan& plan, Engine engine);

// Queue-length snapshots at the given (sorted) times, starting empty.
std::vector<model::EmpiricalMeasure> snapshots_at(const model::SystemConfig& config,
                                                  std::span<const double> times,
                                                  std::uint64_t seed);

// Empirical ccdf of the queue-length marginal at the given times, averaged
// over independent replicas started empty.
struct TransientCcdf {
  std::vector<double> times;
  std::vector<std::vector<double>> ybar;  // ybar[t][k], k = 0..kmax
};

TransientCcdf transient_ccdf(const model::SystemConfig& config, std::span<const double> times,
                             int replicas, int kmax = 3, int threads = 1);

}  // namespace parps::sim
