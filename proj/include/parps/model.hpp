#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "parps/rng.hpp"

namespace parps::model {

// Thrown when a state fails one of its structural invariants (a cached
// queue length disagreeing with the class counts, a dominance breach, ...).
class InvariantViolation : public std::logic_error {
  using std::logic_error::logic_error;
};

// Job-size distribution. All laws are parametrised so that their mean is
// explicit; hyperexponential weights must give the declared mean.
struct ServiceLaw {
  enum class Kind { Exponential, Erlang, HyperExponential };

  Kind kind = Kind::Exponential;
  double mean = 1.0;
  int phases = 1;                     // Erlang only
  std::vector<double> rates;          // HyperExponential only
  std::vector<double> weights;        // HyperExponential only

  static ServiceLaw exponential(double mean = 1.0);
  static ServiceLaw erlang(int phases, double mean = 1.0);
  // mean is implied: sum_i weights[i] / rates[i]
  static ServiceLaw hyperexponential(std::vector<double> rates, std::vector<double> weights);
  // two rates, weights solved so the mean is exactly 1
  static ServiceLaw hyperexponential_unit_mean(double rate1, double rate2);

  bool is_exponential() const { return kind == Kind::Exponential; }
  void validate() const;
  double sample(Rng& rng) const;
  std::string describe() const;
};

// Parameters of one simulated system: n processor-sharing servers, jobs
// arriving at total rate n*lambda, each served by d servers in parallel.
struct SystemConfig {
  int n = 1;
  int d = 1;
  double lambda = 0.5;
  ServiceLaw service_law = ServiceLaw::exponential();
  std::uint64_t seed = 0;
  // lambda >= 1 is only accepted when this is set (instability demos)
  bool allow_unstable = false;

  void validate() const;
};

// A class of jobs: the sorted d-subset of servers that serve them.
struct ClassIndex {
  std::vector<std::int32_t> servers;  // strictly increasing

  friend bool operator==(const ClassIndex&, const ClassIndex&) = default;
  void validate(int n) const;
};

struct ClassIndexHash {
  std::size_t operator()(const ClassIndex& c) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull;
    for (std::int32_t s : c.servers) {
      h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)));
    }
    return static_cast<std::size_t>(h);
  }
};

// Uniformly random class among all C(n,d) subsets.
ClassIndex sample_class(Rng& rng, int n, int d);

// Sparse state of the class process: counts per active class plus cached
// per-server queue lengths. The C(n,d) class universe is never enumerated;
// only classes with at least one job are stored.
class SystemState {
 public:
  using CountMap = std::unordered_map<ClassIndex, std::int64_t, ClassIndexHash>;

  SystemState() = default;
  explicit SystemState(int n);

  int num_servers() const { return static_cast<int>(queue_lengths_.size()); }
  void add_job(const ClassIndex& cls);     // O(d)
  void remove_job(const ClassIndex& cls);  // O(d); throws if the class is empty
  std::int64_t count(const ClassIndex& cls) const;

  const CountMap& class_counts() const { return counts_; }
  const std::vector<std::int64_t>& queue_lengths() const { return queue_lengths_; }
  std::int64_t total_jobs() const { return total_jobs_; }
  int busy_servers() const { return busy_; }

  // Full recount of the cached queue lengths from the class counts.
  bool consistent() const;

 private:
  CountMap counts_;
  std::vector<std::int64_t> queue_lengths_;
  std::int64_t total_jobs_ = 0;
  int busy_ = 0;
};

// Departure rate of a class with `count` jobs given the queue lengths of
// its servers: count * sum_j 1/q_j. Throws InvariantViolation if some
// q_j = 0 while count > 0.
double class_departure_rate(std::span<const std::int64_t> queue_lengths,
                            const ClassIndex& cls, std::int64_t count);

double departure_rate(const SystemState& state, const ClassIndex& cls);

// Total service rate in the given state; equals the number of busy servers.
double total_departure_rate(const SystemState& state);

// Exact generator drift of Psi(x) = sum_j q_j^2. The contribution of the
// arrival terms over all C(n,d) classes collapses to 2*lambda*d*sum_j q_j
// plus d*n*lambda; only active classes contribute to the departure terms.
double lyapunov_drift(const SystemState& state, const SystemConfig& config);

// Upper bound 2d(lambda-1)*sum_j q_j + d(n*lambda + B(x)) on the drift.
double lyapunov_drift_bound(const SystemState& state, const SystemConfig& config);

// Fraction of servers at each queue length at one instant.
struct EmpiricalMeasure {
  std::vector<double> counts;  // counts[k] = fraction of servers with q = k
  double time = 0.0;

  static EmpiricalMeasure from_queue_lengths(std::span<const std::int64_t> q, double time);
  static EmpiricalMeasure from_queue_lengths(std::span<const int> q, double time);

  double mean() const;
  // ccdf[k] = fraction of servers with q >= k; ccdf[0] = 1
  std::vector<double> ccdf() const;
};

}  // namespace parps::model
