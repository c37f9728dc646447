#include "parps/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace parps::model {

ServiceLaw ServiceLaw::exponential(double mean) {
  ServiceLaw law;
  law.kind = Kind::Exponential;
  law.mean = mean;
  law.validate();
  return law;
}

ServiceLaw ServiceLaw::erlang(int phases, double mean) {
  ServiceLaw law;
  law.kind = Kind::Erlang;
  law.phases = phases;
  law.mean = mean;
  law.validate();
  return law;
}

ServiceLaw ServiceLaw::hyperexponential(std::vector<double> rates, std::vector<double> weights) {
  ServiceLaw law;
  law.kind = Kind::HyperExponential;
  law.rates = std::move(rates);
  law.weights = std::move(weights);
  law.mean = 0.0;
  for (std::size_t i = 0; i < law.rates.size() && i < law.weights.size(); ++i) {
    law.mean += law.weights[i] / law.rates[i];
  }
  law.validate();
  return law;
}

ServiceLaw ServiceLaw::hyperexponential_unit_mean(double rate1, double rate2) {
  if (rate1 == rate2) return exponential(1.0 / rate1);
  // p/r1 + (1-p)/r2 = 1
  const double p = (1.0 - 1.0 / rate2) / (1.0 / rate1 - 1.0 / rate2);
  return hyperexponential({rate1, rate2}, {p, 1.0 - p});
}

void ServiceLaw::validate() const {
  switch (kind) {
    case Kind::Exponential:
      if (!(mean > 0.0)) throw std::invalid_argument("service law: mean must be positive");
      break;
    case Kind::Erlang:
      if (phases < 1) throw std::invalid_argument("service law: Erlang needs >= 1 phases");
      if (!(mean > 0.0)) throw std::invalid_argument("service law: mean must be positive");
      break;
    case Kind::HyperExponential: {
      if (rates.empty() || rates.size() != weights.size()) {
        throw std::invalid_argument("service law: hyperexponential needs matching rates/weights");
      }
      double wsum = 0.0, m = 0.0;
      for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!(rates[i] > 0.0)) throw std::invalid_argument("service law: rates must be positive");
        if (weights[i] < 0.0) throw std::invalid_argument("service law: weights must be nonnegative");
        wsum += weights[i];
        m += weights[i] / rates[i];
      }
      if (std::abs(wsum - 1.0) > 1e-9) {
        throw std::invalid_argument("service law: weights must sum to 1");
      }
      if (std::abs(m - mean) > 1e-9) {
        throw std::invalid_argument("service law: declared mean does not match sum w_i/r_i");
      }
      break;
    }
  }
}

double ServiceLaw::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Exponential:
      return rng.exponential(1.0 / mean);
    case Kind::Erlang: {
      const double rate = phases / mean;
      double s = 0.0;
      for (int i = 0; i < phases; ++i) s += rng.exponential(rate);
      return s;
    }
    case Kind::HyperExponential: {
      double u = rng.uniform();
      for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
        if (u < weights[i]) return rng.exponential(rates[i]);
        u -= weights[i];
      }
      return rng.exponential(rates.back());
    }
  }
  return 0.0;  // unreachable
}

std::string ServiceLaw::describe() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Exponential:
      os << "exponential(mean=" << mean << ")";
      break;
    case Kind::Erlang:
      os << "erlang(phases=" << phases << ",mean=" << mean << ")";
      break;
    case Kind::HyperExponential:
      os << "hyperexp(";
      for (std::size_t i = 0; i < rates.size(); ++i) {
        if (i) os << ";";
        os << rates[i] << ":" << weights[i];
      }
      os << ")";
      break;
  }
  return os.str();
}

void SystemConfig::validate() const {
  if (n < 1) throw std::invalid_argument("config: n must be positive");
  if (d < 1 || d > n) throw std::invalid_argument("config: need 1 <= d <= n");
  if (!(lambda >= 0.0)) throw std::invalid_argument("config: lambda must be nonnegative");
  if (lambda >= 1.0 && !allow_unstable) {
    throw std::invalid_argument("config: lambda must satisfy lambda < 1 (stability); "
                                "set allow_unstable for instability demos");
  }
  service_law.validate();
}

void ClassIndex::validate(int n) const {
  if (servers.empty()) throw std::invalid_argument("class: empty server set");
  for (std::size_t i = 0; i < servers.size(); ++i) {
    if (servers[i] < 0 || servers[i] >= n) throw std::invalid_argument("class: server id out of range");
    if (i > 0 && servers[i] <= servers[i - 1]) {
      throw std::invalid_argument("class: server ids must be strictly increasing");
    }
  }
}

ClassIndex sample_class(Rng& rng, int n, int d) {
  return ClassIndex{sample_subset(rng, n, d)};
}

SystemState::SystemState(int n) : queue_lengths_(static_cast<std::size_t>(n), 0) {
  if (n < 1) throw std::invalid_argument("state: n must be positive");
}

void SystemState::add_job(const ClassIndex& cls) {
  ++counts_[cls];
  for (std::int32_t s : cls.servers) {
    if (queue_lengths_[static_cast<std::size_t>(s)]++ == 0) ++busy_;
  }
  ++total_jobs_;
}

void SystemState::remove_job(const ClassIndex& cls) {
  auto it = counts_.find(cls);
  if (it == counts_.end()) throw std::invalid_argument("remove_job: class has no jobs");
  const bool emptied = (--it->second == 0);
  // read the map's own key: `cls` may alias it and the node may be erased
  for (std::int32_t s : it->first.servers) {
    if (--queue_lengths_[static_cast<std::size_t>(s)] == 0) --busy_;
  }
  --total_jobs_;
  if (emptied) counts_.erase(it);
}

std::int64_t SystemState::count(const ClassIndex& cls) const {
  auto it = counts_.find(cls);
  return it == counts_.end() ? 0 : it->second;
}

bool SystemState::consistent() const {
  std::vector<std::int64_t> recount(queue_lengths_.size(), 0);
  std::int64_t jobs = 0;
  for (const auto& [cls, x] : counts_) {
    if (x <= 0) return false;
    jobs += x;
    for (std::int32_t s : cls.servers) recount[static_cast<std::size_t>(s)] += x;
  }
  if (jobs != total_jobs_) return false;
  int busy = 0;
  for (std::int64_t q : recount) busy += (q > 0);
  return recount == queue_lengths_ && busy == busy_;
}

double class_departure_rate(std::span<const std::int64_t> queue_lengths,
                            const ClassIndex& cls, std::int64_t count) {
  if (count == 0) return 0.0;
  if (count < 0) throw std::invalid_argument("class_departure_rate: negative count");
  double inv = 0.0;
  for (std::int32_t s : cls.servers) {
    const std::int64_t q = queue_lengths[static_cast<std::size_t>(s)];
    if (q < count) {
      throw InvariantViolation("class_departure_rate: queue length below class count");
    }
    inv += 1.0 / static_cast<double>(q);
  }
  return static_cast<double>(count) * inv;
}

double departure_rate(const SystemState& state, const ClassIndex& cls) {
  return class_departure_rate(state.queue_lengths(), cls, state.count(cls));
}

double total_departure_rate(const SystemState& state) {
  return static_cast<double>(state.busy_servers());
}

double lyapunov_drift(const SystemState& state, const SystemConfig& config) {
  const auto& q = state.queue_lengths();
  double sum_q = 0.0;
  for (std::int64_t v : q) sum_q += static_cast<double>(v);

  double departure_term = 0.0;
  for (const auto& [cls, x] : state.class_counts()) {
    double inv = 0.0, tot = 0.0;
    for (std::int32_t s : cls.servers) {
      const double qs = static_cast<double>(q[static_cast<std::size_t>(s)]);
      inv += 1.0 / qs;
      tot += qs;
    }
    departure_term += static_cast<double>(x) * inv * tot;
  }

  const double n_lambda = config.lambda * config.n;
  const double b = total_departure_rate(state);
  return 2.0 * config.lambda * config.d * sum_q - 2.0 * departure_term +
         config.d * (n_lambda + b);
}

double lyapunov_drift_bound(const SystemState& state, const SystemConfig& config) {
  double sum_q = 0.0;
  for (std::int64_t v : state.queue_lengths()) sum_q += static_cast<double>(v);
  const double b = total_departure_rate(state);
  return 2.0 * config.d * (config.lambda - 1.0) * sum_q +
         config.d * (config.n * config.lambda + b);
}

namespace {
template <typename T>
EmpiricalMeasure measure_from(std::span<const T> q, double time) {
  EmpiricalMeasure m;
  m.time = time;
  if (q.empty()) return m;
  T maxq = *std::max_element(q.begin(), q.end());
  m.counts.assign(static_cast<std::size_t>(maxq) + 1, 0.0);
  const double w = 1.0 / static_cast<double>(q.size());
  for (T v : q) m.counts[static_cast<std::size_t>(v)] += w;
  return m;
}
}  // namespace

EmpiricalMeasure EmpiricalMeasure::from_queue_lengths(std::span<const std::int64_t> q, double time) {
  return measure_from(q, time);
}

EmpiricalMeasure EmpiricalMeasure::from_queue_lengths(std::span<const int> q, double time) {
  return measure_from(q, time);
}

double EmpiricalMeasure::mean() const {
  double m = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) m += static_cast<double>(k) * counts[k];
  return m;
}

std::vector<double> EmpiricalMeasure::ccdf() const {
  std::vector<double> out(counts.size() + 1, 0.0);
  for (std::size_t k = counts.size(); k > 0; --k) out[k - 1] = out[k] + counts[k - 1];
  if (!out.empty()) out[0] = 1.0;
  return out;
}

}  // namespace parps::model
