#include "parps/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "parps/parallel.hpp"
#include "parps/simulator.hpp"
#include "parps/stats.hpp"

namespace parps::coupling {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_unit_exponential(const model::SystemConfig& config, const char* who) {
  if (!config.service_law.is_exponential()) {
    throw sim::UnsupportedLawError(std::string(who) + " requires an exponential service law");
  }
}

void assert_dominance(const CoupledState& st) {
  if (!dominated(st.lower, st.upper)) {
    throw model::InvariantViolation("coupling: dominance violated after an event");
  }
}

}  // namespace

bool dominated(const model::SystemState& lower, const model::SystemState& upper) {
  if (lower.num_servers() != upper.num_servers()) return false;
  for (const auto& [cls, x] : lower.class_counts()) {
    if (x > upper.count(cls)) return false;
  }
  const auto& ql = lower.queue_lengths();
  const auto& qu = upper.queue_lengths();
  for (std::size_t j = 0; j < ql.size(); ++j) {
    if (ql[j] > qu[j]) return false;
  }
  return true;
}

double w_distance(const model::SystemState& lower, const model::SystemState& upper) {
  const auto& ql = lower.queue_lengths();
  const auto& qu = upper.queue_lengths();
  double s = 0.0;
  for (std::size_t j = 0; j < ql.size(); ++j) {
    s += std::abs(static_cast<double>(qu[j] - ql[j]));
  }
  return s / static_cast<double>(ql.size());
}

CoupledEvent coupled_step(CoupledState& state, const model::SystemConfig& config, Rng& rng) {
  config.validate();
  require_unit_exponential(config, "coupled_step");
  const double scale = 1.0 / config.service_law.mean;

  // the union of active classes in either system
  struct Entry {
    const model::ClassIndex* cls;
    std::int64_t xl, xu;
  };
  std::vector<Entry> entries;
  entries.reserve(state.lower.class_counts().size() + state.upper.class_counts().size());
  for (const auto& [cls, xl] : state.lower.class_counts()) {
    entries.push_back({&cls, xl, state.upper.count(cls)});
  }
  for (const auto& [cls, xu] : state.upper.class_counts()) {
    if (state.lower.count(cls) == 0) entries.push_back({&cls, 0, xu});
  }

  // the minimum over the per-class shared arrival clocks is a single
  // exponential clock at the aggregate rate, with a uniform class draw
  CoupledEvent best;
  best.kind = CoupledEvent::Kind::Arrival;
  best.dt = rng.exponential(config.n * config.lambda);

  for (const auto& e : entries) {
    const double rl = model::class_departure_rate(state.lower.queue_lengths(), *e.cls, e.xl) * scale;
    const double ru = model::class_departure_rate(state.upper.queue_lengths(), *e.cls, e.xu) * scale;
    if (e.xl == e.xu) {
      // lower queues are dominated, so the lower rate majorises the upper
      if (rl < ru - 1e-9) {
        throw model::InvariantViolation("coupling: departure-rate monotonicity failed");
      }
      const double zu = rng.exponential(ru);
      const double y = rng.exponential(std::max(0.0, rl - ru));
      if (zu <= y) {
        if (zu < best.dt) best = {CoupledEvent::Kind::DepartureBoth, *e.cls, zu};
      } else {
        if (y < best.dt) best = {CoupledEvent::Kind::DepartureLower, *e.cls, y};
        if (zu < best.dt) best = {CoupledEvent::Kind::DepartureUpper, *e.cls, zu};
      }
    } else {
      const double zl = rng.exponential(rl);
      const double zu = rng.exponential(ru);
      if (zl < best.dt) best = {CoupledEvent::Kind::DepartureLower, *e.cls, zl};
      if (zu < best.dt) best = {CoupledEvent::Kind::DepartureUpper, *e.cls, zu};
    }
  }

  if (std::isinf(best.dt)) {
    // nothing can ever fire (lambda = 0 and both systems empty)
    best.kind = CoupledEvent::Kind::None;
    return best;
  }

  switch (best.kind) {
    case CoupledEvent::Kind::None:
      break;
    case CoupledEvent::Kind::Arrival:
      best.cls = model::sample_class(rng, config.n, config.d);
      state.lower.add_job(best.cls);
      state.upper.add_job(best.cls);
      break;
    case CoupledEvent::Kind::DepartureBoth:
      state.lower.remove_job(best.cls);
      state.upper.remove_job(best.cls);
      break;
    case CoupledEvent::Kind::DepartureLower:
      state.lower.remove_job(best.cls);
      break;
    case CoupledEvent::Kind::DepartureUpper:
      state.upper.remove_job(best.cls);
      break;
  }
  assert_dominance(state);
  return best;
}

WTrace run_coupled(const model::SystemConfig& config, double horizon,
                   const model::SystemState& lower_init, const model::SystemState& upper_init,
                   Rng& rng, double sample_dt) {
  if (!(horizon > 0.0) || !(sample_dt > 0.0)) {
    throw std::invalid_argument("run_coupled: horizon and sample_dt must be positive");
  }
  if (!dominated(lower_init, upper_init)) {
    throw std::invalid_argument("run_coupled: initial states must satisfy lower <= upper");
  }
  CoupledState st{lower_init, upper_init};
  WTrace trace;
  double t = 0.0;
  double next_sample = 0.0;
  while (t < horizon) {
    // the pre-event state holds on [t, te)
    const double w_now = w_distance(st.lower, st.upper);
    CoupledEvent ev = coupled_step(st, config, rng);
    const double te = t + ev.dt;
    while (next_sample < te && next_sample <= horizon) {
      trace.times.push_back(next_sample);
      trace.w_values.push_back(w_now);
      next_sample += sample_dt;
    }
    t = te;
    ++trace.events;
  }
  return trace;
}

void evolve(model::SystemState& state, const model::SystemConfig& config, double horizon, Rng& rng) {
  config.validate();
  require_unit_exponential(config, "evolve");
  const double scale = 1.0 / config.service_law.mean;
  const double arrival_rate = config.n * config.lambda;
  double t = 0.0;
  std::vector<std::pair<const model::ClassIndex*, double>> rates;
  while (true) {
    rates.clear();
    double total_dep = 0.0;
    for (const auto& [cls, x] : state.class_counts()) {
      const double r = model::class_departure_rate(state.queue_lengths(), cls, x) * scale;
      rates.emplace_back(&cls, r);
      total_dep += r;
    }
    const double rate = arrival_rate + total_dep;
    t += rng.exponential(rate);
    if (t >= horizon) return;
    double u = rng.uniform() * rate;
    if (u < arrival_rate) {
      state.add_job(model::sample_class(rng, config.n, config.d));
    } else {
      u -= arrival_rate;
      const model::ClassIndex* pick = nullptr;
      for (const auto& [cls, r] : rates) {
        if (u < r) {
          pick = cls;
          break;
        }
        u -= r;
      }
      if (pick == nullptr) pick = rates.back().first;  // float roundoff guard
      state.remove_job(*pick);
    }
  }
}

model::SystemState warmed_state(const model::SystemConfig& config, double warm_time, Rng& rng) {
  model::SystemState state(config.n);
  evolve(state, config, warm_time, rng);
  return state;
}

MonotoneReport monotone_start_check(const model::SystemConfig& config,
                                    std::span<const double> grid, int replicas, int threads) {
  if (replicas < 2) throw std::invalid_argument("monotone_start_check: need >= 2 replicas");
  const std::size_t nt = grid.size();

  // per-replica cdf values at every grid time, up to a common level cap
  int kmax = 0;
  std::vector<std::vector<std::vector<double>>> cdfs(static_cast<std::size_t>(replicas));
  std::vector<int> kmax_per(static_cast<std::size_t>(replicas), 0);

  run_items(replicas, threads, [&](int r) {
    auto snaps = sim::snapshots_at(config, grid, derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    auto& mine = cdfs[static_cast<std::size_t>(r)];
    mine.resize(nt);
    for (std::size_t ti = 0; ti < nt; ++ti) {
      const auto& counts = snaps[ti].counts;
      mine[ti].resize(counts.size());
      double acc = 0.0;
      for (std::size_t k = 0; k < counts.size(); ++k) {
        acc += counts[k];
        mine[ti][k] = std::min(acc, 1.0);
      }
      kmax_per[static_cast<std::size_t>(r)] =
          std::max(kmax_per[static_cast<std::size_t>(r)], static_cast<int>(counts.size()));
    }
  });
  for (int v : kmax_per) kmax = std::max(kmax, v);

  auto cdf_at = [&](int r, std::size_t ti, int k) {
    const auto& v = cdfs[static_cast<std::size_t>(r)][ti];
    return static_cast<std::size_t>(k) < v.size() ? v[static_cast<std::size_t>(k)] : 1.0;
  };

  MonotoneReport rep;
  rep.grid.assign(grid.begin(), grid.end());
  rep.mean_cdf.assign(nt, std::vector<double>(static_cast<std::size_t>(kmax), 0.0));
  for (std::size_t ti = 0; ti < nt; ++ti) {
    for (int k = 0; k < kmax; ++k) {
      double s = 0.0;
      for (int r = 0; r < replicas; ++r) s += cdf_at(r, ti, k);
      rep.mean_cdf[ti][static_cast<std::size_t>(k)] = s / replicas;
    }
  }

  // paired z-scores of cdf_t(k) - cdf_s(k) for every s < t
  for (std::size_t si = 0; si < nt; ++si) {
    for (std::size_t ti = si + 1; ti < nt; ++ti) {
      for (int k = 0; k < kmax; ++k) {
        double sum = 0.0, sumsq = 0.0;
        for (int r = 0; r < replicas; ++r) {
          const double diff = cdf_at(r, ti, k) - cdf_at(r, si, k);
          sum += diff;
          sumsq += diff * diff;
        }
        const double mean = sum / replicas;
        const double var = std::max(0.0, (sumsq - sum * mean) / (replicas - 1));
        const double se = std::sqrt(var / replicas);
        if (se == 0.0) {
          if (mean > 0.0) rep.worst_violation_sigma = kInf;
          continue;
        }
        rep.worst_violation_sigma = std::max(rep.worst_violation_sigma, mean / se);
      }
    }
  }
  return rep;
}

double TvCurve::time_to_reach(double threshold) const {
  for (std::size_t i = 0; i < tv.size(); ++i) {
    if (tv[i] <= threshold) {
      if (i == 0) return times[0];
      const double t0 = times[i - 1], t1 = times[i];
      const double v0 = tv[i - 1], v1 = tv[i];
      if (v0 <= v1) return t1;
      return t0 + (v0 - threshold) / (v0 - v1) * (t1 - t0);
    }
  }
  return -1.0;
}

TvCurve tv_convergence_curve(const model::SystemConfig& config, std::span<const double> grid,
                             int replicas, int threads) {
  if (replicas < 1) throw std::invalid_argument("tv_convergence_curve: replicas must be >= 1");
  config.validate();

  // stationary reference: one long warmed run
  model::SystemConfig ref = config;
  ref.seed = derive_seed(config.seed, 0x5741524dull);
  sim::SnapshotPlan plan;
  const double relax = 1.0 / (1.0 - config.lambda);
  plan.warmup = 50.0 * relax;
  plan.count = 400;
  plan.spacing = 5.0 * relax;
  const auto stationary = sim::run_ctmc(ref, plan);

  // transient histograms pooled over replicas
  std::vector<std::vector<std::int64_t>> hist(grid.size());
  std::vector<std::vector<std::vector<std::int64_t>>> partial(static_cast<std::size_t>(replicas));
  run_items(replicas, threads, [&](int r) {
    auto snaps = sim::snapshots_at(config, grid, derive_seed(config.seed, static_cast<std::uint64_t>(r)));
    auto& mine = partial[static_cast<std::size_t>(r)];
    mine.resize(grid.size());
    for (std::size_t ti = 0; ti < grid.size(); ++ti) {
      const auto& counts = snaps[ti].counts;
      mine[ti].resize(counts.size());
      for (std::size_t k = 0; k < counts.size(); ++k) {
        mine[ti][k] = std::llround(counts[k] * config.n);
      }
    }
  });
  for (const auto& mine : partial) {
    for (std::size_t ti = 0; ti < grid.size(); ++ti) {
      if (hist[ti].size() < mine[ti].size()) hist[ti].resize(mine[ti].size(), 0);
      for (std::size_t k = 0; k < mine[ti].size(); ++k) hist[ti][k] += mine[ti][k];
    }
  }

  TvCurve curve;
  curve.times.assign(grid.begin(), grid.end());
  curve.tv.resize(grid.size());
  for (std::size_t ti = 0; ti < grid.size(); ++ti) {
    curve.tv[ti] = stats::tv_distance(hist[ti], stationary.pooled_histogram);
  }
  return curve;
}

}  // namespace parps::coupling
