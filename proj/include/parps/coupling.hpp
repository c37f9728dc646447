#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "parps/model.hpp"

namespace parps::coupling {

// Two copies of the chain constructed on one probability space so that the
// lower system's class counts never exceed the upper system's.
struct CoupledState {
  model::SystemState lower;
  model::SystemState upper;
};

bool dominated(const model::SystemState& lower, const model::SystemState& upper);

// (1/n) sum_j (upper q_j - lower q_j); a metric on dominated pairs.
double w_distance(const model::SystemState& lower, const model::SystemState& upper);

struct CoupledEvent {
  enum class Kind { Arrival, DepartureBoth, DepartureLower, DepartureUpper, None };
  Kind kind = Kind::None;
  model::ClassIndex cls;
  double dt = 0.0;
};

// One transition of the coupled pair. Arrivals share a single clock per
// class (realised by one aggregate clock plus a uniform class draw, which
// is equivalent); for classes with equal counts the upper departure clock
// is reused as the floor of the lower one; all clocks are regenerated
// after every event. Dominance is asserted after the event.
CoupledEvent coupled_step(CoupledState& state, const model::SystemConfig& config, Rng& rng);

struct WTrace {
  std::vector<double> times;
  std::vector<double> w_values;
  std::int64_t events = 0;
};

// Full coupled trajectory, sampling W every sample_dt time units.
WTrace run_coupled(const model::SystemConfig& config, double horizon,
                   const model::SystemState& lower_init, const model::SystemState& upper_init,
                   Rng& rng, double sample_dt);

// Evolve a single system for `horizon` time units (exponential service).
void evolve(model::SystemState& state, const model::SystemConfig& config, double horizon, Rng& rng);

// State of one system after warming from empty for `warm_time`.
model::SystemState warmed_state(const model::SystemConfig& config, double warm_time, Rng& rng);

// Empirical marginal cdfs on a time grid, started empty, with a pairwise
// one-sided ordering check: cdf_s >= cdf_t pointwise for s < t.
struct MonotoneReport {
  std::vector<double> grid;
  std::vector<std::vector<double>> mean_cdf;  // per time, level 0..kmax
  double worst_violation_sigma = 0.0;  // max over (s<t,k) of (cdf_t - cdf_s)/se
  bool ordered_within(double sigmas) const { return worst_violation_sigma <= sigmas; }
};

MonotoneReport monotone_start_check(const model::SystemConfig& config,
                                    std::span<const double> grid, int replicas, int threads = 1);

// Plug-in total-variation distance between the empty-start marginal at each
// grid time and a stationary reference built from one long warmed run.
struct TvCurve {
  std::vector<double> times;
  std::vector<double> tv;
  // first time the curve drops to `threshold` (linear interpolation);
  // -1 if it never does
  double time_to_reach(double threshold) const;
};

TvCurve tv_convergence_curve(const model::SystemConfig& config, std::span<const double> grid,
                             int replicas, int threads = 1);

}  // namespace parps::coupling
