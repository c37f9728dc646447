#pragma once

#include <vector>

namespace parps::meanfield {

// Equilibrium of the tagged-queue model: an M/M/1 queue with arrival rate
// d*lambda, service rate 1 and per-customer reneging rate mu, where mu is
// tied to the mean queue length through the fixed point.
struct Solution {
  double lambda = 0.0;
  int d = 0;
  double xi = 0.0;      // root of phi(xi) = 1
  double mean_q = 0.0;  // 1 / xi
  double mu = 0.0;      // (d-1) * lambda / mean_q
  std::vector<double> pi;  // invariant distribution, levels 0..truncation_k
  int truncation_k = 0;
  double tail_mass_bound = 0.0;
};

// phi(x) = sum_u (1-lambda) prod_{v=1}^u d*lambda / (1 + v (d-1) lambda x).
// Strictly decreasing in x. At x = 0 returns (1-lambda)/(1-d*lambda) when
// d*lambda < 1, +infinity otherwise.
double phi(double x, double lambda, int d);

// Unique root of phi(xi) = 1, found by bisection (the bracket is grown
// geometrically and the sign change asserted at every step).
Solution solve_fixed_point(double lambda, int d, double tol = 1e-10);

struct HeavyTrafficBound {
  double bound = 0.0;  // -log(1-lambda) / c_d
  bool applicable = false;  // lambda in ((4d-2)/(4d-1), 1)
  double c_d = 0.0;
};
HeavyTrafficBound heavy_traffic_bound(double lambda, int d);

// Cumulative sums of pi; value at 0 is exactly 1 - lambda.
std::vector<double> stationary_cdf(const Solution& sol);

// ccdf of the stationary distribution, padded/truncated to levels 0..k.
std::vector<double> stationary_ccdf(const Solution& sol, int k);

// Transient ccdf of the tagged queue; ybar[0] = 1, nonincreasing in k.
struct CcdfState {
  std::vector<double> ybar;
  double time = 0.0;
};

struct LevelRates {
  double up = 0.0;    // k -> k+1
  double down = 0.0;  // k -> k-1, i.e. 1 + k (d-1) ratio
};

// ybar_1 / sum_{l>=1} ybar_l; defined as 1 when the sum vanishes (mass
// then sits on levels {0,1} where the two coincide in the limit).
double ccdf_ratio(const CcdfState& state);

// Per-level rate pairs for levels 1..K.
std::vector<LevelRates> ode_rates(const CcdfState& state, double lambda, int d);

// d/dt of ybar_k for k = 1..K with boundaries ybar_0 = 1, ybar_{K+1} = 0.
std::vector<double> ode_derivative(const CcdfState& state, double lambda, int d);

struct OdeResult {
  std::vector<CcdfState> trajectory;   // includes t = 0 and t = horizon
  double max_clamp_violation = 0.0;    // largest monotonicity/range repair
  bool truncation_warning = false;     // ybar_K exceeded 1e-6 at some step
};

// Classic fixed-step 4th order integration of the ccdf dynamics.
OdeResult integrate_ode(const CcdfState& initial, double horizon, double step,
                        double lambda, int d, int truncation_k);

}  // namespace parps::meanfield
