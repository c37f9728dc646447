#include "parps/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace parps::meanfield {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw std::invalid_argument("meanfield: lambda must lie in (0,1)");
  }
}
}  // namespace

double phi(double x, double lambda, int d) {
  check_lambda(lambda);
  if (d < 1) throw std::invalid_argument("meanfield: d must be >= 1");
  if (x < 0.0) throw std::invalid_argument("meanfield: x must be nonnegative");
  if (x == 0.0) {
    return d * lambda < 1.0 ? (1.0 - lambda) / (1.0 - d * lambda) : kInf;
  }
  const double a = (d - 1) * lambda * x;
  double term = 1.0 - lambda;
  double sum = 0.0;
  for (int u = 1; u <= 1000000; ++u) {
    sum += term;
    const double ratio = d * lambda / (1.0 + u * a);
    term *= ratio;
    if (ratio < 1.0 && term <= 1e-15 * sum) {
      // geometric tail bound with the current (decreasing) ratio
      sum += term / (1.0 - ratio);
      return sum;
    }
  }
  // a > 0 makes the ratio eventually vanish, so this is unreachable for
  // valid inputs
  throw std::runtime_error("meanfield: phi series failed to converge");
}

Solution solve_fixed_point(double lambda, int d, double tol) {
  check_lambda(lambda);
  if (d < 2) throw std::invalid_argument("meanfield: fixed point needs d >= 2");
  if (!(tol > 0.0)) throw std::invalid_argument("meanfield: tol must be positive");

  double lo = 1e-9, hi = 1.0;
  int guard = 0;
  while (phi(lo, lambda, d) <= 1.0) {
    lo *= 0.5;
    if (++guard > 200) throw std::runtime_error("meanfield: lower bracket failure");
  }
  guard = 0;
  while (phi(hi, lambda, d) >= 1.0) {
    hi *= 2.0;
    if (++guard > 200) throw std::runtime_error("meanfield: upper bracket failure");
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double v = phi(mid, lambda, d);
    // phi is strictly decreasing; the sign change must stay inside
    if (v > 1.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }

  Solution sol;
  sol.lambda = lambda;
  sol.d = d;
  sol.xi = 0.5 * (lo + hi);
  sol.mean_q = 1.0 / sol.xi;
  sol.mu = (d - 1) * lambda * sol.xi;

  // invariant distribution, truncated once the geometric tail bound is tiny
  sol.pi.clear();
  sol.pi.push_back(1.0 - lambda);
  double term = sol.pi[0];
  for (int u = 1; u <= 1000000; ++u) {
    const double ratio = d * lambda / (1.0 + u * sol.mu);
    term *= ratio;
    sol.pi.push_back(term);
    if (ratio < 1.0) {
      const double next_ratio = d * lambda / (1.0 + (u + 1) * sol.mu);
      const double tail = term * next_ratio / (1.0 - next_ratio);
      if (tail < 1e-10 && u >= 4) {
        sol.truncation_k = u;
        sol.tail_mass_bound = tail;
        return sol;
      }
    }
  }
  throw std::runtime_error("meanfield: invariant distribution failed to truncate");
}

HeavyTrafficBound heavy_traffic_bound(double lambda, int d) {
  if (d < 2) throw std::invalid_argument("meanfield: heavy traffic bound needs d >= 2");
  HeavyTrafficBound out;
  out.c_d = (2.0 * d - 3.0) / (2.0 * (d - 1.0)) * std::log(4.0 * d / (4.0 * d - 1.0));
  out.bound = -std::log1p(-lambda) / out.c_d;
  out.applicable = lambda > (4.0 * d - 2.0) / (4.0 * d - 1.0) && lambda < 1.0;
  return out;
}

std::vector<double> stationary_cdf(const Solution& sol) {
  std::vector<double> cdf(sol.pi.size());
  double acc = 0.0;
  for (std::size_t u = 0; u < sol.pi.size(); ++u) {
    acc += sol.pi[u];
    cdf[u] = std::min(acc, 1.0);
  }
  return cdf;
}

std::vector<double> stationary_ccdf(const Solution& sol, int k) {
  std::vector<double> ybar(static_cast<std::size_t>(k) + 1, 0.0);
  // suffix sums keep ybar_k - ybar_{k+1} = pi_k exact
  double acc = 0.0;
  for (std::size_t u = sol.pi.size(); u-- > 0;) {
    acc += sol.pi[u];
    if (u < ybar.size()) ybar[u] = acc;
  }
  ybar[0] = 1.0;
  return ybar;
}

double ccdf_ratio(const CcdfState& state) {
  double tail_sum = 0.0;
  for (std::size_t k = 1; k < state.ybar.size(); ++k) tail_sum += state.ybar[k];
  if (tail_sum <= 0.0) return 1.0;
  return state.ybar[1] / tail_sum;
}

std::vector<LevelRates> ode_rates(const CcdfState& state, double lambda, int d) {
  check_lambda(lambda);
  const double ratio = ccdf_ratio(state);
  const std::size_t levels = state.ybar.empty() ? 0 : state.ybar.size() - 1;
  std::vector<LevelRates> rates(levels);
  for (std::size_t k = 1; k <= levels; ++k) {
    rates[k - 1].up = d * lambda;
    rates[k - 1].down = 1.0 + static_cast<double>(k) * (d - 1) * ratio;
  }
  return rates;
}

std::vector<double> ode_derivative(const CcdfState& state, double lambda, int d) {
  const std::size_t n = state.ybar.size();
  std::vector<double> dy(n, 0.0);
  if (n < 2) return dy;
  const double ratio = ccdf_ratio(state);
  const double up = d * lambda;
  for (std::size_t k = 1; k < n; ++k) {
    const double above = state.ybar[k - 1];
    const double here = state.ybar[k];
    const double below = k + 1 < n ? state.ybar[k + 1] : 0.0;
    const double down = 1.0 + static_cast<double>(k) * (d - 1) * ratio;
    dy[k] = up * (above - here) - down * (here - below);
  }
  return dy;
}

OdeResult integrate_ode(const CcdfState& initial, double horizon, double step,
                        double lambda, int d, int truncation_k) {
  check_lambda(lambda);
  if (!(step > 0.0)) throw std::invalid_argument("meanfield: step must be positive");
  if (horizon < 0.0) throw std::invalid_argument("meanfield: horizon must be nonnegative");
  if (truncation_k < 1) throw std::invalid_argument("meanfield: truncation must be >= 1");

  OdeResult res;
  CcdfState state;
  state.time = initial.time;
  state.ybar.assign(static_cast<std::size_t>(truncation_k) + 1, 0.0);
  for (std::size_t k = 0; k < state.ybar.size() && k < initial.ybar.size(); ++k) {
    state.ybar[k] = initial.ybar[k];
  }
  state.ybar[0] = 1.0;

  res.trajectory.push_back(state);
  const double t_end = initial.time + horizon;
  const std::size_t n = state.ybar.size();
  std::vector<double> k1, k2, k3, k4;
  CcdfState tmp;

  auto axpy = [&](const CcdfState& base, const std::vector<double>& grad, double h) {
    tmp.ybar = base.ybar;
    for (std::size_t i = 1; i < n; ++i) tmp.ybar[i] = base.ybar[i] + h * grad[i];
    tmp.ybar[0] = 1.0;
  };

  while (state.time < t_end - 1e-12) {
    const double h = std::min(step, t_end - state.time);
    k1 = ode_derivative(state, lambda, d);
    axpy(state, k1, 0.5 * h);
    k2 = ode_derivative(tmp, lambda, d);
    axpy(state, k2, 0.5 * h);
    k3 = ode_derivative(tmp, lambda, d);
    axpy(state, k3, h);
    k4 = ode_derivative(tmp, lambda, d);
    for (std::size_t i = 1; i < n; ++i) {
      state.ybar[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    state.time += h;

    // keep the state a valid ccdf; record how much repair was needed
    for (std::size_t i = 1; i < n; ++i) {
      double v = state.ybar[i];
      const double hi_bound = state.ybar[i - 1];
      double repaired = std::clamp(v, 0.0, hi_bound);
      res.max_clamp_violation = std::max(res.max_clamp_violation, std::abs(v - repaired));
      state.ybar[i] = repaired;
    }
    if (state.ybar[n - 1] > 1e-6) res.truncation_warning = true;
    res.trajectory.push_back(state);
  }
  return res;
}

}  // namespace parps::meanfield
