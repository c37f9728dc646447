#include "parps/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace parps::stats {

MeanCi batch_means_ci(std::span<const double> values, int batches) {
  MeanCi out;
  const std::size_t n = values.size();
  if (n == 0) return out;
  double total = 0.0;
  for (double v : values) total += v;
  out.mean = total / static_cast<double>(n);
  if (n < 2) return out;

  batches = std::min<int>(batches, static_cast<int>(n));
  if (batches < 2) batches = 2;
  const std::size_t per = n / static_cast<std::size_t>(batches);
  std::vector<double> bmeans;
  bmeans.reserve(static_cast<std::size_t>(batches));
  for (int b = 0; b < batches; ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * per;
    const std::size_t hi = (b == batches - 1) ? n : lo + per;
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += values[i];
    bmeans.push_back(s / static_cast<double>(hi - lo));
  }
  double bm = 0.0;
  for (double v : bmeans) bm += v;
  bm /= static_cast<double>(bmeans.size());
  double var = 0.0;
  for (double v : bmeans) var += (v - bm) * (v - bm);
  var /= static_cast<double>(bmeans.size() - 1);

  // 97.5% t quantiles for df = batches-1 (df >= 30 treated as normal)
  static constexpr double kT[] = {0,     12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                  2.306, 2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
                                  2.120, 2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069,
                                  2.064, 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  const int df = static_cast<int>(bmeans.size()) - 1;
  const double t = df <= 30 ? kT[df] : 1.960;
  out.halfwidth = t * std::sqrt(var / static_cast<double>(bmeans.size()));
  return out;
}

double ks_distance(std::span<const std::int64_t> hist_a, std::span<const std::int64_t> hist_b) {
  double na = 0.0, nb = 0.0;
  for (std::int64_t v : hist_a) na += static_cast<double>(v);
  for (std::int64_t v : hist_b) nb += static_cast<double>(v);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("ks_distance: empty sample");
  const std::size_t k = std::max(hist_a.size(), hist_b.size());
  double ca = 0.0, cb = 0.0, d = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    ca += i < hist_a.size() ? static_cast<double>(hist_a[i]) / na : 0.0;
    cb += i < hist_b.size() ? static_cast<double>(hist_b[i]) / nb : 0.0;
    d = std::max(d, std::abs(ca - cb));
  }
  return d;
}

double ks_pvalue(double distance, double n_a, double n_b) {
  if (n_a <= 0.0 || n_b <= 0.0) throw std::invalid_argument("ks_pvalue: empty sample");
  const double ne = n_a * n_b / (n_a + n_b);
  const double t = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * distance;
  // Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2)
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
    q += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

double tv_distance(std::span<const std::int64_t> hist_a, std::span<const std::int64_t> hist_b) {
  double na = 0.0, nb = 0.0;
  for (std::int64_t v : hist_a) na += static_cast<double>(v);
  for (std::int64_t v : hist_b) nb += static_cast<double>(v);
  if (na == 0.0 || nb == 0.0) throw std::invalid_argument("tv_distance: empty sample");
  const std::size_t k = std::max(hist_a.size(), hist_b.size());
  double tv = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double pa = i < hist_a.size() ? static_cast<double>(hist_a[i]) / na : 0.0;
    const double pb = i < hist_b.size() ? static_cast<double>(hist_b[i]) / nb : 0.0;
    tv += std::abs(pa - pb);
  }
  return 0.5 * tv;
}

double cdf_sup_distance(std::span<const double> a, std::span<const double> b) {
  const std::size_t k = std::max(a.size(), b.size());
  double d = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double va = i < a.size() ? a[i] : 1.0;
    const double vb = i < b.size() ? b[i] : 1.0;
    d = std::max(d, std::abs(va - vb));
  }
  return d;
}

}  // namespace parps::stats
