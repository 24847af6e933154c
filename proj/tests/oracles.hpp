#pragma once

// Test-only reference computations. Nothing here calls into the closed-form
// paths under test.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

namespace oracle {

inline double simpson(const std::function<double(double)>& f, double a, double b, int intervals) {
  if (intervals % 2 == 1) ++intervals;
  const double h = (b - a) / intervals;
  double sum = f(a) + f(b);
  for (int i = 1; i < intervals; ++i) sum += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return sum * h / 3.0;
}

inline double log_normal_pdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

struct Range {
  double lo, hi;
};

inline Range support(double m1, double v1, double m2, double v2) {
  const double s = std::sqrt(std::max(v1, v2));
  return {std::min(m1, m2) - 14.0 * s, std::max(m1, m2) + 14.0 * s};
}

/// Integral of sqrt(p q) over the real line.
inline double bc_integral(double m1, double v1, double m2, double v2, int intervals = 200000) {
  const auto r = support(m1, v1, m2, v2);
  return simpson(
      [&](double x) { return std::exp(0.5 * (log_normal_pdf(x, m1, v1) + log_normal_pdf(x, m2, v2))); }, r.lo, r.hi,
      intervals);
}

/// ln of the integral of sqrt(p q), shifted by the integrand's largest grid
/// value so that far-apart narrow pairs do not underflow to zero.
inline double log_bc_integral(double m1, double v1, double m2, double v2, int intervals = 200000) {
  const auto r = support(m1, v1, m2, v2);
  auto log_f = [&](double x) { return 0.5 * (log_normal_pdf(x, m1, v1) + log_normal_pdf(x, m2, v2)); };
  const double h = (r.hi - r.lo) / intervals;
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= intervals; ++i) peak = std::max(peak, log_f(r.lo + i * h));
  return peak + std::log(simpson([&](double x) { return std::exp(log_f(x) - peak); }, r.lo, r.hi, intervals));
}

/// Integral of p ln(p / q).
inline double kl_integral(double mp, double vp, double mq, double vq, int intervals = 200000) {
  const auto r = support(mp, vp, mq, vq);
  return simpson(
      [&](double x) {
        const double lp = log_normal_pdf(x, mp, vp);
        return std::exp(lp) * (lp - log_normal_pdf(x, mq, vq));
      },
      r.lo, r.hi, intervals);
}

/// Central differences of a scalar function of a vector.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f,
                                          const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

/// Straight transcription of the ranking-metric definitions, one query at a
/// time, from explicit ranked id lists.
struct BruteQuery {
  std::vector<std::string> ranked;
  std::set<std::string> gold;
};

struct BruteMetrics {
  double mr = 0, mrr = 0;
  std::map<int, double> hit, recall;
};

inline BruteMetrics brute_metrics(const std::vector<BruteQuery>& queries, const std::vector<int>& ks) {
  BruteMetrics m;
  for (int k : ks) m.hit[k] = m.recall[k] = 0.0;
  for (const auto& q : queries) {
    std::vector<int> ranks;
    for (std::size_t pos = 0; pos < q.ranked.size(); ++pos)
      if (q.gold.count(q.ranked[pos])) ranks.push_back(static_cast<int>(pos) + 1);
    double rank_sum = 0;
    for (int r : ranks) rank_sum += r;
    m.mr += rank_sum / ranks.size();
    m.mrr += 1.0 / *std::min_element(ranks.begin(), ranks.end());
    for (int k : ks) {
      int found = 0;
      for (int pos = 0; pos < k && pos < static_cast<int>(q.ranked.size()); ++pos)
        if (q.gold.count(q.ranked[pos])) ++found;
      m.hit[k] += found > 0 ? 1.0 : 0.0;
      m.recall[k] += static_cast<double>(found) / q.gold.size();
    }
  }
  const double n = static_cast<double>(queries.size());
  m.mr /= n;
  m.mrr /= n;
  for (auto& [k, v] : m.hit) v /= n;
  for (auto& [k, v] : m.recall) v /= n;
  return m;
}

}  // namespace oracle
