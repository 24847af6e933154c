#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "gbox/errors.hpp"

namespace gbox {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Axis-aligned box: center plus strictly positive half-widths.
template <typename Scalar>
struct Box {
  Vec<Scalar> center;
  Vec<Scalar> offset;

  Eigen::Index dim() const { return center.size(); }
  bool valid() const {
    return center.size() == offset.size() && center.allFinite() && offset.allFinite() && (offset.array() > Scalar(0)).all();
  }
};

/// Gaussian with diagonal covariance; `variance` holds the diagonal.
template <typename Scalar>
struct DiagGaussian {
  Vec<Scalar> mean;
  Vec<Scalar> variance;

  Eigen::Index dim() const { return mean.size(); }
  bool valid() const {
    return mean.size() == variance.size() && mean.allFinite() && variance.allFinite() &&
           (variance.array() > Scalar(0)).all();
  }
};

/// Confidence level in standard deviations (1, 2, 3 cover ~68/95/99.7%).
class SigmaLevel {
 public:
  explicit SigmaLevel(double k) : k_(k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw ValidationError("sigma level must be positive");
  }
  double k() const { return k_; }

 private:
  double k_;
};

/// Applied inside energy evaluation only.
inline constexpr double kVarianceFloor = 1e-12;

namespace detail {
inline std::atomic<std::uint64_t>& floor_hit_counter() {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

inline double floored(double v) {
  if (v < kVarianceFloor) {
    floor_hit_counter().fetch_add(1, std::memory_order_relaxed);
    return kVarianceFloor;
  }
  return v;
}

template <typename A, typename B>
void require_same_dim(const DiagGaussian<A>& p, const DiagGaussian<B>& q) {
  if (p.dim() != q.dim()) {
    throw std::invalid_argument("dimension mismatch: " + std::to_string(p.dim()) + " vs " + std::to_string(q.dim()));
  }
}
}  // namespace detail

/// Number of variances clamped to kVarianceFloor since process start.
inline std::uint64_t variance_floor_hits() { return detail::floor_hit_counter().load(std::memory_order_relaxed); }

template <typename Scalar>
DiagGaussian<Scalar> box_to_gaussian(const Box<Scalar>& b) {
  return {b.center, b.offset.array().square().matrix()};
}

template <typename Scalar>
Box<Scalar> gaussian_to_box(const DiagGaussian<Scalar>& g, SigmaLevel level) {
  return {g.mean, (Scalar(level.k()) * g.variance.array().sqrt()).matrix()};
}

/// Closed form, summed per dimension in log space; accumulated in double.
template <typename Scalar>
double bhattacharyya_distance(const DiagGaussian<Scalar>& p, const DiagGaussian<Scalar>& q) {
  detail::require_same_dim(p, q);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.dim(); ++i) {
    const double v1 = detail::floored(static_cast<double>(p.variance[i]));
    const double v2 = detail::floored(static_cast<double>(q.variance[i]));
    const double vm = 0.5 * (v1 + v2);
    const double diff = static_cast<double>(p.mean[i]) - static_cast<double>(q.mean[i]);
    total += 0.125 * diff * diff / vm + 0.5 * std::log(vm) - 0.25 * std::log(v1) - 0.25 * std::log(v2);
  }
  return std::max(total, 0.0);
}

template <typename Scalar>
double bhattacharyya_coefficient(const DiagGaussian<Scalar>& p, const DiagGaussian<Scalar>& q) {
  return std::exp(-bhattacharyya_distance(p, q));
}

/// D_KL(p || q).
template <typename Scalar>
double kl_divergence(const DiagGaussian<Scalar>& p, const DiagGaussian<Scalar>& q) {
  detail::require_same_dim(p, q);
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.dim(); ++i) {
    const double vp = detail::floored(static_cast<double>(p.variance[i]));
    const double vq = detail::floored(static_cast<double>(q.variance[i]));
    const double diff = static_cast<double>(q.mean[i]) - static_cast<double>(p.mean[i]);
    total += vp / vq + diff * diff / vq - 1.0 + std::log(vq) - std::log(vp);
  }
  return std::max(0.5 * total, 0.0);
}

/// Half log-determinant of the covariance, i.e. the sum of log offsets.
template <typename Scalar>
double log_volume(const DiagGaussian<Scalar>& g) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < g.dim(); ++i) total += std::log(detail::floored(static_cast<double>(g.variance[i])));
  return 0.5 * total;
}

}  // namespace gbox
