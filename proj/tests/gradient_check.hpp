#pragma once

// Finite-difference plumbing shared by the unit tests and the acceptance run.
// Triples are flattened as (mean, offset) per slot, the coordinates the net
// actually produces.

#include <cmath>
#include <functional>
#include <random>

#include "gbox/energy.hpp"
#include "oracles.hpp"

namespace gcheck {

using namespace gbox;

// Packs (mean, offset) of child, parent, negative into one vector.
inline Eigen::VectorXd pack(const GaussTriple& t) {
  const Eigen::Index d = t.child.dim();
  Eigen::VectorXd x(6 * d);
  const Gaussian* gs[] = {&t.child, &t.parent, &t.neg_parent};
  for (int k = 0; k < 3; ++k) {
    x.segment(2 * k * d, d) = gs[k]->mean;
    x.segment((2 * k + 1) * d, d) = gs[k]->variance.array().sqrt();
  }
  return x;
}

inline GaussTriple unpack(const Eigen::VectorXd& x, Eigen::Index d) {
  GaussTriple t;
  Gaussian* gs[] = {&t.child, &t.parent, &t.neg_parent};
  for (int k = 0; k < 3; ++k) {
    gs[k]->mean = x.segment(2 * k * d, d);
    gs[k]->variance = x.segment((2 * k + 1) * d, d).array().square();
  }
  return t;
}

inline Eigen::VectorXd pack(const GradBundle& g) {
  const Eigen::Index d = g.child.mean.size();
  Eigen::VectorXd x(6 * d);
  const GaussGrad* gs[] = {&g.child, &g.parent, &g.neg_parent};
  for (int k = 0; k < 3; ++k) {
    x.segment(2 * k * d, d) = gs[k]->mean;
    x.segment((2 * k + 1) * d, d) = gs[k]->offset;
  }
  return x;
}

struct TripleSampler {
  std::mt19937_64 rng;
  explicit TripleSampler(std::uint64_t seed) : rng(seed) {}

  double uni(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }

  // Alternates between generic triples and ones with a broad parent sitting on
  // the child, so that both hinges are exercised in their active region.
  GaussTriple draw(Eigen::Index d, int variant) {
    GaussTriple t;
    Gaussian* gs[] = {&t.child, &t.parent, &t.neg_parent};
    for (Gaussian* g : gs) {
      g->mean.resize(d);
      g->variance.resize(d);
      for (Eigen::Index i = 0; i < d; ++i) {
        g->mean[i] = uni(-1.5, 1.5);
        g->variance[i] = std::pow(uni(0.3, 1.5), 2);
      }
    }
    if (variant % 2 == 1) {
      for (Eigen::Index i = 0; i < d; ++i) {
        t.parent.mean[i] = t.child.mean[i] + uni(-0.2, 0.2);
        t.parent.variance[i] = t.child.variance[i] * uni(2.0, 6.0);
      }
    }
    return t;
  }
};

inline double align_slack(const GaussTriple& t, double margin) {
  return kl_divergence(t.child, t.parent) - kl_divergence(t.child, t.neg_parent) + margin;
}

inline double diverge_slack(const GaussTriple& t, double c) {
  return c * (log_volume(t.parent) - log_volume(t.child)) - kl_divergence(t.parent, t.child);
}

/// Relative error between the analytic gradient and central differences.
inline double gradient_error(const std::function<TripleLoss(const GaussTriple&)>& loss, const GaussTriple& t,
                             double h = 1e-5) {
  const Eigen::Index d = t.child.dim();
  const auto analytic = pack(loss(t).grad);
  const auto numeric =
      oracle::central_difference([&](const Eigen::VectorXd& x) { return loss(unpack(x, d)).value; }, pack(t), h);
  return oracle::relative_error(analytic, numeric);
}

}  // namespace gcheck
