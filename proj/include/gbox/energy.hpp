#pragma once

#include "gbox/geometry.hpp"

namespace gbox {

using Gaussian = DiagGaussian<double>;

/// Child, positive parent, and one hard-negative parent.
struct GaussTriple {
  Gaussian child;
  Gaussian parent;
  Gaussian neg_parent;
};

/// Gradient with respect to one Gaussian box: its center and its offsets
/// (variance = offset^2 is folded through the chain rule).
struct GaussGrad {
  Vec<double> mean;
  Vec<double> offset;

  GaussGrad() = default;
  explicit GaussGrad(Eigen::Index d) : mean(Vec<double>::Zero(d)), offset(Vec<double>::Zero(d)) {}

  GaussGrad& operator+=(const GaussGrad& other) {
    mean += other.mean;
    offset += other.offset;
    return *this;
  }
  GaussGrad& operator*=(double s) {
    mean *= s;
    offset *= s;
    return *this;
  }
  bool all_finite() const { return mean.allFinite() && offset.allFinite(); }
};

struct GradBundle {
  GaussGrad child;
  GaussGrad parent;
  GaussGrad neg_parent;

  GradBundle() = default;
  explicit GradBundle(Eigen::Index d) : child(d), parent(d), neg_parent(d) {}

  GradBundle& operator+=(const GradBundle& other) {
    child += other.child;
    parent += other.parent;
    neg_parent += other.neg_parent;
    return *this;
  }
  GradBundle& operator*=(double s) {
    child *= s;
    parent *= s;
    neg_parent *= s;
    return *this;
  }
  bool all_finite() const { return child.all_finite() && parent.all_finite() && neg_parent.all_finite(); }
};

struct TripleLoss {
  double value = 0.0;
  GradBundle grad;
  bool clamped = false;  // the negative term hit the log-argument clamp
};

struct SingleLoss {
  double value = 0.0;
  GaussGrad grad;
};

struct LossHyper {
  double margin = 1.0;      // triplet margin on the KL alignment hinge
  double lambda = 0.3;      // weight of the coverage (diverge) term
  double scale_c = 1.5;     // required KL per unit of log-volume gap
  double min_var = 0.01;
  double max_var = 10.0;
  double w_sym = 0.45;
  double w_asym = 0.45;
  double w_vol = 0.10;

  /// Throws ValidationError.
  void validate() const;
};

/// Lower clamp on 1 - BC(neg, child) inside the symmetric loss.
inline constexpr double kSymLogClamp = 1e-7;

/// -ln BC(parent, child) - ln(1 - BC(neg_parent, child)).
TripleLoss sym_loss(const GaussTriple& t);

/// max(0, KL(child||parent) - KL(child||neg_parent) + margin).
TripleLoss align_loss(const GaussTriple& t, double margin);

/// max(0, C * (logvol(parent) - logvol(child)) - KL(parent||child)).
/// Only the `parent` and `child` slots of the gradient are populated.
TripleLoss diverge_loss(const Gaussian& parent, const Gaussian& child, double scale_c);

TripleLoss asym_loss(const GaussTriple& t, double margin, double lambda, double scale_c);

/// (1/d) * sum_i max(0, min_var - var_i)^2.
SingleLoss min_var_reg(const Gaussian& g, double min_var);

/// (1/d) * sum_i max(0, var_i - max_var).
SingleLoss clip_reg(const Gaussian& g, double max_var);

/// Unweighted component values; reg/clip are summed over all three members.
struct LossParts {
  double sym = 0.0;
  double align = 0.0;
  double diverge = 0.0;
  double reg = 0.0;
  double clip = 0.0;

  LossParts& operator+=(const LossParts& o) {
    sym += o.sym;
    align += o.align;
    diverge += o.diverge;
    reg += o.reg;
    clip += o.clip;
    return *this;
  }
  LossParts& operator*=(double s) {
    sym *= s;
    align *= s;
    diverge *= s;
    reg *= s;
    clip *= s;
    return *this;
  }
};

struct OverallLoss {
  double value = 0.0;
  LossParts parts;
  GradBundle grad;
  bool clamped = false;
};

/// w_sym * sym + w_asym * (align + lambda * diverge) + w_vol * (reg + clip).
/// Components whose weight is zero are skipped and reported as 0.
OverallLoss overall_loss(const GaussTriple& t, const LossHyper& h);

}  // namespace gbox
