#include "gbox/energy.hpp"

#include <cmath>

namespace gbox {
namespace {

// Gradients are accumulated with respect to (mean, variance) and converted
// to offsets once at the end.
struct VarGrad {
  Vec<double> mean;
  Vec<double> var;
  explicit VarGrad(Eigen::Index d) : mean(Vec<double>::Zero(d)), var(Vec<double>::Zero(d)) {}
};

GaussGrad to_offset_grad(const VarGrad& g, const Gaussian& x) {
  GaussGrad out(x.dim());
  out.mean = g.mean;
  for (Eigen::Index i = 0; i < x.dim(); ++i) {
    const double v = x.variance[i];
    // Below the floor the energy no longer depends on this coordinate.
    out.offset[i] = v < kVarianceFloor ? 0.0 : g.var[i] * 2.0 * std::sqrt(v);
  }
  return out;
}

double fl(double v) { return v < kVarianceFloor ? kVarianceFloor : v; }
double dfl(double v) { return v < kVarianceFloor ? 0.0 : 1.0; }

// Accumulates scale * dD_B(p, q).
void add_bhattacharyya_grad(const Gaussian& p, const Gaussian& q, double scale, VarGrad& gp, VarGrad& gq) {
  for (Eigen::Index i = 0; i < p.dim(); ++i) {
    const double v1 = fl(p.variance[i]);
    const double v2 = fl(q.variance[i]);
    const double vm = 0.5 * (v1 + v2);
    const double diff = p.mean[i] - q.mean[i];
    const double dmean = 0.25 * diff / vm;
    const double common = -diff * diff / (16.0 * vm * vm) + 0.25 / vm;
    gp.mean[i] += scale * dmean;
    gq.mean[i] -= scale * dmean;
    gp.var[i] += scale * (common - 0.25 / v1) * dfl(p.variance[i]);
    gq.var[i] += scale * (common - 0.25 / v2) * dfl(q.variance[i]);
  }
}

// Accumulates scale * dKL(p || q).
void add_kl_grad(const Gaussian& p, const Gaussian& q, double scale, VarGrad& gp, VarGrad& gq) {
  for (Eigen::Index i = 0; i < p.dim(); ++i) {
    const double vp = fl(p.variance[i]);
    const double vq = fl(q.variance[i]);
    const double diff = p.mean[i] - q.mean[i];
    gp.mean[i] += scale * diff / vq;
    gq.mean[i] -= scale * diff / vq;
    gp.var[i] += scale * 0.5 * (1.0 / vq - 1.0 / vp) * dfl(p.variance[i]);
    gq.var[i] += scale * 0.5 * (1.0 / vq - (vp + diff * diff) / (vq * vq)) * dfl(q.variance[i]);
  }
}

void add_log_volume_grad(const Gaussian& g, double scale, VarGrad& grad) {
  for (Eigen::Index i = 0; i < g.dim(); ++i) grad.var[i] += scale * 0.5 / fl(g.variance[i]) * dfl(g.variance[i]);
}

TripleLoss assemble(double value, const GaussTriple& t, const VarGrad& c, const VarGrad& p, const VarGrad& n) {
  TripleLoss out;
  out.value = value;
  out.grad.child = to_offset_grad(c, t.child);
  out.grad.parent = to_offset_grad(p, t.parent);
  out.grad.neg_parent = to_offset_grad(n, t.neg_parent);
  return out;
}

}  // namespace

void LossHyper::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(what);
  };
  require(margin > 0.0, "margin must be positive");
  require(lambda >= 0.0, "lambda must be non-negative");
  require(scale_c > 0.0, "C must be positive");
  require(min_var > 0.0, "min_var must be positive");
  require(max_var > min_var, "max_var must exceed min_var");
  require(w_sym >= 0.0 && w_asym >= 0.0 && w_vol >= 0.0, "loss weights must be non-negative");
  require(w_sym + w_asym + w_vol > 0.0, "loss weights must not all be zero");
}

TripleLoss sym_loss(const GaussTriple& t) {
  const Eigen::Index d = t.child.dim();
  VarGrad gc(d), gp(d), gn(d);

  const double pos = bhattacharyya_distance(t.parent, t.child);
  add_bhattacharyya_grad(t.parent, t.child, 1.0, gp, gc);

  const double bc_neg = bhattacharyya_coefficient(t.neg_parent, t.child);
  double neg_term;
  bool clamped = false;
  if (1.0 - bc_neg < kSymLogClamp) {
    neg_term = -std::log(kSymLogClamp);
    clamped = true;
  } else {
    neg_term = -std::log1p(-bc_neg);
    // d/dD [-ln(1 - e^{-D})] = -BC / (1 - BC)
    add_bhattacharyya_grad(t.neg_parent, t.child, -bc_neg / (1.0 - bc_neg), gn, gc);
  }
  auto out = assemble(pos + neg_term, t, gc, gp, gn);
  out.clamped = clamped;
  return out;
}

TripleLoss align_loss(const GaussTriple& t, double margin) {
  const Eigen::Index d = t.child.dim();
  VarGrad gc(d), gp(d), gn(d);
  const double slack = kl_divergence(t.child, t.parent) - kl_divergence(t.child, t.neg_parent) + margin;
  if (slack <= 0.0) return assemble(0.0, t, gc, gp, gn);
  add_kl_grad(t.child, t.parent, 1.0, gc, gp);
  add_kl_grad(t.child, t.neg_parent, -1.0, gc, gn);
  return assemble(slack, t, gc, gp, gn);
}

TripleLoss diverge_loss(const Gaussian& parent, const Gaussian& child, double scale_c) {
  detail::require_same_dim(parent, child);
  const Eigen::Index d = child.dim();
  VarGrad gc(d), gp(d), gn(d);
  const double rep = log_volume(parent) - log_volume(child);
  const double slack = scale_c * rep - kl_divergence(parent, child);
  GaussTriple view{child, parent, child};
  if (slack <= 0.0) {
    auto out = assemble(0.0, view, gc, gp, gn);
    return out;
  }
  add_log_volume_grad(parent, scale_c, gp);
  add_log_volume_grad(child, -scale_c, gc);
  add_kl_grad(parent, child, -1.0, gp, gc);
  return assemble(slack, view, gc, gp, gn);
}

TripleLoss asym_loss(const GaussTriple& t, double margin, double lambda, double scale_c) {
  TripleLoss out = align_loss(t, margin);
  if (lambda != 0.0) {
    TripleLoss div = diverge_loss(t.parent, t.child, scale_c);
    div.grad *= lambda;
    out.value += lambda * div.value;
    out.grad.child += div.grad.child;
    out.grad.parent += div.grad.parent;
  }
  return out;
}

SingleLoss min_var_reg(const Gaussian& g, double min_var) {
  const Eigen::Index d = g.dim();
  VarGrad grad(d);
  double total = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) {
    const double gap = min_var - g.variance[i];
    if (gap > 0.0) {
      total += gap * gap;
      grad.var[i] = -2.0 * gap / static_cast<double>(d);
    }
  }
  GaussGrad og(d);
  for (Eigen::Index i = 0; i < d; ++i) og.offset[i] = grad.var[i] * 2.0 * std::sqrt(std::max(g.variance[i], 0.0));
  return {total / static_cast<double>(d), og};
}

SingleLoss clip_reg(const Gaussian& g, double max_var) {
  const Eigen::Index d = g.dim();
  double total = 0.0;
  GaussGrad og(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double excess = g.variance[i] - max_var;
    if (excess > 0.0) {
      total += excess;
      og.offset[i] = 2.0 * std::sqrt(g.variance[i]) / static_cast<double>(d);
    }
  }
  return {total / static_cast<double>(d), og};
}

OverallLoss overall_loss(const GaussTriple& t, const LossHyper& h) {
  const Eigen::Index d = t.child.dim();
  OverallLoss out;
  out.grad = GradBundle(d);

  if (h.w_sym != 0.0) {
    TripleLoss sym = sym_loss(t);
    out.parts.sym = sym.value;
    out.clamped = sym.clamped;
    sym.grad *= h.w_sym;
    out.grad += sym.grad;
    out.value += h.w_sym * sym.value;
  }
  if (h.w_asym != 0.0) {
    TripleLoss align = align_loss(t, h.margin);
    out.parts.align = align.value;
    align.grad *= h.w_asym;
    out.grad += align.grad;
    out.value += h.w_asym * align.value;
    if (h.lambda != 0.0) {
      TripleLoss div = diverge_loss(t.parent, t.child, h.scale_c);
      out.parts.diverge = div.value;
      const double s = h.w_asym * h.lambda;
      out.grad.child.mean += s * div.grad.child.mean;
      out.grad.child.offset += s * div.grad.child.offset;
      out.grad.parent.mean += s * div.grad.parent.mean;
      out.grad.parent.offset += s * div.grad.parent.offset;
      out.value += s * div.value;
    }
  }
  if (h.w_vol != 0.0) {
    auto add_reg = [&](const Gaussian& g, GaussGrad& slot) {
      SingleLoss reg = min_var_reg(g, h.min_var);
      SingleLoss clip = clip_reg(g, h.max_var);
      out.parts.reg += reg.value;
      out.parts.clip += clip.value;
      reg.grad += clip.grad;
      reg.grad *= h.w_vol;
      slot += reg.grad;
    };
    add_reg(t.child, out.grad.child);
    add_reg(t.parent, out.grad.parent);
    add_reg(t.neg_parent, out.grad.neg_parent);
    out.value += h.w_vol * (out.parts.reg + out.parts.clip);
  }
  return out;
}

}  // namespace gbox
