// Acceptance run: one line per criterion, non-zero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gbox/boxes.hpp"
#include "gbox/energy.hpp"
#include "gbox/geometry.hpp"
#include "gbox/projection.hpp"
#include "gbox/rank_eval.hpp"
#include "gradient_check.hpp"
#include "oracles.hpp"
#include "synthetic_benchmark.hpp"

using namespace gbox;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(const char* name, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s  %-34s %s [%.1fs]\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), secs);
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Gaussian g1(double mean, double var) { return {Vec<double>::Constant(1, mean), Vec<double>::Constant(1, var)}; }

Verdict closed_form_vs_integration() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> mean(-5.0, 5.0), var(0.01, 25.0);
  double worst_db = 0, worst_bc = 0, worst_kl = 0;
  for (int draw = 0; draw < 200; ++draw) {
    const double m1 = mean(rng), v1 = var(rng), m2 = mean(rng), v2 = var(rng);
    const auto p = g1(m1, v1), q = g1(m2, v2);
    const double log_bc = oracle::log_bc_integral(m1, v1, m2, v2);
    worst_db = std::max(worst_db, std::abs(bhattacharyya_distance(p, q) + log_bc));
    worst_bc = std::max(worst_bc, std::abs(bhattacharyya_coefficient(p, q) - std::exp(log_bc)));
    worst_kl = std::max(worst_kl, std::abs(kl_divergence(p, q) - oracle::kl_integral(m1, v1, m2, v2)));
  }
  const double worst = std::max({worst_db, worst_bc, worst_kl});
  return {worst <= 1e-6, fmt("200 draws; max abs err D_B %.1e, BC %.1e, KL %.1e (tol 1e-6)", worst_db, worst_bc, worst_kl)};
}

Verdict loss_gradients() {
  using gcheck::align_slack;
  using gcheck::diverge_slack;
  struct Case {
    const char* name;
    std::function<TripleLoss(const GaussTriple&, const LossHyper&)> loss;
    // Distance from the nearest hinge kink; draws closer than 1e-3 are redrawn.
    std::function<double(const GaussTriple&, const LossHyper&)> kink;
  };
  auto var_gap = [](const Gaussian& g, double threshold) { return (g.variance.array() - threshold).abs().minCoeff(); };
  auto single = [](SingleLoss r, const GaussTriple& t) {
    TripleLoss out{r.value, GradBundle(t.child.dim()), false};
    out.grad.child = r.grad;
    return out;
  };
  const std::vector<Case> cases{
      {"sym", [](const GaussTriple& t, const LossHyper&) { return sym_loss(t); },
       [](const GaussTriple&, const LossHyper&) { return 1.0; }},
      {"align", [](const GaussTriple& t, const LossHyper& h) { return align_loss(t, h.margin); },
       [&](const GaussTriple& t, const LossHyper& h) { return std::abs(align_slack(t, h.margin)); }},
      {"diverge", [](const GaussTriple& t, const LossHyper& h) { return diverge_loss(t.parent, t.child, h.scale_c); },
       [&](const GaussTriple& t, const LossHyper& h) { return std::abs(diverge_slack(t, h.scale_c)); }},
      {"asym", [](const GaussTriple& t, const LossHyper& h) { return asym_loss(t, h.margin, h.lambda, h.scale_c); },
       [&](const GaussTriple& t, const LossHyper& h) {
         return std::min(std::abs(align_slack(t, h.margin)), std::abs(diverge_slack(t, h.scale_c)));
       }},
      {"min_var", [&](const GaussTriple& t, const LossHyper& h) { return single(min_var_reg(t.child, h.min_var), t); },
       [&](const GaussTriple& t, const LossHyper& h) { return var_gap(t.child, h.min_var); }},
      {"clip", [&](const GaussTriple& t, const LossHyper& h) { return single(clip_reg(t.child, h.max_var), t); },
       [&](const GaussTriple& t, const LossHyper& h) { return var_gap(t.child, h.max_var); }},
      {"overall",
       [](const GaussTriple& t, const LossHyper& h) {
         const auto o = overall_loss(t, h);
         return TripleLoss{o.value, o.grad, o.clamped};
       },
       [&](const GaussTriple& t, const LossHyper& h) {
         double gap = std::min(std::abs(align_slack(t, h.margin)), std::abs(diverge_slack(t, h.scale_c)));
         for (const Gaussian* g : {&t.child, &t.parent, &t.neg_parent})
           gap = std::min({gap, var_gap(*g, h.min_var), var_gap(*g, h.max_var)});
         return gap;
       }},
  };
  LossHyper h;
  h.min_var = 0.8;
  h.max_var = 0.9;
  gcheck::TripleSampler sampler(77);
  std::mt19937_64 dims(5);
  std::string detail;
  bool ok = true;
  for (const auto& c : cases) {
    double worst = 0;
    int checked = 0, attempts = 0;
    while (checked < 50 && attempts < 5000) {
      ++attempts;
      const auto t = sampler.draw(1 + static_cast<Eigen::Index>(dims() % 16), attempts);
      if (c.kink(t, h) < 1e-3) continue;
      worst = std::max(worst, gcheck::gradient_error([&](const GaussTriple& x) { return c.loss(x, h); }, t));
      ++checked;
    }
    ok = ok && checked == 50 && worst <= 1e-4;
    detail += fmt("%s %.0e, ", c.name, worst);
  }
  return {ok, detail};
}

Verdict end_to_end_gradient() {
  std::mt19937_64 rng(99);
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
  double worst = 0;
  int checked = 0, attempts = 0;
  while (checked < 50 && attempts < 2000) {
    ++attempts;
    const int k = pick(2, 16), hid = pick(2, 8), d = pick(1, 4);
    const Activation act = attempts % 2 == 0 ? Activation::relu : Activation::gelu;
    const ProjectionParams p = init_params(k, hid, d, rng(), 0.0, act);
    Eigen::MatrixXd inputs(k, 3);
    std::normal_distribution<double> nd;
    for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = nd(rng);
    LossHyper h;
    h.min_var = std::uniform_real_distribution<double>(0.1, 0.3)(rng);
    h.max_var = std::uniform_real_distribution<double>(0.3, 0.6)(rng);

    auto triple_of = [&](const ProjectionParams& q) {
      const auto r = forward(q, inputs, Mode::eval);
      return GaussTriple{box_to_gaussian(r.boxes.box(0)), box_to_gaussian(r.boxes.box(1)),
                         box_to_gaussian(r.boxes.box(2))};
    };
    const auto t = triple_of(p);
    Rng dropout_rng(0);
    const auto fwd = forward(p, inputs, Mode::train, &dropout_rng);
    if (act == Activation::relu) {
      const double near = std::min(fwd.trace->center.pre.cwiseAbs().minCoeff(), fwd.trace->offset.pre.cwiseAbs().minCoeff());
      if (near < 1e-3) continue;
    }
    double gap = std::min(std::abs(gcheck::align_slack(t, h.margin)), std::abs(gcheck::diverge_slack(t, h.scale_c)));
    for (const Gaussian* g : {&t.child, &t.parent, &t.neg_parent}) {
      gap = std::min({gap, (g->variance.array() - h.min_var).abs().minCoeff(),
                      (g->variance.array() - h.max_var).abs().minCoeff()});
    }
    if (gap < 1e-3) continue;

    const auto loss = overall_loss(t, h);
    Eigen::MatrixXd gc(d, 3), go(d, 3);
    const GaussGrad* slots[] = {&loss.grad.child, &loss.grad.parent, &loss.grad.neg_parent};
    for (int j = 0; j < 3; ++j) {
      gc.col(j) = slots[j]->mean;
      go.col(j) = slots[j]->offset;
    }
    const Eigen::VectorXd analytic = flatten(backward(p, *fwd.trace, gc, go));
    const Eigen::VectorXd numeric = oracle::central_difference(
        [&](const Eigen::VectorXd& flat) {
          ProjectionParams q = p;
          assign_flat(q, flat);
          return overall_loss(triple_of(q), h).value;
        },
        flatten(p));
    worst = std::max(worst, oracle::relative_error(analytic, numeric));
    ++checked;
  }
  return {checked == 50 && worst <= 1e-4,
          fmt("%d nets (k<=16, h<=8, d<=4, relu/gelu); max rel err %.1e (tol 1e-4)", checked, worst)};
}

Verdict metric_oracle() {
  std::mt19937_64 rng(31);
  const std::vector<int> ks{1, 2, 5, 10};
  double worst = 0;
  bool identity = true;
  for (int set = 0; set < 100; ++set) {
    const bool single = set % 2 == 0;
    const int n_anchors = 2 + static_cast<int>(rng() % 25);
    std::vector<NodeId> ids;
    std::vector<ConceptRecord> nodes;
    for (int i = 0; i < n_anchors; ++i) {
      ids.push_back("a" + std::to_string(i));
      nodes.push_back({ids.back(), ids.back(), ""});
    }
    std::vector<RankedPrediction> preds;
    std::vector<oracle::BruteQuery> brute;
    const int n_queries = 1 + static_cast<int>(rng() % 20);
    for (int q = 0; q < n_queries; ++q) {
      std::vector<Gaussian> gs;
      std::vector<NodeId> order = ids;
      std::shuffle(order.begin(), order.end(), rng);
      // Scores strictly decreasing along `order`.
      for (std::size_t i = 0; i < order.size(); ++i) gs.push_back(g1(static_cast<double>(i), 1.0));
      std::set<NodeId> gold{order[rng() % order.size()]};
      if (!single)
        for (int e = static_cast<int>(rng() % 4); e > 0; --e) gold.insert(order[rng() % order.size()]);
      preds.push_back(rank_query(AnchorIndex(order, gs), "q", g1(-1.0, 1.0), gold, ScorerKind::neg_kl));
      brute.push_back({order, gold});
    }
    MetricOptions opts;
    opts.ks = ks;
    opts.single_parent = false;
    const auto r = compute_metrics(preds, opts, TaxonomyGraph::build(nodes, {}));
    const auto b = oracle::brute_metrics(brute, ks);
    worst = std::max({worst, std::abs(r.mr - b.mr), std::abs(r.mrr - b.mrr)});
    for (int k : ks) {
      worst = std::max({worst, std::abs(r.hit.at(k) - b.hit.at(k)), std::abs(r.recall.at(k) - b.recall.at(k))});
      if (single) identity = identity && r.recall.at(k) == r.hit.at(k);
    }
  }
  return {worst <= 1e-12 && identity,
          fmt("100 sets (half multi-parent); max abs diff %.1e; single-parent R@k == Hit@k: %s", worst,
              identity ? "yes" : "no")};
}

Verdict fisher() {
  const std::vector<double> two{0.05, 0.05};
  const auto r = fisher_combine(two);
  double identity = 0;
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const double p = std::uniform_real_distribution<double>(1e-8, 1.0)(rng);
    const std::vector<double> one{p};
    identity = std::max(identity, std::abs(fisher_combine(one).combined_p - p));
  }
  const double closed = std::abs(r.combined_p - std::exp(-r.chi2 / 2) * (1 + r.chi2 / 2));
  const bool ok = std::abs(r.chi2 - 11.9829) <= 1e-3 && std::abs(r.combined_p - 0.01742) <= 1e-4 && closed <= 1e-12 &&
                  identity <= 1e-10;
  return {ok, fmt("chi2 %.4f, p %.6f (4-dof closed form err %.1e); k=1 identity max err %.1e", r.chi2, r.combined_p,
                  closed, identity)};
}

double mean_mrr(const bench::Outcome& o) { return 0.5 * (o.bc.mrr + o.kl.mrr); }
double mean_r1(const bench::Outcome& o) { return 0.5 * (o.bc.recall.at(1) + o.kl.recall.at(1)); }

struct SeedRun {
  bench::Data data;
  bench::Outcome base;
};

std::vector<SeedRun> runs;

Verdict end_to_end() {
  int passed = 0;
  double total = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SeedRun r{bench::make_data(seed), {}};
    r.base = bench::run(r.data, bench::benchmark_config(seed));
    total += r.base.seconds;
    const bool ok = r.base.bc.recall.at(1) >= 0.8 && r.base.bc.mrr >= 0.85 && r.base.kl.recall.at(1) >= 0.8 &&
                    r.base.kl.mrr >= 0.85;
    passed += ok;
    std::printf("      seed %2llu  bc R@1 %.3f MRR %.3f | kl R@1 %.3f MRR %.3f  %s\n",
                static_cast<unsigned long long>(seed), r.base.bc.recall.at(1), r.base.bc.mrr, r.base.kl.recall.at(1),
                r.base.kl.mrr, ok ? "ok" : "miss");
    runs.push_back(std::move(r));
  }
  return {passed >= 9 && total < 300.0,
          fmt("%d/10 seeds reach R@1>=0.8 and MRR>=0.85 on both scorers (need 9); %.1fs total", passed, total)};
}

Verdict ablations() {
  int sym_ok = 0, asym_ok = 0, vol_ok = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto seed = static_cast<std::uint64_t>(i + 1);
    const auto& base = runs[i].base;
    auto c = bench::benchmark_config(seed);
    c.loss.w_sym = 0.0;
    const auto no_sym = bench::run(runs[i].data, c);
    c = bench::benchmark_config(seed);
    c.loss.w_asym = 0.0;
    const auto no_asym = bench::run(runs[i].data, c);
    c = bench::benchmark_config(seed);
    c.loss.w_vol = 0.0;
    const auto no_vol = bench::run(runs[i].data, c);

    const bool s = mean_mrr(no_sym) <= 0.7 * mean_mrr(base);
    const bool a = mean_r1(no_asym) <= 0.9 * mean_r1(base);
    bool finite = true;
    for (const auto& e : no_vol.trained.history.epochs) finite = finite && std::isfinite(e.loss_total);
    const bool v = finite && mean_mrr(no_vol) - mean_mrr(base) <= 0.02;
    sym_ok += s;
    asym_ok += a;
    vol_ok += v;
    std::printf("      seed %2llu  MRR %.3f -> no-sym %.3f | R@1 %.3f -> no-asym %.3f | MRR -> no-vol %.3f\n",
                static_cast<unsigned long long>(seed), mean_mrr(base), mean_mrr(no_sym), mean_r1(base),
                mean_r1(no_asym), mean_mrr(no_vol));
  }
  return {sym_ok >= 8 && asym_ok >= 8 && vol_ok >= 8,
          fmt("no-sym drops MRR >=30%%: %d/10; no-asym drops R@1 >=10%%: %d/10; no-vol within +2pt and finite: %d/10 "
              "(need 8 each)",
              sym_ok, asym_ok, vol_ok)};
}

Verdict determinism() {
  const auto data = bench::make_data(3);
  const auto config = bench::benchmark_config(3);
  const auto a = bench::run(data, config);
  const auto b = bench::run(data, config);
  const bool ckpt = serialize_params(a.trained.params) == serialize_params(b.trained.params);
  const bool reports = format_report_csv(a.bc) == format_report_csv(b.bc) && format_report_csv(a.kl) == format_report_csv(b.kl);
  bool history = a.trained.history.epochs.size() == b.trained.history.epochs.size();
  for (std::size_t i = 0; history && i < a.trained.history.epochs.size(); ++i) {
    const auto& x = a.trained.history.epochs[i];
    const auto& y = b.trained.history.epochs[i];
    history = x.loss_total == y.loss_total && x.grad_norm == y.grad_norm && x.clamp_events == y.clamp_events;
  }
  return {ckpt && reports && history, fmt("checkpoint bytes %s, metric reports %s, loss history %s",
                                          ckpt ? "identical" : "differ", reports ? "identical" : "differ",
                                          history ? "identical" : "differ")};
}

Verdict sigma_monotonicity() {
  int ok = 0;
  for (const auto& r : runs) {
    std::vector<NodeId> ids;
    for (const auto& rec : r.data.full.records()) ids.push_back(rec.id);
    const auto one = export_boxes(r.base.trained.params, r.data.embeddings, ids, SigmaLevel(1.0));
    const auto two = export_boxes(r.base.trained.params, r.data.embeddings, ids, SigmaLevel(2.0));
    const auto o1 = count_overlapping_pairs(one), o2 = count_overlapping_pairs(two);
    ok += o2 >= o1 && count_contained_pairs(one) <= o2;
  }
  return {ok == static_cast<int>(runs.size()) && !runs.empty(),
          fmt("%d/%zu trained checkpoints have overlaps(2 sigma) >= overlaps(1 sigma)", ok, runs.size())};
}

}  // namespace

int main() {
  report("closed-form vs integration oracle", closed_form_vs_integration);
  report("loss gradients vs finite diff", loss_gradients);
  report("end-to-end gradient vs finite diff", end_to_end_gradient);
  report("metrics vs brute force", metric_oracle);
  report("fisher combination", fisher);
  report("end-to-end synthetic benchmark", end_to_end);
  report("ablation directions", ablations);
  report("determinism", determinism);
  report("sigma-export monotonicity", sigma_monotonicity);
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
