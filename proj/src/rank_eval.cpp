#include "gbox/rank_eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>

#include "gbox/errors.hpp"
#include "gbox/io_util.hpp"

namespace gbox {

ScorerKind parse_scorer(std::string_view name) {
  if (name == "bc") return ScorerKind::bc;
  if (name == "kl") return ScorerKind::neg_kl;
  throw ValidationError("unknown scorer '" + std::string(name) + "' (expected bc or kl)");
}

std::string_view scorer_name(ScorerKind kind) { return kind == ScorerKind::bc ? "bc" : "kl"; }

double score_anchor(ScorerKind kind, const Gaussian& query, const Gaussian& anchor) {
  if (kind == ScorerKind::bc) return bhattacharyya_coefficient(anchor, query);
  return -kl_divergence(query, anchor);
}

Gaussian project_gaussian(const ProjectionParams& params, const Eigen::VectorXd& input) {
  return box_to_gaussian(forward_eval(params, input));
}

AnchorIndex::AnchorIndex(const ProjectionParams& params, const EmbeddingTable& embeddings, const TaxonomyGraph& seed) {
  const auto n = static_cast<Eigen::Index>(seed.size());
  Eigen::MatrixXd inputs(embeddings.dim(), n);
  for (Eigen::Index i = 0; i < n; ++i) inputs.col(i) = embeddings.vector(seed.id_of(static_cast<std::size_t>(i)));
  const auto result = forward(params, inputs, Mode::eval);
  ids_.reserve(seed.size());
  gaussians_.reserve(seed.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    ids_.push_back(seed.id_of(static_cast<std::size_t>(i)));
    gaussians_.push_back(box_to_gaussian(result.boxes.box(i)));
  }
}

AnchorIndex::AnchorIndex(std::vector<NodeId> ids, std::vector<Gaussian> gaussians)
    : ids_(std::move(ids)), gaussians_(std::move(gaussians)) {
  if (ids_.size() != gaussians_.size()) throw std::invalid_argument("AnchorIndex: ids and gaussians differ in length");
  std::vector<std::size_t> order(ids_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids_[a] < ids_[b]; });
  std::vector<NodeId> sorted_ids;
  std::vector<Gaussian> sorted_g;
  for (std::size_t i : order) {
    sorted_ids.push_back(ids_[i]);
    sorted_g.push_back(gaussians_[i]);
  }
  ids_ = std::move(sorted_ids);
  gaussians_ = std::move(sorted_g);
}

RankedPrediction rank_query(const AnchorIndex& anchors, const NodeId& query, const Gaussian& query_gaussian,
                            const std::set<NodeId>& gold, ScorerKind kind, const std::optional<NodeId>& exclude) {
  RankedPrediction pred;
  pred.query = query;
  pred.ranked.reserve(anchors.ids().size());
  for (std::size_t i = 0; i < anchors.ids().size(); ++i) {
    if (exclude && anchors.ids()[i] == *exclude) continue;
    double s = score_anchor(kind, query_gaussian, anchors.gaussians()[i]);
    if (std::isnan(s)) s = -std::numeric_limits<double>::infinity();
    pred.ranked.push_back({anchors.ids()[i], s});
  }
  // Anchors arrive in ascending id order; a stable sort keeps that order among ties.
  std::stable_sort(pred.ranked.begin(), pred.ranked.end(),
                   [](const ScoredAnchor& a, const ScoredAnchor& b) { return a.score > b.score; });
  for (const auto& g : gold) {
    const auto it = std::find_if(pred.ranked.begin(), pred.ranked.end(), [&](const auto& a) { return a.id == g; });
    if (it == pred.ranked.end()) throw ValidationError("gold parent '" + g + "' of query '" + query + "' is not an anchor");
    pred.gold.push_back(g);
    pred.gold_ranks.push_back(static_cast<int>(it - pred.ranked.begin()) + 1);
  }
  return pred;
}

RankedPrediction rank_anchors(const ProjectionParams& params, const EmbeddingTable& embeddings, const NodeId& query,
                              const TaxonomyGraph& seed, ScorerKind kind, const std::set<NodeId>& gold) {
  const AnchorIndex anchors(params, embeddings, seed);
  return rank_query(anchors, query, project_gaussian(params, embeddings.vector(query)), gold, kind);
}

MetricReport compute_metrics(std::span<const RankedPrediction> preds, const MetricOptions& options,
                             const TaxonomyGraph& g) {
  if (preds.empty()) throw ValidationError("no predictions to evaluate");
  for (int k : options.ks)
    if (k <= 0) throw ValidationError("k must be positive, got " + std::to_string(k));

  MetricReport report;
  report.queries = preds.size();
  for (int k : options.ks) {
    report.recall[k] = 0.0;
    report.hit[k] = 0.0;
  }
  double wu_total = 0.0;
  for (const auto& p : preds) {
    if (p.gold_ranks.empty()) throw ValidationError("query '" + p.query + "' has no gold parent rank");
    const int best = *std::min_element(p.gold_ranks.begin(), p.gold_ranks.end());
    double mean_rank = 0.0;
    double mean_reciprocal = 0.0;
    for (int r : p.gold_ranks) {
      mean_rank += r;
      mean_reciprocal += 1.0 / r;
    }
    mean_rank /= static_cast<double>(p.gold_ranks.size());
    mean_reciprocal /= static_cast<double>(p.gold_ranks.size());

    QueryMetrics q;
    q.query = p.query;
    q.rank = options.mr_aggregate == RankAggregate::mean_gold ? mean_rank : best;
    q.reciprocal = options.mrr_aggregate == RankAggregate::best_gold ? 1.0 / best : mean_reciprocal;
    report.mr += q.rank;
    report.mrr += q.reciprocal;

    for (int k : options.ks) {
      const auto in_top = std::count_if(p.gold_ranks.begin(), p.gold_ranks.end(), [k](int r) { return r <= k; });
      report.recall[k] += static_cast<double>(in_top) / static_cast<double>(p.gold_ranks.size());
      report.hit[k] += in_top > 0 ? 1.0 : 0.0;
    }
    if (options.single_parent) {
      q.wu_palmer = wu_palmer(g, p.ranked.front().id, p.gold.front());
      wu_total += *q.wu_palmer;
    }
    report.per_query.push_back(std::move(q));
  }
  const auto n = static_cast<double>(preds.size());
  report.mr /= n;
  report.mrr /= n;
  for (auto& [k, v] : report.recall) v /= n;
  for (auto& [k, v] : report.hit) v /= n;
  if (options.single_parent) report.wu_palmer = wu_total / n;
  return report;
}

std::string format_predictions_tsv(std::span<const RankedPrediction> preds, std::size_t top_k) {
  std::string out;
  for (const auto& p : preds) {
    const std::size_t limit = top_k == 0 ? p.ranked.size() : std::min(top_k, p.ranked.size());
    for (std::size_t i = 0; i < limit; ++i) {
      out += escape_field(p.query) + '\t' + std::to_string(i + 1) + '\t' + escape_field(p.ranked[i].id) + '\t' +
             format_double(p.ranked[i].score) + '\n';
    }
  }
  return out;
}

std::string format_report_csv(const MetricReport& r) {
  std::string out = "metric,k,value\n";
  out += "mr,," + format_double(r.mr) + '\n';
  out += "mrr,," + format_double(r.mrr) + '\n';
  for (const auto& [k, v] : r.hit) out += "hit," + std::to_string(k) + ',' + format_double(v) + '\n';
  for (const auto& [k, v] : r.recall) out += "recall," + std::to_string(k) + ',' + format_double(v) + '\n';
  if (r.wu_palmer) out += "wu_palmer,," + format_double(*r.wu_palmer) + '\n';
  out += "queries,," + std::to_string(r.queries) + '\n';
  return out;
}

std::string format_report_table(const MetricReport& r, std::string_view title) {
  std::ostringstream ss;
  ss << title << " (" << r.queries << " queries)\n";
  ss << std::fixed << std::setprecision(4);
  ss << "  MR      " << r.mr << '\n';
  ss << "  MRR     " << r.mrr << '\n';
  for (const auto& [k, v] : r.hit) ss << "  Hit@" << std::left << std::setw(3) << k << ' ' << v << '\n';
  for (const auto& [k, v] : r.recall) ss << "  R@" << std::left << std::setw(5) << k << ' ' << v << '\n';
  if (r.wu_palmer) ss << "  Wu&P    " << *r.wu_palmer << '\n';
  return ss.str();
}

double gamma_q(double a, double x) {
  if (!(a > 0.0) || x < 0.0) throw std::domain_error("gamma_q requires a > 0 and x >= 0");
  return boost::math::gamma_q(a, x);
}

double chi_square_survival(double x, double dof) { return gamma_q(0.5 * dof, 0.5 * x); }

FisherResult fisher_combine(std::span<const double> p_values) {
  if (p_values.empty()) throw ValidationError("fisher_combine needs at least one p-value");
  double chi2 = 0.0;
  for (double p : p_values) {
    if (!(p > 0.0 && p <= 1.0)) throw ValidationError("p-value outside (0, 1]: " + format_double(p));
    chi2 -= 2.0 * std::log(p);
  }
  return {chi2, chi_square_survival(chi2, 2.0 * static_cast<double>(p_values.size()))};
}

}  // namespace gbox
