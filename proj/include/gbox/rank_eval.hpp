#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gbox/embeddings.hpp"
#include "gbox/energy.hpp"
#include "gbox/projection.hpp"
#include "gbox/taxonomy.hpp"

namespace gbox {

enum class ScorerKind { bc, neg_kl };

ScorerKind parse_scorer(std::string_view name);  // "bc" or "kl"
std::string_view scorer_name(ScorerKind kind);

/// Higher is better: BC(anchor, query) or -KL(query || anchor).
double score_anchor(ScorerKind kind, const Gaussian& query, const Gaussian& anchor);

struct ScoredAnchor {
  NodeId id;
  double score = 0.0;

  bool operator==(const ScoredAnchor&) const = default;
};

struct RankedPrediction {
  NodeId query;
  std::vector<ScoredAnchor> ranked;  // descending score, ties by ascending id
  std::vector<NodeId> gold;          // sorted
  std::vector<int> gold_ranks;       // 1-based, aligned with `gold`
};

/// Eval-mode Gaussians of every seed node, in ascending id order.
class AnchorIndex {
 public:
  AnchorIndex(const ProjectionParams& params, const EmbeddingTable& embeddings, const TaxonomyGraph& seed);
  AnchorIndex(std::vector<NodeId> ids, std::vector<Gaussian> gaussians);

  const std::vector<NodeId>& ids() const { return ids_; }
  const std::vector<Gaussian>& gaussians() const { return gaussians_; }

 private:
  std::vector<NodeId> ids_;
  std::vector<Gaussian> gaussians_;
};

Gaussian project_gaussian(const ProjectionParams& params, const Eigen::VectorXd& input);

/// Scores and sorts every anchor except `exclude` (if given). Gold parents
/// absent from the anchor set throw ValidationError.
RankedPrediction rank_query(const AnchorIndex& anchors, const NodeId& query, const Gaussian& query_gaussian,
                            const std::set<NodeId>& gold, ScorerKind kind, const std::optional<NodeId>& exclude = {});

RankedPrediction rank_anchors(const ProjectionParams& params, const EmbeddingTable& embeddings, const NodeId& query,
                              const TaxonomyGraph& seed, ScorerKind kind, const std::set<NodeId>& gold = {});

enum class RankAggregate { mean_gold, best_gold };

struct MetricOptions {
  std::vector<int> ks{1, 5, 10};
  bool single_parent = true;  // enables Wu&Palmer
  RankAggregate mr_aggregate = RankAggregate::mean_gold;
  RankAggregate mrr_aggregate = RankAggregate::best_gold;
};

struct QueryMetrics {
  NodeId query;
  double rank = 0.0;        // per mr_aggregate
  double reciprocal = 0.0;  // per mrr_aggregate
  std::optional<double> wu_palmer;
};

struct MetricReport {
  std::size_t queries = 0;
  double mr = 0.0;
  double mrr = 0.0;
  std::map<int, double> recall;
  std::map<int, double> hit;
  std::optional<double> wu_palmer;
  std::vector<QueryMetrics> per_query;
};

/// Throws ValidationError on an empty prediction list, k <= 0, or a
/// prediction with no gold rank.
MetricReport compute_metrics(std::span<const RankedPrediction> preds, const MetricOptions& options,
                             const TaxonomyGraph& g);

std::string format_predictions_tsv(std::span<const RankedPrediction> preds, std::size_t top_k = 0);
std::string format_report_csv(const MetricReport& r);
std::string format_report_table(const MetricReport& r, std::string_view title);

struct FisherResult {
  double chi2 = 0.0;
  double combined_p = 1.0;
};

/// chi2 = -2 sum ln p_i, survival of chi-square with 2k degrees of freedom.
FisherResult fisher_combine(std::span<const double> p_values);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution.
double chi_square_survival(double x, double dof);

}  // namespace gbox
