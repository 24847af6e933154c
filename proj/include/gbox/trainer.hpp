#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gbox/embeddings.hpp"
#include "gbox/energy.hpp"
#include "gbox/projection.hpp"
#include "gbox/taxonomy.hpp"

namespace gbox {

/// One seed edge plus N negatives; indices refer to the seed graph.
struct TrainingInstance {
  std::size_t child = 0;
  std::size_t parent = 0;
  std::vector<std::size_t> negatives;

  bool operator==(const TrainingInstance&) const = default;
};

enum class NegativeAggregation { mean, sum };

struct TrainConfig {
  int box_dim = 64;
  int hidden_dim = 64;
  double dropout = 0.2;
  Activation activation = Activation::relu;
  double learning_rate = 1e-3;
  int batch_size = 128;
  int epochs = 125;
  int negatives = 20;
  LossHyper loss;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  int patience = 0;           // 0 disables early stopping
  double val_fraction = 0.0;  // share of seed edges held out for validation MRR
  bool exclude_ancestors = false;
  NegativeAggregation aggregation = NegativeAggregation::mean;

  /// Throws ValidationError.
  void validate() const;
};

/// Parses `key = value` lines ('#' starts a comment). Unknown keys and
/// malformed values throw ValidationError naming the key.
TrainConfig parse_config(std::string_view text);
/// Canonical form: every key, fixed order.
std::string format_config(const TrainConfig& c);
std::uint64_t config_hash(const TrainConfig& c);

/// One instance per seed edge. Negatives are drawn without replacement from
/// the hard-negative pool, topped up uniformly from seed nodes that are not
/// the child, its ancestors, or its descendants when the pool is short.
std::vector<TrainingInstance> generate_instances(const TaxonomyGraph& seed, int n_negatives, std::uint64_t rng_seed,
                                                 bool exclude_ancestors = false);

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct AdamWState {
  Eigen::VectorXd first;
  Eigen::VectorXd second;
  long long step = 0;
};

/// Bias-corrected adaptive step with decoupled weight decay.
void optimizer_step(AdamWState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads, const AdamWConfig& cfg);

struct EpochRecord {
  int epoch = 0;
  double loss_total = 0.0;
  LossParts parts;
  std::uint64_t clamp_events = 0;
  double grad_norm = 0.0;  // mean L2 norm of the per-batch parameter gradient
  std::optional<double> val_mrr;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

std::string format_history_csv(const TrainHistory& h);

struct TrainResult {
  ProjectionParams params;
  TrainHistory history;
};

/// Runs the optimization loop. Every seed node needs an embedding (DataError
/// otherwise); a non-finite loss aborts with DivergenceError.
TrainResult train(const TrainConfig& config, const TaxonomyGraph& seed, const EmbeddingTable& embeddings);

}  // namespace gbox
