#include "gbox/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <unordered_map>

#include "gbox/errors.hpp"
#include "gbox/io_util.hpp"
#include "gbox/rank_eval.hpp"

namespace gbox {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

bool parse_bool(std::string_view v, std::string_view key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("invalid boolean for " + std::string(key) + ": '" + std::string(v) + "'");
}

int parse_small_int(std::string_view v, std::string_view key) {
  const long long x = parse_int(v, key);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ValidationError("value out of range for " + std::string(key));
  }
  return static_cast<int>(x);
}

struct ConfigField {
  const char* key;
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

const std::vector<ConfigField>& config_fields() {
  auto dbl = [](double TrainConfig::*m) {
    return std::pair{[m](TrainConfig& c, std::string_view v) { c.*m = parse_double(v, "value"); },
                     [m](const TrainConfig& c) { return format_double(c.*m); }};
  };
  auto loss_dbl = [](double LossHyper::*m) {
    return std::pair{[m](TrainConfig& c, std::string_view v) { c.loss.*m = parse_double(v, "value"); },
                     [m](const TrainConfig& c) { return format_double(c.loss.*m); }};
  };
  auto integer = [](int TrainConfig::*m) {
    return std::pair{[m](TrainConfig& c, std::string_view v) { c.*m = parse_small_int(v, "value"); },
                     [m](const TrainConfig& c) { return std::to_string(c.*m); }};
  };
  auto field = [](const char* key, auto accessors) {
    return ConfigField{key, accessors.first, accessors.second};
  };
  static const std::vector<ConfigField> fields = {
      field("dim", integer(&TrainConfig::box_dim)),
      field("hidden", integer(&TrainConfig::hidden_dim)),
      field("dropout", dbl(&TrainConfig::dropout)),
      ConfigField{"activation", [](TrainConfig& c, std::string_view v) { c.activation = parse_activation(v); },
                  [](const TrainConfig& c) { return std::string(activation_name(c.activation)); }},
      field("lr", dbl(&TrainConfig::learning_rate)),
      field("batch_size", integer(&TrainConfig::batch_size)),
      field("epochs", integer(&TrainConfig::epochs)),
      field("negatives", integer(&TrainConfig::negatives)),
      field("margin", loss_dbl(&LossHyper::margin)),
      field("lambda", loss_dbl(&LossHyper::lambda)),
      field("C", loss_dbl(&LossHyper::scale_c)),
      field("min_var", loss_dbl(&LossHyper::min_var)),
      field("max_var", loss_dbl(&LossHyper::max_var)),
      field("w_sym", loss_dbl(&LossHyper::w_sym)),
      field("w_asym", loss_dbl(&LossHyper::w_asym)),
      field("w_vol", loss_dbl(&LossHyper::w_vol)),
      ConfigField{"seed",
                  [](TrainConfig& c, std::string_view v) {
                    const long long s = parse_int(v, "seed");
                    if (s < 0) throw ValidationError("seed must be non-negative");
                    c.seed = static_cast<std::uint64_t>(s);
                  },
                  [](const TrainConfig& c) { return std::to_string(c.seed); }},
      field("beta1", dbl(&TrainConfig::beta1)),
      field("beta2", dbl(&TrainConfig::beta2)),
      field("eps", dbl(&TrainConfig::eps)),
      field("weight_decay", dbl(&TrainConfig::weight_decay)),
      field("patience", integer(&TrainConfig::patience)),
      field("val_fraction", dbl(&TrainConfig::val_fraction)),
      ConfigField{"exclude_ancestors",
                  [](TrainConfig& c, std::string_view v) { c.exclude_ancestors = parse_bool(v, "exclude_ancestors"); },
                  [](const TrainConfig& c) { return std::string(c.exclude_ancestors ? "true" : "false"); }},
      ConfigField{"aggregation",
                  [](TrainConfig& c, std::string_view v) {
                    if (v == "mean") c.aggregation = NegativeAggregation::mean;
                    else if (v == "sum") c.aggregation = NegativeAggregation::sum;
                    else throw ValidationError("aggregation must be mean or sum");
                  },
                  [](const TrainConfig& c) {
                    return std::string(c.aggregation == NegativeAggregation::mean ? "mean" : "sum");
                  }},
  };
  return fields;
}

// Uniformly picks `count` distinct items from `pool` (sorted input keeps the
// draw independent of container iteration order).
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t count, Rng& rng) {
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
  };
  require(box_dim >= 1, "dim must be >= 1");
  require(hidden_dim >= 1, "hidden must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(learning_rate >= 0.0, "lr must be non-negative");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(negatives >= 1, "negatives must be >= 1");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "betas must lie in [0, 1)");
  require(eps > 0.0, "eps must be positive");
  require(weight_decay >= 0.0, "weight_decay must be non-negative");
  require(patience >= 0, "patience must be non-negative");
  require(val_fraction >= 0.0 && val_fraction < 1.0, "val_fraction must lie in [0, 1)");
  loss.validate();
}

TrainConfig parse_config(std::string_view text) {
  TrainConfig c;
  std::size_t line_no = 0;
  for (auto raw : split_char(text, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    const auto& fields = config_fields();
    const auto it = std::find_if(fields.begin(), fields.end(), [&](const auto& f) { return key == f.key; });
    if (it == fields.end()) throw ValidationError("unknown config key '" + key + "'");
    try {
      it->set(c, value);
    } catch (const ValidationError& e) {
      throw ValidationError("config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

std::string format_config(const TrainConfig& c) {
  std::string out;
  for (const auto& f : config_fields()) out += std::string(f.key) + " = " + f.get(c) + '\n';
  return out;
}

std::uint64_t config_hash(const TrainConfig& c) { return fnv1a64(format_config(c)); }

std::vector<TrainingInstance> generate_instances(const TaxonomyGraph& seed, int n_negatives, std::uint64_t rng_seed,
                                                 bool exclude_ancestors) {
  if (n_negatives < 1) throw ValidationError("number of negatives must be >= 1");
  if (seed.edge_count() == 0) throw ValidationError("seed taxonomy has no edges to train on");
  Rng rng(rng_seed);
  std::vector<TrainingInstance> out;
  out.reserve(seed.edge_count());
  const auto want = static_cast<std::size_t>(n_negatives);
  for (const auto& e : seed.edges()) {
    TrainingInstance inst;
    inst.child = seed.index_of(e.child);
    inst.parent = seed.index_of(e.parent);
    const auto pool = hard_negative_pool(seed, inst.child, exclude_ancestors);
    inst.negatives = sample_without_replacement({pool.begin(), pool.end()}, want, rng);
    if (inst.negatives.size() < want) {
      const auto ancestors = seed.ancestors(inst.child);
      const auto descendants = seed.descendants(inst.child);
      std::vector<std::size_t> fallback;
      for (std::size_t i = 0; i < seed.size(); ++i) {
        if (i == inst.child || ancestors.contains(i) || descendants.contains(i) || pool.contains(i)) continue;
        fallback.push_back(i);
      }
      auto extra = sample_without_replacement(std::move(fallback), want - inst.negatives.size(), rng);
      inst.negatives.insert(inst.negatives.end(), extra.begin(), extra.end());
    }
    out.push_back(std::move(inst));
  }
  return out;
}

void optimizer_step(AdamWState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grads, const AdamWConfig& cfg) {
  if (grads.size() != params.size()) throw std::invalid_argument("optimizer_step: gradient/parameter size mismatch");
  if (state.first.size() == 0) {
    state.first = Eigen::VectorXd::Zero(params.size());
    state.second = Eigen::VectorXd::Zero(params.size());
  }
  if (state.first.size() != params.size()) throw std::invalid_argument("optimizer_step: state size mismatch");
  ++state.step;
  state.first = cfg.beta1 * state.first + (1.0 - cfg.beta1) * grads;
  state.second = cfg.beta2 * state.second + (1.0 - cfg.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  params *= 1.0 - cfg.learning_rate * cfg.weight_decay;
  params.array() -= cfg.learning_rate * (state.first.array() / c1) / ((state.second.array() / c2).sqrt() + cfg.eps);
}

std::string format_history_csv(const TrainHistory& h) {
  std::string out = "epoch,loss_total,loss_sym,loss_align,loss_diverge,loss_reg,loss_clip,clamp_events,grad_norm,val_mrr,seconds\n";
  for (const auto& e : h.epochs) {
    out += std::to_string(e.epoch) + ',' + format_double(e.loss_total) + ',' + format_double(e.parts.sym) + ',' +
           format_double(e.parts.align) + ',' + format_double(e.parts.diverge) + ',' + format_double(e.parts.reg) + ',' +
           format_double(e.parts.clip) + ',' + std::to_string(e.clamp_events) + ',' + format_double(e.grad_norm) + ',' +
           (e.val_mrr ? format_double(*e.val_mrr) : std::string("nan")) + ',' + format_double(e.seconds) + '\n';
  }
  return out;
}

TrainResult train(const TrainConfig& config, const TaxonomyGraph& seed, const EmbeddingTable& embeddings) {
  config.validate();
  const auto n_nodes = seed.size();
  std::vector<Eigen::Index> embed_col(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    const auto col = embeddings.find(seed.id_of(i));
    if (!col) throw DataError("missing embedding for seed node '" + seed.id_of(i) + "'");
    embed_col[i] = static_cast<Eigen::Index>(*col);
  }

  // Independent streams so that changing one consumer does not perturb the others.
  Rng init_rng(config.seed);
  const std::uint64_t init_seed = init_rng();
  const std::uint64_t instance_seed = init_rng();
  const std::uint64_t val_seed = init_rng();
  Rng shuffle_rng(init_rng());
  Rng dropout_rng(init_rng());

  ProjectionParams params =
      init_params(embeddings.dim(), config.hidden_dim, config.box_dim, init_seed, config.dropout, config.activation);
  params.config_hash = config_hash(config);

  std::vector<TrainingInstance> instances =
      generate_instances(seed, config.negatives, instance_seed, config.exclude_ancestors);

  std::vector<TrainingInstance> validation;
  if (config.val_fraction > 0.0) {
    Rng rng(val_seed);
    shuffle_in_place(instances, rng);
    const auto n_val = static_cast<std::size_t>(std::llround(config.val_fraction * static_cast<double>(instances.size())));
    if (n_val >= instances.size()) throw ValidationError("val_fraction leaves no training instances");
    validation.assign(instances.end() - static_cast<std::ptrdiff_t>(n_val), instances.end());
    instances.resize(instances.size() - n_val);
    auto by_edge = [](const TrainingInstance& a, const TrainingInstance& b) {
      return std::tie(a.parent, a.child) < std::tie(b.parent, b.child);
    };
    std::sort(instances.begin(), instances.end(), by_edge);
    std::sort(validation.begin(), validation.end(), by_edge);
  }

  const AdamWConfig adam{config.learning_rate, config.beta1, config.beta2, config.eps, config.weight_decay};
  AdamWState adam_state;
  Eigen::VectorXd flat = flatten(params);

  TrainResult result;
  ProjectionParams best = params;
  double best_val = -1.0;
  int since_best = 0;

  auto validation_mrr = [&](const ProjectionParams& p) {
    const AnchorIndex anchors(p, embeddings, seed);
    double total = 0.0;
    for (const auto& inst : validation) {
      const NodeId& child = seed.id_of(inst.child);
      const auto pred = rank_query(anchors, child, anchors.gaussians()[inst.child], {seed.id_of(inst.parent)},
                                   ScorerKind::bc, child);
      total += 1.0 / pred.gold_ranks.front();
    }
    return total / static_cast<double>(validation.size());
  };

  std::vector<std::size_t> order(instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  const Eigen::Index d = config.box_dim;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    shuffle_in_place(order, shuffle_rng);
    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double batch_scale = 1.0 / static_cast<double>(stop - start);

      // Unique nodes of this batch, in first-seen order.
      std::unordered_map<std::size_t, Eigen::Index> column;
      std::vector<std::size_t> nodes;
      auto slot = [&](std::size_t node) {
        auto [it, inserted] = column.emplace(node, static_cast<Eigen::Index>(nodes.size()));
        if (inserted) nodes.push_back(node);
        return it->second;
      };
      for (std::size_t b = start; b < stop; ++b) {
        const auto& inst = instances[order[b]];
        slot(inst.child);
        slot(inst.parent);
        for (std::size_t n : inst.negatives) slot(n);
      }
      Eigen::MatrixXd inputs(embeddings.dim(), static_cast<Eigen::Index>(nodes.size()));
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        inputs.col(static_cast<Eigen::Index>(i)) = embeddings.vectors().col(embed_col[nodes[i]]);
      }
      auto fwd = forward(params, inputs, Mode::train, &dropout_rng);
      std::vector<Gaussian> gauss;
      gauss.reserve(nodes.size());
      for (std::size_t i = 0; i < nodes.size(); ++i) gauss.push_back(box_to_gaussian(fwd.boxes.box(static_cast<Eigen::Index>(i))));

      Eigen::MatrixXd grad_c = Eigen::MatrixXd::Zero(d, inputs.cols());
      Eigen::MatrixXd grad_o = Eigen::MatrixXd::Zero(d, inputs.cols());
      for (std::size_t b = start; b < stop; ++b) {
        const auto& inst = instances[order[b]];
        const Eigen::Index ci = column.at(inst.child);
        const Eigen::Index pi = column.at(inst.parent);
        const double neg_scale =
            config.aggregation == NegativeAggregation::mean ? 1.0 / static_cast<double>(inst.negatives.size()) : 1.0;
        double inst_loss = 0.0;
        LossParts inst_parts;
        for (std::size_t n : inst.negatives) {
          const Eigen::Index ni = column.at(n);
          OverallLoss loss = overall_loss({gauss[static_cast<std::size_t>(ci)], gauss[static_cast<std::size_t>(pi)],
                                           gauss[static_cast<std::size_t>(ni)]},
                                          config.loss);
          if (!std::isfinite(loss.value) || !loss.grad.all_finite()) {
            throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch) + " for instance " +
                                  seed.id_of(inst.child) + " -> " + seed.id_of(inst.parent) + " (negative " +
                                  seed.id_of(n) + ")");
          }
          if (loss.clamped) ++rec.clamp_events;
          inst_loss += loss.value;
          inst_parts += loss.parts;
          const double s = neg_scale * batch_scale;
          grad_c.col(ci) += s * loss.grad.child.mean;
          grad_o.col(ci) += s * loss.grad.child.offset;
          grad_c.col(pi) += s * loss.grad.parent.mean;
          grad_o.col(pi) += s * loss.grad.parent.offset;
          grad_c.col(ni) += s * loss.grad.neg_parent.mean;
          grad_o.col(ni) += s * loss.grad.neg_parent.offset;
        }
        inst_parts *= neg_scale;
        rec.loss_total += inst_loss * neg_scale;
        rec.parts += inst_parts;
      }

      const Eigen::VectorXd grads = flatten(backward(params, *fwd.trace, grad_c, grad_o));
      rec.grad_norm += grads.norm();
      ++n_batches;
      optimizer_step(adam_state, flat, grads, adam);
      assign_flat(params, flat);
    }

    const double n_inst = static_cast<double>(instances.size());
    rec.loss_total /= n_inst;
    rec.parts *= 1.0 / n_inst;
    rec.grad_norm /= static_cast<double>(std::max<std::size_t>(n_batches, 1));

    bool stop = false;
    if (!validation.empty()) {
      rec.val_mrr = validation_mrr(params);
      if (*rec.val_mrr > best_val) {
        best_val = *rec.val_mrr;
        best = params;
        result.history.best_epoch = epoch;
        since_best = 0;
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        stop = true;
      }
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.epochs.push_back(rec);
    if (stop) break;
  }

  if (validation.empty()) {
    result.params = std::move(params);
    result.history.best_epoch = static_cast<int>(result.history.epochs.size());
  } else {
    result.params = std::move(best);
  }
  return result;
}

}  // namespace gbox
