#pragma once

// Shared scaled-down end-to-end benchmark: balanced tree, clustered
// pseudo-embeddings, leaf holdout, train, rank held-out leaves.

#include <chrono>
#include <map>
#include <vector>

#include "gbox/rank_eval.hpp"
#include "gbox/synthetic.hpp"
#include "gbox/trainer.hpp"

namespace bench {

struct Outcome {
  gbox::MetricReport bc;
  gbox::MetricReport kl;
  gbox::TrainResult trained;
  double seconds = 0.0;
};

struct Setup {
  int branching = 4;
  int levels = 3;
  int input_dim = 64;
  double fraction = 0.2;
  double noise = 0.5;
};

inline gbox::TrainConfig benchmark_config(std::uint64_t seed) {
  gbox::TrainConfig c;
  c.box_dim = 32;
  c.negatives = 5;
  c.epochs = 60;
  c.seed = seed;
  return c;
}

struct Data {
  gbox::TaxonomyGraph full;
  gbox::SplitResult split;
  gbox::EmbeddingTable embeddings;
};

inline Data make_data(std::uint64_t seed, const Setup& s = {}) {
  Data d;
  d.full = gbox::make_balanced_tree(s.branching, s.levels);
  std::vector<gbox::NodeId> ids;
  for (const auto& r : d.full.records()) ids.push_back(r.id);
  d.embeddings = gbox::clustered_embeddings(ids, d.full, s.input_dim, seed, s.noise);
  d.split = gbox::split_leaves(d.full, s.fraction, seed);
  return d;
}

inline gbox::MetricReport evaluate(const gbox::ProjectionParams& params, const Data& d, gbox::ScorerKind kind) {
  const gbox::AnchorIndex anchors(params, d.embeddings, d.split.seed);
  std::vector<gbox::RankedPrediction> preds;
  for (const auto& q : d.split.queries) {
    preds.push_back(gbox::rank_query(anchors, q.query, gbox::project_gaussian(params, d.embeddings.vector(q.query)),
                                     q.gold_parents, kind));
  }
  gbox::MetricOptions opts;
  opts.ks = {1, 5, 10};
  opts.single_parent = true;
  return gbox::compute_metrics(preds, opts, d.split.seed);
}

inline Outcome run(const Data& d, const gbox::TrainConfig& config) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  o.trained = gbox::train(config, d.split.seed, d.embeddings);
  o.bc = evaluate(o.trained.params, d, gbox::ScorerKind::bc);
  o.kl = evaluate(o.trained.params, d, gbox::ScorerKind::neg_kl);
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

}  // namespace bench
