#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "gbox/boxes.hpp"
#include "gbox/embeddings.hpp"
#include "gbox/errors.hpp"
#include "gbox/io_util.hpp"
#include "gbox/projection.hpp"
#include "gbox/rank_eval.hpp"
#include "gbox/report.hpp"
#include "gbox/synthetic.hpp"
#include "gbox/taxonomy.hpp"
#include "gbox/trainer.hpp"

namespace fs = std::filesystem;
using namespace gbox;

namespace {

fs::path manifest_path_for(const fs::path& output) { return fs::path(output.string() + ".manifest.json"); }

RunManifest start_manifest(std::string command, const std::vector<fs::path>& inputs) {
  RunManifest m;
  m.command = std::move(command);
  m.started_at = utc_timestamp();
  for (const auto& p : inputs) m.input_checksums[p.string()] = file_checksum(p);
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& path) {
  m.finished_at = utc_timestamp();
  write_manifest(m, path);
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_output(RunManifest& m, const fs::path& path, std::string_view contents) {
  ensure_parent(path);
  write_file_atomic(path, contents);
  m.outputs.push_back(path.string());
}

std::vector<int> parse_ks(const std::string& text) {
  std::vector<int> ks;
  for (auto part : split_char(text, ',')) {
    const auto k = parse_int(part, "k");
    if (k <= 0) throw ValidationError("k must be positive, got " + std::string(part));
    ks.push_back(static_cast<int>(k));
  }
  if (ks.empty()) throw ValidationError("--k needs at least one value");
  return ks;
}

TrainConfig load_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  auto c = parse_config(read_file(path));
  c.validate();
  return c;
}

void require_embeddings(const EmbeddingTable& e, const std::vector<NodeId>& ids) {
  for (const auto& id : ids)
    if (!e.contains(id)) throw DataError("missing embedding for node '" + id + "'");
}

std::vector<NodeId> ids_of(const TaxonomyGraph& g) {
  std::vector<NodeId> ids;
  for (const auto& r : g.records()) ids.push_back(r.id);
  return ids;
}

struct EvalInputs {
  TaxonomyGraph seed;
  SplitManifest queries;
  EmbeddingTable embeddings;
};

EvalInputs load_eval_inputs(const std::string& nodes, const std::string& edges, const std::string& queries,
                            const std::string& embeddings) {
  EvalInputs in;
  in.seed = load_taxonomy(nodes, edges);
  in.queries = parse_split_manifest(read_file(queries));
  in.embeddings = load_embeddings(embeddings);
  require_embeddings(in.embeddings, ids_of(in.seed));
  for (const auto& q : in.queries.queries) {
    if (!in.embeddings.contains(q.query)) throw DataError("missing embedding for query '" + q.query + "'");
    for (const auto& p : q.gold_parents)
      if (!in.seed.contains(p)) throw DataError("gold parent '" + p + "' of query '" + q.query + "' is not a seed node");
  }
  return in;
}

std::vector<RankedPrediction> predict(const ProjectionParams& params, const EvalInputs& in, ScorerKind kind) {
  const AnchorIndex anchors(params, in.embeddings, in.seed);
  std::vector<RankedPrediction> preds;
  for (const auto& q : in.queries.queries) {
    preds.push_back(rank_query(anchors, q.query, project_gaussian(params, in.embeddings.vector(q.query)), q.gold_parents,
                               kind));
  }
  return preds;
}

bool all_single_parent(const SplitManifest& m) {
  for (const auto& q : m.queries)
    if (q.gold_parents.size() != 1) return false;
  return true;
}

// --- subcommands -----------------------------------------------------------

struct SplitArgs {
  std::string nodes, edges, out;
  double fraction = 0.2;
  std::uint64_t seed = 0;
};

void run_split(const SplitArgs& a) {
  auto m = start_manifest("split", {a.nodes, a.edges});
  const auto g = load_taxonomy(a.nodes, a.edges);
  const auto split = split_leaves(g, a.fraction, a.seed);
  m.seeds["split"] = a.seed;
  const fs::path out(a.out);
  write_output(m, out / "seed_nodes.tsv", format_nodes(split.seed));
  write_output(m, out / "seed_edges.tsv", format_edges(split.seed));
  write_output(m, out / "split.tsv", format_split_manifest(split));
  finish_manifest(m, out / "manifest.json");
  std::cout << "held out " << split.queries.size() << " of " << g.leaves().size() << " leaves; seed has "
            << split.seed.size() << " nodes\n";
}

struct SynthArgs {
  int branching = 4;
  int levels = 3;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  auto m = start_manifest("synth-taxonomy", {});
  const auto g = make_balanced_tree(a.branching, a.levels);
  const fs::path out(a.out);
  write_output(m, out / "nodes.tsv", format_nodes(g));
  write_output(m, out / "edges.tsv", format_edges(g));
  finish_manifest(m, out / "manifest.json");
  std::cout << g.size() << " nodes, " << g.edge_count() << " edges\n";
}

struct EmbedArgs {
  std::string nodes, mode = "hash", out;
  int dim = 64;
  std::uint64_t seed = 0;
  double noise = 0.5;
};

void run_pseudo_embed(const EmbedArgs& a) {
  if (a.dim < 2) throw ValidationError("--dim must be >= 2");
  std::vector<fs::path> inputs{a.nodes};
  std::optional<std::string> tree_edges;
  if (a.mode.rfind("clustered:", 0) == 0) {
    tree_edges = a.mode.substr(std::string("clustered:").size());
    if (tree_edges->empty()) throw ValidationError("--mode clustered:<edges> needs an edges file");
    inputs.emplace_back(*tree_edges);
  } else if (a.mode != "hash") {
    throw ValidationError("--mode must be 'hash' or 'clustered:<edges>', got '" + a.mode + "'");
  }
  if (!(a.noise > 0.0)) throw ValidationError("--noise must be positive");
  auto m = start_manifest("pseudo-embed", inputs);
  m.seeds["embed"] = a.seed;
  std::vector<NodeId> ids;
  for (const auto& r : parse_nodes(read_file(a.nodes), a.nodes)) ids.push_back(r.id);
  EmbeddingTable table;
  if (tree_edges) {
    const auto tree = load_taxonomy(a.nodes, *tree_edges);
    table = clustered_embeddings(ids, tree, a.dim, a.seed, a.noise);
  } else {
    table = hash_embeddings(ids, a.dim, a.seed);
  }
  write_output(m, a.out, format_embeddings(table));
  finish_manifest(m, manifest_path_for(a.out));
}

struct TrainArgs {
  std::string config, nodes, edges, embeddings, checkpoint, history;
};

void run_train(const TrainArgs& a) {
  std::vector<fs::path> inputs{a.nodes, a.edges, a.embeddings};
  if (!a.config.empty()) inputs.emplace_back(a.config);
  const auto config = load_config(a.config);
  const auto seed = load_taxonomy(a.nodes, a.edges);
  const auto embeddings = load_embeddings(a.embeddings);
  require_embeddings(embeddings, ids_of(seed));

  auto m = start_manifest("train", inputs);
  m.config_hash = hex64(config_hash(config));
  m.seeds["train"] = config.seed;
  const auto result = train(config, seed, embeddings);
  ensure_parent(a.checkpoint);
  save_params(result.params, a.checkpoint);
  m.outputs.push_back(a.checkpoint);
  if (!a.history.empty()) write_output(m, a.history, format_history_csv(result.history));
  finish_manifest(m, manifest_path_for(a.checkpoint));
  const auto& last = result.history.epochs.back();
  std::cout << "trained " << result.history.epochs.size() << " epochs; final loss " << format_double(last.loss_total)
            << "; config hash " << m.config_hash << '\n';
}

struct EvalArgs {
  std::string checkpoint, nodes, edges, queries, embeddings, scorer = "bc", ks = "1,5,10", report, predictions;
  std::size_t top_k = 0;
};

void run_eval(const EvalArgs& a) {
  const auto kind = parse_scorer(a.scorer);
  MetricOptions opts;
  opts.ks = parse_ks(a.ks);
  const auto in = load_eval_inputs(a.nodes, a.edges, a.queries, a.embeddings);
  if (in.queries.queries.empty()) throw DataError(a.queries + ": no queries to evaluate");
  const auto params = load_params(a.checkpoint, {.input_dim = in.embeddings.dim()});
  opts.single_parent = all_single_parent(in.queries);

  auto m = start_manifest("eval", {a.checkpoint, a.nodes, a.edges, a.queries, a.embeddings});
  m.config_hash = hex64(params.config_hash);
  const auto preds = predict(params, in, kind);
  const auto report = compute_metrics(preds, opts, in.seed);
  const std::string tag = std::string(scorer_name(kind));
  write_output(m, a.report, format_report_csv(report) + "scorer,," + tag + '\n');
  if (!a.predictions.empty()) write_output(m, a.predictions, format_predictions_tsv(preds, a.top_k));
  finish_manifest(m, manifest_path_for(a.report));
  std::cout << format_report_table(report, "scorer " + tag);
}

struct ExportArgs {
  std::string checkpoint, embeddings, nodes, out;
  double sigma = 1.0;
};

void run_export(const ExportArgs& a) {
  const SigmaLevel level(a.sigma);
  std::vector<NodeId> ids;
  for (const auto& r : parse_nodes(read_file(a.nodes), a.nodes)) ids.push_back(r.id);
  const auto embeddings = load_embeddings(a.embeddings);
  require_embeddings(embeddings, ids);
  const auto params = load_params(a.checkpoint, {.input_dim = embeddings.dim()});

  auto m = start_manifest("export-boxes", {a.checkpoint, a.embeddings, a.nodes});
  m.config_hash = hex64(params.config_hash);
  const auto boxes = export_boxes(params, embeddings, ids, level);
  write_output(m, a.out, format_boxes_tsv(boxes, level));
  finish_manifest(m, manifest_path_for(a.out));
  std::cout << boxes.size() << " boxes at " << format_double(a.sigma) << " sigma; " << count_overlapping_pairs(boxes)
            << " overlapping pairs, " << count_contained_pairs(boxes) << " contained pairs\n";
}

struct SweepArgs {
  std::string param, values, config, nodes, edges, queries, embeddings, scorer = "bc", ks = "1,5,10", csv, svg;
};

void run_sweep(const SweepArgs& a) {
  if (a.param != "dim" && a.param != "lambda" && a.param != "C") {
    throw ValidationError("--param must be dim, lambda, or C, got '" + a.param + "'");
  }
  std::vector<double> values;
  for (auto v : split_char(a.values, ',')) values.push_back(parse_double(v, "sweep value"));
  if (values.empty()) throw ValidationError("--values needs at least one value");
  const auto kind = parse_scorer(a.scorer);
  MetricOptions opts;
  opts.ks = parse_ks(a.ks);
  const auto base = load_config(a.config);

  std::vector<TrainConfig> configs;
  for (double v : values) {
    auto c = base;
    if (a.param == "dim") {
      if (v != static_cast<int>(v)) throw ValidationError("dim values must be integers");
      c.box_dim = static_cast<int>(v);
    } else if (a.param == "lambda") {
      c.loss.lambda = v;
    } else {
      c.loss.scale_c = v;
    }
    c.validate();
    configs.push_back(c);
  }
  const auto in = load_eval_inputs(a.nodes, a.edges, a.queries, a.embeddings);
  if (in.queries.queries.empty()) throw DataError(a.queries + ": no queries to evaluate");
  opts.single_parent = all_single_parent(in.queries);

  std::vector<fs::path> inputs{a.nodes, a.edges, a.queries, a.embeddings};
  if (!a.config.empty()) inputs.emplace_back(a.config);
  auto m = start_manifest("sweep", inputs);
  m.config_hash = hex64(config_hash(base));
  m.seeds["train"] = base.seed;

  std::string csv = a.param + ",mr,mrr";
  for (int k : opts.ks) csv += ",hit@" + std::to_string(k);
  for (int k : opts.ks) csv += ",recall@" + std::to_string(k);
  csv += '\n';
  Series mrr{"MRR", {}};
  Series r1{"R@" + std::to_string(opts.ks.front()), {}};
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto result = train(configs[i], in.seed, in.embeddings);
    const auto preds = predict(result.params, in, kind);
    const auto report = compute_metrics(preds, opts, in.seed);
    csv += format_double(values[i]) + ',' + format_double(report.mr) + ',' + format_double(report.mrr);
    for (int k : opts.ks) csv += ',' + format_double(report.hit.at(k));
    for (int k : opts.ks) csv += ',' + format_double(report.recall.at(k));
    csv += '\n';
    mrr.points.emplace_back(values[i], report.mrr);
    r1.points.emplace_back(values[i], report.recall.at(opts.ks.front()));
    std::cout << a.param << '=' << format_double(values[i]) << "  MRR " << format_double(report.mrr) << '\n';
  }
  write_output(m, a.csv, csv);
  if (!a.svg.empty()) {
    write_output(m, a.svg,
                 svg_line_chart("Sweep over " + a.param + " (" + std::string(scorer_name(kind)) + ")", a.param, "metric",
                                {mrr, r1}));
  }
  finish_manifest(m, manifest_path_for(a.csv));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-box taxonomy expansion"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Hold out leaves of a taxonomy as evaluation queries");
  split_cmd->add_option("--nodes", split.nodes, "Node file")->required();
  split_cmd->add_option("--edges", split.edges, "Edge file")->required();
  split_cmd->add_option("--fraction", split.fraction, "Share of leaves to hold out")->capture_default_str();
  split_cmd->add_option("--seed", split.seed, "Sampling seed")->capture_default_str();
  split_cmd->add_option("--out", split.out, "Output directory")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-taxonomy", "Write a balanced tree taxonomy");
  synth_cmd->add_option("--branching", synth.branching)->capture_default_str();
  synth_cmd->add_option("--levels", synth.levels)->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("pseudo-embed", "Write stand-in embeddings for every node");
  embed_cmd->add_option("--nodes", embed.nodes, "Node file")->required();
  embed_cmd->add_option("--dim", embed.dim)->capture_default_str();
  embed_cmd->add_option("--seed", embed.seed)->capture_default_str();
  embed_cmd->add_option("--mode", embed.mode, "hash or clustered:<edges file>")->capture_default_str();
  embed_cmd->add_option("--noise", embed.noise, "Own-direction weight in clustered mode")->capture_default_str();
  embed_cmd->add_option("--out", embed.out)->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train the projection heads on a seed taxonomy");
  train_cmd->add_option("--config", tr.config, "key=value config file (defaults if omitted)");
  train_cmd->add_option("--nodes", tr.nodes)->required();
  train_cmd->add_option("--edges", tr.edges)->required();
  train_cmd->add_option("--embeddings", tr.embeddings)->required();
  train_cmd->add_option("--out-checkpoint", tr.checkpoint)->required();
  train_cmd->add_option("--history", tr.history, "Per-epoch CSV");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Rank seed anchors for held-out queries and report metrics");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--nodes", ev.nodes, "Seed node file")->required();
  eval_cmd->add_option("--edges", ev.edges, "Seed edge file")->required();
  eval_cmd->add_option("--queries", ev.queries, "Split manifest from `split`")->required();
  eval_cmd->add_option("--embeddings", ev.embeddings)->required();
  eval_cmd->add_option("--scorer", ev.scorer, "bc or kl")->capture_default_str();
  eval_cmd->add_option("--k", ev.ks, "Comma-separated cutoffs")->capture_default_str();
  eval_cmd->add_option("--report", ev.report, "Metric CSV")->required();
  eval_cmd->add_option("--predictions", ev.predictions, "Ranking TSV");
  eval_cmd->add_option("--top-k", ev.top_k, "Rows per query in the ranking TSV (0 = all)")->capture_default_str();

  ExportArgs ex;
  auto* export_cmd = app.add_subcommand("export-boxes", "Write each node's box at a confidence level");
  export_cmd->add_option("--checkpoint", ex.checkpoint)->required();
  export_cmd->add_option("--embeddings", ex.embeddings)->required();
  export_cmd->add_option("--nodes", ex.nodes)->required();
  export_cmd->add_option("--sigma", ex.sigma)->capture_default_str();
  export_cmd->add_option("--out", ex.out)->required();

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "Train and evaluate once per value of one hyperparameter");
  sweep_cmd->add_option("--param", sw.param, "dim, lambda, or C")->required();
  sweep_cmd->add_option("--values", sw.values, "Comma-separated values")->required();
  sweep_cmd->add_option("--config", sw.config);
  sweep_cmd->add_option("--nodes", sw.nodes, "Seed node file")->required();
  sweep_cmd->add_option("--edges", sw.edges, "Seed edge file")->required();
  sweep_cmd->add_option("--queries", sw.queries)->required();
  sweep_cmd->add_option("--embeddings", sw.embeddings)->required();
  sweep_cmd->add_option("--scorer", sw.scorer)->capture_default_str();
  sweep_cmd->add_option("--k", sw.ks)->capture_default_str();
  sweep_cmd->add_option("--out-csv", sw.csv)->required();
  sweep_cmd->add_option("--out-svg", sw.svg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*split_cmd) run_split(split);
    if (*synth_cmd) run_synth(synth);
    if (*embed_cmd) run_pseudo_embed(embed);
    if (*train_cmd) run_train(tr);
    if (*eval_cmd) run_eval(ev);
    if (*export_cmd) run_export(ex);
    if (*sweep_cmd) run_sweep(sw);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << '\n';
    return 4;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
