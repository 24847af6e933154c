#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gbox {

using NodeId = std::string;

struct ConceptRecord {
  NodeId id;
  std::string surface;
  std::string definition;

  bool operator==(const ConceptRecord&) const = default;
};

struct Edge {
  NodeId parent;
  NodeId child;

  auto operator<=>(const Edge&) const = default;
};

/// Immutable directed acyclic hypernymy graph.
///
/// Nodes are stored in ascending id order, so every dense index and every
/// adjacency list is independent of the order the input was given in.
class TaxonomyGraph {
 public:
  TaxonomyGraph() = default;

  /// Validates and builds. Throws ValidationError on duplicate ids, empty
  /// surfaces, dangling or duplicate edges, and cycles.
  static TaxonomyGraph build(std::vector<ConceptRecord> nodes, std::vector<Edge> edges);

  std::size_t size() const { return records_.size(); }
  std::size_t edge_count() const { return edges_.size(); }

  bool contains(const NodeId& id) const { return index_.contains(id); }
  /// Throws ValidationError for unknown ids.
  std::size_t index_of(const NodeId& id) const;
  const NodeId& id_of(std::size_t index) const { return records_[index].id; }
  const ConceptRecord& record(std::size_t index) const { return records_[index]; }
  const ConceptRecord& record(const NodeId& id) const { return records_[index_of(id)]; }
  const std::vector<ConceptRecord>& records() const { return records_; }
  const std::vector<Edge>& edges() const { return edges_; }

  const std::vector<std::size_t>& parents(std::size_t index) const { return parents_[index]; }
  const std::vector<std::size_t>& children(std::size_t index) const { return children_[index]; }
  bool is_leaf(std::size_t index) const { return children_[index].empty(); }
  bool is_root(std::size_t index) const { return parents_[index].empty(); }

  std::vector<std::size_t> roots() const;
  std::vector<std::size_t> leaves() const;

  /// Length of the shortest root-to-node path, counting nodes (roots have depth 1).
  int depth(std::size_t index) const { return depth_[index]; }

  /// Strict ancestors / descendants.
  std::set<std::size_t> ancestors(std::size_t index) const;
  std::set<std::size_t> descendants(std::size_t index) const;

  /// True when every node has at most one parent.
  bool single_parent() const;

  /// Subgraph without the given nodes and their incident edges.
  TaxonomyGraph without(const std::set<NodeId>& removed) const;

 private:
  std::vector<ConceptRecord> records_;
  std::vector<Edge> edges_;
  std::unordered_map<NodeId, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<int> depth_;
};

TaxonomyGraph load_taxonomy(const std::filesystem::path& nodes_path, const std::filesystem::path& edges_path);

std::vector<ConceptRecord> parse_nodes(std::string_view text, std::string_view source = "nodes");
std::vector<Edge> parse_edges(std::string_view text, std::string_view source = "edges");

std::string format_nodes(const TaxonomyGraph& g);
std::string format_edges(const TaxonomyGraph& g);

struct HeldOutQuery {
  NodeId query;
  std::set<NodeId> gold_parents;

  bool operator==(const HeldOutQuery&) const = default;
};

struct SplitResult {
  TaxonomyGraph seed;
  std::vector<HeldOutQuery> queries;  // sorted by query id
  std::uint64_t split_seed = 0;
  double fraction = 0.0;
};

/// Holds out round(fraction * |leaves|) leaves, sampled uniformly without
/// replacement, keeping every gold parent of every held-out leaf in the seed.
SplitResult split_leaves(const TaxonomyGraph& g, double fraction, std::uint64_t rng_seed);

std::string format_split_manifest(const SplitResult& split);

struct SplitManifest {
  std::vector<HeldOutQuery> queries;
  double fraction = 0.0;
  std::uint64_t split_seed = 0;
};

SplitManifest parse_split_manifest(std::string_view text);

/// Siblings, uncles, cousins, and grandparents of `child`, never including the
/// child or its direct parents. With `exclude_ancestors`, every ancestor of
/// the child is dropped as well (grandparents included).
std::set<std::size_t> hard_negative_pool(const TaxonomyGraph& g, std::size_t child, bool exclude_ancestors = false);
std::set<NodeId> hard_negative_pool(const TaxonomyGraph& g, const NodeId& child, bool exclude_ancestors = false);

/// 2 * depth(LCA) / (depth(a) + depth(b)). The LCA is the common ancestor
/// (inclusive) of greatest depth; nodes with no common ancestor score 0.
double wu_palmer(const TaxonomyGraph& g, std::size_t a, std::size_t b);
double wu_palmer(const TaxonomyGraph& g, const NodeId& a, const NodeId& b);

}  // namespace gbox
