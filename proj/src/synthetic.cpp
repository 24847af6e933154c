#include "gbox/synthetic.hpp"

#include <deque>

#include "gbox/errors.hpp"
#include "gbox/io_util.hpp"

namespace gbox {
namespace {

Eigen::VectorXd hashed_unit(const NodeId& id, int dim, std::uint64_t seed) {
  Rng rng(fnv1a64(id, fnv1a64(std::to_string(seed))));
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = standard_normal(rng);
  return v.normalized();
}

void require_dim(int dim) {
  if (dim < 2) throw ValidationError("embedding dimension must be >= 2");
}

}  // namespace

TaxonomyGraph make_balanced_tree(int branching, int levels) {
  if (branching < 1 || levels < 0) throw ValidationError("balanced tree needs branching >= 1 and levels >= 0");
  std::vector<ConceptRecord> nodes{{"r", "concept r", ""}};
  std::vector<Edge> edges;
  std::vector<NodeId> frontier{"r"};
  for (int level = 0; level < levels; ++level) {
    std::vector<NodeId> next;
    for (const auto& parent : frontier) {
      for (int b = 0; b < branching; ++b) {
        NodeId child = parent + "." + std::to_string(b);
        nodes.push_back({child, "concept " + child, "level " + std::to_string(level + 1)});
        edges.push_back({parent, child});
        next.push_back(std::move(child));
      }
    }
    frontier = std::move(next);
  }
  return TaxonomyGraph::build(std::move(nodes), std::move(edges));
}

EmbeddingTable hash_embeddings(const std::vector<NodeId>& ids, int dim, std::uint64_t seed) {
  require_dim(dim);
  Eigen::MatrixXd vectors(dim, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) vectors.col(static_cast<Eigen::Index>(i)) = hashed_unit(ids[i], dim, seed);
  return EmbeddingTable(dim, ids, std::move(vectors));
}

EmbeddingTable clustered_embeddings(const std::vector<NodeId>& ids, const TaxonomyGraph& tree, int dim,
                                    std::uint64_t seed, double noise) {
  require_dim(dim);
  // Kahn order over the tree so every parent is placed before its children.
  const std::size_t n = tree.size();
  std::vector<std::size_t> indegree(n);
  std::deque<std::size_t> ready;
  for (std::size_t i = 0; i < n; ++i) {
    indegree[i] = tree.parents(i).size();
    if (indegree[i] == 0) ready.push_back(i);
  }
  std::vector<Eigen::VectorXd> placed(n);
  while (!ready.empty()) {
    const std::size_t cur = ready.front();
    ready.pop_front();
    Eigen::VectorXd own = hashed_unit(tree.id_of(cur), dim, seed);
    if (tree.parents(cur).empty()) {
      placed[cur] = own;
    } else {
      Eigen::VectorXd base = Eigen::VectorXd::Zero(dim);
      for (std::size_t p : tree.parents(cur)) base += placed[p];
      base.normalize();
      placed[cur] = (base + noise * own).normalized();
    }
    for (std::size_t child : tree.children(cur))
      if (--indegree[child] == 0) ready.push_back(child);
  }

  Eigen::MatrixXd vectors(dim, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    vectors.col(static_cast<Eigen::Index>(i)) =
        tree.contains(ids[i]) ? placed[tree.index_of(ids[i])] : hashed_unit(ids[i], dim, seed);
  }
  return EmbeddingTable(dim, ids, std::move(vectors));
}

}  // namespace gbox
