#pragma once

#include <cstdint>
#include <vector>

#include "gbox/embeddings.hpp"
#include "gbox/taxonomy.hpp"

namespace gbox {

/// Balanced tree with `levels` levels below the root and `branching` children
/// per internal node. Ids are dotted paths ("r", "r.0", "r.0.3", ...).
TaxonomyGraph make_balanced_tree(int branching, int levels);

/// Unit vectors seeded from a stable hash of (id, seed); independent of row order.
EmbeddingTable hash_embeddings(const std::vector<NodeId>& ids, int dim, std::uint64_t seed);

/// Unit vectors that follow the tree: each node is the normalized sum of its
/// parents' mean vector and `noise` times its own hashed unit vector, so
/// cosine similarity decays with tree distance. Ids absent from `tree` get
/// their hashed vector.
EmbeddingTable clustered_embeddings(const std::vector<NodeId>& ids, const TaxonomyGraph& tree, int dim,
                                    std::uint64_t seed, double noise = 0.8);

}  // namespace gbox
