#pragma once

#include <span>
#include <string>
#include <vector>

#include "gbox/embeddings.hpp"
#include "gbox/geometry.hpp"
#include "gbox/projection.hpp"

namespace gbox {

struct NodeBox {
  std::string id;
  Box<double> box;
};

/// Eval-mode Gaussian of each node turned back into a box at `level`.
std::vector<NodeBox> export_boxes(const ProjectionParams& params, const EmbeddingTable& embeddings,
                                  const std::vector<std::string>& ids, SigmaLevel level);

/// `id<TAB>sigma<TAB>c1,...,cd<TAB>o1,...,od`
std::string format_boxes_tsv(std::span<const NodeBox> boxes, SigmaLevel level);

/// Unordered pairs whose closed boxes intersect on every axis.
std::size_t count_overlapping_pairs(std::span<const NodeBox> boxes);

/// Ordered pairs (a, b), a != b, with box a inside box b.
std::size_t count_contained_pairs(std::span<const NodeBox> boxes);

}  // namespace gbox
