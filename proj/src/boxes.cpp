#include "gbox/boxes.hpp"

#include "gbox/io_util.hpp"
#include "gbox/rank_eval.hpp"

namespace gbox {

std::vector<NodeBox> export_boxes(const ProjectionParams& params, const EmbeddingTable& embeddings,
                                  const std::vector<std::string>& ids, SigmaLevel level) {
  Eigen::MatrixXd inputs(embeddings.dim(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) inputs.col(static_cast<Eigen::Index>(i)) = embeddings.vector(ids[i]);
  const auto result = forward(params, inputs, Mode::eval);
  std::vector<NodeBox> out;
  out.reserve(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto g = box_to_gaussian(result.boxes.box(static_cast<Eigen::Index>(i)));
    out.push_back({ids[i], gaussian_to_box(g, level)});
  }
  return out;
}

std::string format_boxes_tsv(std::span<const NodeBox> boxes, SigmaLevel level) {
  std::string out;
  auto join = [](const Vec<double>& v) {
    std::string s;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (i > 0) s += ',';
      s += format_double(v[i]);
    }
    return s;
  };
  for (const auto& nb : boxes) {
    out += escape_field(nb.id) + '\t' + format_double(level.k()) + '\t' + join(nb.box.center) + '\t' +
           join(nb.box.offset) + '\n';
  }
  return out;
}

std::size_t count_overlapping_pairs(std::span<const NodeBox> boxes) {
  std::size_t count = 0;
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    for (std::size_t b = a + 1; b < boxes.size(); ++b) {
      const auto& x = boxes[a].box;
      const auto& y = boxes[b].box;
      if (((x.center - y.center).array().abs() <= (x.offset + y.offset).array()).all()) ++count;
    }
  }
  return count;
}

std::size_t count_contained_pairs(std::span<const NodeBox> boxes) {
  std::size_t count = 0;
  for (std::size_t a = 0; a < boxes.size(); ++a) {
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      if (a == b) continue;
      const auto& inner = boxes[a].box;
      const auto& outer = boxes[b].box;
      const bool lower = ((inner.center - inner.offset).array() >= (outer.center - outer.offset).array()).all();
      const bool upper = ((inner.center + inner.offset).array() <= (outer.center + outer.offset).array()).all();
      if (lower && upper) ++count;
    }
  }
  return count;
}

}  // namespace gbox
