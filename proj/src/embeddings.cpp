#include "gbox/embeddings.hpp"

#include <cmath>

#include "gbox/errors.hpp"
#include "gbox/io_util.hpp"

namespace gbox {

EmbeddingTable::EmbeddingTable(int dim, std::vector<std::string> ids, Eigen::MatrixXd vectors)
    : dim_(dim), ids_(std::move(ids)), vectors_(std::move(vectors)) {
  if (vectors_.rows() != dim_ || vectors_.cols() != static_cast<Eigen::Index>(ids_.size())) {
    throw DataError("embedding table shape does not match its ids");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw DataError("duplicate embedding row for '" + ids_[i] + "'");
  }
}

std::optional<std::size_t> EmbeddingTable::find(const std::string& id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Eigen::VectorXd EmbeddingTable::vector(const std::string& id) const {
  const auto idx = find(id);
  if (!idx) throw DataError("missing embedding for node '" + id + "'");
  return vectors_.col(static_cast<Eigen::Index>(*idx));
}

EmbeddingTable parse_embeddings(std::string_view text, std::string_view source) {
  const auto lines = split_char(text, '\n');
  auto where = [&](std::size_t line_no) { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
  std::size_t line_no = 0;
  int dim = -1;
  std::vector<std::string> ids;
  std::vector<double> values;
  for (auto raw : lines) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    if (raw.empty()) continue;
    const auto fields = split_tabs(raw);
    if (dim < 0) {
      if (fields.size() != 2 || fields[0] != "dim") throw DataError(where(line_no) + "expected header 'dim<TAB>k'");
      long long k = 0;
      try {
        k = parse_int(fields[1], "dim");
      } catch (const ValidationError& e) {
        throw DataError(where(line_no) + e.what());
      }
      if (k < 1) throw DataError(where(line_no) + "dimension must be positive");
      dim = static_cast<int>(k);
      continue;
    }
    if (fields.size() != 2 || fields[0].empty()) throw DataError(where(line_no) + "expected id<TAB>comma-separated values");
    const auto parts = split_char(fields[1], ',');
    if (static_cast<int>(parts.size()) != dim) {
      throw DataError(where(line_no) + "expected " + std::to_string(dim) + " values, got " + std::to_string(parts.size()));
    }
    for (auto part : parts) {
      double v = 0.0;
      try {
        v = parse_double(part, "embedding value");
      } catch (const ValidationError& e) {
        throw DataError(where(line_no) + e.what());
      }
      if (!std::isfinite(v)) throw DataError(where(line_no) + "non-finite embedding value");
      values.push_back(v);
    }
    ids.push_back(unescape_field(fields[0]));
  }
  if (dim < 0) throw DataError(std::string(source) + ": empty embedding file");
  Eigen::MatrixXd vectors = Eigen::Map<Eigen::MatrixXd>(values.data(), dim, static_cast<Eigen::Index>(ids.size()));
  return EmbeddingTable(dim, std::move(ids), std::move(vectors));
}

EmbeddingTable load_embeddings(const std::filesystem::path& path) {
  return parse_embeddings(read_file(path), path.string());
}

std::string format_embeddings(const EmbeddingTable& table) {
  std::string out = "dim\t" + std::to_string(table.dim()) + '\n';
  for (std::size_t i = 0; i < table.size(); ++i) {
    out += escape_field(table.ids()[i]);
    out += '\t';
    for (int r = 0; r < table.dim(); ++r) {
      if (r > 0) out += ',';
      out += format_double(table.vectors()(r, static_cast<Eigen::Index>(i)));
    }
    out += '\n';
  }
  return out;
}

}  // namespace gbox
