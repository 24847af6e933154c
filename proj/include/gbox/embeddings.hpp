#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gbox {

/// Fixed encoder vectors keyed by node id; one column per row of the file.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  EmbeddingTable(int dim, std::vector<std::string> ids, Eigen::MatrixXd vectors);

  int dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  const Eigen::MatrixXd& vectors() const { return vectors_; }

  bool contains(const std::string& id) const { return index_.contains(id); }
  std::optional<std::size_t> find(const std::string& id) const;
  /// Throws DataError naming the missing id.
  Eigen::VectorXd vector(const std::string& id) const;

 private:
  int dim_ = 0;
  std::vector<std::string> ids_;
  Eigen::MatrixXd vectors_;  // dim x size
  std::unordered_map<std::string, std::size_t> index_;
};

/// Header `dim<TAB>k`, then `id<TAB>v1,...,vk`. Throws DataError with the
/// offending line number.
EmbeddingTable parse_embeddings(std::string_view text, std::string_view source = "embeddings");
EmbeddingTable load_embeddings(const std::filesystem::path& path);
std::string format_embeddings(const EmbeddingTable& table);

}  // namespace gbox
