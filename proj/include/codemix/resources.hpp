#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "codemix/conllu.hpp"

namespace codemix {

// Pretrained (typically cross-lingual) word vectors. Lookups never fail:
// out-of-vocabulary forms fall back to the mean of all loaded vectors.
struct EmbeddingTable {
  int dim = 0;
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::vector<double> unk_vector;

  // Case-sensitive, then lowercase; nullptr when both miss.
  const std::vector<double>* find(const std::string& form) const;
  const std::vector<double>& lookup(const std::string& form) const;
};

// Text format: optional `<count> <dim>` header, then `word v1 ... v_dim`
// space-separated per line.
EmbeddingTable load_embeddings(std::istream& in);
EmbeddingTable load_embeddings_file(const std::string& path);

struct ClusterMap {
  std::unordered_map<std::string, int> ids;
  int cluster_count = 256;  // C; known ids are 0..C-1

  int unk_cluster() const { return cluster_count; }
  // Case-sensitive, then lowercase, then unk_cluster().
  int lookup(const std::string& form) const;
};

// Lines `word<TAB>cluster_id`. C becomes 1 + max id unless overridden.
ClusterMap load_clusters(std::istream& in, std::optional<int> cluster_count = std::nullopt);
ClusterMap load_clusters_file(const std::string& path,
                              std::optional<int> cluster_count = std::nullopt);

// Attaches a cluster id to every token. Word vectors are resolved by the
// parser at embedding time, so only clusters are materialized here.
Treebank featurize(const Treebank& bank, const ClusterMap& clusters);

}  // namespace codemix
