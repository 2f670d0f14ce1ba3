// Cross-lingual resource files: embeddings and word clusters.

#include "codemix/resources.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "codemix/error.hpp"

namespace codemix {

namespace {

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool parse_int(const std::string& s, int& out) {
  try {
    std::size_t used = 0;
    out = std::stoi(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

const std::vector<double>* EmbeddingTable::find(const std::string& form) const {
  auto it = vectors.find(form);
  if (it != vectors.end()) return &it->second;
  it = vectors.find(ascii_lower(form));
  if (it != vectors.end()) return &it->second;
  return nullptr;
}

const std::vector<double>& EmbeddingTable::lookup(const std::string& form) const {
  const std::vector<double>* v = find(form);
  return v ? *v : unk_vector;
}

EmbeddingTable load_embeddings(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  int declared_dim = 0;
  bool first = true;
  std::vector<double> sum;
  std::size_t count = 0;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::vector<std::string> fields;
    std::string tok;
    while (iss >> tok) fields.push_back(tok);

    if (first) {
      first = false;
      int a = 0, b = 0;
      if (fields.size() == 2 && parse_int(fields[0], a) && parse_int(fields[1], b)) {
        declared_dim = b;  // `<count> <dim>` header
        continue;
      }
    }
    if (fields.size() < 2) throw ParseError("embedding line with no values", lineno);
    const int dim = static_cast<int>(fields.size()) - 1;
    if (declared_dim == 0) {
      declared_dim = dim;
    } else if (dim != declared_dim) {
      throw ParseError("expected " + std::to_string(declared_dim) + " values, got " +
                       std::to_string(dim), lineno);
    }
    std::vector<double> vec(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      try {
        vec[static_cast<std::size_t>(k)] = std::stod(fields[static_cast<std::size_t>(k + 1)]);
      } catch (const std::exception&) {
        throw ParseError("bad number '" + fields[static_cast<std::size_t>(k + 1)] + "'", lineno);
      }
    }
    if (sum.empty()) sum.assign(static_cast<std::size_t>(dim), 0.0);
    for (int k = 0; k < dim; ++k) sum[static_cast<std::size_t>(k)] += vec[static_cast<std::size_t>(k)];
    ++count;
    table.vectors[fields[0]] = std::move(vec);
  }
  table.dim = declared_dim;
  table.unk_vector.assign(static_cast<std::size_t>(std::max(declared_dim, 0)), 0.0);
  if (count > 0) {
    for (std::size_t k = 0; k < table.unk_vector.size(); ++k)
      table.unk_vector[k] = sum[k] / static_cast<double>(count);
  }
  return table;
}

EmbeddingTable load_embeddings_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_embeddings(in);
}

int ClusterMap::lookup(const std::string& form) const {
  auto it = ids.find(form);
  if (it != ids.end()) return it->second;
  it = ids.find(ascii_lower(form));
  if (it != ids.end()) return it->second;
  return unk_cluster();
}

ClusterMap load_clusters(std::istream& in, std::optional<int> cluster_count) {
  ClusterMap map;
  std::string line;
  std::size_t lineno = 0;
  int max_id = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError("expected `word<TAB>cluster_id`", lineno);
    std::string word = line.substr(0, tab);
    int id = 0;
    if (!parse_int(line.substr(tab + 1), id) || id < 0)
      throw ParseError("bad cluster id '" + line.substr(tab + 1) + "'", lineno);
    map.ids[word] = id;
    max_id = std::max(max_id, id);
  }
  map.cluster_count = cluster_count.value_or(std::max(max_id + 1, 1));
  if (max_id >= map.cluster_count)
    throw DataError("cluster id " + std::to_string(max_id) + " exceeds cluster count " +
                    std::to_string(map.cluster_count));
  return map;
}

ClusterMap load_clusters_file(const std::string& path, std::optional<int> cluster_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_clusters(in, cluster_count);
}

Treebank featurize(const Treebank& bank, const ClusterMap& clusters) {
  Treebank out = bank;
  for (DependencyTree& tree : out.trees)
    for (Token& tok : tree.tokens) tok.cluster = clusters.lookup(tok.form);
  return out;
}

}  // namespace codemix
