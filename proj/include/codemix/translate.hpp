#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "codemix/alignment.hpp"
#include "codemix/conllu.hpp"

namespace codemix {

struct CodeMixConfig {
  double lambda = 0.7;  // overall translation ratio
  bool enable_deletion = true;
  bool enable_reordering = true;
  std::uint64_t seed = 0;  // reserved; the pipeline itself is deterministic
};

struct SelectItem {
  int index = 0;  // payload index, used for deterministic tie-breaking
  double value = 0;
};

// The min(ceil(universe_size * lambda), items.size()) items with the largest
// values; ties break toward the smaller index. Result sorted by index.
std::vector<SelectItem> select(std::vector<SelectItem> items, double lambda,
                               std::size_t universe_size);

struct SubstitutionChoice {
  int target_index = 0;  // j
  int source_index = 0;  // a_j, always >= 1
  double prob = 0;       // p_j
};

struct SubstitutionPlan {
  std::vector<SubstitutionChoice> chosen;  // ascending target index
  std::map<int, std::vector<int>> groups;  // source index -> ascending target indices
};

struct DeletionPlan {
  std::vector<std::pair<int, double>> doomed;  // (source index, retention r_i), ascending index
};

SubstitutionPlan plan_substitution(const DependencyTree& tree, const AlignmentMatrix& matrix,
                                   double lambda);

// Replaces each planned source token with its aligned target word(s). For a
// many-to-one group the highest-probability member (ties: smallest target
// index) anchors the source token's head, label, tag and children; the other
// members attach beside it with the original label and tag. When old_to_new
// is given it receives, per 1-based source position, the new id of that
// token's representative (the anchor for substituted tokens).
DependencyTree apply_substitution(const DependencyTree& tree, const SubstitutionPlan& plan,
                                  const SentencePair& pair,
                                  std::vector<int>* old_to_new = nullptr);

// Candidates are source words no target word is best-aligned to, minus the
// root; retention r_i sums row i of the matrix; the lowest-retention
// ceil(|D| * lambda) words are doomed.
DeletionPlan plan_deletion(const DependencyTree& tree, const AlignmentMatrix& matrix,
                           double lambda);

// Removes doomed tokens; children reattach to the nearest surviving ancestor
// with their own labels. Indices in the plan refer to the tree passed here.
DependencyTree apply_deletion(const DependencyTree& tree, const DeletionPlan& plan);

// Sorts each maximal contiguous run of target-language tokens by
// origin_index. Arcs between tokens are untouched; only positions move.
DependencyTree reorder(const DependencyTree& tree);

struct TreeTranslationStats {
  int substituted_sources = 0;  // source tokens replaced
  int emitted_targets = 0;      // target tokens inserted
  int deleted_sources = 0;
  int target_spans = 0;  // maximal target runs in the output
};

// Substitution, deletion, reordering, in that order; deletion and reordering
// honor the config toggles.
DependencyTree translate_tree(const DependencyTree& tree, const AlignmentMatrix& matrix,
                              const SentencePair& pair, const CodeMixConfig& config,
                              TreeTranslationStats* stats = nullptr);

struct TranslationStats {
  int trees = 0;
  int translated = 0;
  int unmatched = 0;  // trees copied through for lack of a matrix/pair
  long long tokens_in = 0;
  long long tokens_out = 0;
  long long substituted_sources = 0;
  long long emitted_targets = 0;
  long long deleted_sources = 0;
  long long target_spans = 0;

  double substituted_ratio() const {
    return tokens_in ? static_cast<double>(substituted_sources) / static_cast<double>(tokens_in)
                     : 0.0;
  }
  double deleted_ratio() const {
    return tokens_in ? static_cast<double>(deleted_sources) / static_cast<double>(tokens_in) : 0.0;
  }
  std::string to_json() const;
};

// Trees are matched to matrices and pairs by sent_id; unmatched trees are
// copied through and counted.
Treebank translate_treebank(const Treebank& bank, const std::vector<AlignmentMatrix>& matrices,
                            const std::vector<SentencePair>& pairs, const CodeMixConfig& config,
                            TranslationStats* stats = nullptr);

// Concatenation, a then b, with vocabularies unioned.
Treebank mix_corpora(const Treebank& a, const Treebank& b);

}  // namespace codemix
