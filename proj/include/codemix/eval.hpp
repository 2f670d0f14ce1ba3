#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "codemix/alignment.hpp"
#include "codemix/conllu.hpp"
#include "codemix/parser.hpp"
#include "codemix/resources.hpp"
#include "codemix/translate.hpp"

namespace codemix {

struct MetricsReport {
  double uas = 0;  // percent, full precision; format to 2 decimals for display
  double las = 0;
  long long evaluated = 0;  // non-punctuation tokens
  long long excluded = 0;   // gold-PUNCT tokens
  std::map<std::string, double> per_pos_f;
  std::map<std::string, double> per_distance_f;

  std::string to_text() const;
};

// UAS/LAS over positionally matched tokens, gold-PUNCT excluded from both
// numerator and denominator. Throws DataError on length mismatches.
MetricsReport score(const Treebank& gold, const Treebank& pred);

// Labeled F per gold POS tag. Tags are inputs rather than predictions, so
// precision = recall = per-tag labeled accuracy.
std::map<std::string, double> f_by_pos(const Treebank& gold, const Treebank& pred);

struct DistanceBucket {
  std::string name;
  int lo = 0;
  int hi = 0;  // inclusive
};
std::vector<DistanceBucket> default_distance_buckets();  // 1, 2, 3-6, >=7

// Labeled F per arc-distance bucket, root arcs as a dedicated bucket.
// Precision comes from predicted buckets, recall from gold buckets.
std::map<std::string, double> f_by_distance(const Treebank& gold, const Treebank& pred);
std::map<std::string, double> f_by_distance(const Treebank& gold, const Treebank& pred,
                                            const std::vector<DistanceBucket>& buckets);

MetricsReport full_report(const Treebank& gold, const Treebank& pred);

// ---- experiment harnesses ----

struct ExperimentInputs {
  const Treebank* source = nullptr;
  const std::vector<AlignmentMatrix>* matrices = nullptr;
  const std::vector<SentencePair>* pairs = nullptr;
  const EmbeddingTable* embeddings = nullptr;  // optional
  const ClusterMap* clusters = nullptr;        // optional
  const Treebank* eval_bank = nullptr;         // gold target evaluation bank
  ParserConfig parser;
  CodeMixConfig codemix;  // deletion/reordering toggles for the translate step
  bool mix_with_source = false;
  int trials = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
};

struct SweepRow {
  double lambda = 0;
  int trial = 0;
  double uas = 0;
  double las = 0;
};

// For each lambda in the grid: translate, train one model per trial with
// seed = base seed + trial index, parse the eval bank, score. Rows come back
// grid-major then trial-major regardless of job count.
std::vector<SweepRow> sweep_lambda(const ExperimentInputs& in, const std::vector<double>& grid);

std::string sweep_csv(const std::vector<SweepRow>& rows);  // lambda,trial,uas,las

struct SweepSummary {
  double lambda = 0;
  double mean_uas = 0, sd_uas = 0;
  double mean_las = 0, sd_las = 0;
};
std::vector<SweepSummary> summarize_sweep(const std::vector<SweepRow>& rows);
std::string sweep_table(const std::vector<SweepSummary>& rows);

struct AblationRow {
  std::string name;
  bool deletion = false;
  bool reordering = false;
  double uas = 0;  // means over trials
  double las = 0;
};

// The four deletion/reordering combinations at a fixed lambda, in the order
// Mix, -Sentence Reordering, -Word Deletion, -Both.
std::vector<AblationRow> ablation(const ExperimentInputs& in, double lambda);
std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace codemix
