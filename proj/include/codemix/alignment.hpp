#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace codemix {

struct SentencePair {
  std::string pair_id;  // matches a sent_id in the source treebank
  std::vector<std::string> source_tokens;  // e_1..e_n
  std::vector<std::string> target_tokens;  // f_1..f_m
};

// Per sentence-pair probabilities p(e_i|f_j). Row 0 is the null word e_0;
// each column j is a distribution over {e_0, e_1..e_n}.
struct AlignmentMatrix {
  std::string pair_id;
  int n = 0;  // source length
  int m = 0;  // target length
  std::vector<double> probs;  // (n+1) x m, row-major

  double p(int i, int j) const {  // i in 0..n, j in 1..m
    return probs[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                 static_cast<std::size_t>(j - 1)];
  }
  double& p(int i, int j) {
    return probs[static_cast<std::size_t>(i) * static_cast<std::size_t>(m) +
                 static_cast<std::size_t>(j - 1)];
  }
};

// Raw translation scores keyed by (source form, target form), with a
// separate score for aligning a target form to nothing. Absent entries
// score default_score (0 unless configured otherwise).
struct LexicalTable {
  std::unordered_map<std::string, double> scores;       // key: src + '\t' + tgt
  std::unordered_map<std::string, double> null_scores;  // key: tgt
  double default_score = 0.0;
  double default_null = 0.0;

  double score(const std::string& src, const std::string& tgt) const;
  double null_score(const std::string& tgt) const;
};

// TSV `source<TAB>target<TAB>score`; a first line equal to `log:` marks
// log-scores, exponentiated on load. Source form `<eps>` feeds null_scores.
LexicalTable load_lexical_table(std::istream& in);
LexicalTable load_lexical_table_file(const std::string& path);

// Column j of the result is the normalization over i of
// table(e_i, f_j) + smoothing, with row 0 using null_score(f_j) + smoothing.
AlignmentMatrix derive_matrix(const SentencePair& pair, const LexicalTable& table,
                              double smoothing = 1e-9);

// JSON-lines records {"pair_id":..., "n":..., "m":..., "probs":[...]} with
// probs row-major over (n+1) x m. Columns are checked against the unit-sum
// invariant (tolerance 1e-3) and renormalized exactly.
std::vector<AlignmentMatrix> load_matrix_file(std::istream& in);
std::vector<AlignmentMatrix> load_matrix_file_path(const std::string& path);
void write_matrix_file(std::ostream& out, const std::vector<AlignmentMatrix>& matrices);

// TSV `pair_id<TAB>source sentence<TAB>target sentence`, whitespace-tokenized.
std::vector<SentencePair> load_pairs(std::istream& in);
std::vector<SentencePair> load_pairs_file(const std::string& path);
void write_pairs(std::ostream& out, const std::vector<SentencePair>& pairs);

struct BestAlignment {
  int a = 0;     // argmax_i p(e_i|f_j); 0 is the null word
  double p = 0;  // the maximum itself
};

// One entry per target word, j = 1..m at index j-1. Ties break toward the
// smaller i, so a tie involving e_0 prefers null.
std::vector<BestAlignment> best_alignments(const AlignmentMatrix& matrix);

}  // namespace codemix
