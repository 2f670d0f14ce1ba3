// Word-alignment ingestion: lexical tables, per-pair probability matrices,
// parallel sentence files, and per-column argmax.

#include "codemix/alignment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "codemix/error.hpp"

namespace codemix {

namespace {

constexpr double kColumnSumTolerance = 1e-3;

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream iss(s);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

std::vector<std::string> split_tabs(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(const std::string& s, std::size_t lineno) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad number '" + s + "'", lineno);
  }
}

void renormalize_columns(AlignmentMatrix& mat) {
  for (int j = 1; j <= mat.m; ++j) {
    double sum = 0;
    for (int i = 0; i <= mat.n; ++i) sum += mat.p(i, j);
    if (sum <= 0) throw DataError("pair " + mat.pair_id + ": column " + std::to_string(j) +
                                  " has no probability mass");
    for (int i = 0; i <= mat.n; ++i) mat.p(i, j) /= sum;
  }
}

}  // namespace

double LexicalTable::score(const std::string& src, const std::string& tgt) const {
  auto it = scores.find(src + '\t' + tgt);
  return it == scores.end() ? default_score : it->second;
}

double LexicalTable::null_score(const std::string& tgt) const {
  auto it = null_scores.find(tgt);
  return it == null_scores.end() ? default_null : it->second;
}

LexicalTable load_lexical_table(std::istream& in) {
  LexicalTable table;
  std::string line;
  std::size_t lineno = 0;
  bool log_scores = false;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && line == "log:") {
      log_scores = true;
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, got " + std::to_string(cols.size()),
                       lineno);
    }
    double score = parse_double(cols[2], lineno);
    if (log_scores) {
      score = std::exp(score);
    } else if (score < 0) {
      throw ParseError("negative score " + cols[2], lineno);
    }
    if (cols[0] == "<eps>") {
      table.null_scores[cols[1]] = score;  // duplicates keep the last occurrence
    } else {
      table.scores[cols[0] + '\t' + cols[1]] = score;
    }
  }
  return table;
}

LexicalTable load_lexical_table_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_lexical_table(in);
}

AlignmentMatrix derive_matrix(const SentencePair& pair, const LexicalTable& table,
                              double smoothing) {
  if (smoothing < 0) throw ConfigError("smoothing must be non-negative");
  const int n = static_cast<int>(pair.source_tokens.size());
  const int m = static_cast<int>(pair.target_tokens.size());
  if (n < 1 || m < 1) throw DataError("pair " + pair.pair_id + ": empty sentence");
  AlignmentMatrix mat;
  mat.pair_id = pair.pair_id;
  mat.n = n;
  mat.m = m;
  mat.probs.assign(static_cast<std::size_t>(n + 1) * static_cast<std::size_t>(m), 0.0);
  for (int j = 1; j <= m; ++j) {
    const std::string& f = pair.target_tokens[static_cast<std::size_t>(j - 1)];
    mat.p(0, j) = table.null_score(f) + smoothing;
    for (int i = 1; i <= n; ++i)
      mat.p(i, j) = table.score(pair.source_tokens[static_cast<std::size_t>(i - 1)], f) + smoothing;
  }
  renormalize_columns(mat);
  return mat;
}

std::vector<AlignmentMatrix> load_matrix_file(std::istream& in) {
  std::vector<AlignmentMatrix> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad JSON record: ") + e.what(), lineno);
    }
    AlignmentMatrix mat;
    try {
      mat.pair_id = rec.at("pair_id").get<std::string>();
      mat.n = rec.at("n").get<int>();
      mat.m = rec.at("m").get<int>();
      mat.probs = rec.at("probs").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad record fields: ") + e.what(), lineno);
    }
    if (mat.n < 1 || mat.m < 1)
      throw DataError("pair " + mat.pair_id + ": n and m must be at least 1");
    const std::size_t expect =
        static_cast<std::size_t>(mat.n + 1) * static_cast<std::size_t>(mat.m);
    if (mat.probs.size() != expect) {
      throw DataError("pair " + mat.pair_id + ": expected " + std::to_string(expect) +
                      " probabilities, got " + std::to_string(mat.probs.size()));
    }
    for (double v : mat.probs) {
      if (!(v >= 0.0) || v > 1.0 + kColumnSumTolerance)
        throw DataError("pair " + mat.pair_id + ": probability out of range");
    }
    for (int j = 1; j <= mat.m; ++j) {
      double sum = 0;
      for (int i = 0; i <= mat.n; ++i) sum += mat.p(i, j);
      if (std::abs(sum - 1.0) > kColumnSumTolerance) {
        throw DataError("pair " + mat.pair_id + ": column " + std::to_string(j) +
                        " sums to " + std::to_string(sum));
      }
    }
    renormalize_columns(mat);
    out.push_back(std::move(mat));
  }
  return out;
}

std::vector<AlignmentMatrix> load_matrix_file_path(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_matrix_file(in);
}

void write_matrix_file(std::ostream& out, const std::vector<AlignmentMatrix>& matrices) {
  for (const AlignmentMatrix& mat : matrices) {
    nlohmann::json rec;
    rec["pair_id"] = mat.pair_id;
    rec["n"] = mat.n;
    rec["m"] = mat.m;
    rec["probs"] = mat.probs;
    out << rec.dump() << '\n';
  }
}

std::vector<SentencePair> load_pairs(std::istream& in) {
  std::vector<SentencePair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols = split_tabs(line);
    if (cols.size() != 3) {
      throw ParseError("expected 3 tab-separated fields, got " + std::to_string(cols.size()),
                       lineno);
    }
    SentencePair pair;
    pair.pair_id = cols[0];
    pair.source_tokens = split_ws(cols[1]);
    pair.target_tokens = split_ws(cols[2]);
    if (pair.source_tokens.empty() || pair.target_tokens.empty())
      throw ParseError("pair " + pair.pair_id + " has an empty side", lineno);
    out.push_back(std::move(pair));
  }
  return out;
}

std::vector<SentencePair> load_pairs_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load_pairs(in);
}

void write_pairs(std::ostream& out, const std::vector<SentencePair>& pairs) {
  for (const SentencePair& p : pairs) {
    out << p.pair_id << '\t';
    for (std::size_t i = 0; i < p.source_tokens.size(); ++i) {
      if (i) out << ' ';
      out << p.source_tokens[i];
    }
    out << '\t';
    for (std::size_t i = 0; i < p.target_tokens.size(); ++i) {
      if (i) out << ' ';
      out << p.target_tokens[i];
    }
    out << '\n';
  }
}

std::vector<BestAlignment> best_alignments(const AlignmentMatrix& matrix) {
  std::vector<BestAlignment> out(static_cast<std::size_t>(matrix.m));
  for (int j = 1; j <= matrix.m; ++j) {
    int best = 0;
    double best_p = matrix.p(0, j);
    for (int i = 1; i <= matrix.n; ++i) {
      if (matrix.p(i, j) > best_p) {  // strict: ties keep the smaller i
        best_p = matrix.p(i, j);
        best = i;
      }
    }
    out[static_cast<std::size_t>(j - 1)] = {best, best_p};
  }
  return out;
}

}  // namespace codemix
