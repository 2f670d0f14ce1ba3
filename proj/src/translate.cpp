// Code-mixed tree translation: word substitution, word deletion, sentence
// reordering, and the treebank-level driver.

#include "codemix/translate.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "codemix/error.hpp"

namespace codemix {

namespace {

// ceil(N * lambda) guarded against the product landing a hair above an
// integer in floating point.
std::size_t quota(std::size_t universe, double lambda) {
  double q = std::ceil(static_cast<double>(universe) * lambda - 1e-9);
  if (q < 0) return 0;
  return static_cast<std::size_t>(q);
}

int count_target_spans(const DependencyTree& tree) {
  int spans = 0;
  bool in_span = false;
  for (const Token& t : tree.tokens) {
    if (t.lang == Lang::Target) {
      if (!in_span) ++spans;
      in_span = true;
    } else {
      in_span = false;
    }
  }
  return spans;
}

}  // namespace

std::vector<SelectItem> select(std::vector<SelectItem> items, double lambda,
                               std::size_t universe_size) {
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  if (universe_size < items.size())
    throw ContractViolation("select: universe smaller than the candidate set");
  std::stable_sort(items.begin(), items.end(), [](const SelectItem& a, const SelectItem& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.index < b.index;
  });
  std::size_t take = std::min(quota(universe_size, lambda), items.size());
  items.resize(take);
  std::sort(items.begin(), items.end(),
            [](const SelectItem& a, const SelectItem& b) { return a.index < b.index; });
  return items;
}

SubstitutionPlan plan_substitution(const DependencyTree& tree, const AlignmentMatrix& matrix,
                                   double lambda) {
  if (matrix.n != tree.size()) {
    throw DataError("sentence " + tree.sent_id + ": alignment matrix has n=" +
                    std::to_string(matrix.n) + " but the tree has " +
                    std::to_string(tree.size()) + " tokens");
  }
  std::vector<BestAlignment> best = best_alignments(matrix);
  std::vector<SelectItem> pool;
  for (int j = 1; j <= matrix.m; ++j) {
    const BestAlignment& b = best[static_cast<std::size_t>(j - 1)];
    if (b.a >= 1) pool.push_back({j, b.p});  // null-aligned targets are ineligible
  }
  std::vector<SelectItem> picked = select(std::move(pool), lambda,
                                          static_cast<std::size_t>(matrix.m));
  SubstitutionPlan plan;
  for (const SelectItem& item : picked) {
    const BestAlignment& b = best[static_cast<std::size_t>(item.index - 1)];
    plan.chosen.push_back({item.index, b.a, b.p});
    plan.groups[b.a].push_back(item.index);
  }
  return plan;
}

DependencyTree apply_substitution(const DependencyTree& tree, const SubstitutionPlan& plan,
                                  const SentencePair& pair, std::vector<int>* old_to_new) {
  const int n = tree.size();
  const int m = static_cast<int>(pair.target_tokens.size());

  std::unordered_map<int, double> prob_by_target;
  for (const SubstitutionChoice& c : plan.chosen) {
    if (c.source_index < 1 || c.source_index > n || c.target_index < 1 || c.target_index > m)
      throw ContractViolation("substitution plan index out of range");
    prob_by_target[c.target_index] = c.prob;
  }
  for (const auto& [src, targets] : plan.groups) {
    if (src < 1 || src > n) throw ContractViolation("substitution group index out of range");
    for (int j : targets)
      if (!prob_by_target.count(j))
        throw ContractViolation("substitution group member missing from chosen");
  }

  struct Emitted {
    int original = 0;      // old id when this is a carried-over token
    int group_source = 0;  // old id of the replaced source token
    int target_index = 0;
    bool is_anchor = false;
  };
  std::vector<Emitted> emitted;
  std::vector<int> rep(static_cast<std::size_t>(n) + 1, 0);
  for (int old = 1; old <= n; ++old) {
    auto git = plan.groups.find(old);
    if (git == plan.groups.end()) {
      emitted.push_back({old, 0, 0, false});
      rep[static_cast<std::size_t>(old)] = static_cast<int>(emitted.size());
      continue;
    }
    // Anchor: largest probability, ties toward the smaller target index.
    int anchor = git->second.front();
    double anchor_p = prob_by_target[anchor];
    for (int j : git->second) {
      if (prob_by_target[j] > anchor_p) {
        anchor_p = prob_by_target[j];
        anchor = j;
      }
    }
    for (int j : git->second) {
      emitted.push_back({0, old, j, j == anchor});
      if (j == anchor) rep[static_cast<std::size_t>(old)] = static_cast<int>(emitted.size());
    }
  }

  DependencyTree out;
  out.sent_id = tree.sent_id;
  out.tokens.reserve(emitted.size());
  for (std::size_t k = 0; k < emitted.size(); ++k) {
    const Emitted& e = emitted[k];
    Token tok;
    if (e.original) {
      tok = tree.at(e.original);
      tok.head = tok.head == 0 ? 0 : rep[static_cast<std::size_t>(tok.head)];
    } else {
      const Token& src = tree.at(e.group_source);
      tok.form = pair.target_tokens[static_cast<std::size_t>(e.target_index - 1)];
      tok.upos = src.upos;  // tags stay with the source word
      tok.deprel = src.deprel;
      tok.lang = Lang::Target;
      tok.origin_index = e.target_index;
      if (src.head == 0) {
        // Substituting the root: the anchor keeps head 0, the other group
        // members hang off the anchor so the tree stays single-rooted.
        tok.head = e.is_anchor ? 0 : rep[static_cast<std::size_t>(e.group_source)];
      } else {
        tok.head = rep[static_cast<std::size_t>(src.head)];
      }
    }
    tok.id = static_cast<int>(k) + 1;
    out.tokens.push_back(std::move(tok));
  }
  if (old_to_new) *old_to_new = rep;
  return out;
}

DeletionPlan plan_deletion(const DependencyTree& tree, const AlignmentMatrix& matrix,
                           double lambda) {
  if (matrix.n != tree.size()) {
    throw DataError("sentence " + tree.sent_id + ": alignment matrix has n=" +
                    std::to_string(matrix.n) + " but the tree has " +
                    std::to_string(tree.size()) + " tokens");
  }
  std::vector<BestAlignment> best = best_alignments(matrix);
  std::vector<char> aligned(static_cast<std::size_t>(matrix.n) + 1, 0);
  for (const BestAlignment& b : best)
    if (b.a >= 1) aligned[static_cast<std::size_t>(b.a)] = 1;

  std::vector<SelectItem> candidates;
  std::vector<double> retention(static_cast<std::size_t>(matrix.n) + 1, 0.0);
  for (int i = 1; i <= matrix.n; ++i) {
    if (aligned[static_cast<std::size_t>(i)]) continue;
    if (tree.at(i).head == 0) continue;  // never delete the root
    double r = 0;
    for (int j = 1; j <= matrix.m; ++j) r += matrix.p(i, j);
    retention[static_cast<std::size_t>(i)] = r;
    candidates.push_back({i, -r});  // lowest retention first
  }
  std::vector<SelectItem> picked = select(std::move(candidates), lambda, candidates.size());
  DeletionPlan plan;
  for (const SelectItem& item : picked)
    plan.doomed.push_back({item.index, retention[static_cast<std::size_t>(item.index)]});
  return plan;
}

DependencyTree apply_deletion(const DependencyTree& tree, const DeletionPlan& plan) {
  const int n = tree.size();
  std::vector<char> doomed(static_cast<std::size_t>(n) + 1, 0);
  for (const auto& [i, r] : plan.doomed) {
    if (i < 1 || i > n) throw ContractViolation("deletion plan index out of range");
    if (tree.at(i).head == 0) throw ContractViolation("deletion plan contains the root token");
    doomed[static_cast<std::size_t>(i)] = 1;
  }
  std::vector<int> new_id(static_cast<std::size_t>(n) + 1, 0);
  int next = 0;
  for (int i = 1; i <= n; ++i)
    if (!doomed[static_cast<std::size_t>(i)]) new_id[static_cast<std::size_t>(i)] = ++next;

  DependencyTree out;
  out.sent_id = tree.sent_id;
  out.tokens.reserve(static_cast<std::size_t>(next));
  for (int i = 1; i <= n; ++i) {
    if (doomed[static_cast<std::size_t>(i)]) continue;
    Token tok = tree.at(i);
    int h = tok.head;
    int steps = 0;
    while (h != 0 && doomed[static_cast<std::size_t>(h)]) {  // chase to a surviving ancestor
      h = tree.at(h).head;
      if (++steps > n) throw ContractViolation("head chain does not terminate");
    }
    tok.head = h == 0 ? 0 : new_id[static_cast<std::size_t>(h)];
    tok.id = new_id[static_cast<std::size_t>(i)];
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

DependencyTree reorder(const DependencyTree& tree) {
  const int n = tree.size();
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  int i = 1;
  while (i <= n) {
    if (tree.at(i).lang != Lang::Target) {
      order.push_back(i);
      ++i;
      continue;
    }
    int j = i;
    std::vector<int> run;
    while (j <= n && tree.at(j).lang == Lang::Target) {
      if (!tree.at(j).origin_index)
        throw ContractViolation("sentence " + tree.sent_id + ": target token " +
                                std::to_string(j) + " has no origin_index");
      run.push_back(j);
      ++j;
    }
    std::stable_sort(run.begin(), run.end(), [&](int a, int b) {
      return *tree.at(a).origin_index < *tree.at(b).origin_index;
    });
    order.insert(order.end(), run.begin(), run.end());
    i = j;
  }
  std::vector<int> new_id(static_cast<std::size_t>(n) + 1, 0);
  for (int k = 0; k < n; ++k) new_id[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k + 1;
  DependencyTree out;
  out.sent_id = tree.sent_id;
  out.tokens.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Token tok = tree.at(order[static_cast<std::size_t>(k)]);
    tok.id = k + 1;
    tok.head = tok.head == 0 ? 0 : new_id[static_cast<std::size_t>(tok.head)];
    out.tokens.push_back(std::move(tok));
  }
  return out;
}

DependencyTree translate_tree(const DependencyTree& tree, const AlignmentMatrix& matrix,
                              const SentencePair& pair, const CodeMixConfig& config,
                              TreeTranslationStats* stats) {
  if (config.lambda < 0.0 || config.lambda > 1.0) throw ConfigError("lambda must lie in [0, 1]");
  if (static_cast<int>(pair.source_tokens.size()) != tree.size()) {
    throw DataError("sentence " + tree.sent_id + ": pair has " +
                    std::to_string(pair.source_tokens.size()) + " source tokens but the tree has " +
                    std::to_string(tree.size()));
  }
  if (static_cast<int>(pair.target_tokens.size()) != matrix.m) {
    throw DataError("sentence " + tree.sent_id + ": pair has " +
                    std::to_string(pair.target_tokens.size()) + " target tokens but the matrix m=" +
                    std::to_string(matrix.m));
  }

  SubstitutionPlan sub = plan_substitution(tree, matrix, config.lambda);
  DeletionPlan del;
  if (config.enable_deletion) del = plan_deletion(tree, matrix, config.lambda);

  std::vector<int> old_to_new;
  DependencyTree out = apply_substitution(tree, sub, pair, &old_to_new);
  if (config.enable_deletion && !del.doomed.empty()) {
    DeletionPlan remapped;
    for (const auto& [i, r] : del.doomed)
      remapped.doomed.push_back({old_to_new[static_cast<std::size_t>(i)], r});
    out = apply_deletion(out, remapped);
  }
  if (config.enable_reordering) out = reorder(out);
  ensure_valid_tree(out);

  if (stats) {
    stats->substituted_sources = static_cast<int>(sub.groups.size());
    stats->emitted_targets = static_cast<int>(sub.chosen.size());
    stats->deleted_sources = config.enable_deletion ? static_cast<int>(del.doomed.size()) : 0;
    stats->target_spans = count_target_spans(out);
  }
  return out;
}

std::string TranslationStats::to_json() const {
  nlohmann::json j;
  j["trees"] = trees;
  j["translated"] = translated;
  j["unmatched"] = unmatched;
  j["tokens_in"] = tokens_in;
  j["tokens_out"] = tokens_out;
  j["substituted_sources"] = substituted_sources;
  j["emitted_targets"] = emitted_targets;
  j["deleted_sources"] = deleted_sources;
  j["target_spans"] = target_spans;
  j["substituted_ratio"] = substituted_ratio();
  j["deleted_ratio"] = deleted_ratio();
  return j.dump(2);
}

Treebank translate_treebank(const Treebank& bank, const std::vector<AlignmentMatrix>& matrices,
                            const std::vector<SentencePair>& pairs, const CodeMixConfig& config,
                            TranslationStats* stats) {
  std::unordered_map<std::string, const AlignmentMatrix*> matrix_by_id;
  for (const AlignmentMatrix& m : matrices) {
    if (!matrix_by_id.emplace(m.pair_id, &m).second)
      throw DataError("duplicate pair_id in matrix file: " + m.pair_id);
  }
  std::unordered_map<std::string, const SentencePair*> pair_by_id;
  for (const SentencePair& p : pairs) {
    if (!pair_by_id.emplace(p.pair_id, &p).second)
      throw DataError("duplicate pair_id in pair file: " + p.pair_id);
  }

  TranslationStats local;
  Treebank out;
  out.trees.reserve(bank.trees.size());
  for (const DependencyTree& tree : bank.trees) {
    ++local.trees;
    local.tokens_in += tree.size();
    auto mit = matrix_by_id.find(tree.sent_id);
    auto pit = pair_by_id.find(tree.sent_id);
    if (mit == matrix_by_id.end() || pit == pair_by_id.end()) {
      ++local.unmatched;
      local.tokens_out += tree.size();
      out.trees.push_back(tree);
      continue;
    }
    TreeTranslationStats tstats;
    DependencyTree translated = translate_tree(tree, *mit->second, *pit->second, config, &tstats);
    ++local.translated;
    local.tokens_out += translated.size();
    local.substituted_sources += tstats.substituted_sources;
    local.emitted_targets += tstats.emitted_targets;
    local.deleted_sources += tstats.deleted_sources;
    local.target_spans += tstats.target_spans;
    out.trees.push_back(std::move(translated));
  }
  out.rebuild_vocabs();
  if (stats) *stats = local;
  return out;
}

Treebank mix_corpora(const Treebank& a, const Treebank& b) {
  Treebank out;
  out.trees = a.trees;
  out.trees.insert(out.trees.end(), b.trees.begin(), b.trees.end());
  out.label_vocab = a.label_vocab;
  out.label_vocab.insert(b.label_vocab.begin(), b.label_vocab.end());
  out.pos_vocab = a.pos_vocab;
  out.pos_vocab.insert(b.pos_vocab.begin(), b.pos_vocab.end());
  return out;
}

}  // namespace codemix
