#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <tuple>

#include "codemix/error.hpp"
#include "codemix/translate.hpp"
#include "support/gen.hpp"

using namespace codemix;

namespace {

Token mk(int id, const std::string& form, const std::string& upos, int head,
         const std::string& rel) {
  return Token{id, form, upos, std::nullopt, head, rel, Lang::Source, std::nullopt};
}

AlignmentMatrix matrix_from_columns(const std::string& id, int n,
                                    const std::vector<std::vector<double>>& cols) {
  AlignmentMatrix mat;
  mat.pair_id = id;
  mat.n = n;
  mat.m = static_cast<int>(cols.size());
  mat.probs.assign(static_cast<std::size_t>(n + 1) * cols.size(), 0.0);
  for (int j = 1; j <= mat.m; ++j)
    for (int i = 0; i <= n; ++i) mat.p(i, j) = cols[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i)];
  return mat;
}

// Arcs as (head form or ROOT, dependent form, label); forms in these tests
// are unique, so the multiset identifies arcs.
std::multiset<std::tuple<std::string, std::string, std::string>> arc_set(
    const DependencyTree& tree) {
  std::multiset<std::tuple<std::string, std::string, std::string>> out;
  for (const Token& t : tree.tokens) {
    std::string head = t.head == 0 ? "<ROOT>" : tree.at(t.head).form;
    out.insert({head, t.form, t.deprel});
  }
  return out;
}

}  // namespace

TEST_CASE("select") {
  SUBCASE("top values by ceiling quota") {
    std::vector<SelectItem> items = {{1, 0.9}, {2, 0.5}, {3, 0.7}};
    auto picked = select(items, 0.5, 3);  // ceil(1.5) = 2
    REQUIRE(picked.size() == 2);
    CHECK(picked[0].index == 1);
    CHECK(picked[1].index == 3);
  }
  SUBCASE("lambda 0 picks nothing, lambda 1 picks everything") {
    std::vector<SelectItem> items = {{1, 0.9}, {2, 0.5}};
    CHECK(select(items, 0.0, 5).empty());
    CHECK(select(items, 1.0, 5).size() == 2);
  }
  SUBCASE("ties break toward the smaller index") {
    std::vector<SelectItem> items = {{3, 0.5}, {1, 0.5}, {2, 0.5}};
    auto picked = select(items, 0.5, 4);  // quota 2
    REQUIRE(picked.size() == 2);
    CHECK(picked[0].index == 1);
    CHECK(picked[1].index == 2);
  }
  SUBCASE("matches a full-sort oracle on random values") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> val(0.0, 1.0);
    for (int iter = 0; iter < 200; ++iter) {
      std::vector<SelectItem> items;
      for (int i = 1; i <= 10; ++i) items.push_back({i, val(rng)});
      auto picked = select(items, 0.7, 10);
      // oracle: sort a copy by (value desc, index asc), take ceil(7) = 7
      auto sorted = items;
      std::sort(sorted.begin(), sorted.end(), [](const SelectItem& a, const SelectItem& b) {
        return a.value != b.value ? a.value > b.value : a.index < b.index;
      });
      std::set<int> expect;
      for (int k = 0; k < 7; ++k) expect.insert(sorted[static_cast<std::size_t>(k)].index);
      std::set<int> got;
      for (const auto& it : picked) got.insert(it.index);
      CHECK(got == expect);
    }
  }
  SUBCASE("quota is exact at awkward lambda * N products") {
    std::vector<SelectItem> items;
    for (int i = 1; i <= 10; ++i) items.push_back({i, 1.0 / i});
    CHECK(select(items, 0.3, 10).size() == 3);
    CHECK(select(items, 0.1, 10).size() == 1);
    std::vector<SelectItem> big;
    for (int i = 1; i <= 55; ++i) big.push_back({i, 1.0 / i});
    CHECK(select(big, 0.2, 55).size() == 11);
  }
  SUBCASE("lambda outside [0,1] is a config error") {
    std::vector<SelectItem> items = {{1, 0.5}};
    CHECK_THROWS_AS(select(items, -0.1, 1), ConfigError);
    CHECK_THROWS_AS(select(items, 1.1, 1), ConfigError);
  }
}

TEST_CASE("plan_substitution") {
  DependencyTree tree;
  tree.sent_id = "s";
  tree.tokens = {mk(1, "found", "VERB", 0, "root"), mk(2, "it", "PRON", 1, "dobj")};

  SUBCASE("null-aligned targets are excluded even at lambda 1") {
    auto mat = matrix_from_columns("s", 2, {{0.05, 0.9, 0.05}, {0.8, 0.1, 0.1}});
    auto plan = plan_substitution(tree, mat, 1.0);
    REQUIRE(plan.chosen.size() == 1);
    CHECK(plan.chosen[0].target_index == 1);
    CHECK(plan.chosen[0].source_index == 1);
    CHECK(plan.chosen[0].prob == doctest::Approx(0.9));
  }
  SUBCASE("lambda 0 gives an empty plan") {
    auto mat = matrix_from_columns("s", 2, {{0.05, 0.9, 0.05}, {0.1, 0.1, 0.8}});
    auto plan = plan_substitution(tree, mat, 0.0);
    CHECK(plan.chosen.empty());
    CHECK(plan.groups.empty());
  }
  SUBCASE("shared best source forms one group in ascending target order") {
    auto mat = matrix_from_columns(
        "s", 2, {{0.1, 0.1, 0.8}, {0.2, 0.7, 0.1}, {0.1, 0.05, 0.85}});
    auto plan = plan_substitution(tree, mat, 1.0);
    REQUIRE(plan.groups.count(2) == 1);
    CHECK(plan.groups.at(2) == std::vector<int>{1, 3});
  }
  SUBCASE("matrix size mismatch is a data error") {
    auto mat = matrix_from_columns("s", 3, {{0.25, 0.25, 0.25, 0.25}});
    CHECK_THROWS_AS(plan_substitution(tree, mat, 0.5), DataError);
  }
}

TEST_CASE("one-to-one substitution keeps the arc") {
  // "found <- it (dobj)" with it -> den; the verb stays source-language.
  DependencyTree tree;
  tree.sent_id = "fig3a";
  tree.tokens = {mk(1, "found", "VERB", 0, "root"), mk(2, "it", "PRON", 1, "dobj")};
  SentencePair pair{"fig3a", {"found", "it"}, {"hittade", "den"}};
  auto mat = matrix_from_columns("fig3a", 2, {{0.1, 0.8, 0.1}, {0.05, 0.05, 0.9}});
  CodeMixConfig config;
  config.lambda = 0.5;  // quota ceil(2*0.5) = 1, den wins on probability
  DependencyTree out = translate_tree(tree, mat, pair, config);

  REQUIRE(out.size() == 2);
  CHECK(out.at(1).form == "found");
  CHECK(out.at(1).lang == Lang::Source);
  CHECK(out.at(2).form == "den");
  CHECK(out.at(2).lang == Lang::Target);
  CHECK(out.at(2).origin_index == 2);
  CHECK(out.at(2).head == 1);
  CHECK(out.at(2).deprel == "dobj");
  CHECK(out.at(2).upos == "PRON");  // tag copied from the source word
}

TEST_CASE("many-to-one substitution links all members to the head") {
  // meanwhile (advmod -> found) aligned to both "under" and "tiden";
  // found -> hittat. Both Swedish words end up on hittat with advmod.
  DependencyTree tree;
  tree.sent_id = "fig3b";
  tree.tokens = {mk(1, "meanwhile", "ADV", 2, "advmod"), mk(2, "found", "VERB", 0, "root")};
  SentencePair pair{"fig3b", {"meanwhile", "found"}, {"under", "tiden", "hittat"}};
  auto mat = matrix_from_columns("fig3b", 2,
                                 {{0.2, 0.6, 0.2}, {0.15, 0.7, 0.15}, {0.05, 0.05, 0.9}});
  CodeMixConfig config;
  config.lambda = 1.0;
  DependencyTree out = translate_tree(tree, mat, pair, config);

  REQUIRE(out.size() == 3);
  CHECK(out.at(1).form == "under");
  CHECK(out.at(2).form == "tiden");
  CHECK(out.at(3).form == "hittat");
  CHECK(out.at(3).head == 0);
  CHECK(out.at(1).head == 3);
  CHECK(out.at(1).deprel == "advmod");
  CHECK(out.at(2).head == 3);
  CHECK(out.at(2).deprel == "advmod");
  CHECK(out.at(1).upos == "ADV");
  CHECK(out.at(2).upos == "ADV");
}

TEST_CASE("empty plan reproduces the input exactly") {
  std::mt19937_64 rng(4);
  DependencyTree tree = testgen::random_tree(rng, 6, "id");
  SentencePair pair = testgen::pair_for(tree, 4);
  SubstitutionPlan empty;
  DependencyTree out = apply_substitution(tree, empty, pair);
  CHECK(same_tree(tree, out));
}

TEST_CASE("plan_deletion") {
  SUBCASE("unaligned low-retention word goes first") {
    // they are being satisfied -> de nojda med; are/being compete, with
    // p(are|med) slightly lower.
    DependencyTree tree;
    tree.sent_id = "fig4";
    tree.tokens = {mk(1, "they", "PRON", 4, "nsubj"), mk(2, "are", "AUX", 4, "aux"),
                   mk(3, "being", "AUX", 4, "aux"), mk(4, "satisfied", "VERB", 0, "root")};
    auto mat = matrix_from_columns("fig4", 4,
                                   {{0.02, 0.9, 0.02, 0.02, 0.04},
                                    {0.03, 0.02, 0.03, 0.02, 0.9},
                                    {0.40, 0.05, 0.20, 0.25, 0.10}});
    auto plan = plan_deletion(tree, mat, 0.5);  // |D| = 2, quota 1
    REQUIRE(plan.doomed.size() == 1);
    CHECK(plan.doomed[0].first == 2);  // "are"
    CHECK(plan.doomed[0].second == doctest::Approx(0.02 + 0.03 + 0.20));
  }
  SUBCASE("lambda 0 dooms nothing") {
    std::mt19937_64 rng(8);
    DependencyTree tree = testgen::random_tree(rng, 5, "t");
    AlignmentMatrix mat = testgen::random_matrix(rng, 5, 3, "t");
    CHECK(plan_deletion(tree, mat, 0.0).doomed.empty());
  }
  SUBCASE("retention equals the independently summed row") {
    DependencyTree tree;
    tree.sent_id = "r";
    tree.tokens = {mk(1, "a", "X", 4, "dep"), mk(2, "b", "X", 4, "dep"),
                   mk(3, "c", "X", 4, "dep"), mk(4, "d", "X", 0, "root")};
    // all three leaves unaligned (null dominates every column)
    auto mat = matrix_from_columns("r", 4,
                                   {{0.6, 0.10, 0.05, 0.15, 0.10},
                                    {0.5, 0.05, 0.25, 0.10, 0.10}});
    auto plan = plan_deletion(tree, mat, 1.0);
    REQUIRE(plan.doomed.size() == 3);
    std::map<int, double> retention;
    for (auto [i, r] : plan.doomed) retention[i] = r;
    CHECK(retention[1] == doctest::Approx(0.10 + 0.05));
    CHECK(retention[2] == doctest::Approx(0.05 + 0.25));
    CHECK(retention[3] == doctest::Approx(0.15 + 0.10));
  }
  SUBCASE("the root is never a candidate") {
    std::mt19937_64 rng(13);
    for (int iter = 0; iter < 200; ++iter) {
      DependencyTree tree = testgen::random_tree(rng, 6, "t");
      AlignmentMatrix mat = testgen::random_matrix(rng, 6, 4, "t");
      auto plan = plan_deletion(tree, mat, 1.0);
      for (auto [i, r] : plan.doomed) CHECK(tree.at(i).head != 0);
    }
  }
}

TEST_CASE("apply_deletion") {
  SUBCASE("leaf deletion only renumbers") {
    DependencyTree tree;
    tree.sent_id = "leaf";
    tree.tokens = {mk(1, "a", "X", 2, "det"), mk(2, "b", "X", 0, "root"),
                   mk(3, "c", "X", 2, "obj")};
    DeletionPlan plan;
    plan.doomed = {{1, 0.1}};
    DependencyTree out = apply_deletion(tree, plan);
    REQUIRE(out.size() == 2);
    CHECK(out.at(1).form == "b");
    CHECK(out.at(1).head == 0);
    CHECK(out.at(2).form == "c");
    CHECK(out.at(2).head == 1);
    CHECK(out.at(2).deprel == "obj");
  }
  SUBCASE("child reattaches to the deleted token's head") {
    // chain a -> b -> c (c root), delete b
    DependencyTree tree;
    tree.sent_id = "chain";
    tree.tokens = {mk(1, "a", "X", 2, "amod"), mk(2, "b", "X", 3, "dep"),
                   mk(3, "c", "X", 0, "root")};
    DeletionPlan plan;
    plan.doomed = {{2, 0.1}};
    DependencyTree out = apply_deletion(tree, plan);
    REQUIRE(out.size() == 2);
    CHECK(out.at(1).form == "a");
    CHECK(out.at(1).head == 2);       // c, renumbered
    CHECK(out.at(1).deprel == "amod");  // keeps its own label
  }
  SUBCASE("chains of doomed tokens chase to the nearest surviving ancestor") {
    // a -> b -> d -> r, x -> d, y -> r; delete b and d
    DependencyTree tree;
    tree.sent_id = "chase";
    tree.tokens = {mk(1, "a", "X", 2, "dep"), mk(2, "b", "X", 4, "dep"),
                   mk(3, "x", "X", 4, "dep"), mk(4, "d", "X", 6, "dep"),
                   mk(5, "y", "X", 6, "dep"), mk(6, "r", "X", 0, "root")};
    DeletionPlan plan;
    plan.doomed = {{2, 0.1}, {4, 0.2}};
    DependencyTree out = apply_deletion(tree, plan);
    REQUIRE(out.size() == 4);
    CHECK(out.at(1).form == "a");
    CHECK(out.at(1).head == 4);  // r
    CHECK(out.at(2).form == "x");
    CHECK(out.at(2).head == 4);
    CHECK(out.at(3).form == "y");
    CHECK(out.at(3).head == 4);
    CHECK(out.at(4).form == "r");
    CHECK(out.at(4).head == 0);
    CHECK(validate_tree(out).empty());
  }
  SUBCASE("a plan containing the root is rejected") {
    DependencyTree tree;
    tree.sent_id = "bad";
    tree.tokens = {mk(1, "a", "X", 0, "root"), mk(2, "b", "X", 1, "dep")};
    DeletionPlan plan;
    plan.doomed = {{1, 0.0}};
    CHECK_THROWS_AS(apply_deletion(tree, plan), ContractViolation);
  }
}

TEST_CASE("reorder") {
  auto tgt = [](int id, const std::string& form, int head, const std::string& rel, int origin) {
    Token t = mk(id, form, "X", head, rel);
    t.lang = Lang::Target;
    t.origin_index = origin;
    return t;
  };
  SUBCASE("full-sentence span follows the translation order") {
    // vi moves first -> third, mu moves last -> first
    DependencyTree tree;
    tree.sent_id = "fig6a";
    tree.tokens = {tgt(1, "vi", 2, "nsubj", 3), tgt(2, "dansade", 0, "root", 4),
                   tgt(3, "hela", 2, "advmod", 2), tgt(4, "mu", 2, "obj", 1)};
    auto before = arc_set(tree);
    DependencyTree out = reorder(tree);
    CHECK(out.at(1).form == "mu");
    CHECK(out.at(2).form == "hela");
    CHECK(out.at(3).form == "vi");
    CHECK(out.at(4).form == "dansade");
    CHECK(arc_set(out) == before);
    CHECK(validate_tree(out).empty());
  }
  SUBCASE("source-only tree is untouched") {
    std::mt19937_64 rng(21);
    DependencyTree tree = testgen::random_tree(rng, 7, "src");
    CHECK(same_tree(reorder(tree), tree));
  }
  SUBCASE("two spans reorder independently around the separator") {
    DependencyTree tree;
    tree.sent_id = "fig6b";
    tree.tokens = {tgt(1, "B", 3, "dep", 2), tgt(2, "A", 3, "dep", 1),
                   mk(3, "the", "DET", 0, "root"), tgt(4, "D", 3, "dep", 5),
                   tgt(5, "C", 3, "dep", 4)};
    auto before = arc_set(tree);
    DependencyTree out = reorder(tree);
    CHECK(out.at(1).form == "A");
    CHECK(out.at(2).form == "B");
    CHECK(out.at(3).form == "the");
    CHECK(out.at(4).form == "C");
    CHECK(out.at(5).form == "D");
    CHECK(arc_set(out) == before);
  }
  SUBCASE("a target token without origin_index is a contract violation") {
    DependencyTree tree;
    tree.sent_id = "bad";
    Token t = mk(1, "x", "X", 0, "root");
    t.lang = Lang::Target;
    tree.tokens = {t};
    CHECK_THROWS_AS(reorder(tree), ContractViolation);
  }
}

TEST_CASE("translate_tree follows a hand-computed trace") {
  // the cat saw a dog -> sag katten en hund (en best-aligns to null).
  DependencyTree tree;
  tree.sent_id = "trace";
  tree.tokens = {mk(1, "the", "DET", 2, "det"), mk(2, "cat", "NOUN", 3, "nsubj"),
                 mk(3, "saw", "VERB", 0, "root"), mk(4, "a", "DET", 5, "det"),
                 mk(5, "dog", "NOUN", 3, "obj")};
  SentencePair pair{"trace", {"the", "cat", "saw", "a", "dog"},
                    {"sag", "katten", "en", "hund"}};
  auto mat = matrix_from_columns("trace", 5,
                                 {{0.02, 0.03, 0.05, 0.80, 0.05, 0.05},
                                  {0.05, 0.05, 0.70, 0.10, 0.05, 0.05},
                                  {0.45, 0.05, 0.05, 0.10, 0.30, 0.05},
                                  {0.10, 0.02, 0.03, 0.05, 0.20, 0.60}});
  // By hand: a = (3, 2, 0, 5), p = (.80, .70, .45, .60). Substitution quota
  // ceil(4 * .5) = 2 picks j=1 (saw->sag) and j=2 (cat->katten). D = {1, 4},
  // r_1 = .15 < r_4 = .60, deletion quota ceil(2 * .5) = 1 dooms "the".
  // The target run [katten, sag] reorders to [sag, katten].
  CodeMixConfig config;
  config.lambda = 0.5;
  TreeTranslationStats stats;
  DependencyTree out = translate_tree(tree, mat, pair, config, &stats);

  REQUIRE(out.size() == 4);
  CHECK(out.at(1).form == "sag");
  CHECK(out.at(1).head == 0);
  CHECK(out.at(1).deprel == "root");
  CHECK(out.at(1).upos == "VERB");
  CHECK(out.at(1).origin_index == 1);
  CHECK(out.at(2).form == "katten");
  CHECK(out.at(2).head == 1);
  CHECK(out.at(2).deprel == "nsubj");
  CHECK(out.at(2).upos == "NOUN");
  CHECK(out.at(3).form == "a");
  CHECK(out.at(3).head == 4);
  CHECK(out.at(3).deprel == "det");
  CHECK(out.at(4).form == "dog");
  CHECK(out.at(4).head == 1);
  CHECK(out.at(4).deprel == "obj");
  CHECK(stats.substituted_sources == 2);
  CHECK(stats.emitted_targets == 2);
  CHECK(stats.deleted_sources == 1);
  CHECK(stats.target_spans == 1);
}

TEST_CASE("translate_tree boundary behavior") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> n_pick(1, 10), m_pick(1, 10);
  for (int iter = 0; iter < 300; ++iter) {
    const int n = n_pick(rng), m = m_pick(rng);
    DependencyTree tree = testgen::random_tree(rng, n, "b" + std::to_string(iter));
    AlignmentMatrix mat = testgen::random_matrix(rng, n, m, tree.sent_id);
    SentencePair pair = testgen::pair_for(tree, m);

    CodeMixConfig zero;
    zero.lambda = 0.0;
    CHECK(same_tree(translate_tree(tree, mat, pair, zero), tree));

    CodeMixConfig one;
    one.lambda = 1.0;
    DependencyTree full = translate_tree(tree, mat, pair, one);
    auto best = best_alignments(mat);
    std::set<int> aligned;
    int eligible = 0;
    for (const auto& b : best)
      if (b.a >= 1) {
        aligned.insert(b.a);
        ++eligible;
      }
    int target_tokens = 0;
    for (const Token& t : full.tokens) target_tokens += t.lang == Lang::Target;
    CHECK(target_tokens == eligible);  // every non-null-best-aligned word is in
    // Remaining source tokens are exactly the aligned-or-root leftovers:
    for (const Token& t : full.tokens) {
      if (t.lang == Lang::Source) {
        bool root = t.head == 0;
        // find its source index by form (forms are unique in the generator)
        int src_index = 0;
        for (const Token& orig : tree.tokens)
          if (orig.form == t.form) src_index = orig.id;
        REQUIRE(src_index > 0);
        CHECK((root || aligned.count(src_index) == 1));
      }
    }
  }
}

TEST_CASE("translate_tree validity over random instances and the lambda grid") {
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> n_pick(1, 12), m_pick(1, 12);
  for (int iter = 0; iter < 120; ++iter) {
    const int n = n_pick(rng), m = m_pick(rng);
    DependencyTree tree = testgen::random_tree(rng, n, "v" + std::to_string(iter));
    AlignmentMatrix mat = testgen::random_matrix(rng, n, m, tree.sent_id);
    SentencePair pair = testgen::pair_for(tree, m);
    for (int step = 0; step <= 10; ++step) {
      CodeMixConfig config;
      config.lambda = step / 10.0;
      DependencyTree out = translate_tree(tree, mat, pair, config);
      CHECK(validate_tree(out).empty());
    }
  }
}

TEST_CASE("token accounting matches the plans") {
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<int> n_pick(2, 10), m_pick(1, 10);
  for (int iter = 0; iter < 200; ++iter) {
    const int n = n_pick(rng), m = m_pick(rng);
    DependencyTree tree = testgen::random_tree(rng, n, "a" + std::to_string(iter));
    AlignmentMatrix mat = testgen::random_matrix(rng, n, m, tree.sent_id);
    SentencePair pair = testgen::pair_for(tree, m);
    CodeMixConfig config;
    config.lambda = 0.6;
    config.enable_reordering = false;

    auto sub = plan_substitution(tree, mat, config.lambda);
    auto del = plan_deletion(tree, mat, config.lambda);
    DependencyTree out = translate_tree(tree, mat, pair, config);

    int target_tokens = 0;
    for (const Token& t : out.tokens) target_tokens += t.lang == Lang::Target;
    CHECK(target_tokens == static_cast<int>(sub.chosen.size()));
    CHECK(out.size() == n - static_cast<int>(del.doomed.size()) +
                            static_cast<int>(sub.chosen.size()) -
                            static_cast<int>(sub.groups.size()));
  }
}

TEST_CASE("selection pools are nested as lambda rises") {
  std::mt19937_64 rng(61);
  for (int iter = 0; iter < 50; ++iter) {
    const int n = 8, m = 9;
    DependencyTree tree = testgen::random_tree(rng, n, "n" + std::to_string(iter));
    AlignmentMatrix mat = testgen::random_matrix(rng, n, m, tree.sent_id);
    std::set<int> prev_sub, prev_del;
    for (int step = 0; step <= 10; ++step) {
      const double lambda = step / 10.0;
      std::set<int> cur_sub, cur_del;
      for (const auto& c : plan_substitution(tree, mat, lambda).chosen)
        cur_sub.insert(c.target_index);
      for (const auto& [i, r] : plan_deletion(tree, mat, lambda).doomed) cur_del.insert(i);
      CHECK(std::includes(cur_sub.begin(), cur_sub.end(), prev_sub.begin(), prev_sub.end()));
      CHECK(std::includes(cur_del.begin(), cur_del.end(), prev_del.begin(), prev_del.end()));
      prev_sub = std::move(cur_sub);
      prev_del = std::move(cur_del);
    }
  }
}

TEST_CASE("substituting a many-to-one root keeps a single root") {
  DependencyTree tree;
  tree.sent_id = "rootgrp";
  tree.tokens = {mk(1, "spoke", "VERB", 0, "root"), mk(2, "today", "ADV", 1, "advmod")};
  SentencePair pair{"rootgrp", {"spoke", "today"}, {"pratade", "om", "idag"}};
  // pratade and om both best-align to "spoke"; om is weaker.
  auto mat = matrix_from_columns("rootgrp", 2,
                                 {{0.05, 0.90, 0.05}, {0.10, 0.60, 0.30}, {0.05, 0.05, 0.90}});
  CodeMixConfig config;
  config.lambda = 1.0;
  DependencyTree out = translate_tree(tree, mat, pair, config);
  CHECK(validate_tree(out).empty());
  REQUIRE(out.size() == 3);
  int roots = 0;
  for (const Token& t : out.tokens) roots += t.head == 0;
  CHECK(roots == 1);
  // anchor (pratade, p=.9) carries the root and the child "idag"
  CHECK(out.at(1).form == "pratade");
  CHECK(out.at(1).head == 0);
  CHECK(out.at(2).form == "om");
  CHECK(out.at(2).head == 1);
  CHECK(out.at(3).form == "idag");
  CHECK(out.at(3).head == 1);
}

TEST_CASE("translate_treebank") {
  SUBCASE("empty bank") {
    Treebank bank;
    TranslationStats stats;
    Treebank out = translate_treebank(bank, {}, {}, CodeMixConfig{}, &stats);
    CHECK(out.trees.empty());
    CHECK(stats.trees == 0);
  }
  SUBCASE("unmatched trees are copied and counted") {
    std::mt19937_64 rng(71);
    Treebank bank;
    for (int s = 0; s < 3; ++s)
      bank.trees.push_back(testgen::random_tree(rng, 5, "u" + std::to_string(s)));
    bank.rebuild_vocabs();
    TranslationStats stats;
    Treebank out = translate_treebank(bank, {}, {}, CodeMixConfig{}, &stats);
    CHECK(same_treebank(out, bank));
    CHECK(stats.unmatched == 3);
    CHECK(stats.translated == 0);
  }
  SUBCASE("per-sentence substitution counts obey the quota formula") {
    std::mt19937_64 rng(81);
    Treebank bank;
    std::vector<AlignmentMatrix> mats;
    std::vector<SentencePair> pairs;
    std::uniform_int_distribution<int> n_pick(2, 9), m_pick(1, 9);
    for (int s = 0; s < 100; ++s) {
      const int n = n_pick(rng), m = m_pick(rng);
      DependencyTree tree = testgen::random_tree(rng, n, "q" + std::to_string(s));
      mats.push_back(testgen::random_matrix(rng, n, m, tree.sent_id));
      pairs.push_back(testgen::pair_for(tree, m));
      bank.trees.push_back(std::move(tree));
    }
    bank.rebuild_vocabs();
    CodeMixConfig config;
    config.lambda = 0.7;
    TranslationStats stats;
    Treebank out = translate_treebank(bank, mats, pairs, config, &stats);
    CHECK(stats.unmatched == 0);
    long long expected_targets = 0;
    for (std::size_t s = 0; s < mats.size(); ++s) {
      auto best = best_alignments(mats[s]);
      int eligible = 0;
      for (const auto& b : best) eligible += b.a >= 1;
      expected_targets +=
          std::min(static_cast<long long>(std::ceil(mats[s].m * 0.7 - 1e-9)),
                   static_cast<long long>(eligible));
    }
    CHECK(stats.emitted_targets == expected_targets);
    long long target_tokens = 0;
    for (const auto& tree : out.trees)
      for (const Token& t : tree.tokens) target_tokens += t.lang == Lang::Target;
    CHECK(target_tokens == expected_targets);
  }
}

TEST_CASE("mix_corpora") {
  std::mt19937_64 rng(91);
  Treebank a, b;
  for (int s = 0; s < 3; ++s) a.trees.push_back(testgen::random_tree(rng, 4, "a" + std::to_string(s)));
  for (int s = 0; s < 2; ++s) b.trees.push_back(testgen::random_tree(rng, 5, "b" + std::to_string(s)));
  a.rebuild_vocabs();
  b.rebuild_vocabs();

  Treebank mixed = mix_corpora(a, b);
  CHECK(mixed.trees.size() == 5);
  for (int s = 0; s < 3; ++s) CHECK(same_tree(mixed.trees[static_cast<std::size_t>(s)], a.trees[static_cast<std::size_t>(s)]));
  for (int s = 0; s < 2; ++s) CHECK(same_tree(mixed.trees[static_cast<std::size_t>(3 + s)], b.trees[static_cast<std::size_t>(s)]));

  Treebank with_empty = mix_corpora(a, Treebank{});
  CHECK(same_treebank(with_empty, a));
  CHECK(mixed.label_vocab.size() >= a.label_vocab.size());
}
