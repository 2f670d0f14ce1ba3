#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "codemix/conllu.hpp"
#include "codemix/error.hpp"
#include "support/gen.hpp"

using namespace codemix;

namespace {

DependencyTree two_token_tree() {
  DependencyTree tree;
  tree.sent_id = "s1";
  tree.tokens.push_back({1, "He", "PRON", std::nullopt, 2, "nsubj", Lang::Source, std::nullopt});
  tree.tokens.push_back({2, "left", "VERB", std::nullopt, 0, "root", Lang::Source, std::nullopt});
  return tree;
}

}  // namespace

TEST_CASE("round-trip of a small sentence") {
  Treebank bank;
  bank.trees.push_back(two_token_tree());
  bank.rebuild_vocabs();

  std::ostringstream out;
  write_conllu(out, bank);
  std::istringstream in(out.str());
  Treebank back = read_conllu(in);
  CHECK(same_treebank(bank, back));

  // Writing again gives identical bytes.
  std::ostringstream out2;
  write_conllu(out2, back);
  CHECK(out.str() == out2.str());
}

TEST_CASE("written shape: token lines plus one blank line") {
  Treebank bank;
  bank.trees.push_back(two_token_tree());
  std::ostringstream out;
  write_conllu(out, bank);
  int token_lines = 0, blank_lines = 0, comment_lines = 0;
  std::istringstream in(out.str());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty())
      ++blank_lines;
    else if (line[0] == '#')
      ++comment_lines;
    else
      ++token_lines;
  }
  CHECK(token_lines == 2);
  CHECK(blank_lines == 1);
}

TEST_CASE("empty treebank writes an empty stream") {
  Treebank bank;
  std::ostringstream out;
  write_conllu(out, bank);
  CHECK(out.str().empty());
  std::istringstream in("");
  CHECK(read_conllu(in).trees.empty());
}

TEST_CASE("target token MISC annotation") {
  Treebank bank;
  DependencyTree tree = two_token_tree();
  tree.tokens[0].form = "den";
  tree.tokens[0].lang = Lang::Target;
  tree.tokens[0].origin_index = 5;
  bank.trees.push_back(tree);
  std::ostringstream out;
  write_conllu(out, bank);
  CHECK(out.str().find("Lang=tgt|TgtIdx=5") != std::string::npos);

  std::istringstream in(out.str());
  Treebank back = read_conllu(in);
  CHECK(back.trees[0].tokens[0].lang == Lang::Target);
  CHECK(back.trees[0].tokens[0].origin_index == 5);
}

TEST_CASE("multiword ranges and empty nodes are skipped") {
  const char* text =
      "# sent_id = x\n"
      "1-2\tvamonos\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "1\tvamos\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "2\tnos\t_\tPRON\t_\t_\t1\tobj\t_\t_\n"
      "2.1\tnull\t_\t_\t_\t_\t_\t_\t_\t_\n"
      "\n";
  std::istringstream in(text);
  Treebank bank = read_conllu(in);
  REQUIRE(bank.trees.size() == 1);
  CHECK(bank.trees[0].size() == 2);
  CHECK(bank.trees[0].sent_id == "x");
}

TEST_CASE("sent_id defaults to the sequence number") {
  const char* text =
      "1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n"
      "\n"
      "1\tb\t_\tX\t_\t_\t0\troot\t_\t_\n"
      "\n";
  std::istringstream in(text);
  Treebank bank = read_conllu(in);
  REQUIRE(bank.trees.size() == 2);
  CHECK(bank.trees[0].sent_id == "1");
  CHECK(bank.trees[1].sent_id == "2");
}

TEST_CASE("parse errors carry line numbers") {
  SUBCASE("wrong column count") {
    std::istringstream in("1\tonly\tthree\n");
    CHECK_THROWS_AS(read_conllu(in), ParseError);
  }
  SUBCASE("non-integer head") {
    std::istringstream in("1\ta\t_\tX\t_\t_\tzzz\troot\t_\t_\n");
    try {
      read_conllu(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 1);
    }
  }
}

TEST_CASE("structural errors name the sentence") {
  SUBCASE("self-loop head") {
    const char* text =
        "# sent_id = bad\n"
        "1\ta\t_\tX\t_\t_\t0\troot\t_\t_\n"
        "2\tb\t_\tX\t_\t_\t3\tdep\t_\t_\n"
        "3\tc\t_\tX\t_\t_\t3\tdep\t_\t_\n"
        "\n";
    std::istringstream in(text);
    try {
      read_conllu(in);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("bad") != std::string::npos);
      CHECK(std::string(e.what()).find("self-head") != std::string::npos);
    }
  }
  SUBCASE("cycle 1->2->1 with a root elsewhere") {
    const char* text =
        "# sent_id = cyc\n"
        "1\ta\t_\tX\t_\t_\t2\tdep\t_\t_\n"
        "2\tb\t_\tX\t_\t_\t1\tdep\t_\t_\n"
        "3\tc\t_\tX\t_\t_\t0\troot\t_\t_\n"
        "4\td\t_\tX\t_\t_\t3\tdep\t_\t_\n"
        "\n";
    std::istringstream in(text);
    try {
      read_conllu(in);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("cyc") != std::string::npos);
      CHECK(std::string(e.what()).find("cycle") != std::string::npos);
    }
  }
}

TEST_CASE("validate_tree names invariant and token") {
  DependencyTree tree = two_token_tree();
  SUBCASE("valid tree gives no violations") { CHECK(validate_tree(tree).empty()); }
  SUBCASE("two roots") {
    tree.tokens[0].head = 0;
    auto v = validate_tree(tree);
    REQUIRE(v.size() == 1);
    CHECK(v[0].invariant == "multi-root");
  }
  SUBCASE("cycle at the entry token") {
    DependencyTree t;
    t.sent_id = "c";
    t.tokens.push_back({1, "a", "X", std::nullopt, 2, "dep", Lang::Source, std::nullopt});
    t.tokens.push_back({2, "b", "X", std::nullopt, 3, "dep", Lang::Source, std::nullopt});
    t.tokens.push_back({3, "c", "X", std::nullopt, 1, "dep", Lang::Source, std::nullopt});
    t.tokens.push_back({4, "d", "X", std::nullopt, 0, "root", Lang::Source, std::nullopt});
    auto v = validate_tree(t);
    REQUIRE(v.size() == 1);
    CHECK(v[0].invariant == "cycle");
    CHECK(v[0].token_id == 1);
  }
}

TEST_CASE("validate_tree agrees with brute-force reachability for n <= 10") {
  std::mt19937_64 rng(20240817);
  std::uniform_int_distribution<int> size_pick(1, 10);
  int checked = 0;
  for (int iter = 0; iter < 4000; ++iter) {
    const int n = size_pick(rng);
    DependencyTree tree;
    tree.sent_id = "r" + std::to_string(iter);
    std::uniform_int_distribution<int> head_pick(0, n);
    std::vector<int> heads(static_cast<std::size_t>(n));
    for (int i = 1; i <= n; ++i) {
      int h;
      do {
        h = head_pick(rng);
      } while (h == i);  // head != id is a Token-level given
      heads[static_cast<std::size_t>(i - 1)] = h;
      tree.tokens.push_back({i, "w", "X", std::nullopt, h, "dep", Lang::Source, std::nullopt});
    }
    const bool oracle = testgen::heads_form_arborescence(heads);
    const bool checker = validate_tree(tree).empty();
    CHECK(oracle == checker);
    checked += oracle;
  }
  CHECK(checked > 0);  // the generator does produce valid trees
}

TEST_CASE("round-trip property over random treebanks") {
  std::mt19937_64 rng(7);
  Treebank bank;
  std::uniform_int_distribution<int> size_pick(1, 12);
  for (int s = 0; s < 60; ++s)
    bank.trees.push_back(testgen::random_tree(rng, size_pick(rng), "t" + std::to_string(s)));
  bank.rebuild_vocabs();

  std::ostringstream out;
  write_conllu(out, bank);
  std::istringstream in(out.str());
  Treebank back = read_conllu(in);
  CHECK(same_treebank(bank, back));
  CHECK(back.label_vocab == bank.label_vocab);
  CHECK(back.pos_vocab == bank.pos_vocab);
}
