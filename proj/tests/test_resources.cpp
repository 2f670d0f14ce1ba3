#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "codemix/error.hpp"
#include "codemix/resources.hpp"
#include "support/gen.hpp"

using namespace codemix;

TEST_CASE("load_embeddings") {
  SUBCASE("unk vector is the componentwise mean") {
    std::istringstream in("a 1 0 0\nb 0 1 0\n");
    EmbeddingTable table = load_embeddings(in);
    CHECK(table.dim == 3);
    REQUIRE(table.unk_vector.size() == 3);
    CHECK(table.unk_vector[0] == doctest::Approx(0.5));
    CHECK(table.unk_vector[1] == doctest::Approx(0.5));
    CHECK(table.unk_vector[2] == doctest::Approx(0.0));
  }
  SUBCASE("header declares the dimension") {
    std::istringstream in("2 4\na 1 2 3 4\nb 4 3 2 1\n");
    EmbeddingTable table = load_embeddings(in);
    CHECK(table.dim == 4);
    CHECK(table.vectors.size() == 2);
  }
  SUBCASE("dimension mismatch errors with the line number") {
    std::istringstream in("5 3\na 1 2 3\nb 1 2\n");
    try {
      load_embeddings(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
  }
  SUBCASE("loaded words return their exact values") {
    std::ostringstream gen;
    for (int w = 0; w < 50; ++w) {
      gen << "w" << w;
      for (int k = 0; k < 8; ++k) gen << ' ' << (w * 8 + k) * 0.25;
      gen << '\n';
    }
    std::istringstream in(gen.str());
    EmbeddingTable table = load_embeddings(in);
    const std::vector<double>& v = table.lookup("w13");
    for (int k = 0; k < 8; ++k) CHECK(v[static_cast<std::size_t>(k)] == doctest::Approx((13 * 8 + k) * 0.25));
  }
  SUBCASE("case-sensitive first, lowercase fallback second") {
    std::istringstream in("the 1 0\nThe 2 0\ndog 3 0\n");
    EmbeddingTable table = load_embeddings(in);
    CHECK(table.lookup("The")[0] == doctest::Approx(2.0));
    CHECK(table.lookup("Dog")[0] == doctest::Approx(3.0));   // falls back to "dog"
    CHECK(table.lookup("missing") == table.unk_vector);
  }
}

TEST_CASE("load_clusters") {
  SUBCASE("basic lookup and unk") {
    std::istringstream in("dog\t17\ncat\t3\n");
    ClusterMap map = load_clusters(in);
    CHECK(map.lookup("dog") == 17);
    CHECK(map.cluster_count == 18);
    CHECK(map.lookup("unseen") == map.unk_cluster());
  }
  SUBCASE("max id 255 gives 256 clusters") {
    std::ostringstream gen;
    gen << "a\t0\nb\t255\n";
    std::istringstream in(gen.str());
    ClusterMap map = load_clusters(in);
    CHECK(map.cluster_count == 256);
  }
  SUBCASE("bad ids are parse errors") {
    std::istringstream neg("a\t-3\n");
    CHECK_THROWS_AS(load_clusters(neg), ParseError);
    std::istringstream txt("a\tx\n");
    CHECK_THROWS_AS(load_clusters(txt), ParseError);
  }
  SUBCASE("lowercase fallback") {
    std::istringstream in("hund\t9\n");
    ClusterMap map = load_clusters(in);
    CHECK(map.lookup("Hund") == 9);
  }
}

TEST_CASE("featurize") {
  std::istringstream cl("the\t1\ncat\t2\nsat\t3\ndown\t4\n");
  ClusterMap map = load_clusters(cl);

  Treebank bank;
  std::mt19937_64 rng(3);
  bank.trees.push_back(testgen::random_tree(rng, 4, "f"));
  bank.trees[0].tokens[0].form = "The";   // lowercase fallback
  bank.trees[0].tokens[1].form = "cat";
  bank.trees[0].tokens[2].form = "sat";
  bank.trees[0].tokens[3].form = "zzz";   // unk
  bank.rebuild_vocabs();

  Treebank out = featurize(bank, map);
  CHECK(out.trees[0].tokens[0].cluster == 1);
  CHECK(out.trees[0].tokens[1].cluster == 2);
  CHECK(out.trees[0].tokens[2].cluster == 3);
  CHECK(out.trees[0].tokens[3].cluster == map.unk_cluster());

  SUBCASE("idempotent") {
    Treebank again = featurize(out, map);
    for (int i = 1; i <= 4; ++i)
      CHECK(again.trees[0].at(i).cluster == out.trees[0].at(i).cluster);
  }
  SUBCASE("all-OOV sentence gets all unk ids") {
    Treebank oov;
    oov.trees.push_back(testgen::random_tree(rng, 3, "o"));
    Treebank rst = featurize(oov, map);
    for (int i = 1; i <= 3; ++i) CHECK(rst.trees[0].at(i).cluster == map.unk_cluster());
  }
  SUBCASE("known/unknown counts add up") {
    Treebank mixed;
    mixed.trees.push_back(testgen::random_tree(rng, 10, "m"));
    for (int i = 1; i <= 4; ++i) mixed.trees[0].at(i).form = "cat";
    Treebank rst = featurize(mixed, map);
    int unk = 0;
    for (int i = 1; i <= 10; ++i) unk += rst.trees[0].at(i).cluster == map.unk_cluster();
    CHECK(unk == 6);
  }
}
