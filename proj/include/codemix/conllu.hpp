#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace codemix {

enum class Lang { Source, Target };

struct Token {
  int id = 0;  // 1-based position within the sentence
  std::string form;
  std::string upos;
  std::optional<int> cluster;  // attached later by the resources layer
  int head = 0;                // id of the head token, 0 = root
  std::string deprel;
  Lang lang = Lang::Source;
  std::optional<int> origin_index;  // position in the machine translation; target tokens only
};

struct DependencyTree {
  std::string sent_id;
  std::vector<Token> tokens;

  int size() const { return static_cast<int>(tokens.size()); }
  const Token& at(int id) const { return tokens[static_cast<std::size_t>(id - 1)]; }
  Token& at(int id) { return tokens[static_cast<std::size_t>(id - 1)]; }

  // Id of the first token with head == 0, or 0 when there is none.
  int root_id() const;

  // children[h] lists the ids headed by h, ascending; index 0 is the root slot.
  std::vector<std::vector<int>> children_by_head() const;
};

struct Treebank {
  std::vector<DependencyTree> trees;
  std::set<std::string> label_vocab;
  std::set<std::string> pos_vocab;

  void rebuild_vocabs();
};

struct Violation {
  std::string invariant;  // id-order | head-range | self-head | multi-root | no-root | cycle | missing-origin | empty
  int token_id;           // offending token id, 0 when sentence-wide
};

// Empty result iff the head array encodes a single-rooted arborescence and
// every token satisfies its own invariants.
std::vector<Violation> validate_tree(const DependencyTree& tree);

// Throws DataError naming the sentence when validate_tree is non-empty.
void ensure_valid_tree(const DependencyTree& tree);

Treebank read_conllu(std::istream& in);
Treebank read_conllu_file(const std::string& path);
void write_conllu(std::ostream& out, const Treebank& bank);
void write_conllu_file(const std::string& path, const Treebank& bank);

// Field-wise equality over everything CoNLL-U carries. Cluster ids are not
// serialized, so they are excluded here.
bool same_tree(const DependencyTree& a, const DependencyTree& b);
bool same_treebank(const Treebank& a, const Treebank& b);

}  // namespace codemix
