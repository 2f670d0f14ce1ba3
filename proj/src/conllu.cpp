// CoNLL-U reading/writing and tree validation.

#include "codemix/conllu.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "codemix/error.hpp"

namespace codemix {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return c >= '0' && c <= '9'; });
}

// Multiword-token ranges look like "3-4", empty nodes like "3.1"; both are skipped.
bool is_skippable_id(const std::string& s) {
  for (char sep : {'-', '.'}) {
    std::size_t pos = s.find(sep);
    if (pos != std::string::npos && pos > 0 && pos + 1 < s.size() &&
        all_digits(s.substr(0, pos)) && all_digits(s.substr(pos + 1))) {
      return true;
    }
  }
  return false;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

void parse_misc(const std::string& misc, Token& tok, std::size_t lineno) {
  if (misc == "_" || misc.empty()) return;
  bool have_lang = false;
  std::optional<int> tgt_idx;
  for (const std::string& part : split(misc, '|')) {
    if (part.rfind("Lang=", 0) == 0) {
      std::string v = part.substr(5);
      if (v == "src") {
        tok.lang = Lang::Source;
      } else if (v == "tgt") {
        tok.lang = Lang::Target;
      } else {
        throw ParseError("unknown Lang value '" + v + "'", lineno);
      }
      have_lang = true;
    } else if (part.rfind("TgtIdx=", 0) == 0) {
      std::string v = part.substr(7);
      if (!all_digits(v)) throw ParseError("non-integer TgtIdx '" + v + "'", lineno);
      tgt_idx = std::stoi(v);
    }
    // other MISC annotations are tolerated and dropped
  }
  if (tok.lang == Lang::Target) {
    if (!tgt_idx) throw ParseError("Lang=tgt token without TgtIdx", lineno);
    tok.origin_index = tgt_idx;
  } else if (tgt_idx && have_lang) {
    throw ParseError("TgtIdx on a source-language token", lineno);
  } else if (tgt_idx) {
    throw ParseError("TgtIdx without Lang=tgt", lineno);
  }
}

}  // namespace

int DependencyTree::root_id() const {
  for (const Token& t : tokens)
    if (t.head == 0) return t.id;
  return 0;
}

std::vector<std::vector<int>> DependencyTree::children_by_head() const {
  std::vector<std::vector<int>> out(tokens.size() + 1);
  for (const Token& t : tokens) {
    if (t.head >= 0 && t.head <= size()) out[static_cast<std::size_t>(t.head)].push_back(t.id);
  }
  return out;
}

void Treebank::rebuild_vocabs() {
  label_vocab.clear();
  pos_vocab.clear();
  for (const DependencyTree& tree : trees) {
    for (const Token& t : tree.tokens) {
      label_vocab.insert(t.deprel);
      pos_vocab.insert(t.upos);
    }
  }
}

std::vector<Violation> validate_tree(const DependencyTree& tree) {
  std::vector<Violation> out;
  const int n = tree.size();
  if (n == 0) {
    out.push_back({"empty", 0});
    return out;
  }
  for (int i = 0; i < n; ++i) {
    if (tree.tokens[static_cast<std::size_t>(i)].id != i + 1) {
      out.push_back({"id-order", tree.tokens[static_cast<std::size_t>(i)].id});
      return out;  // heads are uninterpretable past this point
    }
  }
  int root = 0;
  for (const Token& t : tree.tokens) {
    if (t.head < 0 || t.head > n) {
      out.push_back({"head-range", t.id});
    } else if (t.head == t.id) {
      out.push_back({"self-head", t.id});
    } else if (t.head == 0) {
      if (root == 0)
        root = t.id;
      else
        out.push_back({"multi-root", t.id});
    }
    if (t.lang == Lang::Target && !t.origin_index) out.push_back({"missing-origin", t.id});
  }
  if (root == 0) out.push_back({"no-root", 0});
  if (!out.empty()) return out;

  // Head chains are well defined now; look for cycles.
  std::vector<int> color(static_cast<std::size_t>(n) + 1, 0);  // 0 new, 1 on path, 2 done
  color[0] = 2;
  for (int s = 1; s <= n; ++s) {
    if (color[static_cast<std::size_t>(s)] != 0) continue;
    int u = s;
    std::vector<int> path;
    while (color[static_cast<std::size_t>(u)] == 0) {
      color[static_cast<std::size_t>(u)] = 1;
      path.push_back(u);
      u = tree.at(u).head;
    }
    if (color[static_cast<std::size_t>(u)] == 1) out.push_back({"cycle", u});
    for (int v : path) color[static_cast<std::size_t>(v)] = 2;
  }
  return out;
}

void ensure_valid_tree(const DependencyTree& tree) {
  std::vector<Violation> violations = validate_tree(tree);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << "sentence " << tree.sent_id << ":";
  for (const Violation& v : violations) {
    msg << " [" << v.invariant;
    if (v.token_id > 0) msg << " at token " << v.token_id;
    msg << "]";
  }
  throw DataError(msg.str());
}

Treebank read_conllu(std::istream& in) {
  Treebank bank;
  std::string line;
  std::size_t lineno = 0;
  std::vector<Token> tokens;
  std::string sent_id;
  bool have_sent_id = false;

  auto flush = [&]() {
    if (tokens.empty()) {  // comment-only or extra blank block
      have_sent_id = false;
      sent_id.clear();
      return;
    }
    DependencyTree tree;
    tree.sent_id = have_sent_id ? sent_id : std::to_string(bank.trees.size() + 1);
    tree.tokens = std::move(tokens);
    tokens.clear();
    have_sent_id = false;
    sent_id.clear();
    ensure_valid_tree(tree);
    bank.trees.push_back(std::move(tree));
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      flush();
      continue;
    }
    if (line[0] == '#') {
      std::string body = trim(line.substr(1));
      if (body.rfind("sent_id", 0) == 0) {
        std::string rest = trim(body.substr(7));
        if (!rest.empty() && rest[0] == '=') {
          sent_id = trim(rest.substr(1));
          have_sent_id = true;
        }
      }
      continue;
    }
    std::vector<std::string> cols = split(line, '\t');
    if (cols.size() != 10) {
      throw ParseError("expected 10 tab-separated columns, got " + std::to_string(cols.size()),
                       lineno);
    }
    if (is_skippable_id(cols[0])) continue;
    if (!all_digits(cols[0])) throw ParseError("bad token id '" + cols[0] + "'", lineno);
    if (!all_digits(cols[6])) throw ParseError("non-integer head '" + cols[6] + "'", lineno);
    Token tok;
    tok.id = std::stoi(cols[0]);
    tok.form = cols[1];
    tok.upos = cols[3];
    tok.head = std::stoi(cols[6]);
    tok.deprel = cols[7];
    parse_misc(cols[9], tok, lineno);
    tokens.push_back(std::move(tok));
  }
  flush();
  bank.rebuild_vocabs();
  return bank;
}

Treebank read_conllu_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return read_conllu(in);
}

void write_conllu(std::ostream& out, const Treebank& bank) {
  for (const DependencyTree& tree : bank.trees) {
    out << "# sent_id = " << tree.sent_id << "\n";
    for (const Token& t : tree.tokens) {
      std::string misc = "_";
      if (t.lang == Lang::Target) {
        if (!t.origin_index)
          throw ContractViolation("target token " + std::to_string(t.id) + " in sentence " +
                                  tree.sent_id + " has no origin_index");
        misc = "Lang=tgt|TgtIdx=" + std::to_string(*t.origin_index);
      }
      out << t.id << '\t' << t.form << "\t_\t" << t.upos << "\t_\t_\t" << t.head << '\t'
          << t.deprel << "\t_\t" << misc << '\n';
    }
    out << '\n';
  }
}

void write_conllu_file(const std::string& path, const Treebank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  write_conllu(out, bank);
  if (!out) throw IoError("write failed: " + path);
}

bool same_tree(const DependencyTree& a, const DependencyTree& b) {
  if (a.sent_id != b.sent_id || a.tokens.size() != b.tokens.size()) return false;
  for (std::size_t i = 0; i < a.tokens.size(); ++i) {
    const Token& x = a.tokens[i];
    const Token& y = b.tokens[i];
    if (x.id != y.id || x.form != y.form || x.upos != y.upos || x.head != y.head ||
        x.deprel != y.deprel || x.lang != y.lang || x.origin_index != y.origin_index) {
      return false;
    }
  }
  return true;
}

bool same_treebank(const Treebank& a, const Treebank& b) {
  if (a.trees.size() != b.trees.size()) return false;
  for (std::size_t i = 0; i < a.trees.size(); ++i)
    if (!same_tree(a.trees[i], b.trees[i])) return false;
  return true;
}

}  // namespace codemix
