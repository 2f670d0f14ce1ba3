// A synthetic language pair for transfer experiments: a template-grammar
// source language, a deterministic target rendering (lexicon swap, dropped
// determiners, adjective postposition), and alignment matrices with
// controllable noise.
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "codemix/alignment.hpp"
#include "codemix/conllu.hpp"
#include "codemix/resources.hpp"

namespace synth {

struct Options {
  int train_sentences = 300;
  int eval_sentences = 100;
  double noise_rate = 0.20;  // fraction of alignment columns corrupted
  int embed_dim = 24;
  std::uint64_t seed = 7;
};

struct Data {
  codemix::Treebank source_train;                  // gold source trees
  std::vector<codemix::SentencePair> pairs;        // source + target rendering
  std::vector<codemix::AlignmentMatrix> matrices;  // noisy alignments
  codemix::Treebank target_eval;                   // clean gold target trees
  codemix::EmbeddingTable embeddings;              // cross-lingual
  codemix::ClusterMap clusters;
};

Data make(const Options& opt);

// A source-language-only bank (same grammar), for monolingual checks.
codemix::Treebank source_bank(int sentences, std::uint64_t seed);

}  // namespace synth
