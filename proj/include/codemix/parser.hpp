#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "codemix/autodiff.hpp"
#include "codemix/conllu.hpp"
#include "codemix/resources.hpp"

namespace codemix {

struct ParserConfig {
  int embed_dim = 50;          // word vector width when no pretrained table is given
  int cluster_embed_dim = 8;
  int pos_embed_dim = 8;
  int encoder_layers = 3;      // reducible to 1 at desk scale
  int encoder_hidden = 64;     // per direction
  int arc_mlp_dim = 64;
  int label_mlp_dim = 32;
  double dropout = 0.33;
  int epochs = 50;
  double learning_rate = 2e-3;
  double lr_decay = 1.0;  // per-epoch multiplier
  double beta1 = 0.9;
  double beta2 = 0.9;
  double adam_eps = 1e-8;
  double grad_clip = 5.0;      // global-norm clip; 0 disables
  bool delexicalized = false;  // zero word vectors, clusters/POS only
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError
};

struct EncoderState {
  int n = 0;                  // sentence length; matrices have n+1 columns, column 0 = root
  Eigen::MatrixXd hidden;     // 2H x (n+1)
  Eigen::MatrixXd arc_dep;    // arc_mlp_dim x (n+1)
  Eigen::MatrixXd arc_head;   // arc_mlp_dim x (n+1)
  Eigen::MatrixXd label_dep;  // label_mlp_dim x (n+1)
  Eigen::MatrixXd label_head; // label_mlp_dim x (n+1)
};

struct ScoreTensor {
  Eigen::MatrixXd arc;                  // (n+1) x n; arc(j, i-1) = score of head j for dependent i
  std::vector<Eigen::MatrixXd> labels;  // L matrices, each (n+1) x n

  int n() const { return static_cast<int>(arc.cols()); }
  double arc_score(int head, int dep) const { return arc(head, dep - 1); }
  double label_score(int head, int dep, int label) const {
    return labels[static_cast<std::size_t>(label)](head, dep - 1);
  }
};

// Per dependent, the argmax label at its decoded head; ties toward the
// smaller label index. heads[i-1] is the head of dependent i.
std::vector<int> assign_labels(const ScoreTensor& scores, const std::vector<int>& heads);

class ParserModel {
 public:
  ParserModel() = default;

  static ParserModel train(const Treebank& bank, const EmbeddingTable* embeddings,
                           const ClusterMap* clusters, const ParserConfig& config,
                           std::ostream* progress = nullptr);

  DependencyTree parse_tree(const DependencyTree& tree) const;
  Treebank parse(const Treebank& bank) const;

  EncoderState encode(const std::vector<Token>& tokens) const;  // eval mode
  ScoreTensor score(const EncoderState& state) const;

  // Word-level cross-entropy of a gold tree: per dependent, -log of its head
  // probability plus -log of its label probability at the gold head.
  double loss_from_tensor(const ScoreTensor& scores, const DependencyTree& gold) const;
  double loss_value(const DependencyTree& gold) const;  // eval-mode forward
  // Same value; parameter gradients are recomputed (not accumulated).
  double loss_backward(const DependencyTree& gold);

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static ParserModel load(std::istream& in);
  static ParserModel load_file(const std::string& path);

  const ParserConfig& config() const { return config_; }
  const std::vector<std::string>& label_list() const { return label_list_; }

  struct ParamView {
    std::string name;
    Eigen::MatrixXd* value;
    const Eigen::MatrixXd* grad;
  };
  std::vector<ParamView> parameters();  // stable order
  std::size_t parameter_count() const;  // total scalars

 private:
  struct Param {
    std::string name;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    Eigen::MatrixXd m;  // Adam first moment
    Eigen::MatrixXd v;  // Adam second moment
  };

  struct LstmParams {
    int wx = -1;
    int wh = -1;
    int b = -1;
  };

  struct Graph {
    ad::Tape tape;
    std::vector<ad::Var> leaves;     // one per param, same order
    ad::Var hidden;                  // 2H x (n+1)
    ad::Var arc_dep, arc_head, label_dep, label_head;
    ad::Var arc_scores;              // (n+1) x (n+1), rows = heads
    std::vector<ad::Var> label_slices;
  };

  void build_vocabs(const Treebank& bank, const EmbeddingTable* embeddings,
                    const ClusterMap* clusters);
  void allocate_params();
  void init_params();
  int add_param(const std::string& name, int rows, int cols);
  int input_dim() const { return word_dim_ + config_.cluster_embed_dim + config_.pos_embed_dim; }

  int word_index(const std::string& form) const;
  int pos_index(const std::string& upos) const;
  int cluster_index(const Token& tok) const;
  Eigen::MatrixXd word_vector(const std::string& form) const;  // frozen or delex mode

  Graph build_graph(const std::vector<Token>& tokens, bool train_mode,
                    std::mt19937_64* dropout_rng) const;
  ad::Var build_loss(Graph& g, const DependencyTree& gold) const;
  double train_step(const DependencyTree& gold, std::mt19937_64& dropout_rng, double lr);
  void adam_update(double lr);

  ParserConfig config_;
  std::vector<std::string> label_list_;
  std::unordered_map<std::string, int> label_idx_;
  std::vector<std::string> pos_list_;  // unk = size
  std::unordered_map<std::string, int> pos_idx_;
  std::vector<std::string> word_list_;  // trainable mode only; unk = size
  std::unordered_map<std::string, int> word_idx_;
  int cluster_count_ = 0;  // unk = cluster_count_
  int word_dim_ = 0;
  bool frozen_words_ = false;
  EmbeddingTable embed_table_;  // kept when frozen_words_
  bool has_cluster_map_ = false;
  ClusterMap cluster_map_;

  std::vector<Param> params_;
  std::unordered_map<std::string, int> param_idx_;
  int p_root_ = -1, p_word_ = -1, p_cluster_ = -1, p_pos_ = -1;
  std::vector<LstmParams> lstm_;  // layer * 2 + direction (0 fwd, 1 bwd)
  int p_arc_dep_w_ = -1, p_arc_dep_b_ = -1, p_arc_head_w_ = -1, p_arc_head_b_ = -1;
  int p_lab_dep_w_ = -1, p_lab_dep_b_ = -1, p_lab_head_w_ = -1, p_lab_head_b_ = -1;
  int p_arc_u_ = -1, p_arc_w_ = -1, p_arc_bias_ = -1;
  int p_lab_u_ = -1, p_lab_wdep_ = -1, p_lab_whead_ = -1, p_lab_bias_ = -1;
  long long adam_t_ = 0;
};

}  // namespace codemix
