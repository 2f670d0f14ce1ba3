// BiAffine graph-based dependency parser: embedding inputs, BiLSTM encoder,
// dep/head projections, biaffine arc and label scoring, MST decoding, and
// word-level cross-entropy training with Adam.

#include "codemix/parser.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "codemix/error.hpp"
#include "codemix/mst.hpp"

namespace codemix {

namespace {

using Mat = Eigen::MatrixXd;

constexpr char kMagic[8] = {'C', 'M', 'X', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kVersion = 1;

// ---- little-endian binary helpers ----

void put_bytes(std::ostream& out, const void* data, std::size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void get_bytes(std::istream& in, void* data, std::size_t size) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (static_cast<std::size_t>(in.gcount()) != size)
    throw IoError("unexpected end of model stream");
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  put_bytes(out, b, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  get_bytes(in, b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  put_bytes(out, b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  get_bytes(in, b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

void put_i32(std::ostream& out, std::int32_t v) { put_u32(out, static_cast<std::uint32_t>(v)); }
std::int32_t get_i32(std::istream& in) { return static_cast<std::int32_t>(get_u32(in)); }

void put_u8(std::ostream& out, std::uint8_t v) { put_bytes(out, &v, 1); }
std::uint8_t get_u8(std::istream& in) {
  std::uint8_t v = 0;
  get_bytes(in, &v, 1);
  return v;
}

void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }
double get_f64(std::istream& in) { return std::bit_cast<double>(get_u64(in)); }

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  put_bytes(out, s.data(), s.size());
}

std::string get_str(std::istream& in) {
  std::uint32_t len = get_u32(in);
  std::string s(len, '\0');
  if (len) get_bytes(in, s.data(), len);
  return s;
}

void put_mat(std::ostream& out, const Mat& m) {
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) put_f64(out, m(r, c));
}

Mat get_mat(std::istream& in) {
  std::uint32_t rows = get_u32(in);
  std::uint32_t cols = get_u32(in);
  Mat m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = get_f64(in);
  return m;
}

void put_strlist(std::ostream& out, const std::vector<std::string>& list) {
  put_u64(out, list.size());
  for (const std::string& s : list) put_str(out, s);
}

std::vector<std::string> get_strlist(std::istream& in) {
  std::uint64_t count = get_u64(in);
  std::vector<std::string> list;
  list.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) list.push_back(get_str(in));
  return list;
}

// ---- misc ----

std::string ascii_lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

Mat dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  Mat mask(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) mask(r, c) = keep(rng) ? scale : 0.0;
  return mask;
}

}  // namespace

void ParserConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw ConfigError(std::string(name) + " must be at least 1");
  };
  positive(embed_dim, "embed_dim");
  positive(cluster_embed_dim, "cluster_embed_dim");
  positive(pos_embed_dim, "pos_embed_dim");
  positive(encoder_layers, "encoder_layers");
  positive(encoder_hidden, "encoder_hidden");
  positive(arc_mlp_dim, "arc_mlp_dim");
  positive(label_mlp_dim, "label_mlp_dim");
  positive(epochs, "epochs");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("moment decays must lie in [0, 1)");
  if (grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
}

std::vector<int> assign_labels(const ScoreTensor& scores, const std::vector<int>& heads) {
  const int n = scores.n();
  if (heads.size() != static_cast<std::size_t>(n))
    throw ContractViolation("assign_labels: one head per dependent required");
  std::vector<int> out(static_cast<std::size_t>(n), 0);
  for (int i = 1; i <= n; ++i) {
    const int h = heads[static_cast<std::size_t>(i - 1)];
    int best = 0;
    double best_score = scores.label_score(h, i, 0);
    for (int l = 1; l < static_cast<int>(scores.labels.size()); ++l) {
      double s = scores.label_score(h, i, l);
      if (s > best_score) {  // ties keep the smaller label index
        best_score = s;
        best = l;
      }
    }
    out[static_cast<std::size_t>(i - 1)] = best;
  }
  return out;
}

// ---- vocab and parameters ----

void ParserModel::build_vocabs(const Treebank& bank, const EmbeddingTable* embeddings,
                               const ClusterMap* clusters) {
  std::set<std::string> labels, poses, words;
  for (const DependencyTree& tree : bank.trees) {
    for (const Token& tok : tree.tokens) {
      labels.insert(tok.deprel);
      poses.insert(tok.upos);
      words.insert(tok.form);
    }
  }
  label_list_.assign(labels.begin(), labels.end());
  for (std::size_t i = 0; i < label_list_.size(); ++i)
    label_idx_[label_list_[i]] = static_cast<int>(i);
  pos_list_.assign(poses.begin(), poses.end());
  for (std::size_t i = 0; i < pos_list_.size(); ++i) pos_idx_[pos_list_[i]] = static_cast<int>(i);

  if (config_.delexicalized) {
    frozen_words_ = false;
    word_dim_ = config_.embed_dim;  // zero vectors of this width
  } else if (embeddings && embeddings->dim > 0) {
    frozen_words_ = true;
    embed_table_ = *embeddings;
    word_dim_ = embeddings->dim;
  } else {
    frozen_words_ = false;
    word_list_.assign(words.begin(), words.end());
    for (std::size_t i = 0; i < word_list_.size(); ++i)
      word_idx_[word_list_[i]] = static_cast<int>(i);
    word_dim_ = config_.embed_dim;
  }

  if (clusters) {
    has_cluster_map_ = true;
    cluster_map_ = *clusters;
    cluster_count_ = clusters->cluster_count;
  } else {
    has_cluster_map_ = false;
    cluster_count_ = 0;  // every token maps to the unk cluster
  }
}

int ParserModel::add_param(const std::string& name, int rows, int cols) {
  Param p;
  p.name = name;
  p.value = Mat::Zero(rows, cols);
  p.grad = Mat::Zero(rows, cols);
  p.m = Mat::Zero(rows, cols);
  p.v = Mat::Zero(rows, cols);
  params_.push_back(std::move(p));
  int idx = static_cast<int>(params_.size()) - 1;
  param_idx_[name] = idx;
  return idx;
}

void ParserModel::allocate_params() {
  params_.clear();
  param_idx_.clear();
  lstm_.clear();

  const int d0 = input_dim();
  const int h = config_.encoder_hidden;
  const int da = config_.arc_mlp_dim;
  const int dl = config_.label_mlp_dim;
  const int num_labels = static_cast<int>(label_list_.size());

  p_root_ = add_param("root_embed", d0, 1);
  p_word_ = -1;
  if (!frozen_words_ && !config_.delexicalized)
    p_word_ = add_param("word_embed", word_dim_, static_cast<int>(word_list_.size()) + 1);
  p_cluster_ = add_param("cluster_embed", config_.cluster_embed_dim, cluster_count_ + 1);
  p_pos_ = add_param("pos_embed", config_.pos_embed_dim,
                     static_cast<int>(pos_list_.size()) + 1);

  for (int layer = 0; layer < config_.encoder_layers; ++layer) {
    const int in_dim = layer == 0 ? d0 : 2 * h;
    for (int dir = 0; dir < 2; ++dir) {
      std::string prefix =
          "lstm" + std::to_string(layer) + (dir == 0 ? "_fwd" : "_bwd");
      LstmParams lp;
      lp.wx = add_param(prefix + "_wx", 4 * h, in_dim);
      lp.wh = add_param(prefix + "_wh", 4 * h, h);
      lp.b = add_param(prefix + "_b", 4 * h, 1);
      lstm_.push_back(lp);
    }
  }

  p_arc_dep_w_ = add_param("arc_dep_w", da, 2 * h);
  p_arc_dep_b_ = add_param("arc_dep_b", da, 1);
  p_arc_head_w_ = add_param("arc_head_w", da, 2 * h);
  p_arc_head_b_ = add_param("arc_head_b", da, 1);
  p_lab_dep_w_ = add_param("lab_dep_w", dl, 2 * h);
  p_lab_dep_b_ = add_param("lab_dep_b", dl, 1);
  p_lab_head_w_ = add_param("lab_head_w", dl, 2 * h);
  p_lab_head_b_ = add_param("lab_head_b", dl, 1);

  p_arc_u_ = add_param("arc_u", da, da);
  p_arc_w_ = add_param("arc_w", da, 1);
  p_arc_bias_ = add_param("arc_bias", 1, 1);
  p_lab_u_ = add_param("lab_u", num_labels * dl, dl);
  p_lab_wdep_ = add_param("lab_wdep", dl, num_labels);
  p_lab_whead_ = add_param("lab_whead", dl, num_labels);
  p_lab_bias_ = add_param("lab_bias", num_labels, 1);
}

void ParserModel::init_params() {
  std::mt19937_64 rng(config_.seed);
  auto glorot = [&rng](Mat& m) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = dist(rng);
  };
  for (Param& p : params_) {
    if (p.name.size() >= 2 && (p.name.ends_with("_b") || p.name.ends_with("bias"))) {
      p.value.setZero();
    } else {
      glorot(p.value);
    }
  }
  // Forget-gate bias starts at 1 so early memory is retained.
  const int h = config_.encoder_hidden;
  for (const LstmParams& lp : lstm_)
    params_[static_cast<std::size_t>(lp.b)].value.middleRows(h, h).setOnes();
}

// ---- token resolution ----

int ParserModel::word_index(const std::string& form) const {
  auto it = word_idx_.find(form);
  if (it != word_idx_.end()) return it->second;
  it = word_idx_.find(ascii_lower(form));
  if (it != word_idx_.end()) return it->second;
  return static_cast<int>(word_list_.size());  // unk
}

int ParserModel::pos_index(const std::string& upos) const {
  auto it = pos_idx_.find(upos);
  return it == pos_idx_.end() ? static_cast<int>(pos_list_.size()) : it->second;
}

int ParserModel::cluster_index(const Token& tok) const {
  if (tok.cluster && *tok.cluster >= 0 && *tok.cluster <= cluster_count_) return *tok.cluster;
  if (has_cluster_map_) return cluster_map_.lookup(tok.form);
  return cluster_count_;  // unk
}

Mat ParserModel::word_vector(const std::string& form) const {
  Mat v = Mat::Zero(word_dim_, 1);
  if (config_.delexicalized) return v;
  const std::vector<double>& vec = embed_table_.lookup(form);
  for (int k = 0; k < word_dim_; ++k) v(k, 0) = vec[static_cast<std::size_t>(k)];
  return v;
}

// ---- forward graph ----

ParserModel::Graph ParserModel::build_graph(const std::vector<Token>& tokens, bool train_mode,
                                            std::mt19937_64* dropout_rng) const {
  if (tokens.empty()) throw ContractViolation("encode: empty sentence");
  const int n = static_cast<int>(tokens.size());
  const int h = config_.encoder_hidden;
  const bool drop = train_mode && config_.dropout > 0.0;
  if (drop && !dropout_rng) throw ContractViolation("dropout requires an rng");

  Graph g;
  g.leaves.reserve(params_.size());
  for (const Param& p : params_) g.leaves.push_back(g.tape.input(p.value));
  ad::Tape& tape = g.tape;

  // Input features: x_i = word vector (+) cluster embedding (+) POS embedding.
  std::vector<ad::Var> xs;
  xs.reserve(static_cast<std::size_t>(n) + 1);
  xs.push_back(g.leaves[static_cast<std::size_t>(p_root_)]);
  for (const Token& tok : tokens) {
    ad::Var wv;
    if (frozen_words_ || config_.delexicalized) {
      wv = tape.input(word_vector(tok.form));
    } else {
      wv = tape.cols(g.leaves[static_cast<std::size_t>(p_word_)], word_index(tok.form), 1);
    }
    ad::Var cv = tape.cols(g.leaves[static_cast<std::size_t>(p_cluster_)], cluster_index(tok), 1);
    ad::Var tv = tape.cols(g.leaves[static_cast<std::size_t>(p_pos_)], pos_index(tok.upos), 1);
    xs.push_back(tape.vstack({wv, cv, tv}));
  }
  ad::Var cur = tape.hstack(xs);
  if (drop)
    cur = tape.cmul_const(cur, dropout_mask(input_dim(), n + 1, config_.dropout, *dropout_rng));

  // Stacked bidirectional LSTM.
  for (int layer = 0; layer < config_.encoder_layers; ++layer) {
    std::vector<ad::Var> dir_out;
    for (int dir = 0; dir < 2; ++dir) {
      const LstmParams& lp = lstm_[static_cast<std::size_t>(layer * 2 + dir)];
      ad::Var wx = g.leaves[static_cast<std::size_t>(lp.wx)];
      ad::Var wh = g.leaves[static_cast<std::size_t>(lp.wh)];
      ad::Var b = g.leaves[static_cast<std::size_t>(lp.b)];
      ad::Var wxb = tape.add_colvec(tape.matmul(wx, cur), b);
      ad::Var hv = tape.input(Mat::Zero(h, 1));
      ad::Var cv = tape.input(Mat::Zero(h, 1));
      std::vector<ad::Var> hs(static_cast<std::size_t>(n) + 1);
      for (int step = 0; step <= n; ++step) {
        const int t = dir == 0 ? step : n - step;
        ad::Var a = tape.add(tape.cols(wxb, t, 1), tape.matmul(wh, hv));
        ad::Var gi = tape.sigmoid_(tape.rows(a, 0, h));
        ad::Var gf = tape.sigmoid_(tape.rows(a, h, h));
        ad::Var go = tape.sigmoid_(tape.rows(a, 2 * h, h));
        ad::Var gg = tape.tanh_(tape.rows(a, 3 * h, h));
        cv = tape.add(tape.cmul(gf, cv), tape.cmul(gi, gg));
        hv = tape.cmul(go, tape.tanh_(cv));
        hs[static_cast<std::size_t>(t)] = hv;
      }
      dir_out.push_back(tape.hstack(hs));
    }
    cur = tape.vstack({dir_out[0], dir_out[1]});
    if (drop)
      cur = tape.cmul_const(cur, dropout_mask(2 * h, n + 1, config_.dropout, *dropout_rng));
  }
  g.hidden = cur;

  auto mlp = [&](int w_idx, int b_idx) {
    return tape.tanh_(tape.add_colvec(
        tape.matmul(g.leaves[static_cast<std::size_t>(w_idx)], cur),
        g.leaves[static_cast<std::size_t>(b_idx)]));
  };
  g.arc_dep = mlp(p_arc_dep_w_, p_arc_dep_b_);
  g.arc_head = mlp(p_arc_head_w_, p_arc_head_b_);
  g.label_dep = mlp(p_lab_dep_w_, p_lab_dep_b_);
  g.label_head = mlp(p_lab_head_w_, p_lab_head_b_);

  // Arc biaffine: s(j, i) = arc_dep_i' U arc_head_j + w' arc_head_j + b.
  ad::Var t1 = tape.matmul(g.leaves[static_cast<std::size_t>(p_arc_u_)], g.arc_head);
  ad::Var s0 = tape.matmul(t1, g.arc_dep, /*trans_a=*/true);
  ad::Var hb = tape.matmul(g.arc_head, g.leaves[static_cast<std::size_t>(p_arc_w_)],
                           /*trans_a=*/true);
  g.arc_scores = tape.add_scalar(tape.add_colvec(s0, hb),
                                 g.leaves[static_cast<std::size_t>(p_arc_bias_)]);

  // Label biaffines, one slice per label.
  const int dl = config_.label_mlp_dim;
  const int num_labels = static_cast<int>(label_list_.size());
  g.label_slices.reserve(static_cast<std::size_t>(num_labels));
  ad::Var lab_u = g.leaves[static_cast<std::size_t>(p_lab_u_)];
  ad::Var lab_wdep = g.leaves[static_cast<std::size_t>(p_lab_wdep_)];
  ad::Var lab_whead = g.leaves[static_cast<std::size_t>(p_lab_whead_)];
  ad::Var lab_bias = g.leaves[static_cast<std::size_t>(p_lab_bias_)];
  for (int l = 0; l < num_labels; ++l) {
    ad::Var ul = tape.rows(lab_u, l * dl, dl);
    ad::Var a = tape.matmul(ul, g.label_head);
    ad::Var m = tape.matmul(a, g.label_dep, /*trans_a=*/true);
    ad::Var rdep = tape.matmul(tape.cols(lab_wdep, l, 1), g.label_dep, /*trans_a=*/true);
    m = tape.add_rowvec(m, rdep);
    ad::Var chead = tape.matmul(g.label_head, tape.cols(lab_whead, l, 1), /*trans_a=*/true);
    m = tape.add_colvec(m, chead);
    m = tape.add_scalar(m, tape.rows(lab_bias, l, 1));
    g.label_slices.push_back(m);
  }
  return g;
}

ad::Var ParserModel::build_loss(Graph& g, const DependencyTree& gold) const {
  const int n = gold.size();
  std::vector<int> head_targets(static_cast<std::size_t>(n) + 1, -1);
  std::vector<int> label_targets(static_cast<std::size_t>(n) + 1, -1);
  for (int i = 1; i <= n; ++i) {
    const Token& tok = gold.at(i);
    head_targets[static_cast<std::size_t>(i)] = tok.head;
    auto it = label_idx_.find(tok.deprel);
    if (it == label_idx_.end())
      throw DataError("sentence " + gold.sent_id + ": label '" + tok.deprel +
                      "' not in the model vocabulary");
    label_targets[static_cast<std::size_t>(i)] = it->second;
  }
  ad::Var arc_loss = g.tape.softmax_xent_cols(g.arc_scores, head_targets, /*ban_diagonal=*/true);
  ad::Var gathered = g.tape.gather_from_slices(g.label_slices, head_targets);
  ad::Var label_loss = g.tape.softmax_xent_cols(gathered, label_targets, /*ban_diagonal=*/false);
  return g.tape.add(arc_loss, label_loss);
}

// ---- public forward APIs ----

EncoderState ParserModel::encode(const std::vector<Token>& tokens) const {
  Graph g = build_graph(tokens, false, nullptr);
  EncoderState state;
  state.n = static_cast<int>(tokens.size());
  state.hidden = g.tape.val(g.hidden);
  state.arc_dep = g.tape.val(g.arc_dep);
  state.arc_head = g.tape.val(g.arc_head);
  state.label_dep = g.tape.val(g.label_dep);
  state.label_head = g.tape.val(g.label_head);
  return state;
}

ScoreTensor ParserModel::score(const EncoderState& state) const {
  const int n = state.n;
  const Mat& ua = params_[static_cast<std::size_t>(p_arc_u_)].value;
  const Mat& wa = params_[static_cast<std::size_t>(p_arc_w_)].value;
  const double ba = params_[static_cast<std::size_t>(p_arc_bias_)].value(0, 0);

  Mat s = (ua * state.arc_head).transpose() * state.arc_dep;  // (n+1) x (n+1)
  Mat head_bias = state.arc_head.transpose() * wa;            // (n+1) x 1
  s.colwise() += head_bias.col(0);
  s.array() += ba;

  ScoreTensor out;
  out.arc = s.rightCols(n);

  const int dl = config_.label_mlp_dim;
  const int num_labels = static_cast<int>(label_list_.size());
  const Mat& lab_u = params_[static_cast<std::size_t>(p_lab_u_)].value;
  const Mat& lab_wdep = params_[static_cast<std::size_t>(p_lab_wdep_)].value;
  const Mat& lab_whead = params_[static_cast<std::size_t>(p_lab_whead_)].value;
  const Mat& lab_bias = params_[static_cast<std::size_t>(p_lab_bias_)].value;
  out.labels.reserve(static_cast<std::size_t>(num_labels));
  for (int l = 0; l < num_labels; ++l) {
    Mat m = (lab_u.middleRows(l * dl, dl) * state.label_head).transpose() * state.label_dep;
    m.rowwise() += (lab_wdep.col(l).transpose() * state.label_dep).row(0);
    m.colwise() += (state.label_head.transpose() * lab_whead.col(l)).col(0);
    m.array() += lab_bias(l, 0);
    out.labels.push_back(m.rightCols(n));
  }
  return out;
}

double ParserModel::loss_from_tensor(const ScoreTensor& scores, const DependencyTree& gold) const {
  const int n = gold.size();
  if (scores.n() != n) throw ContractViolation("loss_from_tensor: size mismatch");
  double total = 0;
  for (int i = 1; i <= n; ++i) {
    const Token& tok = gold.at(i);
    // Head term: softmax over candidate heads j != i.
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= n; ++j)
      if (j != i) mx = std::max(mx, scores.arc_score(j, i));
    double z = 0;
    for (int j = 0; j <= n; ++j)
      if (j != i) z += std::exp(scores.arc_score(j, i) - mx);
    total += mx + std::log(z) - scores.arc_score(tok.head, i);
    // Label term at the gold head.
    auto it = label_idx_.find(tok.deprel);
    if (it == label_idx_.end())
      throw DataError("sentence " + gold.sent_id + ": label '" + tok.deprel +
                      "' not in the model vocabulary");
    const int num_labels = static_cast<int>(label_list_.size());
    double lmx = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < num_labels; ++l)
      lmx = std::max(lmx, scores.label_score(tok.head, i, l));
    double lz = 0;
    for (int l = 0; l < num_labels; ++l)
      lz += std::exp(scores.label_score(tok.head, i, l) - lmx);
    total += lmx + std::log(lz) - scores.label_score(tok.head, i, it->second);
  }
  return total;
}

double ParserModel::loss_value(const DependencyTree& gold) const {
  ensure_valid_tree(gold);
  Graph g = build_graph(gold.tokens, false, nullptr);
  ad::Var loss = build_loss(g, gold);
  return g.tape.val(loss)(0, 0);
}

double ParserModel::loss_backward(const DependencyTree& gold) {
  ensure_valid_tree(gold);
  Graph g = build_graph(gold.tokens, false, nullptr);
  ad::Var loss = build_loss(g, gold);
  g.tape.backward(loss);
  for (std::size_t i = 0; i < params_.size(); ++i)
    params_[i].grad = g.tape.grad(g.leaves[i]);
  return g.tape.val(loss)(0, 0);
}

// ---- decoding ----

DependencyTree ParserModel::parse_tree(const DependencyTree& tree) const {
  const int n = tree.size();
  if (n == 0) throw ContractViolation("parse_tree: empty sentence");
  Graph g = build_graph(tree.tokens, false, nullptr);
  const Mat& s = g.tape.val(g.arc_scores);  // (n+1) x (n+1)

  // Per-dependent log softmax over candidate heads, self excluded.
  Mat weights(n + 1, n);
  for (int i = 1; i <= n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = 0; j <= n; ++j)
      if (j != i) mx = std::max(mx, s(j, i));
    double z = 0;
    for (int j = 0; j <= n; ++j)
      if (j != i) z += std::exp(s(j, i) - mx);
    const double lse = mx + std::log(z);
    for (int j = 0; j <= n; ++j)
      weights(j, i - 1) = j == i ? -1e9 : s(j, i) - lse;
  }
  std::vector<int> heads = decode_mst(weights);

  DependencyTree out = tree;
  for (int i = 1; i <= n; ++i) {
    const int h = heads[static_cast<std::size_t>(i - 1)];
    int best = 0;
    double best_score = g.tape.val(g.label_slices[0])(h, i);
    for (int l = 1; l < static_cast<int>(label_list_.size()); ++l) {
      double sc = g.tape.val(g.label_slices[static_cast<std::size_t>(l)])(h, i);
      if (sc > best_score) {
        best_score = sc;
        best = l;
      }
    }
    out.at(i).head = h;
    out.at(i).deprel = label_list_[static_cast<std::size_t>(best)];
  }
  ensure_valid_tree(out);
  return out;
}

Treebank ParserModel::parse(const Treebank& bank) const {
  Treebank out;
  out.trees.reserve(bank.trees.size());
  for (const DependencyTree& tree : bank.trees) out.trees.push_back(parse_tree(tree));
  out.rebuild_vocabs();
  return out;
}

// ---- training ----

double ParserModel::train_step(const DependencyTree& gold, std::mt19937_64& dropout_rng,
                               double lr) {
  Graph g = build_graph(gold.tokens, true, &dropout_rng);
  ad::Var loss = build_loss(g, gold);
  g.tape.backward(loss);
  for (std::size_t i = 0; i < params_.size(); ++i)
    params_[i].grad = g.tape.grad(g.leaves[i]);
  if (config_.grad_clip > 0) {
    double sq = 0;
    for (const Param& p : params_) sq += p.grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > config_.grad_clip) {
      const double scale = config_.grad_clip / norm;
      for (Param& p : params_) p.grad *= scale;
    }
  }
  adam_update(lr);
  return g.tape.val(loss)(0, 0);
}

void ParserModel::adam_update(double lr) {
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(adam_t_));
  for (Param& p : params_) {
    p.m = config_.beta1 * p.m + (1.0 - config_.beta1) * p.grad;
    p.v = config_.beta2 * p.v.array() + (1.0 - config_.beta2) * p.grad.array().square();
    p.value.array() -=
        lr * (p.m.array() / bc1) / ((p.v.array() / bc2).sqrt() + config_.adam_eps);
  }
}

ParserModel ParserModel::train(const Treebank& bank, const EmbeddingTable* embeddings,
                               const ClusterMap* clusters, const ParserConfig& config,
                               std::ostream* progress) {
  config.validate();
  if (bank.trees.empty()) throw ConfigError("training treebank is empty");
  for (const DependencyTree& tree : bank.trees) ensure_valid_tree(tree);

  ParserModel model;
  model.config_ = config;
  model.build_vocabs(bank, embeddings, clusters);
  model.allocate_params();
  model.init_params();

  std::mt19937_64 shuffle_rng(config.seed ^ 0x94D049BB133111EBULL);
  std::mt19937_64 dropout_rng(config.seed ^ 0xBF58476D1CE4E5B9ULL);
  std::vector<std::size_t> order(bank.trees.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  double lr = config.learning_rate;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0;
    long long tokens = 0;
    for (std::size_t idx : order) {
      total += model.train_step(bank.trees[idx], dropout_rng, lr);
      tokens += bank.trees[idx].size();
    }
    if (progress) {
      (*progress) << "epoch " << epoch << "/" << config.epochs << "  loss/token "
                  << total / static_cast<double>(tokens) << "\n";
    }
    lr *= config.lr_decay;
  }
  return model;
}

// ---- persistence ----

std::vector<ParserModel::ParamView> ParserModel::parameters() {
  std::vector<ParamView> out;
  out.reserve(params_.size());
  for (Param& p : params_) out.push_back({p.name, &p.value, &p.grad});
  return out;
}

std::size_t ParserModel::parameter_count() const {
  std::size_t total = 0;
  for (const Param& p : params_)
    total += static_cast<std::size_t>(p.value.rows() * p.value.cols());
  return total;
}

void ParserModel::save(std::ostream& out) const {
  put_bytes(out, kMagic, 8);
  put_u32(out, kVersion);

  put_i32(out, config_.embed_dim);
  put_i32(out, config_.cluster_embed_dim);
  put_i32(out, config_.pos_embed_dim);
  put_i32(out, config_.encoder_layers);
  put_i32(out, config_.encoder_hidden);
  put_i32(out, config_.arc_mlp_dim);
  put_i32(out, config_.label_mlp_dim);
  put_i32(out, config_.epochs);
  put_f64(out, config_.dropout);
  put_f64(out, config_.learning_rate);
  put_f64(out, config_.lr_decay);
  put_f64(out, config_.beta1);
  put_f64(out, config_.beta2);
  put_f64(out, config_.adam_eps);
  put_f64(out, config_.grad_clip);
  put_u8(out, config_.delexicalized ? 1 : 0);
  put_u64(out, config_.seed);

  put_u8(out, frozen_words_ ? 1 : 0);
  put_u8(out, has_cluster_map_ ? 1 : 0);
  put_i32(out, word_dim_);
  put_i32(out, cluster_count_);
  put_strlist(out, label_list_);
  put_strlist(out, pos_list_);
  put_strlist(out, word_list_);

  if (frozen_words_) {
    put_i32(out, embed_table_.dim);
    std::vector<std::string> keys;
    keys.reserve(embed_table_.vectors.size());
    for (const auto& [k, v] : embed_table_.vectors) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    put_u64(out, keys.size());
    for (const std::string& k : keys) {
      put_str(out, k);
      for (double d : embed_table_.vectors.at(k)) put_f64(out, d);
    }
    for (double d : embed_table_.unk_vector) put_f64(out, d);
  }
  if (has_cluster_map_) {
    std::vector<std::string> keys;
    keys.reserve(cluster_map_.ids.size());
    for (const auto& [k, v] : cluster_map_.ids) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    put_u64(out, keys.size());
    for (const std::string& k : keys) {
      put_str(out, k);
      put_i32(out, cluster_map_.ids.at(k));
    }
  }

  put_u32(out, static_cast<std::uint32_t>(params_.size()));
  for (const Param& p : params_) {
    put_str(out, p.name);
    put_mat(out, p.value);
  }
  if (!out) throw IoError("model write failed");
}

ParserModel ParserModel::load(std::istream& in) {
  char magic[8];
  get_bytes(in, magic, 8);
  if (!std::equal(magic, magic + 8, kMagic)) throw DataError("not a codemix model file");
  std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw DataError("unsupported model version " + std::to_string(version));

  ParserModel model;
  ParserConfig& cfg = model.config_;
  cfg.embed_dim = get_i32(in);
  cfg.cluster_embed_dim = get_i32(in);
  cfg.pos_embed_dim = get_i32(in);
  cfg.encoder_layers = get_i32(in);
  cfg.encoder_hidden = get_i32(in);
  cfg.arc_mlp_dim = get_i32(in);
  cfg.label_mlp_dim = get_i32(in);
  cfg.epochs = get_i32(in);
  cfg.dropout = get_f64(in);
  cfg.learning_rate = get_f64(in);
  cfg.lr_decay = get_f64(in);
  cfg.beta1 = get_f64(in);
  cfg.beta2 = get_f64(in);
  cfg.adam_eps = get_f64(in);
  cfg.grad_clip = get_f64(in);
  cfg.delexicalized = get_u8(in) != 0;
  cfg.seed = get_u64(in);

  model.frozen_words_ = get_u8(in) != 0;
  model.has_cluster_map_ = get_u8(in) != 0;
  model.word_dim_ = get_i32(in);
  model.cluster_count_ = get_i32(in);
  model.label_list_ = get_strlist(in);
  model.pos_list_ = get_strlist(in);
  model.word_list_ = get_strlist(in);
  for (std::size_t i = 0; i < model.label_list_.size(); ++i)
    model.label_idx_[model.label_list_[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < model.pos_list_.size(); ++i)
    model.pos_idx_[model.pos_list_[i]] = static_cast<int>(i);
  for (std::size_t i = 0; i < model.word_list_.size(); ++i)
    model.word_idx_[model.word_list_[i]] = static_cast<int>(i);

  if (model.frozen_words_) {
    model.embed_table_.dim = get_i32(in);
    std::uint64_t count = get_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::string key = get_str(in);
      std::vector<double> vec(static_cast<std::size_t>(model.embed_table_.dim));
      for (double& d : vec) d = get_f64(in);
      model.embed_table_.vectors[key] = std::move(vec);
    }
    model.embed_table_.unk_vector.resize(static_cast<std::size_t>(model.embed_table_.dim));
    for (double& d : model.embed_table_.unk_vector) d = get_f64(in);
  }
  if (model.has_cluster_map_) {
    std::uint64_t count = get_u64(in);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::string key = get_str(in);
      model.cluster_map_.ids[key] = get_i32(in);
    }
    model.cluster_map_.cluster_count = model.cluster_count_;
  }

  model.allocate_params();
  std::uint32_t count = get_u32(in);
  if (count != model.params_.size())
    throw DataError("model parameter count mismatch");
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_str(in);
    Mat value = get_mat(in);
    auto it = model.param_idx_.find(name);
    if (it == model.param_idx_.end()) throw DataError("unknown model parameter " + name);
    Param& p = model.params_[static_cast<std::size_t>(it->second)];
    if (p.value.rows() != value.rows() || p.value.cols() != value.cols())
      throw DataError("shape mismatch for model parameter " + name);
    p.value = std::move(value);
  }
  return model;
}

void ParserModel::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  save(out);
}

ParserModel ParserModel::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return load(in);
}

}  // namespace codemix
