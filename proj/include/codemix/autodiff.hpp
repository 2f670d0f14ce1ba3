#pragma once

#include <Eigen/Core>
#include <functional>
#include <vector>

namespace codemix::ad {

using Mat = Eigen::MatrixXd;

struct Var {
  int id = -1;
};

// A per-example reverse-mode tape over dense matrices. Nodes are created in
// topological order by construction; backward() walks them in reverse.
class Tape {
 public:
  Var input(Mat value);  // leaf; gradient is accumulated but not consumed here

  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var add(Var a, Var b);          // same shape
  Var add_colvec(Var a, Var v);   // v is (rows x 1), broadcast across columns
  Var add_rowvec(Var a, Var v);   // v is (1 x cols), broadcast across rows
  Var add_scalar(Var a, Var s);   // s is 1x1, broadcast everywhere
  Var add_const(Var a, Mat c);    // no gradient into c
  Var cmul(Var a, Var b);         // elementwise
  Var cmul_const(Var a, Mat mask);
  Var tanh_(Var a);
  Var sigmoid_(Var a);
  Var hstack(std::vector<Var> parts);
  Var vstack(std::vector<Var> parts);
  Var rows(Var a, int start, int count);
  Var cols(Var a, int start, int count);

  // Sum over columns c with targets[c] >= 0 of -log softmax(col_c)[targets[c]].
  // With ban_diagonal, row c is excluded from column c's support. Returns 1x1.
  Var softmax_xent_cols(Var scores, std::vector<int> targets, bool ban_diagonal);

  // out(l, c) = slices[l](heads[c], c); heads[c] < 0 yields 0. All slices
  // share one shape.
  Var gather_from_slices(std::vector<Var> slices, std::vector<int> heads);

  const Mat& val(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].val; }
  const Mat& grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  void backward(Var loss);  // loss must be 1x1
  std::size_t size() const { return nodes_.size(); }

 private:
  // Receives the tape and the node's own output gradient.
  using BackFn = std::function<void(Tape&, const Mat&)>;

  struct Node {
    Mat val;
    Mat grad;
    BackFn back;  // empty for leaves
  };

  Var push(Mat val, BackFn back);
  Mat& grad_mut(Var v) { return nodes_[static_cast<std::size_t>(v.id)].grad; }

  std::vector<Node> nodes_;
};

}  // namespace codemix::ad
