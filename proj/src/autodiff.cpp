#include "codemix/autodiff.hpp"

#include <cmath>
#include <limits>
#include <utility>

#include "codemix/error.hpp"

namespace codemix::ad {

namespace {
constexpr double kBanned = -std::numeric_limits<double>::infinity();
}

Var Tape::push(Mat val, BackFn back) {
  Node node;
  node.grad = Mat::Zero(val.rows(), val.cols());
  node.val = std::move(val);
  node.back = std::move(back);
  nodes_.push_back(std::move(node));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Tape::input(Mat value) { return push(std::move(value), nullptr); }

Var Tape::matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Mat& A = val(a);
  const Mat& B = val(b);
  Mat out;
  if (!trans_a && !trans_b)
    out = A * B;
  else if (trans_a && !trans_b)
    out = A.transpose() * B;
  else if (!trans_a && trans_b)
    out = A * B.transpose();
  else
    out = A.transpose() * B.transpose();
  return push(std::move(out), [a, b, trans_a, trans_b](Tape& t, const Mat& G) {
    const Mat& A = t.val(a);
    const Mat& B = t.val(b);
    if (!trans_a && !trans_b) {
      t.grad_mut(a) += G * B.transpose();
      t.grad_mut(b) += A.transpose() * G;
    } else if (trans_a && !trans_b) {
      t.grad_mut(a) += B * G.transpose();
      t.grad_mut(b) += A * G;
    } else if (!trans_a && trans_b) {
      t.grad_mut(a) += G * B;
      t.grad_mut(b) += G.transpose() * A;
    } else {
      t.grad_mut(a) += B.transpose() * G.transpose();
      t.grad_mut(b) += G.transpose() * A.transpose();
    }
  });
}

Var Tape::add(Var a, Var b) {
  return push(val(a) + val(b), [a, b](Tape& t, const Mat& G) {
    t.grad_mut(a) += G;
    t.grad_mut(b) += G;
  });
}

Var Tape::add_colvec(Var a, Var v) {
  Mat out = val(a);
  out.colwise() += val(v).col(0);
  return push(std::move(out), [a, v](Tape& t, const Mat& G) {
    t.grad_mut(a) += G;
    t.grad_mut(v) += G.rowwise().sum();
  });
}

Var Tape::add_rowvec(Var a, Var v) {
  Mat out = val(a);
  out.rowwise() += val(v).row(0);
  return push(std::move(out), [a, v](Tape& t, const Mat& G) {
    t.grad_mut(a) += G;
    t.grad_mut(v) += G.colwise().sum();
  });
}

Var Tape::add_scalar(Var a, Var s) {
  Mat out = val(a).array() + val(s)(0, 0);
  return push(std::move(out), [a, s](Tape& t, const Mat& G) {
    t.grad_mut(a) += G;
    t.grad_mut(s)(0, 0) += G.sum();
  });
}

Var Tape::add_const(Var a, Mat c) {
  return push(val(a) + c, [a](Tape& t, const Mat& G) { t.grad_mut(a) += G; });
}

Var Tape::cmul(Var a, Var b) {
  return push(val(a).cwiseProduct(val(b)), [a, b](Tape& t, const Mat& G) {
    t.grad_mut(a) += G.cwiseProduct(t.val(b));
    t.grad_mut(b) += G.cwiseProduct(t.val(a));
  });
}

Var Tape::cmul_const(Var a, Mat mask) {
  Mat out = val(a).cwiseProduct(mask);
  return push(std::move(out), [a, mask = std::move(mask)](Tape& t, const Mat& G) {
    t.grad_mut(a) += G.cwiseProduct(mask);
  });
}

Var Tape::tanh_(Var a) {
  Var out = push(val(a).array().tanh().matrix(), nullptr);
  nodes_.back().back = [a, out](Tape& t, const Mat& G) {
    const Mat& y = t.val(out);
    t.grad_mut(a).array() += G.array() * (1.0 - y.array().square());
  };
  return out;
}

Var Tape::sigmoid_(Var a) {
  Mat out = (1.0 / (1.0 + (-val(a)).array().exp())).matrix();
  Var v = push(std::move(out), nullptr);
  nodes_.back().back = [a, v](Tape& t, const Mat& G) {
    const Mat& y = t.val(v);
    t.grad_mut(a).array() += G.array() * y.array() * (1.0 - y.array());
  };
  return v;
}

Var Tape::hstack(std::vector<Var> parts) {
  if (parts.empty()) throw ContractViolation("hstack of nothing");
  Eigen::Index rows = val(parts[0]).rows();
  Eigen::Index total = 0;
  for (Var p : parts) {
    if (val(p).rows() != rows) throw ContractViolation("hstack row mismatch");
    total += val(p).cols();
  }
  Mat out(rows, total);
  Eigen::Index off = 0;
  for (Var p : parts) {
    out.middleCols(off, val(p).cols()) = val(p);
    off += val(p).cols();
  }
  return push(std::move(out), [parts = std::move(parts)](Tape& t, const Mat& G) {
    Eigen::Index off = 0;
    for (Var p : parts) {
      Eigen::Index w = t.val(p).cols();
      t.grad_mut(p) += G.middleCols(off, w);
      off += w;
    }
  });
}

Var Tape::vstack(std::vector<Var> parts) {
  if (parts.empty()) throw ContractViolation("vstack of nothing");
  Eigen::Index cols = val(parts[0]).cols();
  Eigen::Index total = 0;
  for (Var p : parts) {
    if (val(p).cols() != cols) throw ContractViolation("vstack column mismatch");
    total += val(p).rows();
  }
  Mat out(total, cols);
  Eigen::Index off = 0;
  for (Var p : parts) {
    out.middleRows(off, val(p).rows()) = val(p);
    off += val(p).rows();
  }
  return push(std::move(out), [parts = std::move(parts)](Tape& t, const Mat& G) {
    Eigen::Index off = 0;
    for (Var p : parts) {
      Eigen::Index h = t.val(p).rows();
      t.grad_mut(p) += G.middleRows(off, h);
      off += h;
    }
  });
}

Var Tape::rows(Var a, int start, int count) {
  return push(val(a).middleRows(start, count), [a, start, count](Tape& t, const Mat& G) {
    t.grad_mut(a).middleRows(start, count) += G;
  });
}

Var Tape::cols(Var a, int start, int count) {
  return push(val(a).middleCols(start, count), [a, start, count](Tape& t, const Mat& G) {
    t.grad_mut(a).middleCols(start, count) += G;
  });
}

Var Tape::softmax_xent_cols(Var scores, std::vector<int> targets, bool ban_diagonal) {
  const Mat& S = val(scores);
  if (targets.size() != static_cast<std::size_t>(S.cols()))
    throw ContractViolation("softmax_xent_cols: one target per column required");
  double total = 0;
  for (Eigen::Index c = 0; c < S.cols(); ++c) {
    int tgt = targets[static_cast<std::size_t>(c)];
    if (tgt < 0) continue;
    if (tgt >= S.rows()) throw ContractViolation("softmax_xent_cols: target out of range");
    if (ban_diagonal && tgt == static_cast<int>(c))
      throw ContractViolation("softmax_xent_cols: target on the banned diagonal");
    double mx = kBanned;
    for (Eigen::Index r = 0; r < S.rows(); ++r) {
      if (ban_diagonal && r == c) continue;
      mx = std::max(mx, S(r, c));
    }
    double lse = 0;
    for (Eigen::Index r = 0; r < S.rows(); ++r) {
      if (ban_diagonal && r == c) continue;
      lse += std::exp(S(r, c) - mx);
    }
    lse = mx + std::log(lse);
    total += lse - S(tgt, c);
  }
  Mat out(1, 1);
  out(0, 0) = total;
  return push(std::move(out),
              [scores, targets = std::move(targets), ban_diagonal](Tape& t, const Mat& G) {
                const double g = G(0, 0);
                const Mat& S = t.val(scores);
                Mat& dS = t.grad_mut(scores);
                for (Eigen::Index c = 0; c < S.cols(); ++c) {
                  int tgt = targets[static_cast<std::size_t>(c)];
                  if (tgt < 0) continue;
                  double mx = kBanned;
                  for (Eigen::Index r = 0; r < S.rows(); ++r) {
                    if (ban_diagonal && r == c) continue;
                    mx = std::max(mx, S(r, c));
                  }
                  double z = 0;
                  for (Eigen::Index r = 0; r < S.rows(); ++r) {
                    if (ban_diagonal && r == c) continue;
                    z += std::exp(S(r, c) - mx);
                  }
                  for (Eigen::Index r = 0; r < S.rows(); ++r) {
                    if (ban_diagonal && r == c) continue;
                    dS(r, c) += g * std::exp(S(r, c) - mx) / z;
                  }
                  dS(tgt, c) -= g;
                }
              });
}

Var Tape::gather_from_slices(std::vector<Var> slices, std::vector<int> heads) {
  if (slices.empty()) throw ContractViolation("gather_from_slices: no slices");
  const Eigen::Index cols = val(slices[0]).cols();
  if (heads.size() != static_cast<std::size_t>(cols))
    throw ContractViolation("gather_from_slices: one head per column required");
  Mat out = Mat::Zero(static_cast<Eigen::Index>(slices.size()), cols);
  for (std::size_t l = 0; l < slices.size(); ++l) {
    const Mat& S = val(slices[l]);
    for (Eigen::Index c = 0; c < cols; ++c) {
      int h = heads[static_cast<std::size_t>(c)];
      if (h < 0) continue;
      if (h >= S.rows()) throw ContractViolation("gather_from_slices: head out of range");
      out(static_cast<Eigen::Index>(l), c) = S(h, c);
    }
  }
  return push(std::move(out),
              [slices = std::move(slices), heads = std::move(heads)](Tape& t, const Mat& G) {
                for (std::size_t l = 0; l < slices.size(); ++l) {
                  Mat& dS = t.grad_mut(slices[l]);
                  for (Eigen::Index c = 0; c < G.cols(); ++c) {
                    int h = heads[static_cast<std::size_t>(c)];
                    if (h < 0) continue;
                    dS(h, c) += G(static_cast<Eigen::Index>(l), c);
                  }
                }
              });
}

void Tape::backward(Var loss) {
  if (loss.id < 0 || loss.id >= static_cast<int>(nodes_.size()))
    throw ContractViolation("backward on a foreign var");
  Node& top = nodes_[static_cast<std::size_t>(loss.id)];
  if (top.val.rows() != 1 || top.val.cols() != 1)
    throw ContractViolation("backward expects a scalar loss");
  top.grad(0, 0) = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& node = nodes_[static_cast<std::size_t>(i)];
    if (node.back) node.back(*this, node.grad);
  }
}

}  // namespace codemix::ad
