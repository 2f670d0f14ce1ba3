#pragma once

#include <Eigen/Core>
#include <vector>

namespace codemix {

// Maximum-weight spanning arborescence rooted at node 0. weights is
// (n+1) x n with weights(j, i-1) the score of head j for dependent i; all
// entries must be finite. Returns heads[i-1] in 0..n for each dependent i.
// The root may end up with several children.
std::vector<int> chu_liu_edmonds(const Eigen::MatrixXd& weights);

// Same, but with exactly one child of the root: when the unconstrained
// solution has several, each candidate root-child is tried and the best
// total kept. Ties break toward the smaller candidate.
std::vector<int> decode_mst(const Eigen::MatrixXd& weights);

}  // namespace codemix
