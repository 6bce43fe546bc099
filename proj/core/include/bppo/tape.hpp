#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "bppo/tensor.hpp"

namespace bppo {

using ValueId = int64_t;

// Reverse-mode autodiff tape recording tensor-granularity ops. Forward values
// are computed eagerly through the kernels in ops.hpp and checked for
// finiteness after every op. backward() walks nodes in reverse creation order
// exactly once, touching only nodes reachable from the root, so its cost is
// linear in the recorded subgraph and unreachable parameters get exact zeros.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // leaves
  ValueId constant(Tensor value);
  ValueId param(Tensor value, int64_t param_id);  // param_id unique per tape

  // elementwise / scalar
  ValueId add(ValueId a, ValueId b);
  ValueId sub(ValueId a, ValueId b);
  ValueId mul(ValueId a, ValueId b);
  ValueId scale(ValueId a, double c);
  ValueId add_scalar(ValueId a, double c);
  ValueId vlog(ValueId a);
  ValueId vexp(ValueId a);
  ValueId gelu(ValueId a);
  ValueId clamp(ValueId a, double lo, double hi);  // boundary grads pass through
  ValueId min_elem(ValueId a, ValueId b);          // ties take a

  // linear algebra / shape
  ValueId matmul(ValueId a, ValueId b);
  ValueId transpose(ValueId a);
  ValueId slice_rows(ValueId a, int64_t r0, int64_t r1);
  ValueId slice_cols(ValueId a, int64_t c0, int64_t c1);
  ValueId concat_cols(const std::vector<ValueId>& xs);
  ValueId embedding(ValueId table, std::vector<int> ids);
  ValueId gather(ValueId a, std::vector<std::pair<int64_t, int64_t>> coords);

  // normalization / activation
  ValueId row_softmax(ValueId a);
  ValueId log_softmax(ValueId a);
  ValueId rms_norm(ValueId x, ValueId gain, ValueId offset, double eps);
  ValueId masked_fill(ValueId a, Tensor keep, double fill);

  // reductions
  ValueId sum(ValueId a);
  ValueId mean(ValueId a);

  const Tensor& value(ValueId id) const;
  int64_t node_count() const { return static_cast<int64_t>(nodes_.size()); }

  // Root must be scalar. Returns gradients indexed by param_id; parameters
  // bound to the tape but not on a path to the root get exact zero tensors.
  // May be called at most once per tape.
  std::vector<Tensor> backward(ValueId root, int64_t n_params);

 private:
  using BackwardFn = std::function<void(Tape&, ValueId)>;

  struct Node {
    Tensor value;
    Tensor grad;  // empty until first accumulation
    std::vector<ValueId> inputs;
    BackwardFn bwd;  // empty when no input requires grad
    int64_t param_id = -1;
    bool requires_grad = false;
    bool reached = false;
  };

  ValueId push(Tensor value, std::vector<ValueId> inputs, const char* op, BackwardFn bwd);
  Node& node(ValueId id);
  const Node& node(ValueId id) const;
  // allocates the grad buffer on first touch and marks the node reached
  Tensor& grad_buf(ValueId id);
  bool wants_grad(ValueId id) const { return node(id).requires_grad; }
  void accum(ValueId id, const Tensor& g);

  std::vector<Node> nodes_;
  std::vector<std::pair<int64_t, ValueId>> param_nodes_;  // (param_id, node)
  bool backward_done_ = false;
};

}  // namespace bppo
