#include "bppo/tape.hpp"

#include <cmath>

#include "bppo/error.hpp"
#include "bppo/ops.hpp"

namespace bppo {

Tape::Node& Tape::node(ValueId id) {
  if (id < 0 || id >= static_cast<ValueId>(nodes_.size())) {
    throw ShapeError("tape: value id out of range");
  }
  return nodes_[static_cast<size_t>(id)];
}

const Tape::Node& Tape::node(ValueId id) const {
  return const_cast<Tape*>(this)->node(id);
}

const Tensor& Tape::value(ValueId id) const { return node(id).value; }

Tensor& Tape::grad_buf(ValueId id) {
  Node& nd = node(id);
  if (nd.grad.data.empty()) {
    nd.grad = Tensor::zeros(nd.value.shape);
    nd.reached = true;
  }
  return nd.grad;
}

void Tape::accum(ValueId id, const Tensor& g) {
  Tensor& buf = grad_buf(id);
  for (size_t i = 0; i < buf.data.size(); ++i) buf.data[i] += g.data[i];
}

ValueId Tape::push(Tensor value, std::vector<ValueId> inputs, const char* op, BackwardFn bwd) {
  ensure_finite(value, op);
  bool req = false;
  for (ValueId in : inputs) req = req || node(in).requires_grad;
  Node nd;
  nd.value = std::move(value);
  nd.inputs = std::move(inputs);
  nd.requires_grad = req;
  if (req) nd.bwd = std::move(bwd);
  nodes_.push_back(std::move(nd));
  return static_cast<ValueId>(nodes_.size()) - 1;
}

ValueId Tape::constant(Tensor value) {
  ensure_finite(value, "constant");
  Node nd;
  nd.value = std::move(value);
  nodes_.push_back(std::move(nd));
  return static_cast<ValueId>(nodes_.size()) - 1;
}

ValueId Tape::param(Tensor value, int64_t param_id) {
  if (param_id < 0) throw ShapeError("tape: negative param id");
  for (const auto& [pid, _] : param_nodes_) {
    if (pid == param_id) throw ShapeError("tape: duplicate param id");
  }
  ensure_finite(value, "param");
  Node nd;
  nd.value = std::move(value);
  nd.param_id = param_id;
  nd.requires_grad = true;
  nodes_.push_back(std::move(nd));
  const ValueId id = static_cast<ValueId>(nodes_.size()) - 1;
  param_nodes_.emplace_back(param_id, id);
  return id;
}

// ---------------------------------------------------------------- elementwise

ValueId Tape::add(ValueId a, ValueId b) {
  return push(ops::add(value(a), value(b)), {a, b}, "add",
              [a, b](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                if (t.wants_grad(a)) t.accum(a, g);
                if (t.wants_grad(b)) t.accum(b, g);
              });
}

ValueId Tape::sub(ValueId a, ValueId b) {
  return push(ops::sub(value(a), value(b)), {a, b}, "sub",
              [a, b](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                if (t.wants_grad(a)) t.accum(a, g);
                if (t.wants_grad(b)) {
                  Tensor& gb = t.grad_buf(b);
                  for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] -= g.data[i];
                }
              });
}

ValueId Tape::mul(ValueId a, ValueId b) {
  return push(ops::mul(value(a), value(b)), {a, b}, "mul",
              [a, b](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& va = t.node(a).value;
                const Tensor& vb = t.node(b).value;
                if (t.wants_grad(a)) {
                  Tensor& ga = t.grad_buf(a);
                  for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * vb.data[i];
                }
                if (t.wants_grad(b)) {
                  Tensor& gb = t.grad_buf(b);
                  for (size_t i = 0; i < gb.data.size(); ++i) gb.data[i] += g.data[i] * va.data[i];
                }
              });
}

ValueId Tape::scale(ValueId a, double c) {
  return push(ops::scale(value(a), c), {a}, "scale",
              [a, c](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                Tensor& ga = t.grad_buf(a);
                for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += c * g.data[i];
              });
}

ValueId Tape::add_scalar(ValueId a, double c) {
  return push(ops::add_scalar(value(a), c), {a}, "add_scalar",
              [a](Tape& t, ValueId self) { t.accum(a, t.node(self).grad); });
}

ValueId Tape::vlog(ValueId a) {
  return push(ops::vlog(value(a)), {a}, "log",
              [a](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& va = t.node(a).value;
                Tensor& ga = t.grad_buf(a);
                for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] / va.data[i];
              });
}

ValueId Tape::vexp(ValueId a) {
  return push(ops::vexp(value(a)), {a}, "exp",
              [a](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& y = t.node(self).value;
                Tensor& ga = t.grad_buf(a);
                for (size_t i = 0; i < ga.data.size(); ++i) ga.data[i] += g.data[i] * y.data[i];
              });
}

ValueId Tape::gelu(ValueId a) {
  return push(ops::gelu(value(a)), {a}, "gelu",
              [a](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& va = t.node(a).value;
                Tensor& ga = t.grad_buf(a);
                for (size_t i = 0; i < ga.data.size(); ++i) {
                  ga.data[i] += g.data[i] * ops::gelu_grad_scalar(va.data[i]);
                }
              });
}

ValueId Tape::clamp(ValueId a, double lo, double hi) {
  return push(ops::clamp(value(a), lo, hi), {a}, "clamp",
              [a, lo, hi](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& va = t.node(a).value;
                Tensor& ga = t.grad_buf(a);
                for (size_t i = 0; i < ga.data.size(); ++i) {
                  // boundary values count as inside
                  if (va.data[i] >= lo && va.data[i] <= hi) ga.data[i] += g.data[i];
                }
              });
}

ValueId Tape::min_elem(ValueId a, ValueId b) {
  return push(ops::min_elem(value(a), value(b)), {a, b}, "min_elem",
              [a, b](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& va = t.node(a).value;
                const Tensor& vb = t.node(b).value;
                // forward takes a on ties, so the subgradient follows a there
                if (t.wants_grad(a)) {
                  Tensor& ga = t.grad_buf(a);
                  for (size_t i = 0; i < ga.data.size(); ++i) {
                    if (!(vb.data[i] < va.data[i])) ga.data[i] += g.data[i];
                  }
                }
                if (t.wants_grad(b)) {
                  Tensor& gb = t.grad_buf(b);
                  for (size_t i = 0; i < gb.data.size(); ++i) {
                    if (vb.data[i] < va.data[i]) gb.data[i] += g.data[i];
                  }
                }
              });
}

// ------------------------------------------------------------- linear algebra

ValueId Tape::matmul(ValueId a, ValueId b) {
  return push(ops::matmul(value(a), value(b)), {a, b}, "matmul",
              [a, b](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& va = t.node(a).value;
                const Tensor& vb = t.node(b).value;
                const int64_t n = va.rows(), k = va.cols(), m = vb.cols();
                if (t.wants_grad(a)) {
                  Tensor& ga = t.grad_buf(a);  // ga += g @ b^T
                  for (int64_t i = 0; i < n; ++i)
                    for (int64_t kk = 0; kk < k; ++kk) {
                      double acc = 0.0;
                      for (int64_t j = 0; j < m; ++j)
                        acc += g.data[static_cast<size_t>(i * m + j)] *
                               vb.data[static_cast<size_t>(kk * m + j)];
                      ga.data[static_cast<size_t>(i * k + kk)] += acc;
                    }
                }
                if (t.wants_grad(b)) {
                  Tensor& gb = t.grad_buf(b);  // gb += a^T @ g
                  for (int64_t kk = 0; kk < k; ++kk)
                    for (int64_t j = 0; j < m; ++j) {
                      double acc = 0.0;
                      for (int64_t i = 0; i < n; ++i)
                        acc += va.data[static_cast<size_t>(i * k + kk)] *
                               g.data[static_cast<size_t>(i * m + j)];
                      gb.data[static_cast<size_t>(kk * m + j)] += acc;
                    }
                }
              });
}

ValueId Tape::transpose(ValueId a) {
  return push(ops::transpose(value(a)), {a}, "transpose",
              [a](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                Tensor& ga = t.grad_buf(a);
                const int64_t n = ga.rows(), m = ga.cols();
                for (int64_t i = 0; i < n; ++i)
                  for (int64_t j = 0; j < m; ++j)
                    ga.data[static_cast<size_t>(i * m + j)] +=
                        g.data[static_cast<size_t>(j * n + i)];
              });
}

ValueId Tape::slice_rows(ValueId a, int64_t r0, int64_t r1) {
  return push(ops::slice_rows(value(a), r0, r1), {a}, "slice_rows",
              [a, r0](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                Tensor& ga = t.grad_buf(a);
                const int64_t m = ga.cols();
                for (int64_t i = 0; i < g.rows(); ++i)
                  for (int64_t j = 0; j < m; ++j)
                    ga.data[static_cast<size_t>((r0 + i) * m + j)] +=
                        g.data[static_cast<size_t>(i * m + j)];
              });
}

ValueId Tape::slice_cols(ValueId a, int64_t c0, int64_t c1) {
  return push(ops::slice_cols(value(a), c0, c1), {a}, "slice_cols",
              [a, c0](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                Tensor& ga = t.grad_buf(a);
                const int64_t m = ga.cols(), w = g.cols();
                for (int64_t i = 0; i < g.rows(); ++i)
                  for (int64_t j = 0; j < w; ++j)
                    ga.data[static_cast<size_t>(i * m + c0 + j)] +=
                        g.data[static_cast<size_t>(i * w + j)];
              });
}

ValueId Tape::concat_cols(const std::vector<ValueId>& xs) {
  std::vector<Tensor> vals;
  vals.reserve(xs.size());
  for (ValueId x : xs) vals.push_back(value(x));
  std::vector<ValueId> inputs = xs;
  return push(ops::concat_cols(vals), std::move(inputs), "concat_cols",
              [xs](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const int64_t total = g.cols();
                int64_t off = 0;
                for (ValueId x : xs) {
                  const int64_t w = t.node(x).value.cols();
                  if (t.wants_grad(x)) {
                    Tensor& gx = t.grad_buf(x);
                    for (int64_t i = 0; i < g.rows(); ++i)
                      for (int64_t j = 0; j < w; ++j)
                        gx.data[static_cast<size_t>(i * w + j)] +=
                            g.data[static_cast<size_t>(i * total + off + j)];
                  }
                  off += w;
                }
              });
}

ValueId Tape::embedding(ValueId table, std::vector<int> ids) {
  Tensor out = ops::embedding(value(table), std::span<const int>(ids));
  return push(std::move(out), {table}, "embedding",
              [table, ids = std::move(ids)](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                Tensor& gt = t.grad_buf(table);
                const int64_t d = gt.cols();
                for (size_t i = 0; i < ids.size(); ++i)
                  for (int64_t j = 0; j < d; ++j)
                    gt.data[static_cast<size_t>(ids[i] * d + j)] +=
                        g.data[i * static_cast<size_t>(d) + static_cast<size_t>(j)];
              });
}

ValueId Tape::gather(ValueId a, std::vector<std::pair<int64_t, int64_t>> coords) {
  Tensor out = ops::gather(value(a), coords);
  return push(std::move(out), {a}, "gather",
              [a, coords = std::move(coords)](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                Tensor& ga = t.grad_buf(a);
                const int64_t m = ga.cols();
                for (size_t i = 0; i < coords.size(); ++i)
                  ga.data[static_cast<size_t>(coords[i].first * m + coords[i].second)] +=
                      g.data[i];
              });
}

// --------------------------------------------------- normalization/activation

ValueId Tape::row_softmax(ValueId a) {
  return push(ops::row_softmax(value(a)), {a}, "row_softmax",
              [a](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& s = t.node(self).value;
                Tensor& ga = t.grad_buf(a);
                const int64_t n = s.rows(), m = s.cols();
                for (int64_t i = 0; i < n; ++i) {
                  double dot = 0.0;
                  for (int64_t j = 0; j < m; ++j)
                    dot += g.data[static_cast<size_t>(i * m + j)] *
                           s.data[static_cast<size_t>(i * m + j)];
                  for (int64_t j = 0; j < m; ++j) {
                    const size_t idx = static_cast<size_t>(i * m + j);
                    ga.data[idx] += s.data[idx] * (g.data[idx] - dot);
                  }
                }
              });
}

ValueId Tape::log_softmax(ValueId a) {
  return push(ops::log_softmax(value(a)), {a}, "log_softmax",
              [a](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& y = t.node(self).value;  // log-probs
                Tensor& ga = t.grad_buf(a);
                const int64_t n = y.rows(), m = y.cols();
                for (int64_t i = 0; i < n; ++i) {
                  double gsum = 0.0;
                  for (int64_t j = 0; j < m; ++j)
                    gsum += g.data[static_cast<size_t>(i * m + j)];
                  for (int64_t j = 0; j < m; ++j) {
                    const size_t idx = static_cast<size_t>(i * m + j);
                    ga.data[idx] += g.data[idx] - std::exp(y.data[idx]) * gsum;
                  }
                }
              });
}

ValueId Tape::rms_norm(ValueId x, ValueId gain, ValueId offset, double eps) {
  return push(ops::rms_norm(value(x), value(gain), value(offset), eps), {x, gain, offset},
              "rms_norm",
              [x, gain, offset, eps](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                const Tensor& vx = t.node(x).value;
                const Tensor& vg = t.node(gain).value;
                const int64_t n = vx.rows(), d = vx.cols();
                const bool wx = t.wants_grad(x);
                const bool wg = t.wants_grad(gain);
                const bool wo = t.wants_grad(offset);
                for (int64_t i = 0; i < n; ++i) {
                  double ss = 0.0;
                  for (int64_t j = 0; j < d; ++j) {
                    const double v = vx.data[static_cast<size_t>(i * d + j)];
                    ss += v * v;
                  }
                  const double inv = 1.0 / std::sqrt(ss / static_cast<double>(d) + eps);
                  if (wx) {
                    double s = 0.0;  // sum_j g_ij * gain_j * x_ij
                    for (int64_t j = 0; j < d; ++j)
                      s += g.data[static_cast<size_t>(i * d + j)] *
                           vg.data[static_cast<size_t>(j)] *
                           vx.data[static_cast<size_t>(i * d + j)];
                    Tensor& gx = t.grad_buf(x);
                    const double c = s * inv * inv * inv / static_cast<double>(d);
                    for (int64_t j = 0; j < d; ++j) {
                      const size_t idx = static_cast<size_t>(i * d + j);
                      gx.data[idx] += g.data[idx] * inv * vg.data[static_cast<size_t>(j)] -
                                      c * vx.data[idx];
                    }
                  }
                  if (wg) {
                    Tensor& gg = t.grad_buf(gain);
                    for (int64_t j = 0; j < d; ++j) {
                      const size_t idx = static_cast<size_t>(i * d + j);
                      gg.data[static_cast<size_t>(j)] += g.data[idx] * vx.data[idx] * inv;
                    }
                  }
                  if (wo) {
                    Tensor& go = t.grad_buf(offset);
                    for (int64_t j = 0; j < d; ++j)
                      go.data[static_cast<size_t>(j)] +=
                          g.data[static_cast<size_t>(i * d + j)];
                  }
                }
              });
}

ValueId Tape::masked_fill(ValueId a, Tensor keep, double fill) {
  Tensor out = ops::masked_fill(value(a), keep, fill);
  return push(std::move(out), {a}, "masked_fill",
              [a, keep = std::move(keep)](Tape& t, ValueId self) {
                const Tensor& g = t.node(self).grad;
                Tensor& ga = t.grad_buf(a);
                for (size_t i = 0; i < ga.data.size(); ++i) {
                  if (keep.data[i] != 0.0) ga.data[i] += g.data[i];
                }
              });
}

// ------------------------------------------------------------------ reductions

ValueId Tape::sum(ValueId a) {
  return push(ops::sum(value(a)), {a}, "sum",
              [a](Tape& t, ValueId self) {
                const double g = t.node(self).grad.data[0];
                Tensor& ga = t.grad_buf(a);
                for (double& v : ga.data) v += g;
              });
}

ValueId Tape::mean(ValueId a) {
  return push(ops::mean(value(a)), {a}, "mean",
              [a](Tape& t, ValueId self) {
                const double g = t.node(self).grad.data[0];
                Tensor& ga = t.grad_buf(a);
                const double c = g / static_cast<double>(ga.numel());
                for (double& v : ga.data) v += c;
              });
}

// -------------------------------------------------------------------- backward

std::vector<Tensor> Tape::backward(ValueId root, int64_t n_params) {
  if (backward_done_) throw Error("tape: backward may only be called once");
  backward_done_ = true;
  Node& r = node(root);
  if (r.value.numel() != 1) {
    throw ShapeError("tape: backward root must be scalar, got " + r.value.shape_str());
  }
  r.grad = Tensor::full(r.value.shape, 1.0);
  r.reached = true;
  for (ValueId i = root; i >= 0; --i) {
    Node& nd = nodes_[static_cast<size_t>(i)];
    if (nd.reached && nd.bwd) nd.bwd(*this, i);
  }
  std::vector<Tensor> grads(static_cast<size_t>(n_params));
  std::vector<bool> seen(static_cast<size_t>(n_params), false);
  for (const auto& [pid, nid] : param_nodes_) {
    if (pid >= n_params) throw ShapeError("tape: param id exceeds n_params");
    const Node& nd = nodes_[static_cast<size_t>(nid)];
    grads[static_cast<size_t>(pid)] =
        nd.grad.data.empty() ? Tensor::zeros(nd.value.shape) : nd.grad;
    seen[static_cast<size_t>(pid)] = true;
  }
  for (int64_t p = 0; p < n_params; ++p) {
    if (!seen[static_cast<size_t>(p)]) {
      throw ShapeError("tape: param " + std::to_string(p) + " was never bound");
    }
  }
  return grads;
}

}  // namespace bppo
