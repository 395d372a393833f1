#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "susd/error.hpp"
#include "susd/mat.hpp"

namespace susd {

// Reverse-mode tape over Mat<S>. A Graph records one forward computation;
// backward() consumes it and returns gradients keyed by parameter name.
// Parameters registered under the same name refer to the same node, so a
// network can appear several times in one loss. Single-threaded by design.
template <typename S>
class Graph {
 public:
  struct Ref {
    int idx = -1;
  };

  using GradMap = std::map<std::string, Mat<S>>;

  // --- leaves ---------------------------------------------------------------

  Ref constant(Mat<S> value) { return push(std::move(value), false, {}, nullptr); }

  Ref param(const std::string& name, const Mat<S>& value) {
    auto it = params_.find(name);
    if (it != params_.end()) {
      const Node& n = nodes_[it->second];
      if (n.val.rows != value.rows || n.val.cols != value.cols)
        throw DimensionError("param '" + name + "' re-registered with a different shape");
      return Ref{it->second};
    }
    Ref r = push(value, true, {}, nullptr);
    params_.emplace(name, r.idx);
    param_order_.push_back(name);
    return r;
  }

  // --- shape-preserving binary ops -------------------------------------------

  Ref add(Ref a, Ref b) {
    check_same(a, b, "add");
    Mat<S> out = val(a);
    const Mat<S>& vb = val(b);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += vb.v[i];
    return push(std::move(out), needs(a) || needs(b), {a.idx, b.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  g.acc_grad(p[0], g.nodes_[self].grad);
                  g.acc_grad(p[1], g.nodes_[self].grad);
                });
  }

  Ref sub(Ref a, Ref b) {
    check_same(a, b, "sub");
    Mat<S> out = val(a);
    const Mat<S>& vb = val(b);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= vb.v[i];
    return push(std::move(out), needs(a) || needs(b), {a.idx, b.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  g.acc_grad(p[0], g.nodes_[self].grad);
                  g.acc_grad_scaled(p[1], g.nodes_[self].grad, S(-1));
                });
  }

  Ref mul(Ref a, Ref b) {
    check_same(a, b, "mul");
    Mat<S> out = val(a);
    const Mat<S>& vb = val(b);
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= vb.v[i];
    return push(std::move(out), needs(a) || needs(b), {a.idx, b.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  if (g.needs_idx(p[0])) {
                    Mat<S> da = go;
                    const Mat<S>& vb2 = g.nodes_[p[1]].val;
                    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= vb2.v[i];
                    g.acc_grad(p[0], da);
                  }
                  if (g.needs_idx(p[1])) {
                    Mat<S> db = go;
                    const Mat<S>& va2 = g.nodes_[p[0]].val;
                    for (size_t i = 0; i < db.v.size(); ++i) db.v[i] *= va2.v[i];
                    g.acc_grad(p[1], db);
                  }
                });
  }

  // Elementwise minimum; the gradient follows the branch that attains the min.
  Ref min_elem(Ref a, Ref b) {
    check_same(a, b, "min_elem");
    Mat<S> out = val(a);
    const Mat<S>& vb = val(b);
    for (size_t i = 0; i < out.v.size(); ++i)
      out.v[i] = out.v[i] <= vb.v[i] ? out.v[i] : vb.v[i];
    return push(std::move(out), needs(a) || needs(b), {a.idx, b.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  const Mat<S>& va = g.nodes_[p[0]].val;
                  const Mat<S>& vb2 = g.nodes_[p[1]].val;
                  Mat<S> da = Mat<S>::zeros(go.rows, go.cols);
                  Mat<S> db = Mat<S>::zeros(go.rows, go.cols);
                  for (size_t i = 0; i < go.v.size(); ++i) {
                    if (va.v[i] <= vb2.v[i])
                      da.v[i] = go.v[i];
                    else
                      db.v[i] = go.v[i];
                  }
                  if (g.needs_idx(p[0])) g.acc_grad(p[0], da);
                  if (g.needs_idx(p[1])) g.acc_grad(p[1], db);
                });
  }

  // --- matrix ops -------------------------------------------------------------

  Ref matmul(Ref a, Ref b) {
    Mat<S> out = susd::matmul(val(a), val(b));
    return push(std::move(out), needs(a) || needs(b), {a.idx, b.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  if (g.needs_idx(p[0]))
                    g.acc_grad(p[0], susd::matmul(go, g.nodes_[p[1]].val, false, true));
                  if (g.needs_idx(p[1]))
                    g.acc_grad(p[1], susd::matmul(g.nodes_[p[0]].val, go, true, false));
                });
  }

  // Broadcast a 1 x c row vector over each row of a.
  Ref add_rowvec(Ref a, Ref bias) {
    const Mat<S>& va = val(a);
    const Mat<S>& vb = val(bias);
    if (vb.rows != 1 || vb.cols != va.cols)
      throw DimensionError("add_rowvec: bias must be 1 x cols");
    Mat<S> out = va;
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) out(r, c) += vb(0, c);
    return push(std::move(out), needs(a) || needs(bias), {a.idx, bias.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  if (g.needs_idx(p[0])) g.acc_grad(p[0], go);
                  if (g.needs_idx(p[1])) {
                    Mat<S> db(1, go.cols);
                    for (int r = 0; r < go.rows; ++r)
                      for (int c = 0; c < go.cols; ++c) db(0, c) += go(r, c);
                    g.acc_grad(p[1], db);
                  }
                });
  }

  // --- elementwise unary ops ----------------------------------------------------

  Ref relu(Ref a) {
    return unary(a, [](S x) { return x > S(0) ? x : S(0); },
                 [](S x, S) { return x > S(0) ? S(1) : S(0); });
  }

  Ref tanh_op(Ref a) {
    return unary(a, [](S x) { return std::tanh(x); },
                 [](S, S y) { return S(1) - y * y; });
  }

  Ref exp_op(Ref a) {
    return unary(a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
  }

  Ref log_op(Ref a) {
    return unary(a, [](S x) { return std::log(x); },
                 [](S x, S) { return S(1) / x; });
  }

  Ref square(Ref a) {
    return unary(a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
  }

  // d/dx sqrt(x) is taken as 0 at x == 0 (subgradient convention for norms).
  Ref sqrt_op(Ref a) {
    return unary(a, [](S x) { return std::sqrt(x); },
                 [](S x, S y) { return x == S(0) ? S(0) : S(1) / (S(2) * y); });
  }

  Ref neg(Ref a) {
    return unary(a, [](S x) { return -x; }, [](S, S) { return S(-1); });
  }

  Ref scale(Ref a, S c) {
    return unary(a, [c](S x) { return c * x; }, [c](S, S) { return c; });
  }

  Ref add_scalar(Ref a, S c) {
    return unary(a, [c](S x) { return x + c; }, [](S, S) { return S(1); });
  }

  // c - a, elementwise.
  Ref rsub_scalar(S c, Ref a) {
    return unary(a, [c](S x) { return c - x; }, [](S, S) { return S(-1); });
  }

  Ref min_scalar(Ref a, S c) {
    return unary(a, [c](S x) { return x < c ? x : c; },
                 [c](S x, S) { return x < c ? S(1) : S(0); });
  }

  Ref clamp(Ref a, S lo, S hi) {
    return unary(a, [lo, hi](S x) { return x < lo ? lo : (x > hi ? hi : x); },
                 [lo, hi](S x, S) { return (x >= lo && x <= hi) ? S(1) : S(0); });
  }

  // --- reductions and reshaping ---------------------------------------------------

  Ref sum_all(Ref a) {
    const Mat<S>& va = val(a);
    S s = S(0);
    for (S x : va.v) s += x;
    Mat<S> out(1, 1);
    out.v[0] = s;
    return push(std::move(out), needs(a), {a.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  const S go = g.nodes_[self].grad.v[0];
                  const Mat<S>& va2 = g.nodes_[p[0]].val;
                  g.acc_grad(p[0], Mat<S>::full(va2.rows, va2.cols, go));
                });
  }

  Ref mean_all(Ref a) {
    const Mat<S>& va = val(a);
    if (va.v.empty()) throw ContractError("mean_all: empty input");
    return scale(sum_all(a), S(1) / static_cast<S>(va.v.size()));
  }

  // Row-wise sum: (n x m) -> (n x 1).
  Ref row_sum(Ref a) {
    const Mat<S>& va = val(a);
    Mat<S> out(va.rows, 1);
    for (int r = 0; r < va.rows; ++r) {
      S s = S(0);
      for (int c = 0; c < va.cols; ++c) s += va(r, c);
      out(r, 0) = s;
    }
    return push(std::move(out), needs(a), {a.idx},
                [](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  const Mat<S>& va2 = g.nodes_[p[0]].val;
                  Mat<S> da(va2.rows, va2.cols);
                  for (int r = 0; r < da.rows; ++r)
                    for (int c = 0; c < da.cols; ++c) da(r, c) = go(r, 0);
                  g.acc_grad(p[0], da);
                });
  }

  Ref slice_rows(Ref a, int r0, int r1) {
    const Mat<S>& va = val(a);
    if (r0 < 0 || r1 > va.rows || r0 >= r1)
      throw DimensionError("slice_rows: bad range");
    Mat<S> out(r1 - r0, va.cols);
    for (int r = r0; r < r1; ++r)
      for (int c = 0; c < va.cols; ++c) out(r - r0, c) = va(r, c);
    return push(std::move(out), needs(a), {a.idx},
                [r0](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  const Mat<S>& va2 = g.nodes_[p[0]].val;
                  Mat<S> da = Mat<S>::zeros(va2.rows, va2.cols);
                  for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < go.cols; ++c) da(r0 + r, c) = go(r, c);
                  g.acc_grad(p[0], da);
                });
  }

  Ref slice_cols(Ref a, int c0, int c1) {
    const Mat<S>& va = val(a);
    if (c0 < 0 || c1 > va.cols || c0 >= c1)
      throw DimensionError("slice_cols: bad range");
    Mat<S> out(va.rows, c1 - c0);
    for (int r = 0; r < va.rows; ++r)
      for (int c = c0; c < c1; ++c) out(r, c - c0) = va(r, c);
    return push(std::move(out), needs(a), {a.idx},
                [c0](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  const Mat<S>& va2 = g.nodes_[p[0]].val;
                  Mat<S> da = Mat<S>::zeros(va2.rows, va2.cols);
                  for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < go.cols; ++c) da(r, c0 + c) = go(r, c);
                  g.acc_grad(p[0], da);
                });
  }

  Ref concat_cols(const std::vector<Ref>& parts) {
    if (parts.empty()) throw ContractError("concat_cols: no inputs");
    int rows = val(parts[0]).rows;
    int cols = 0;
    bool any = false;
    std::vector<int> pidx;
    for (Ref p : parts) {
      const Mat<S>& vp = val(p);
      if (vp.rows != rows) throw DimensionError("concat_cols: row mismatch");
      cols += vp.cols;
      any = any || needs(p);
      pidx.push_back(p.idx);
    }
    Mat<S> out(rows, cols);
    int off = 0;
    for (Ref p : parts) {
      const Mat<S>& vp = val(p);
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < vp.cols; ++c) out(r, off + c) = vp(r, c);
      off += vp.cols;
    }
    return push(std::move(out), any, pidx,
                [](Graph& g, int self, const std::vector<int>& p) {
                  const Mat<S>& go = g.nodes_[self].grad;
                  int off2 = 0;
                  for (int pi : p) {
                    const Mat<S>& vp = g.nodes_[pi].val;
                    if (g.needs_idx(pi)) {
                      Mat<S> dp(vp.rows, vp.cols);
                      for (int r = 0; r < vp.rows; ++r)
                        for (int c = 0; c < vp.cols; ++c) dp(r, c) = go(r, off2 + c);
                      g.acc_grad(pi, dp);
                    }
                    off2 += vp.cols;
                  }
                });
  }

  // --- access -----------------------------------------------------------------

  const Mat<S>& value(Ref r) const { return nodes_.at(r.idx).val; }

  // Gradient of the last backward() w.r.t. an arbitrary node (for tests).
  const Mat<S>& grad_of(Ref r) const {
    const Node& n = nodes_.at(r.idx);
    if (n.grad.v.empty()) throw ContractError("grad_of: node has no gradient");
    return n.grad;
  }

  // Runs reverse-mode accumulation from a scalar loss. Returns a gradient for
  // every registered parameter; parameters the loss does not reach get zeros.
  GradMap backward(Ref loss) {
    if (consumed_) throw ContractError("backward: graph already consumed");
    consumed_ = true;
    Node& root = nodes_.at(loss.idx);
    if (!root.val.is_scalar())
      throw ContractError("backward: loss must be a 1x1 scalar");
    root.grad = Mat<S>::full(1, 1, S(1));
    for (int i = loss.idx; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.needs_grad || n.grad.v.empty() || !n.bwd) continue;
      n.bwd(*this, i, n.parents);
    }
    GradMap grads;
    for (const auto& name : param_order_) {
      const Node& n = nodes_[params_.at(name)];
      if (n.grad.v.empty())
        grads.emplace(name, Mat<S>::zeros(n.val.rows, n.val.cols));
      else
        grads.emplace(name, n.grad);
    }
    return grads;
  }

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<S> val;
    Mat<S> grad;  // empty until touched by backward
    bool needs_grad = false;
    std::vector<int> parents;
    std::function<void(Graph&, int, const std::vector<int>&)> bwd;
  };

  Ref push(Mat<S> val, bool needs_grad, std::vector<int> parents,
           std::function<void(Graph&, int, const std::vector<int>&)> bwd) {
    Node n;
    n.val = std::move(val);
    n.needs_grad = needs_grad;
    n.parents = std::move(parents);
    n.bwd = std::move(bwd);
    nodes_.push_back(std::move(n));
    return Ref{static_cast<int>(nodes_.size()) - 1};
  }

  template <typename F, typename D>
  Ref unary(Ref a, F fwd, D dfn) {
    Mat<S> out = val(a);
    for (auto& x : out.v) x = fwd(x);
    return push(std::move(out), needs(a), {a.idx},
                [fwd, dfn](Graph& g, int self, const std::vector<int>& p) {
                  if (!g.needs_idx(p[0])) return;
                  const Mat<S>& go = g.nodes_[self].grad;
                  const Mat<S>& vx = g.nodes_[p[0]].val;
                  const Mat<S>& vy = g.nodes_[self].val;
                  Mat<S> da(go.rows, go.cols);
                  for (size_t i = 0; i < da.v.size(); ++i)
                    da.v[i] = go.v[i] * dfn(vx.v[i], vy.v[i]);
                  g.acc_grad(p[0], da);
                });
  }

  const Mat<S>& val(Ref r) const { return nodes_.at(r.idx).val; }
  bool needs(Ref r) const { return nodes_.at(r.idx).needs_grad; }
  bool needs_idx(int i) const { return nodes_[i].needs_grad; }

  void check_same(Ref a, Ref b, const char* op) const {
    if (!val(a).same_shape(val(b)))
      throw DimensionError(std::string(op) + ": shape mismatch");
  }

  void acc_grad(int idx, const Mat<S>& g) { acc_grad_scaled(idx, g, S(1)); }

  void acc_grad_scaled(int idx, const Mat<S>& g, S c) {
    Node& n = nodes_[idx];
    if (!n.needs_grad) return;
    if (n.grad.v.empty()) n.grad = Mat<S>::zeros(n.val.rows, n.val.cols);
    for (size_t i = 0; i < g.v.size(); ++i) n.grad.v[i] += c * g.v[i];
  }

  std::vector<Node> nodes_;
  std::unordered_map<std::string, int> params_;
  std::vector<std::string> param_order_;
  bool consumed_ = false;
};

}  // namespace susd
