#ifndef OTE_GRAPH_HPP
#define OTE_GRAPH_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ote/error.hpp"
#include "ote/tensor.hpp"

namespace ote {

struct NodeId {
  std::uint32_t index = 0;
};

template <typename S>
using GradMap = std::map<std::string, Tensor<S>>;

// Define-by-run computation graph with reverse-mode differentiation.
// Nodes are created in topological order (an op's inputs always exist
// before the op), values are computed eagerly, and backward() replays the
// recorded ops once in reverse creation order. A Graph is single-owner:
// it is rebuilt for every batch and never shared between threads.
template <typename S>
class Graph {
public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // When set, every op output is checked for NaN/Inf as it is produced.
  void set_check_finite(bool on) { check_finite_ = on; }

  std::size_t node_count() const { return nodes_.size(); }

  NodeId constant(Tensor<S> v) {
    return make_leaf(std::move(v), /*needs_grad=*/false, "const");
  }

  // Registers a named trainable leaf. The value is copied; gradients are
  // reported per name by parameter_gradients().
  NodeId parameter(const std::string& name, const Tensor<S>& v) {
    if (params_.count(name)) {
      throw ContractError("parameter registered twice: " + name);
    }
    NodeId id = make_leaf(v, /*needs_grad=*/true, "param");
    params_.emplace(name, id.index);
    return id;
  }

  const Tensor<S>& value(NodeId id) const { return nodes_[id.index].value; }

  const Tensor<S>& grad(NodeId id) const {
    const Node& n = nodes_[id.index];
    if (!n.grad_ready) {
      throw ContractError("gradient not computed for this node");
    }
    return n.grad;
  }

  NodeId add(NodeId a, NodeId b) { return binary_pointwise(a, b, Op::kAdd); }
  NodeId sub(NodeId a, NodeId b) { return binary_pointwise(a, b, Op::kSub); }
  NodeId hadamard(NodeId a, NodeId b) {
    return binary_pointwise(a, b, Op::kMul);
  }

  NodeId scale(NodeId a, S factor) {
    const Tensor<S>& av = value(a);
    Tensor<S> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * factor;
    NodeId id = make_op(std::move(out), {a}, "scale");
    set_backprop(id, [a, id, factor](Graph& g) {
      g.accumulate_scaled(a, g.nodes_[id.index].grad, factor);
    });
    return id;
  }

  NodeId add_scalar(NodeId a, S c) {
    const Tensor<S>& av = value(a);
    Tensor<S> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + c;
    NodeId id = make_op(std::move(out), {a}, "add_scalar");
    set_backprop(id, [a, id](Graph& g) {
      g.accumulate_scaled(a, g.nodes_[id.index].grad, S(1));
    });
    return id;
  }

  // (m,k)x(k,n) -> (m,n), or (m,k)x(k) -> (m).
  NodeId matmul(NodeId a, NodeId b) {
    const Tensor<S>& A = value(a);
    const Tensor<S>& B = value(b);
    if (!A.is_matrix() || (!B.is_matrix() && !B.is_vector())) {
      throw ShapeError("matmul expects matrix x (matrix|vector), got " +
                       shape_str(A.shape()) + " x " + shape_str(B.shape()));
    }
    const std::size_t m = A.rows(), k = A.cols();
    const std::size_t inner = B.is_matrix() ? B.rows() : B.shape()[0];
    if (k != inner) {
      throw ShapeError("matmul inner dimensions disagree: " +
                       shape_str(A.shape()) + " x " + shape_str(B.shape()));
    }
    Tensor<S> out;
    if (B.is_matrix()) {
      const std::size_t n = B.cols();
      out = Tensor<S>(Shape{m, n});
      mat_mat(A.data(), B.data(), out.data(), m, k, n);
    } else {
      out = Tensor<S>(Shape{m});
      mat_vec(A.data(), B.data(), out.data(), m, k);
    }
    NodeId id = make_op(std::move(out), {a, b}, "matmul");
    set_backprop(id, [a, b, id](Graph& g) { g.matmul_backward(a, b, id); });
    return id;
  }

  NodeId sigmoid(NodeId a) {
    const Tensor<S>& av = value(a);
    Tensor<S> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) {
      out[i] = stable_sigmoid(av[i]);
    }
    NodeId id = make_op(std::move(out), {a}, "sigmoid");
    set_backprop(id, [a, id](Graph& g) {
      const Node& n = g.nodes_[id.index];
      if (!g.wants_grad(a)) return;
      Tensor<S>& ga = g.grad_buf(a);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        S y = n.value[i];
        ga[i] += n.grad[i] * y * (S(1) - y);
      }
    });
    return id;
  }

  // ELU with alpha = 1: x for x >= 0, expm1(x) otherwise.
  NodeId elu(NodeId a) {
    const Tensor<S>& av = value(a);
    Tensor<S> out(av.shape());
    for (std::size_t i = 0; i < av.size(); ++i) {
      S x = av[i];
      out[i] = x >= S(0) ? x : static_cast<S>(std::expm1(static_cast<double>(x)));
    }
    NodeId id = make_op(std::move(out), {a}, "elu");
    set_backprop(id, [a, id](Graph& g) {
      const Node& n = g.nodes_[id.index];
      if (!g.wants_grad(a)) return;
      const Tensor<S>& x = g.nodes_[a.index].value;
      Tensor<S>& ga = g.grad_buf(a);
      for (std::size_t i = 0; i < n.value.size(); ++i) {
        S d = x[i] >= S(0) ? S(1) : n.value[i] + S(1);
        ga[i] += n.grad[i] * d;
      }
    });
    return id;
  }

  // Max-subtraction stabilized softmax over a vector.
  NodeId softmax(NodeId a) {
    const Tensor<S>& av = value(a);
    if (!av.is_vector() || av.size() == 0) {
      throw ShapeError("softmax expects a nonempty vector, got " +
                       shape_str(av.shape()));
    }
    Tensor<S> out(av.shape());
    S mx = av[0];
    for (std::size_t i = 1; i < av.size(); ++i) mx = std::max(mx, av[i]);
    S total = S(0);
    for (std::size_t i = 0; i < av.size(); ++i) {
      out[i] = static_cast<S>(std::exp(static_cast<double>(av[i] - mx)));
      total += out[i];
    }
    for (std::size_t i = 0; i < av.size(); ++i) out[i] /= total;
    NodeId id = make_op(std::move(out), {a}, "softmax");
    set_backprop(id, [a, id](Graph& g) {
      const Node& n = g.nodes_[id.index];
      if (!g.wants_grad(a)) return;
      Tensor<S>& ga = g.grad_buf(a);
      S dot = S(0);
      for (std::size_t i = 0; i < n.value.size(); ++i)
        dot += n.grad[i] * n.value[i];
      for (std::size_t i = 0; i < n.value.size(); ++i)
        ga[i] += n.value[i] * (n.grad[i] - dot);
    });
    return id;
  }

  // -ln(q[target]) with the probability clamped to >= 1e-12.
  NodeId cross_entropy(NodeId q, std::size_t target) {
    const Tensor<S>& qv = value(q);
    if (!qv.is_vector()) {
      throw ShapeError("cross_entropy expects a probability vector, got " +
                       shape_str(qv.shape()));
    }
    if (target >= qv.size()) {
      throw IndexError("cross_entropy target " + std::to_string(target) +
                       " out of range for " + std::to_string(qv.size()) +
                       " classes");
    }
    double p = std::max(static_cast<double>(qv[target]), 1e-12);
    Tensor<S> out = Tensor<S>::scalar(static_cast<S>(-std::log(p)));
    NodeId id = make_op(std::move(out), {q}, "cross_entropy");
    set_backprop(id, [q, id, target, p](Graph& g) {
      if (!g.wants_grad(q)) return;
      // Sub-gradient of the clamped log: -1/p at the clamp as well.
      g.grad_buf(q)[target] +=
          g.nodes_[id.index].grad[0] * static_cast<S>(-1.0 / p);
    });
    return id;
  }

  // Concatenates vectors into one vector, or matrices with equal row
  // counts along the last axis. Backward splits the gradient.
  NodeId concat(const std::vector<NodeId>& parts) {
    if (parts.empty()) throw ContractError("concat of zero tensors");
    bool vectors = value(parts[0]).is_vector();
    if (vectors) {
      std::size_t total = 0;
      for (NodeId p : parts) {
        if (!value(p).is_vector()) {
          throw ShapeError("concat mixes vectors with " +
                           shape_str(value(p).shape()));
        }
        total += value(p).size();
      }
      Tensor<S> out(Shape{total});
      std::size_t off = 0;
      for (NodeId p : parts) {
        const Tensor<S>& v = value(p);
        for (std::size_t i = 0; i < v.size(); ++i) out[off + i] = v[i];
        off += v.size();
      }
      NodeId id = make_op(std::move(out), parts, "concat");
      std::vector<NodeId> ins = parts;
      set_backprop(id, [ins, id](Graph& g) {
        const Tensor<S>& gr = g.nodes_[id.index].grad;
        std::size_t off = 0;
        for (NodeId p : ins) {
          std::size_t len = g.nodes_[p.index].value.size();
          if (g.wants_grad(p)) {
            Tensor<S>& gp = g.grad_buf(p);
            for (std::size_t i = 0; i < len; ++i) gp[i] += gr[off + i];
          }
          off += len;
        }
      });
      return id;
    }
    // matrix case
    std::size_t rows = value(parts[0]).rows();
    std::size_t total_cols = 0;
    for (NodeId p : parts) {
      const Tensor<S>& v = value(p);
      if (!v.is_matrix() || v.rows() != rows) {
        throw ShapeError("concat along columns needs equal row counts: " +
                         shape_str(value(parts[0]).shape()) + " vs " +
                         shape_str(v.shape()));
      }
      total_cols += v.cols();
    }
    Tensor<S> out(Shape{rows, total_cols});
    std::size_t coff = 0;
    for (NodeId p : parts) {
      const Tensor<S>& v = value(p);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < v.cols(); ++c)
          out.at(r, coff + c) = v.at(r, c);
      coff += v.cols();
    }
    NodeId id = make_op(std::move(out), parts, "concat");
    std::vector<NodeId> ins = parts;
    set_backprop(id, [ins, id, rows](Graph& g) {
      const Tensor<S>& gr = g.nodes_[id.index].grad;
      std::size_t coff = 0;
      std::size_t total_cols = gr.cols();
      (void)total_cols;
      for (NodeId p : ins) {
        std::size_t pc = g.nodes_[p.index].value.cols();
        if (g.wants_grad(p)) {
          Tensor<S>& gp = g.grad_buf(p);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < pc; ++c)
              gp.at(r, c) += gr.at(r, coff + c);
        }
        coff += pc;
      }
    });
    return id;
  }

  // Column j of a (d x V) table as a d-vector. The gradient accumulates
  // into just that column, so repeated lookups of one id add up.
  NodeId lookup_column(NodeId table, std::size_t col) {
    const Tensor<S>& T = value(table);
    if (!T.is_matrix()) {
      throw ShapeError("lookup expects a matrix table, got " +
                       shape_str(T.shape()));
    }
    if (col >= T.cols()) {
      throw IndexError("lookup id " + std::to_string(col) +
                       " out of range for table with " +
                       std::to_string(T.cols()) + " columns");
    }
    const std::size_t d = T.rows();
    Tensor<S> out(Shape{d});
    for (std::size_t i = 0; i < d; ++i) out[i] = T.at(i, col);
    NodeId id = make_op(std::move(out), {table}, "lookup");
    set_backprop(id, [table, id, col, d](Graph& g) {
      if (!g.wants_grad(table)) return;
      const Tensor<S>& gr = g.nodes_[id.index].grad;
      Tensor<S>& gt = g.grad_buf(table);
      for (std::size_t i = 0; i < d; ++i) gt.at(i, col) += gr[i];
    });
    return id;
  }

  NodeId sum(NodeId a) {
    const Tensor<S>& av = value(a);
    S total = S(0);
    for (std::size_t i = 0; i < av.size(); ++i) total += av[i];
    NodeId id = make_op(Tensor<S>::scalar(total), {a}, "sum");
    set_backprop(id, [a, id](Graph& g) {
      if (!g.wants_grad(a)) return;
      S gr = g.nodes_[id.index].grad[0];
      Tensor<S>& ga = g.grad_buf(a);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += gr;
    });
    return id;
  }

  // Mean of scalar nodes, used to average per-token losses.
  NodeId mean(const std::vector<NodeId>& scalars) {
    if (scalars.empty()) throw ContractError("mean of zero terms");
    S total = S(0);
    for (NodeId s : scalars) total += value(s).scalar_value();
    S inv = S(1) / static_cast<S>(scalars.size());
    NodeId id = make_op(Tensor<S>::scalar(total * inv), scalars, "mean");
    std::vector<NodeId> ins = scalars;
    set_backprop(id, [ins, id, inv](Graph& g) {
      S gr = g.nodes_[id.index].grad[0] * inv;
      for (NodeId s : ins) {
        if (g.wants_grad(s)) g.grad_buf(s)[0] += gr;
      }
    });
    return id;
  }

  // Reverse sweep from a scalar loss. Fills gradients for every node that
  // the loss depends on; each recorded op runs exactly once.
  void backward(NodeId loss) {
    Node& ln = nodes_[loss.index];
    if (!ln.value.is_scalar()) {
      throw ContractError("backward requires a scalar loss, got shape " +
                          shape_str(ln.value.shape()));
    }
    for (Node& n : nodes_) {
      n.reached = false;
      n.grad_ready = false;
    }
    mark_reachable(loss.index);
    grad_buf(loss).fill(S(1));
    for (std::uint32_t i = loss.index + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (n.reached && n.grad_ready && n.backprop) n.backprop(*this);
    }
  }

  // Gradients for all registered parameters; parameters the loss never
  // touched get zeros of matching shape.
  GradMap<S> parameter_gradients() const {
    GradMap<S> out;
    for (const auto& [name, idx] : params_) {
      const Node& n = nodes_[idx];
      if (n.grad_ready) {
        out.emplace(name, n.grad);
      } else {
        out.emplace(name, Tensor<S>::zeros(n.value.shape()));
      }
    }
    return out;
  }

  const std::map<std::string, std::uint32_t>& parameters() const {
    return params_;
  }

private:
  enum class Op { kAdd, kSub, kMul };

  struct Node {
    Tensor<S> value;
    Tensor<S> grad;
    std::vector<std::uint32_t> inputs;
    std::function<void(Graph&)> backprop;
    const char* op = "";
    bool needs_grad = false;
    bool reached = false;
    bool grad_ready = false;
  };

  static S stable_sigmoid(S x) {
    double xd = static_cast<double>(x);
    if (xd >= 0) {
      return static_cast<S>(1.0 / (1.0 + std::exp(-xd)));
    }
    double e = std::exp(xd);
    return static_cast<S>(e / (1.0 + e));
  }

  static void mat_mat(const S* A, const S* B, S* C, std::size_t m,
                      std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
      S* crow = C + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        S a = A[i * k + p];
        const S* brow = B + p * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
      }
    }
  }

  static void mat_vec(const S* A, const S* x, S* y, std::size_t m,
                      std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
      const S* arow = A + i * k;
      S acc = S(0);
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * x[p];
      y[i] = acc;
    }
  }

  NodeId make_leaf(Tensor<S> v, bool needs_grad, const char* op) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    n.op = op;
    nodes_.push_back(std::move(n));
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  NodeId make_op(Tensor<S> v, std::vector<NodeId> inputs, const char* op) {
    if (check_finite_ && !v.all_finite()) {
      throw DiagnosticError(std::string("non-finite values produced by op ") +
                            op);
    }
    Node n;
    n.value = std::move(v);
    n.op = op;
    for (NodeId in : inputs) {
      n.inputs.push_back(in.index);
      n.needs_grad = n.needs_grad || nodes_[in.index].needs_grad;
    }
    nodes_.push_back(std::move(n));
    return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  void set_backprop(NodeId id, std::function<void(Graph&)> fn) {
    if (nodes_[id.index].needs_grad) {
      nodes_[id.index].backprop = std::move(fn);
    }
  }

  bool wants_grad(NodeId id) const { return nodes_[id.index].needs_grad; }

  Tensor<S>& grad_buf(NodeId id) { return grad_buf(id.index); }

  Tensor<S>& grad_buf(std::uint32_t idx) {
    Node& n = nodes_[idx];
    if (!n.grad_ready) {
      n.grad = Tensor<S>::zeros(n.value.shape());
      n.grad_ready = true;
    }
    return n.grad;
  }

  void accumulate_scaled(NodeId dst, const Tensor<S>& g, S factor) {
    if (!wants_grad(dst)) return;
    Tensor<S>& gd = grad_buf(dst);
    for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += g[i] * factor;
  }

  NodeId binary_pointwise(NodeId a, NodeId b, Op op) {
    const Tensor<S>& av = value(a);
    const Tensor<S>& bv = value(b);
    if (!av.same_shape(bv)) {
      throw ShapeError("elementwise op on mismatched shapes " +
                       shape_str(av.shape()) + " vs " + shape_str(bv.shape()));
    }
    Tensor<S> out(av.shape());
    switch (op) {
      case Op::kAdd:
        for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
        break;
      case Op::kSub:
        for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
        break;
      case Op::kMul:
        for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
        break;
    }
    const char* name = op == Op::kAdd ? "add" : op == Op::kSub ? "sub" : "mul";
    NodeId id = make_op(std::move(out), {a, b}, name);
    set_backprop(id, [a, b, id, op](Graph& g) {
      const Tensor<S>& gr = g.nodes_[id.index].grad;
      switch (op) {
        case Op::kAdd:
          g.accumulate_scaled(a, gr, S(1));
          g.accumulate_scaled(b, gr, S(1));
          break;
        case Op::kSub:
          g.accumulate_scaled(a, gr, S(1));
          g.accumulate_scaled(b, gr, S(-1));
          break;
        case Op::kMul: {
          const Tensor<S>& av = g.nodes_[a.index].value;
          const Tensor<S>& bv = g.nodes_[b.index].value;
          if (g.wants_grad(a)) {
            Tensor<S>& ga = g.grad_buf(a);
            for (std::size_t i = 0; i < gr.size(); ++i)
              ga[i] += gr[i] * bv[i];
          }
          if (g.wants_grad(b)) {
            Tensor<S>& gb = g.grad_buf(b);
            for (std::size_t i = 0; i < gr.size(); ++i)
              gb[i] += gr[i] * av[i];
          }
          break;
        }
      }
    });
    return id;
  }

  void matmul_backward(NodeId a, NodeId b, NodeId out) {
    const Tensor<S>& A = nodes_[a.index].value;
    const Tensor<S>& B = nodes_[b.index].value;
    const Tensor<S>& G = nodes_[out.index].grad;
    const std::size_t m = A.rows(), k = A.cols();
    if (B.is_matrix()) {
      const std::size_t n = B.cols();
      if (wants_grad(a)) {
        // dA += G * B^T
        Tensor<S>& gA = grad_buf(a);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            S acc = S(0);
            for (std::size_t j = 0; j < n; ++j)
              acc += G.at(i, j) * B.at(p, j);
            gA.at(i, p) += acc;
          }
      }
      if (wants_grad(b)) {
        // dB += A^T * G
        Tensor<S>& gB = grad_buf(b);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            S a_ip = A.at(i, p);
            for (std::size_t j = 0; j < n; ++j)
              gB.at(p, j) += a_ip * G.at(i, j);
          }
      }
    } else {
      if (wants_grad(a)) {
        // dA += outer(g, x)
        Tensor<S>& gA = grad_buf(a);
        for (std::size_t i = 0; i < m; ++i) {
          S gi = G[i];
          for (std::size_t p = 0; p < k; ++p) gA.at(i, p) += gi * B[p];
        }
      }
      if (wants_grad(b)) {
        // dx += A^T * g
        Tensor<S>& gB = grad_buf(b);
        for (std::size_t i = 0; i < m; ++i) {
          S gi = G[i];
          const S* arow = A.data() + i * k;
          for (std::size_t p = 0; p < k; ++p) gB[p] += gi * arow[p];
        }
      }
    }
  }

  void mark_reachable(std::uint32_t root) {
    std::vector<std::uint32_t> stack{root};
    nodes_[root].reached = true;
    while (!stack.empty()) {
      std::uint32_t cur = stack.back();
      stack.pop_back();
      for (std::uint32_t in : nodes_[cur].inputs) {
        if (!nodes_[in].reached) {
          nodes_[in].reached = true;
          stack.push_back(in);
        }
      }
    }
  }

  std::vector<Node> nodes_;
  std::map<std::string, std::uint32_t> params_;
  bool check_finite_ = false;
};

// L2 norm over every entry of every gradient, accumulated in double in a
// fixed order so results are reproducible.
template <typename S>
double global_grad_norm(const GradMap<S>& grads) {
  double total = 0.0;
  for (const auto& [name, g] : grads) {
    (void)name;
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = static_cast<double>(g[i]);
      total += v * v;
    }
  }
  return std::sqrt(total);
}

// Scales every gradient by max_norm/norm when the global norm exceeds
// max_norm. The comparison carries a tiny relative slack so that the
// rounding of a first clip never triggers a second one: clipping is
// exactly idempotent.
template <typename S>
void global_norm_clip(GradMap<S>& grads, double max_norm) {
  if (max_norm <= 0) throw ValidationError("max_norm must be positive");
  double norm = global_grad_norm(grads);
  if (norm <= max_norm * (1.0 + 1e-12)) return;
  double factor = max_norm / norm;
  for (auto& [name, g] : grads) {
    (void)name;
    for (std::size_t i = 0; i < g.size(); ++i)
      g[i] = static_cast<S>(static_cast<double>(g[i]) * factor);
  }
}

}  // namespace ote

#endif  // OTE_GRAPH_HPP
