#include "tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace dodo {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

NodePtr make_node(std::vector<std::size_t> shape, std::vector<double> data) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  return n;
}

bool want_grad(const Tensor& t) { return g_grad_enabled && t.requires_grad(); }

void attach(const NodePtr& out, std::vector<NodePtr> parents,
            std::function<void(TensorNode&)> backward) {
  out->requires_grad = true;
  out->parents = std::move(parents);
  out->backward_fn = std::move(backward);
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) fail(Errc::kShape, std::string(op) + ": expected a 2-D tensor, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    fail(Errc::kShape, std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool on) { g_grad_enabled = on; }

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  s += ")";
  return s;
}

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  auto node = make_node(std::move(shape), std::vector<double>(n, 0.0));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size())
    fail(Errc::kShape, "from_data: shape " + shape_str(shape) + " does not match data length " +
                           std::to_string(data.size()));
  auto node = make_node(std::move(shape), std::move(data));
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({}, {v}, requires_grad);
}

double Tensor::value() const {
  if (size() != 1) fail(Errc::kShape, "value: tensor is not a scalar, shape " + shape_str(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  return node_->data[i * node_->shape[1] + j];
}

void Tensor::backward() const {
  if (!node_) fail(Errc::kState, "backward: empty tensor");
  if (node_->data.size() != 1) fail(Errc::kShape, "backward: loss must be a scalar");

  // Iterative post-order DFS for a topological order.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> seen;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      TensorNode* p = n->parents[next++].get();
      if (seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* n = *it;
    if (n->requires_grad) n->ensure_grad();
    if (!n->backward_fn) continue;
    for (auto& p : n->parents)
      if (p->requires_grad) p->ensure_grad();
    n->backward_fn(*n);
  }
  // Release the graph; values and grads stay valid.
  for (TensorNode* n : order) {
    n->backward_fn = nullptr;
    n->parents.clear();
  }
}

// --- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2)
    fail(Errc::kShape, "matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    const double* arow = pa + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const double* brow = pb + kk * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  Tensor res = Tensor::from_data({m, n}, std::move(out));
  if (want_grad(a) || want_grad(b)) {
    attach(res.node(), {a.node(), b.node()}, [m, k, n](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      TensorNode& B = *o.parents[1];
      const double* g = o.grad.data();
      if (A.requires_grad) {
        // dA = g * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t kk = 0; kk < k; ++kk) {
            double acc = 0.0;
            const double* grow = g + i * n;
            const double* brow = B.data.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
            A.grad[i * k + kk] += acc;
          }
      }
      if (B.requires_grad) {
        // dB = A^T * g
        for (std::size_t i = 0; i < m; ++i) {
          const double* arow = A.data.data() + i * k;
          const double* grow = g + i * n;
          for (std::size_t kk = 0; kk < k; ++kk) {
            const double av = arow[kk];
            if (av == 0.0) continue;
            double* brow = B.grad.data() + kk * n;
            for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
          }
        }
      }
    });
  }
  return res;
}

Tensor transpose(const Tensor& a) {
  require_rank2(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
  Tensor res = Tensor::from_data({n, m}, std::move(out));
  if (want_grad(a)) {
    attach(res.node(), {a.node()}, [m, n](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      if (!A.requires_grad) return;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) A.grad[i * n + j] += o.grad[j * m + i];
    });
  }
  return res;
}

Tensor reshape(const Tensor& a, std::vector<std::size_t> shape) {
  if (shape_numel(shape) != a.size())
    fail(Errc::kShape, "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  Tensor res = Tensor::from_data(std::move(shape), a.data());
  if (want_grad(a)) {
    attach(res.node(), {a.node()}, [](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      if (!A.requires_grad) return;
      for (std::size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += o.grad[i];
    });
  }
  return res;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  Tensor res = Tensor::from_data(a.shape(), std::move(out));
  if (want_grad(a) || want_grad(b)) {
    attach(res.node(), {a.node(), b.node()}, [](TensorNode& o) {
      for (int p = 0; p < 2; ++p) {
        TensorNode& t = *o.parents[p];
        if (!t.requires_grad) continue;
        for (std::size_t i = 0; i < o.grad.size(); ++i) t.grad[i] += o.grad[i];
      }
    });
  }
  return res;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  Tensor res = Tensor::from_data(a.shape(), std::move(out));
  if (want_grad(a) || want_grad(b)) {
    attach(res.node(), {a.node(), b.node()}, [](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      TensorNode& B = *o.parents[1];
      if (A.requires_grad)
        for (std::size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += o.grad[i];
      if (B.requires_grad)
        for (std::size_t i = 0; i < o.grad.size(); ++i) B.grad[i] -= o.grad[i];
    });
  }
  return res;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  Tensor res = Tensor::from_data(a.shape(), std::move(out));
  if (want_grad(a) || want_grad(b)) {
    attach(res.node(), {a.node(), b.node()}, [](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      TensorNode& B = *o.parents[1];
      if (A.requires_grad)
        for (std::size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += o.grad[i] * B.data[i];
      if (B.requires_grad)
        for (std::size_t i = 0; i < o.grad.size(); ++i) B.grad[i] += o.grad[i] * A.data[i];
    });
  }
  return res;
}

Tensor scale(const Tensor& a, double c) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  Tensor res = Tensor::from_data(a.shape(), std::move(out));
  if (want_grad(a)) {
    attach(res.node(), {a.node()}, [c](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      if (!A.requires_grad) return;
      for (std::size_t i = 0; i < o.grad.size(); ++i) A.grad[i] += c * o.grad[i];
    });
  }
  return res;
}

Tensor add_bias_rows(const Tensor& x, const Tensor& bias) {
  require_rank2(x, "add_bias_rows");
  if (bias.rank() != 1 || bias.dim(0) != x.dim(1))
    fail(Errc::kShape, "add_bias_rows: bias " + shape_str(bias.shape()) + " does not fit " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.data()[i * n + j] + bias.data()[j];
  Tensor res = Tensor::from_data({m, n}, std::move(out));
  if (want_grad(x) || want_grad(bias)) {
    attach(res.node(), {x.node(), bias.node()}, [m, n](TensorNode& o) {
      TensorNode& X = *o.parents[0];
      TensorNode& B = *o.parents[1];
      if (X.requires_grad)
        for (std::size_t i = 0; i < o.grad.size(); ++i) X.grad[i] += o.grad[i];
      if (B.requires_grad)
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) B.grad[j] += o.grad[i * n + j];
    });
  }
  return res;
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = a.data()[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Tensor res = Tensor::from_data(a.shape(), std::move(out));
  if (want_grad(a)) {
    attach(res.node(), {a.node()}, [](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      if (!A.requires_grad) return;
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double y = o.data[i];
        A.grad[i] += o.grad[i] * y * (1.0 - y);
      }
    });
  }
  return res;
}

Tensor tanh_op(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.data()[i]);
  Tensor res = Tensor::from_data(a.shape(), std::move(out));
  if (want_grad(a)) {
    attach(res.node(), {a.node()}, [](TensorNode& o) {
      TensorNode& A = *o.parents[0];
      if (!A.requires_grad) return;
      for (std::size_t i = 0; i < o.grad.size(); ++i) {
        const double y = o.data[i];
        A.grad[i] += o.grad[i] * (1.0 - y * y);
      }
    });
  }
  return res;
}

Tensor softmax_rows(const Tensor& x, const std::vector<std::uint8_t>* mask) {
  require_rank2(x, "softmax_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (mask && mask->size() != m * n)
    fail(Errc::kShape, "softmax_rows: mask size " + std::to_string(mask->size()) + " does not match " +
                           shape_str(x.shape()));
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    const std::uint8_t* mrow = mask ? mask->data() + i * n : nullptr;
    double mx = -std::numeric_limits<double>::infinity();
    std::size_t visible = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) continue;
      ++visible;
      mx = std::max(mx, row[j]);
    }
    if (visible == 0)
      fail(Errc::kMask, "softmax_rows: row " + std::to_string(i) + " has no unmasked entries");
    double denom = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) continue;
      const double e = std::exp(row[j] - mx);
      out[i * n + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (mrow && !mrow[j]) continue;
      out[i * n + j] /= denom;
    }
  }
  Tensor res = Tensor::from_data({m, n}, std::move(out));
  if (want_grad(x)) {
    std::vector<std::uint8_t> mask_copy;
    if (mask) mask_copy = *mask;
    attach(res.node(), {x.node()}, [m, n, mask_copy = std::move(mask_copy)](TensorNode& o) {
      TensorNode& X = *o.parents[0];
      if (!X.requires_grad) return;
      const bool has_mask = !mask_copy.empty();
      for (std::size_t i = 0; i < m; ++i) {
        const double* y = o.data.data() + i * n;
        const double* g = o.grad.data() + i * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (has_mask && !mask_copy[i * n + j]) continue;
          dot += g[j] * y[j];
        }
        for (std::size_t j = 0; j < n; ++j) {
          if (has_mask && !mask_copy[i * n + j]) continue;
          X.grad[i * n + j] += y[j] * (g[j] - dot);
        }
      }
    });
  }
  return res;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require_rank2(x, "layer_norm");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (gain.rank() != 1 || gain.dim(0) != n || bias.rank() != 1 || bias.dim(0) != n)
    fail(Errc::kShape, "layer_norm: gain/bias must be length " + std::to_string(n));
  std::vector<double> out(m * n);
  std::vector<double> xhat(m * n);
  std::vector<double> inv_std(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      const double h = (row[j] - mu) * is;
      xhat[i * n + j] = h;
      out[i * n + j] = gain.data()[j] * h + bias.data()[j];
    }
  }
  Tensor res = Tensor::from_data({m, n}, std::move(out));
  if (want_grad(x) || want_grad(gain) || want_grad(bias)) {
    attach(res.node(), {x.node(), gain.node(), bias.node()},
           [m, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode& o) {
             TensorNode& X = *o.parents[0];
             TensorNode& G = *o.parents[1];
             TensorNode& B = *o.parents[2];
             for (std::size_t i = 0; i < m; ++i) {
               const double* g = o.grad.data() + i * n;
               const double* h = xhat.data() + i * n;
               if (G.requires_grad)
                 for (std::size_t j = 0; j < n; ++j) G.grad[j] += g[j] * h[j];
               if (B.requires_grad)
                 for (std::size_t j = 0; j < n; ++j) B.grad[j] += g[j];
               if (X.requires_grad) {
                 double sum_dh = 0.0, sum_dh_h = 0.0;
                 for (std::size_t j = 0; j < n; ++j) {
                   const double dh = g[j] * G.data[j];
                   sum_dh += dh;
                   sum_dh_h += dh * h[j];
                 }
                 const double inv_n = 1.0 / static_cast<double>(n);
                 for (std::size_t j = 0; j < n; ++j) {
                   const double dh = g[j] * G.data[j];
                   X.grad[i * n + j] += inv_std[i] * (dh - inv_n * sum_dh - h[j] * inv_n * sum_dh_h);
                 }
               }
             }
           });
  }
  return res;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank2(table, "gather_rows");
  const std::size_t n = table.dim(0), d = table.dim(1);
  std::vector<double> out(ids.size() * d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= n)
      fail(Errc::kIndex, "gather_rows: index " + std::to_string(ids[i]) + " out of range " + std::to_string(n));
    std::copy_n(table.data().data() + ids[i] * d, d, out.data() + i * d);
  }
  Tensor res = Tensor::from_data({ids.size(), d}, std::move(out));
  if (want_grad(table)) {
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    attach(res.node(), {table.node()}, [d, idx = std::move(idx)](TensorNode& o) {
      TensorNode& T = *o.parents[0];
      if (!T.requires_grad) return;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) T.grad[idx[i] * d + j] += o.grad[i * d + j];
    });
  }
  return res;
}

Tensor gather_elems(const Tensor& v, std::span<const std::size_t> ids) {
  if (v.rank() != 1) fail(Errc::kShape, "gather_elems: expected 1-D tensor, got " + shape_str(v.shape()));
  std::vector<double> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= v.dim(0))
      fail(Errc::kIndex, "gather_elems: index " + std::to_string(ids[i]) + " out of range " +
                             std::to_string(v.dim(0)));
    out[i] = v.data()[ids[i]];
  }
  Tensor res = Tensor::from_data({ids.size()}, std::move(out));
  if (want_grad(v)) {
    std::vector<std::size_t> idx(ids.begin(), ids.end());
    attach(res.node(), {v.node()}, [idx = std::move(idx)](TensorNode& o) {
      TensorNode& V = *o.parents[0];
      if (!V.requires_grad) return;
      for (std::size_t i = 0; i < idx.size(); ++i) V.grad[idx[i]] += o.grad[i];
    });
  }
  return res;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) fail(Errc::kInvalidArg, "concat_rows: no parts");
  const std::size_t d = parts[0].dim(1);
  std::size_t rows = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_rows");
    if (p.dim(1) != d) fail(Errc::kShape, "concat_rows: column mismatch");
    rows += p.dim(0);
    any_grad |= want_grad(p);
  }
  std::vector<double> out(rows * d);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    std::copy(p.data().begin(), p.data().end(), out.begin() + off);
    off += p.size();
  }
  Tensor res = Tensor::from_data({rows, d}, std::move(out));
  if (any_grad) {
    std::vector<NodePtr> parents;
    for (const Tensor& p : parts) parents.push_back(p.node());
    attach(res.node(), std::move(parents), [](TensorNode& o) {
      std::size_t off = 0;
      for (auto& pn : o.parents) {
        TensorNode& P = *pn;
        if (P.requires_grad)
          for (std::size_t i = 0; i < P.data.size(); ++i) P.grad[i] += o.grad[off + i];
        off += P.data.size();
      }
    });
  }
  return res;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) fail(Errc::kInvalidArg, "concat_cols: no parts");
  const std::size_t m = parts[0].dim(0);
  std::size_t cols = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != m) fail(Errc::kShape, "concat_cols: row mismatch");
    cols += p.dim(1);
    any_grad |= want_grad(p);
  }
  std::vector<double> out(m * cols);
  std::size_t off = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t i = 0; i < m; ++i)
      std::copy_n(p.data().data() + i * w, w, out.data() + i * cols + off);
    off += w;
  }
  Tensor res = Tensor::from_data({m, cols}, std::move(out));
  if (any_grad) {
    std::vector<NodePtr> parents;
    std::vector<std::size_t> widths;
    for (const Tensor& p : parts) {
      parents.push_back(p.node());
      widths.push_back(p.dim(1));
    }
    attach(res.node(), std::move(parents), [m, cols, widths = std::move(widths)](TensorNode& o) {
      std::size_t off = 0;
      for (std::size_t pi = 0; pi < o.parents.size(); ++pi) {
        TensorNode& P = *o.parents[pi];
        const std::size_t w = widths[pi];
        if (P.requires_grad)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) P.grad[i * w + j] += o.grad[i * cols + off + j];
        off += w;
      }
    });
  }
  return res;
}

Tensor concat_vec(std::span<const Tensor> parts) {
  if (parts.empty()) fail(Errc::kInvalidArg, "concat_vec: no parts");
  std::size_t total = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    if (p.rank() != 1) fail(Errc::kShape, "concat_vec: expected 1-D parts");
    total += p.dim(0);
    any_grad |= want_grad(p);
  }
  std::vector<double> out;
  out.reserve(total);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  Tensor res = Tensor::from_data({total}, std::move(out));
  if (any_grad) {
    std::vector<NodePtr> parents;
    for (const Tensor& p : parts) parents.push_back(p.node());
    attach(res.node(), std::move(parents), [](TensorNode& o) {
      std::size_t off = 0;
      for (auto& pn : o.parents) {
        TensorNode& P = *pn;
        if (P.requires_grad)
          for (std::size_t i = 0; i < P.data.size(); ++i) P.grad[i] += o.grad[off + i];
        off += P.data.size();
      }
    });
  }
  return res;
}

Tensor slice_rows(const Tensor& x, std::size_t off, std::size_t len) {
  require_rank2(x, "slice_rows");
  if (off + len > x.dim(0)) fail(Errc::kShape, "slice_rows: range out of bounds");
  const std::size_t d = x.dim(1);
  std::vector<double> out(x.data().begin() + off * d, x.data().begin() + (off + len) * d);
  Tensor res = Tensor::from_data({len, d}, std::move(out));
  if (want_grad(x)) {
    attach(res.node(), {x.node()}, [off, d](TensorNode& o) {
      TensorNode& X = *o.parents[0];
      if (!X.requires_grad) return;
      for (std::size_t i = 0; i < o.grad.size(); ++i) X.grad[off * d + i] += o.grad[i];
    });
  }
  return res;
}

Tensor slice_cols(const Tensor& x, std::size_t off, std::size_t len) {
  require_rank2(x, "slice_cols");
  if (off + len > x.dim(1)) fail(Errc::kShape, "slice_cols: range out of bounds");
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * len);
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.data().data() + i * n + off, len, out.data() + i * len);
  Tensor res = Tensor::from_data({m, len}, std::move(out));
  if (want_grad(x)) {
    attach(res.node(), {x.node()}, [m, n, off, len](TensorNode& o) {
      TensorNode& X = *o.parents[0];
      if (!X.requires_grad) return;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < len; ++j) X.grad[i * n + off + j] += o.grad[i * len + j];
    });
  }
  return res;
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  Tensor res = Tensor::scalar(acc);
  if (want_grad(x)) {
    attach(res.node(), {x.node()}, [](TensorNode& o) {
      TensorNode& X = *o.parents[0];
      if (!X.requires_grad) return;
      for (std::size_t i = 0; i < X.grad.size(); ++i) X.grad[i] += o.grad[0];
    });
  }
  return res;
}

Tensor mean(const Tensor& x) {
  if (x.size() == 0) fail(Errc::kInvalidArg, "mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor stop_grad(const Tensor& x) {
  // Forward identity, no parents: the backward contribution to x is zero.
  return Tensor::from_data(x.shape(), x.data());
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  require_rank2(logits, "cross_entropy");
  const std::size_t t = logits.dim(0), v = logits.dim(1);
  if (targets.size() != t)
    fail(Errc::kShape, "cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                           std::to_string(t) + " rows");
  std::vector<double> probs(t * v);
  double total = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    const int target = targets[i];
    if (target < 0 || static_cast<std::size_t>(target) >= v)
      fail(Errc::kIndex, "cross_entropy: target " + std::to_string(target) + " out of range " + std::to_string(v));
    const double* row = logits.data().data() + i * v;
    double mx = row[0];
    for (std::size_t j = 1; j < v; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < v; ++j) {
      const double e = std::exp(row[j] - mx);
      probs[i * v + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < v; ++j) probs[i * v + j] /= denom;
    total += std::log(denom) + mx - row[target];
  }
  Tensor res = Tensor::scalar(total / static_cast<double>(t));
  if (want_grad(logits)) {
    std::vector<int> tgt(targets.begin(), targets.end());
    attach(res.node(), {logits.node()},
           [t, v, probs = std::move(probs), tgt = std::move(tgt)](TensorNode& o) {
             TensorNode& L = *o.parents[0];
             if (!L.requires_grad) return;
             const double g = o.grad[0] / static_cast<double>(t);
             for (std::size_t i = 0; i < t; ++i) {
               for (std::size_t j = 0; j < v; ++j) L.grad[i * v + j] += g * probs[i * v + j];
               L.grad[i * v + static_cast<std::size_t>(tgt[i])] -= g;
             }
           });
  }
  return res;
}

Tensor scatter_cols(const Tensor& v, std::size_t rows, std::size_t cols, std::size_t off) {
  if (v.rank() != 1) fail(Errc::kShape, "scatter_cols: expected 1-D source, got " + shape_str(v.shape()));
  const std::size_t k = v.dim(0);
  if (off + k > cols)
    fail(Errc::kShape, "scatter_cols: " + std::to_string(k) + " values at offset " + std::to_string(off) +
                           " exceed " + std::to_string(cols) + " columns");
  std::vector<double> out(rows * cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < k; ++j) out[i * cols + off + j] = v.data()[j];
  Tensor res = Tensor::from_data({rows, cols}, std::move(out));
  if (want_grad(v)) {
    attach(res.node(), {v.node()}, [rows, cols, off, k](TensorNode& o) {
      TensorNode& V = *o.parents[0];
      if (!V.requires_grad) return;
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows; ++i) acc += o.grad[i * cols + off + j];
        V.grad[j] += acc;
      }
    });
  }
  return res;
}

Tensor add_const_at(const Tensor& x, std::size_t row, std::size_t col, double delta) {
  require_rank2(x, "add_const_at");
  if (row >= x.dim(0) || col >= x.dim(1)) fail(Errc::kIndex, "add_const_at: cell out of range");
  std::vector<double> out = x.data();
  out[row * x.dim(1) + col] += delta;
  Tensor res = Tensor::from_data(x.shape(), std::move(out));
  if (want_grad(x)) {
    attach(res.node(), {x.node()}, [](TensorNode& o) {
      TensorNode& X = *o.parents[0];
      if (!X.requires_grad) return;
      for (std::size_t i = 0; i < o.grad.size(); ++i) X.grad[i] += o.grad[i];
    });
  }
  return res;
}

}  // namespace dodo
