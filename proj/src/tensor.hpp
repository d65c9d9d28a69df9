#ifndef DODO_TENSOR_HPP_
#define DODO_TENSOR_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace dodo {

// Dense row-major f64 tensor with reverse-mode autodiff. Graphs are built
// define-by-run: each op records its parents and a backward closure.
// Gradients accumulate additively; Tensor::backward() frees the graph.

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;  // same size as data once touched by backward
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(TensorNode&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

// Thread-local switch: when disabled, ops compute values but record no graph.
bool grad_enabled();
void set_grad_enabled(bool on);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }

 private:
  bool prev_;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t size() const { return node_->data.size(); }

  std::vector<double>& data() { return node_->data; }
  const std::vector<double>& data() const { return node_->data; }
  double value() const;  // scalar convenience
  double at(std::size_t i) const { return node_->data[i]; }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::vector<double>& grad() const { return node_->grad; }
  void zero_grad() { if (node_) node_->grad.assign(node_->data.size(), 0.0); }

  // Reverse pass from a scalar; populates grad on every reachable
  // requires_grad tensor, then releases the graph edges.
  void backward() const;

  NodePtr node() const { return node_; }
  explicit Tensor(NodePtr n) : node_(std::move(n)) {}

 private:
  NodePtr node_;
};

std::string shape_str(const std::vector<std::size_t>& shape);

// --- ops ------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, std::vector<std::size_t> shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_bias_rows(const Tensor& x, const Tensor& bias);

Tensor sigmoid(const Tensor& a);
Tensor tanh_op(const Tensor& a);

// Row-wise softmax with an optional visibility mask (1 = attendable).
// Masked entries are exactly zero in the output; a fully masked row is a
// degenerate-mask error. Stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& x, const std::vector<std::uint8_t>* mask = nullptr);

// Layer normalization over the last axis of a 2-D tensor, one gain/bias per column.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);

// Gather rows of a 2-D tensor (also serves as embedding lookup).
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
// Gather elements of a 1-D tensor.
Tensor gather_elems(const Tensor& v, std::span<const std::size_t> ids);

Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_vec(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t off, std::size_t len);
Tensor slice_cols(const Tensor& x, std::size_t off, std::size_t len);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Forward-identity whose backward contributes nothing to x.
Tensor stop_grad(const Tensor& x);

// Mean negative log-likelihood of targets under row-wise softmax(logits).
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

// Broadcast a length-k vector into columns [off, off+k) of a (rows, cols)
// tensor; remaining columns are zero. Backward sums each column over rows.
Tensor scatter_cols(const Tensor& v, std::size_t rows, std::size_t cols, std::size_t off);

// Adds a constant at one cell; backward is the identity. Diagnostic hook used
// to probe attention logits with finite differences.
Tensor add_const_at(const Tensor& x, std::size_t row, std::size_t col, double delta);

}  // namespace dodo

#endif  // DODO_TENSOR_HPP_
