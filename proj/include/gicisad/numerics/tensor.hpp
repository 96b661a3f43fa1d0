#pragma once

// Dense row-major arrays with tape-free reverse-mode differentiation.
//
// Every op returns a new Tensor whose node remembers its parents and a
// closure that scatters the node's gradient into them. Calling backward()
// on a scalar walks that graph in reverse topological order. Parameters
// are leaf tensors created with requires_grad = true; their gradients
// accumulate until zero_grad() is called.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gicisad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {
struct Node;
}

class Tensor {
 public:
  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> values() const;
  /// Writable view of the values; only meaningful on leaves.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  /// Empty span when no gradient has been accumulated yet.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Reverse-mode sweep from this scalar.
  void backward() const;

  /// Copy of the values with no graph attached.
  Tensor detach() const;

  detail::Node* node() const noexcept { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const noexcept { return node_; }

 private:
  friend Tensor make_result(Shape shape, std::vector<double> values,
                            std::vector<Tensor> parents,
                            std::function<void(detail::Node&)> backward);
  std::shared_ptr<detail::Node> node_;
};

namespace detail {
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad;
  }
};
}  // namespace detail

/// Builds an op result. The backward closure receives the result node and
/// must accumulate into the parents' grads; it is dropped when no parent
/// needs a gradient or when gradients are disabled.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward);

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

// Elementwise ops with numpy-style broadcasting.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double offset);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& x, double c) { return scale(x, c); }
inline Tensor operator*(double c, const Tensor& x) { return scale(x, c); }

Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.2);
Tensor square(const Tensor& x);
/// Gradient taken as 0 where the result is 0.
Tensor sqrt(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor tanh(const Tensor& x);
/// 0.5 x^2 for |x| < 1, |x| - 0.5 otherwise.
Tensor smooth_l1(const Tensor& x);

/// x (..., k) times w (k, n) -> (..., n).
Tensor matmul(const Tensor& x, const Tensor& w);
/// a (B, m, k) times b (B, k, n) -> (B, m, n).
Tensor bmm(const Tensor& a, const Tensor& b);
/// Applies the matrix m (p, n) along `axis` of x, whose extent must be n.
/// The result has extent p on that axis.
Tensor mix(const Tensor& x, const Tensor& m, std::size_t axis);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
/// Sum over the last axis.
Tensor sum_last(const Tensor& x);
/// Mean over `axis`.
Tensor mean_axis(const Tensor& x, std::size_t axis);

Tensor reshape(const Tensor& x, Shape shape);
/// Broadcast x to `shape` (numpy rules).
Tensor expand(const Tensor& x, const Shape& shape);
Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
/// Entries [start, start + length) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

/// Softmax over the last axis restricted to entries where mask != 0;
/// masked entries are exactly zero. The last two axes of `logits` must be
/// (K, K) and `mask` is a K*K row-major matrix. Each row needs at least one
/// unmasked entry.
Tensor masked_softmax(const Tensor& logits, std::span<const unsigned char> mask);
Tensor softmax_last(const Tensor& logits);
/// Mean cross-entropy of logits (B, classes) against class indices.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

}  // namespace gicisad
