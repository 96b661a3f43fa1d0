#include "gicisad/numerics/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "gicisad/errors.hpp"

namespace gicisad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

thread_local bool g_grad_enabled = true;

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

bool needs_grad(const Tensor& t) { return t.defined() && t.requires_grad(); }

// Strides of `shape` right-aligned against an output of rank `rank`, with
// zero stride on broadcast axes.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  const std::size_t offset = out.size() - shape.size();
  for (std::size_t i = shape.size(); i-- > 0;) {
    strides[i + offset] = shape[i] == 1 ? 0 : stride;
    stride *= shape[i];
  }
  return strides;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ContractViolation("cannot broadcast " + shape_string(a) + " with " +
                              shape_string(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Visits every output index in row-major order together with the matching
// flat offsets into the two broadcast operands.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
  const std::size_t total = numel(out);
  if (total == 0) return;
  const std::size_t rank = out.size();
  if (rank == 0) {
    f(0, 0, 0);
    return;
  }
  // Innermost axis handled as a tight loop.
  const std::size_t inner = out[rank - 1];
  const std::size_t ia_step = sa[rank - 1];
  const std::size_t ib_step = sb[rank - 1];
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oa = 0, ob = 0;
  for (std::size_t i = 0; i < total; i += inner) {
    for (std::size_t j = 0; j < inner; ++j) f(i + j, oa + j * ia_step, ob + j * ib_step);
    for (std::size_t d = rank - 1; d-- > 0;) {
      ++idx[d];
      oa += sa[d];
      ob += sb[d];
      if (idx[d] < out[d]) break;
      oa -= sa[d] * idx[d];
      ob -= sb[d] * idx[d];
      idx[d] = 0;
    }
  }
}

template <typename Fwd, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  if (a.shape() == b.shape()) {
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
    return make_result(a.shape(), std::move(out), {a, b}, [a, b, da, db](detail::Node& self) {
      const auto& g = self.grad;
      const auto av = a.values();
      const auto bv = b.values();
      if (needs_grad(a)) {
        auto& ga = a.node()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * da(av[i], bv[i]);
      }
      if (needs_grad(b)) {
        auto& gb = b.node()->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * db(av[i], bv[i]);
      }
    });
  }
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  auto sa = broadcast_strides(a.shape(), out_shape);
  auto sb = broadcast_strides(b.shape(), out_shape);
  std::vector<double> out(numel(out_shape));
  {
    const auto av = a.values();
    const auto bv = b.values();
    for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      out[i] = fwd(av[ia], bv[ib]);
    });
  }
  Shape shape_copy = out_shape;
  return make_result(std::move(out_shape), std::move(out), {a, b},
                     [a, b, da, db, sa, sb, shape_copy](detail::Node& self) {
                       const auto& g = self.grad;
                       const auto av = a.values();
                       const auto bv = b.values();
                       std::vector<double>* ga = needs_grad(a) ? &a.node()->ensure_grad() : nullptr;
                       std::vector<double>* gb = needs_grad(b) ? &b.node()->ensure_grad() : nullptr;
                       for_each_broadcast(shape_copy, sa, sb,
                                          [&](std::size_t i, std::size_t ia, std::size_t ib) {
                                            if (ga) (*ga)[ia] += g[i] * da(av[ia], bv[ib]);
                                            if (gb) (*gb)[ib] += g[i] * db(av[ia], bv[ib]);
                                          });
                     });
}

template <typename Fwd, typename Deriv>
Tensor unary_op(const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [x, deriv](detail::Node& self) {
    const auto& g = self.grad;
    const auto xv = x.values();
    auto& gx = x.node()->ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], self.value[i]);
  });
}

// Splits `shape` around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  require(axis < shape.size(), "axis out of range for shape " + shape_string(shape));
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value.assign(numel(shape), 0.0);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  require(values.size() == numel(shape), "value count " + std::to_string(values.size()) +
                                             " does not match shape " + shape_string(shape));
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{value}, requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

const Shape& Tensor::shape() const {
  require(defined(), "use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t axis) const {
  require(axis < rank(), "axis " + std::to_string(axis) + " out of range for shape " +
                             shape_string(shape()));
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

std::span<const double> Tensor::values() const {
  require(defined(), "use of an undefined tensor");
  return node_->value;
}

std::span<double> Tensor::mutable_values() {
  require(defined(), "use of an undefined tensor");
  return node_->value;
}

double Tensor::item() const {
  require(size() == 1, "item() on a tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

std::span<const double> Tensor::grad() const {
  require(defined(), "use of an undefined tensor");
  return node_->grad;
}

std::span<double> Tensor::mutable_grad() {
  require(defined(), "use of an undefined tensor");
  return node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (node_) node_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->value, false); }

void Tensor::backward() const {
  require(size() == 1, "backward() needs a scalar, got shape " + shape_string(shape()));
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order of the graph.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  node_->ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
}

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> parents,
                   std::function<void(detail::Node&)> backward) {
  Tensor t;
  t.node_ = std::make_shared<detail::Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(values);
  if (!g_grad_enabled) return t;
  const bool any = std::any_of(parents.begin(), parents.end(), needs_grad);
  if (!any) return t;
  t.node_->requires_grad = true;
  t.node_->parents.reserve(parents.size());
  for (auto& p : parents) t.node_->parents.push_back(p.node_ptr());
  t.node_->backward = std::move(backward);
  return t;
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() noexcept { return g_grad_enabled; }

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary_op(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double offset) {
  return unary_op(
      x, [offset](double v) { return v + offset; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  return unary_op(
      x, [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; },
      [negative_slope](double v, double) { return v > 0.0 ? 1.0 : negative_slope; });
}

Tensor square(const Tensor& x) {
  return unary_op(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return y == 0.0 ? 0.0 : 0.5 / y; });
}

Tensor exp(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor tanh(const Tensor& x) {
  return unary_op(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor smooth_l1(const Tensor& x) {
  return unary_op(
      x,
      [](double v) {
        const double a = std::abs(v);
        return a < 1.0 ? 0.5 * v * v : a - 0.5;
      },
      [](double v, double) { return std::abs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0); });
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& x, const Tensor& w) {
  require(w.rank() == 2, "matmul weight must be 2-D, got " + shape_string(w.shape()));
  require(x.rank() >= 1 && x.shape().back() == w.dim(0),
          "matmul shape mismatch " + shape_string(x.shape()) + " x " + shape_string(w.shape()));
  const std::size_t k = w.dim(0);
  const std::size_t n = w.dim(1);
  const std::size_t m = x.size() / k;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(x.values().data(), m, k) *
                                       ConstMap(w.values().data(), k, n);
  return make_result(std::move(out_shape), std::move(out), {x, w},
                     [x, w, m, k, n](detail::Node& self) {
                       ConstMap g(self.grad.data(), m, n);
                       if (needs_grad(x)) {
                         MutMap(x.node()->ensure_grad().data(), m, k).noalias() +=
                             g * ConstMap(w.values().data(), k, n).transpose();
                       }
                       if (needs_grad(w)) {
                         MutMap(w.node()->ensure_grad().data(), k, n).noalias() +=
                             ConstMap(x.values().data(), m, k).transpose() * g;
                       }
                     });
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(1),
          "bmm shape mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  const std::size_t batch = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  std::vector<double> out(batch * m * n);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  for (std::size_t i = 0; i < batch; ++i) {
    MutMap(out.data() + i * m * n, m, n).noalias() =
        ConstMap(av + i * m * k, m, k) * ConstMap(bv + i * k * n, k, n);
  }
  return make_result(Shape{batch, m, n}, std::move(out), {a, b},
                     [a, b, batch, m, k, n](detail::Node& self) {
                       const double* av = a.values().data();
                       const double* bv = b.values().data();
                       double* ga = needs_grad(a) ? a.node()->ensure_grad().data() : nullptr;
                       double* gb = needs_grad(b) ? b.node()->ensure_grad().data() : nullptr;
                       for (std::size_t i = 0; i < batch; ++i) {
                         ConstMap g(self.grad.data() + i * m * n, m, n);
                         if (ga) {
                           MutMap(ga + i * m * k, m, k).noalias() +=
                               g * ConstMap(bv + i * k * n, k, n).transpose();
                         }
                         if (gb) {
                           MutMap(gb + i * k * n, k, n).noalias() +=
                               ConstMap(av + i * m * k, m, k).transpose() * g;
                         }
                       }
                     });
}

Tensor mix(const Tensor& x, const Tensor& m, std::size_t axis) {
  require(m.rank() == 2, "mix matrix must be 2-D");
  const AxisSplit s = split_at(x.shape(), axis);
  require(m.dim(1) == s.extent, "mix matrix " + shape_string(m.shape()) +
                                    " does not match axis " + std::to_string(axis) +
                                    " of " + shape_string(x.shape()));
  const std::size_t p = m.dim(0);
  Shape out_shape = x.shape();
  out_shape[axis] = p;
  std::vector<double> out(s.outer * p * s.inner);
  const double* xv = x.values().data();
  ConstMap mm(m.values().data(), p, s.extent);
  if (s.inner == 1) {
    MutMap(out.data(), s.outer, p).noalias() = ConstMap(xv, s.outer, s.extent) * mm.transpose();
  } else {
    using Row = Eigen::Map<Eigen::VectorXd>;
    using ConstRow = Eigen::Map<const Eigen::VectorXd>;
    const auto n = static_cast<Eigen::Index>(s.inner);
    for (std::size_t o = 0; o < s.outer; ++o) {
      const double* xo = xv + o * s.extent * s.inner;
      for (std::size_t i = 0; i < p; ++i) {
        Row dst(out.data() + (o * p + i) * s.inner, n);
        for (std::size_t k = 0; k < s.extent; ++k) {
          const double w = mm(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
          dst += w * ConstRow(xo + k * s.inner, n);
        }
      }
    }
  }
  return make_result(std::move(out_shape), std::move(out), {x, m},
                     [x, m, s, p](detail::Node& self) {
                       const double* xv = x.values().data();
                       ConstMap mm(m.values().data(), p, s.extent);
                       double* gx = needs_grad(x) ? x.node()->ensure_grad().data() : nullptr;
                       double* gm = needs_grad(m) ? m.node()->ensure_grad().data() : nullptr;
                       if (s.inner == 1) {
                         ConstMap g(self.grad.data(), s.outer, p);
                         if (gx) MutMap(gx, s.outer, s.extent).noalias() += g * mm;
                         if (gm) {
                           MutMap(gm, p, s.extent).noalias() +=
                               g.transpose() * ConstMap(xv, s.outer, s.extent);
                         }
                         return;
                       }
                       for (std::size_t o = 0; o < s.outer; ++o) {
                         ConstMap g(self.grad.data() + o * p * s.inner, p, s.inner);
                         if (gx) {
                           const auto n = static_cast<Eigen::Index>(s.inner);
                           for (std::size_t i = 0; i < p; ++i) {
                             Eigen::Map<const Eigen::VectorXd> gi(
                                 self.grad.data() + (o * p + i) * s.inner, n);
                             for (std::size_t k = 0; k < s.extent; ++k) {
                               const double w = mm(static_cast<Eigen::Index>(i),
                                                   static_cast<Eigen::Index>(k));
                               Eigen::Map<Eigen::VectorXd>(
                                   gx + (o * s.extent + k) * s.inner, n) += w * gi;
                             }
                           }
                         }
                         if (gm) {
                           MutMap(gm, p, s.extent).noalias() +=
                               g * ConstMap(xv + o * s.extent * s.inner, s.extent, s.inner)
                                       .transpose();
                         }
                       }
                     });
}

// ---------------------------------------------------------------------------
// Reductions and shape ops

Tensor sum(const Tensor& x) {
  const auto xv = x.values();
  double total = 0.0;
  for (double v : xv) total += v;
  return make_result(Shape{}, {total}, {x}, [x](detail::Node& self) {
    auto& gx = x.node()->ensure_grad();
    for (double& g : gx) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.size() > 0, "mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_last(const Tensor& x) {
  require(x.rank() >= 1, "sum_last needs rank >= 1");
  const std::size_t n = x.shape().back();
  const std::size_t rows = n == 0 ? 0 : x.size() / n;
  Shape out_shape(x.shape().begin(), x.shape().end() - 1);
  std::vector<double> out(rows, 0.0);
  const auto xv = x.values();
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += xv[r * n + j];
    out[r] = acc;
  }
  return make_result(std::move(out_shape), std::move(out), {x}, [x, n, rows](detail::Node& self) {
    auto& gx = x.node()->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += self.grad[r];
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  std::vector<double> out(s.outer * s.inner, 0.0);
  const auto xv = x.values();
  const double inv = 1.0 / static_cast<double>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o)
    for (std::size_t e = 0; e < s.extent; ++e)
      for (std::size_t i = 0; i < s.inner; ++i)
        out[o * s.inner + i] += xv[(o * s.extent + e) * s.inner + i] * inv;
  return make_result(std::move(out_shape), std::move(out), {x}, [x, s, inv](detail::Node& self) {
    auto& gx = x.node()->ensure_grad();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i)
          gx[(o * s.extent + e) * s.inner + i] += self.grad[o * s.inner + i] * inv;
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.size(), "cannot reshape " + shape_string(x.shape()) + " to " +
                                        shape_string(shape));
  const auto xv = x.values();
  return make_result(std::move(shape), std::vector<double>(xv.begin(), xv.end()), {x},
                     [x](detail::Node& self) {
                       auto& gx = x.node()->ensure_grad();
                       for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
                     });
}

Tensor expand(const Tensor& x, const Shape& shape) {
  const Shape out_shape = broadcast_shape(x.shape(), shape);
  require(out_shape == shape, "cannot expand " + shape_string(x.shape()) + " to " +
                                  shape_string(shape));
  auto sx = broadcast_strides(x.shape(), shape);
  std::vector<std::size_t> zero(shape.size(), 0);
  std::vector<double> out(numel(shape));
  const auto xv = x.values();
  for_each_broadcast(shape, sx, zero,
                     [&](std::size_t i, std::size_t ix, std::size_t) { out[i] = xv[ix]; });
  return make_result(shape, std::move(out), {x}, [x, sx, zero, shape](detail::Node& self) {
    auto& gx = x.node()->ensure_grad();
    for_each_broadcast(shape, sx, zero,
                       [&](std::size_t i, std::size_t ix, std::size_t) { gx[ix] += self.grad[i]; });
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat of zero tensors");
  const Shape& first = parts.front().shape();
  require(axis < first.size(), "concat axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> chunk(parts.size());
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Shape& s = parts[p].shape();
    require(s.size() == first.size(), "concat rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis) require(s[d] == first[d], "concat shape mismatch on axis " + std::to_string(d));
    }
    out_shape[axis] += s[axis];
    chunk[p] = split_at(s, axis).extent * split_at(s, axis).inner;
  }
  const std::size_t outer = split_at(first, axis).outer;
  const std::size_t row = std::accumulate(chunk.begin(), chunk.end(), std::size_t{0});
  std::vector<double> out(outer * row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t offset = o * row;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const auto v = parts[p].values();
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(o * chunk[p]), chunk[p],
                  out.begin() + static_cast<std::ptrdiff_t>(offset));
      offset += chunk[p];
    }
  }
  return make_result(std::move(out_shape), std::move(out), parts,
                     [parts, chunk, outer, row](detail::Node& self) {
                       std::size_t base = 0;
                       for (std::size_t p = 0; p < parts.size(); ++p) {
                         if (needs_grad(parts[p])) {
                           auto& g = parts[p].node()->ensure_grad();
                           for (std::size_t o = 0; o < outer; ++o)
                             for (std::size_t i = 0; i < chunk[p]; ++i)
                               g[o * chunk[p] + i] += self.grad[o * row + base + i];
                         }
                         base += chunk[p];
                       }
                     });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_at(x.shape(), axis);
  require(start + length <= s.extent, "slice out of range on axis " + std::to_string(axis));
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  std::vector<double> out(s.outer * length * s.inner);
  const auto xv = x.values();
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * s.extent + start) * s.inner),
                length * s.inner, out.begin() + static_cast<std::ptrdiff_t>(o * length * s.inner));
  }
  return make_result(std::move(out_shape), std::move(out), {x},
                     [x, s, start, length](detail::Node& self) {
                       auto& gx = x.node()->ensure_grad();
                       for (std::size_t o = 0; o < s.outer; ++o)
                         for (std::size_t i = 0; i < length * s.inner; ++i)
                           gx[(o * s.extent + start) * s.inner + i] += self.grad[o * length * s.inner + i];
                     });
}

// ---------------------------------------------------------------------------
// Softmax family

Tensor masked_softmax(const Tensor& logits, std::span<const unsigned char> mask) {
  require(logits.rank() >= 2, "masked_softmax needs rank >= 2");
  const std::size_t k = logits.shape().back();
  require(logits.dim(logits.rank() - 2) == k, "masked_softmax needs square trailing axes");
  require(mask.size() == k * k, "mask size does not match logits");
  const std::size_t rows = logits.size() / k;
  std::vector<double> out(logits.size(), 0.0);
  const auto lv = logits.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const unsigned char* mrow = mask.data() + (r % k) * k;
    const double* in = lv.data() + r * k;
    double peak = -INFINITY;
    bool supported = false;
    for (std::size_t j = 0; j < k; ++j) {
      if (!mrow[j]) continue;
      supported = true;
      if (!std::isfinite(in[j])) throw NumericError("masked_softmax logit is not finite");
      peak = std::max(peak, in[j]);
    }
    require(supported, "masked_softmax row without support");
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      if (mrow[j]) {
        out[r * k + j] = std::exp(in[j] - peak);
        z += out[r * k + j];
      }
    }
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] /= z;
  }
  return make_result(logits.shape(), std::move(out), {logits},
                     [logits, k, rows](detail::Node& self) {
                       auto& gl = logits.node()->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = self.value.data() + r * k;
                         const double* g = self.grad.data() + r * k;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < k; ++j) dot += y[j] * g[j];
                         for (std::size_t j = 0; j < k; ++j) gl[r * k + j] += y[j] * (g[j] - dot);
                       }
                     });
}

Tensor softmax_last(const Tensor& logits) {
  const std::size_t k = logits.shape().back();
  const std::size_t rows = logits.size() / k;
  std::vector<double> out(logits.size());
  const auto lv = logits.values();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = lv.data() + r * k;
    const double peak = *std::max_element(in, in + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += out[r * k + j] = std::exp(in[j] - peak);
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] /= z;
  }
  return make_result(logits.shape(), std::move(out), {logits},
                     [logits, k, rows](detail::Node& self) {
                       auto& gl = logits.node()->ensure_grad();
                       for (std::size_t r = 0; r < rows; ++r) {
                         const double* y = self.value.data() + r * k;
                         const double* g = self.grad.data() + r * k;
                         double dot = 0.0;
                         for (std::size_t j = 0; j < k; ++j) dot += y[j] * g[j];
                         for (std::size_t j = 0; j < k; ++j) gl[r * k + j] += y[j] * (g[j] - dot);
                       }
                     });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  require(logits.rank() == 2, "cross_entropy expects (batch, classes) logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  require(targets.size() == batch, "cross_entropy target count mismatch");
  for (std::size_t t : targets) {
    require(t < classes, "class id " + std::to_string(t) + " out of range for " +
                             std::to_string(classes) + " classes");
  }
  const auto lv = logits.values();
  std::vector<double> probs(lv.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < batch; ++r) {
    const double* in = lv.data() + r * classes;
    const double peak = *std::max_element(in, in + classes);
    double z = 0.0;
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(in[j] - peak);
    const double log_z = peak + std::log(z);
    for (std::size_t j = 0; j < classes; ++j) probs[r * classes + j] = std::exp(in[j] - log_z);
    loss += log_z - in[targets[r]];
  }
  loss /= static_cast<double>(batch);
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result(Shape{}, {loss}, {logits},
                     [logits, probs = std::move(probs), tgt, batch, classes](detail::Node& self) {
                       auto& gl = logits.node()->ensure_grad();
                       const double g = self.grad[0] / static_cast<double>(batch);
                       for (std::size_t r = 0; r < batch; ++r) {
                         for (std::size_t j = 0; j < classes; ++j) {
                           const double onehot = j == tgt[r] ? 1.0 : 0.0;
                           gl[r * classes + j] += g * (probs[r * classes + j] - onehot);
                         }
                       }
                     });
}

}  // namespace gicisad
