#ifndef AMFSL_TENSOR_H_
#define AMFSL_TENSOR_H_

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace amfsl {

using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Dense row-major float64 tensor with an optional gradient buffer. Copies
// share storage; use clone() for a deep copy. Like std::span, constness
// applies to the handle, not to the elements.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  // Shorthand for a trainable tensor.
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  // Writable access for optimizers and finite-difference probes. Any tape
  // that consumed this tensor is stale afterwards.
  std::span<double> mutable_values() const;

  bool requires_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad() const;
  void zero_grad() const;

  double item() const;
  double at(std::size_t i) const { return values()[i]; }
  double at(std::size_t r, std::size_t c) const {
    return values()[r * cols() + c];
  }

  Tensor clone() const;
  Tensor detached() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };

  explicit Tensor(std::shared_ptr<Storage> impl) : impl_(std::move(impl)) {}

  std::shared_ptr<Storage> impl_;
};

enum class ElementwiseKind { kAdd, kSub, kMul, kRelu, kExp, kLog, kNeg };
enum class ReduceKind { kSum, kMean, kMax };

// Records differentiable ops in execution order. A tape is built per
// forward pass and replayed backwards once (or more, see backward()).
//
// Every op returns a fresh tensor. The output requires a gradient iff the
// tape is recording and at least one input requires a gradient; only such
// ops are recorded.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }
  // Smallest |x| passed through relu on this tape; +inf if none.
  double relu_margin() const { return relu_margin_; }

  // Allocates the output of a custom op: gradient buffer present iff any
  // input requires one and the tape records.
  Tensor make_output(Shape shape, std::vector<double> values,
                     std::span<const Tensor> inputs) const;
  // Registers a custom op. `backward` reads output.grad() and accumulates
  // into the inputs' grad buffers. Ignored if output carries no gradient.
  void record(const Tensor& output, BackwardFn backward);

  // a[m x k] * b[k x n]
  Tensor matmul(const Tensor& a, const Tensor& b);

  Tensor elementwise(ElementwiseKind kind, const Tensor& a);
  Tensor elementwise(ElementwiseKind kind, const Tensor& a, const Tensor& b);
  Tensor add(const Tensor& a, const Tensor& b) {
    return elementwise(ElementwiseKind::kAdd, a, b);
  }
  Tensor sub(const Tensor& a, const Tensor& b) {
    return elementwise(ElementwiseKind::kSub, a, b);
  }
  Tensor mul(const Tensor& a, const Tensor& b) {
    return elementwise(ElementwiseKind::kMul, a, b);
  }
  Tensor relu(const Tensor& a) { return elementwise(ElementwiseKind::kRelu, a); }
  Tensor exp(const Tensor& a) { return elementwise(ElementwiseKind::kExp, a); }
  Tensor log(const Tensor& a) { return elementwise(ElementwiseKind::kLog, a); }
  Tensor neg(const Tensor& a) { return elementwise(ElementwiseKind::kNeg, a); }

  // t[m x n] + bias[n], bias broadcast over rows.
  Tensor add_row(const Tensor& t, const Tensor& bias);
  // t * s and t + s for a one-element tensor s.
  Tensor mul_scalar(const Tensor& t, const Tensor& s);
  Tensor add_scalar(const Tensor& t, const Tensor& s);

  // Reduces over `axis` of a rank-1 or rank-2 tensor, or over all elements
  // when axis is empty. Max routes the adjoint to the first maximal entry.
  Tensor reduce(ReduceKind kind, const Tensor& t,
                std::optional<std::size_t> axis = std::nullopt);
  Tensor sum(const Tensor& t, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceKind::kSum, t, axis);
  }
  Tensor mean(const Tensor& t, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceKind::kMean, t, axis);
  }
  Tensor max(const Tensor& t, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceKind::kMax, t, axis);
  }

  // out.flat[i] = src.flat[index[i]], or 0 where index[i] < 0.
  Tensor gather(const Tensor& src, std::span<const std::ptrdiff_t> index,
                Shape shape);
  Tensor gather_rows(const Tensor& src, std::span<const std::size_t> rows);

  // out[i][j] = ||a_i - b_j||^2 for a[m x d], b[n x d].
  Tensor pairwise_sq_dist(const Tensor& a, const Tensor& b);
  // out[i][j] = cos(a_i, b_j). Zero rows are a domain error.
  Tensor pairwise_cosine(const Tensor& a, const Tensor& b);

  // Column-wise batch normalization of t[m x n] using batch statistics
  // (biased variance), followed by a per-column affine map.
  Tensor batch_norm(const Tensor& t, const Tensor& scale, const Tensor& shift,
                    double eps = 1e-5);

  // Fills every requires_grad tensor reachable from `root` with d root / d t.
  // Intermediate gradients are reset first; leaf gradients accumulate, so
  // calling backward twice without zeroing leaves doubles them.
  void backward(const Tensor& root);

 private:
  struct Node {
    Tensor output;
    BackwardFn backward;
  };

  bool recording_;
  double relu_margin_ = std::numeric_limits<double>::infinity();
  std::vector<Node> nodes_;
};

}  // namespace amfsl

#endif  // AMFSL_TENSOR_H_
