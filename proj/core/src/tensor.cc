#include "amfsl/tensor.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace amfsl {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  return fmt::format("[{}]", fmt::join(shape, "x"));
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::vector<double> values(element_count(shape), 0.0);
  return from(std::move(shape), std::move(values), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  if (values.size() != element_count(shape)) {
    throw ShapeError(fmt::format("tensor of shape {} given {} values",
                                 shape_string(shape), values.size()));
  }
  auto impl = std::make_shared<Storage>();
  impl->shape = std::move(shape);
  impl->values = std::move(values);
  impl->requires_grad = requires_grad;
  if (requires_grad) impl->grad.assign(impl->values.size(), 0.0);
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  return from(std::move(shape), std::move(values), true);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->values.size(); }

std::size_t Tensor::rows() const {
  const auto& s = shape();
  return s.size() == 2 ? s[0] : 1;
}

std::size_t Tensor::cols() const {
  const auto& s = shape();
  return s.empty() ? 1 : s.back();
}

std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::mutable_values() const { return impl_->values; }
bool Tensor::requires_grad() const { return impl_->requires_grad; }
std::span<const double> Tensor::grad() const { return impl_->grad; }
std::span<double> Tensor::mutable_grad() const { return impl_->grad; }

void Tensor::zero_grad() const {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (size() != 1) {
    throw ShapeError(fmt::format("item() on tensor of shape {}",
                                 shape_string(shape())));
  }
  return impl_->values[0];
}

Tensor Tensor::clone() const {
  auto impl = std::make_shared<Storage>(*impl_);
  return Tensor(std::move(impl));
}

Tensor Tensor::detached() const {
  return from(shape(), impl_->values, false);
}

// ---------------------------------------------------------------------------
// Tape plumbing

namespace {

bool any_requires_grad(std::span<const Tensor> inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(fmt::format("{}: shape mismatch {} vs {}", op,
                                 shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
}

void require_matrix(const char* op, const Tensor& t) {
  if (t.rank() != 2) {
    throw ShapeError(fmt::format("{}: expected a matrix, got shape {}", op,
                                 shape_string(t.shape())));
  }
}

void require_scalar(const char* op, const Tensor& t) {
  if (t.size() != 1) {
    throw ShapeError(fmt::format("{}: expected a one-element tensor, got {}",
                                 op, shape_string(t.shape())));
  }
}

}  // namespace

Tensor Tape::make_output(Shape shape, std::vector<double> values,
                         std::span<const Tensor> inputs) const {
  return Tensor::from(std::move(shape), std::move(values),
                      recording_ && any_requires_grad(inputs));
}

void Tape::record(const Tensor& output, BackwardFn backward) {
  if (!output.requires_grad()) return;
  nodes_.push_back(Node{output, std::move(backward)});
}

void Tape::backward(const Tensor& root) {
  if (root.size() != 1) {
    throw ShapeError(fmt::format("backward: root must be scalar, got {}",
                                 shape_string(root.shape())));
  }
  if (!root.requires_grad()) return;
  for (auto& node : nodes_) node.output.zero_grad();
  root.mutable_grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw ShapeError(fmt::format("matmul: inner dimensions differ, {} * {}",
                                 shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
  std::vector<double> out(m * n, 0.0);
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = av[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += aip * bv[p * n + j];
    }
  }
  const Tensor inputs[] = {a, b};
  Tensor c = make_output({m, n}, std::move(out), inputs);
  record(c, [a, b, c, m, k, n]() mutable {
    auto dc = c.grad();
    if (a.requires_grad()) {
      // dA = dC * B^T
      auto bv = b.values();
      auto da = a.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * bv[p * n + j];
          da[i * k + p] += acc;
        }
    }
    if (b.requires_grad()) {
      // dB = A^T * dC
      auto av = a.values();
      auto db = b.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av[i * k + p];
          for (std::size_t j = 0; j < n; ++j) db[p * n + j] += aip * dc[i * n + j];
        }
    }
  });
  return c;
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor Tape::elementwise(ElementwiseKind kind, const Tensor& a) {
  auto av = a.values();
  std::vector<double> out(av.size());
  switch (kind) {
    case ElementwiseKind::kRelu:
      for (std::size_t i = 0; i < av.size(); ++i) {
        out[i] = av[i] > 0.0 || std::isnan(av[i]) ? av[i] : 0.0;  // NaN passes through
        relu_margin_ = std::min(relu_margin_, std::abs(av[i]));
      }
      break;
    case ElementwiseKind::kExp:
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::exp(av[i]);
      break;
    case ElementwiseKind::kLog:
      for (std::size_t i = 0; i < av.size(); ++i) {
        if (!(av[i] > 0.0)) {
          throw DomainError(
              fmt::format("log: non-positive input {} at index {}", av[i], i));
        }
        out[i] = std::log(av[i]);
      }
      break;
    case ElementwiseKind::kNeg:
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = -av[i];
      break;
    default:
      throw std::invalid_argument("elementwise: binary op given one operand");
  }
  const Tensor inputs[] = {a};
  Tensor y = make_output(a.shape(), std::move(out), inputs);
  record(y, [kind, a, y]() mutable {
    auto dy = y.grad();
    auto av = a.values();
    auto yv = y.values();
    auto da = a.mutable_grad();
    for (std::size_t i = 0; i < da.size(); ++i) {
      switch (kind) {
        case ElementwiseKind::kRelu: da[i] += av[i] > 0.0 ? dy[i] : 0.0; break;
        case ElementwiseKind::kExp: da[i] += dy[i] * yv[i]; break;
        case ElementwiseKind::kLog: da[i] += dy[i] / av[i]; break;
        case ElementwiseKind::kNeg: da[i] -= dy[i]; break;
        default: break;
      }
    }
  });
  return y;
}

Tensor Tape::elementwise(ElementwiseKind kind, const Tensor& a,
                         const Tensor& b) {
  require_same_shape("elementwise", a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(av.size());
  switch (kind) {
    case ElementwiseKind::kAdd:
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
      break;
    case ElementwiseKind::kSub:
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
      break;
    case ElementwiseKind::kMul:
      for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
      break;
    default:
      throw std::invalid_argument("elementwise: unary op given two operands");
  }
  const Tensor inputs[] = {a, b};
  Tensor y = make_output(a.shape(), std::move(out), inputs);
  record(y, [kind, a, b, y]() mutable {
    auto dy = y.grad();
    if (a.requires_grad()) {
      auto da = a.mutable_grad();
      auto bv = b.values();
      for (std::size_t i = 0; i < da.size(); ++i)
        da[i] += kind == ElementwiseKind::kMul ? dy[i] * bv[i] : dy[i];
    }
    if (b.requires_grad()) {
      auto db = b.mutable_grad();
      auto av = a.values();
      for (std::size_t i = 0; i < db.size(); ++i) {
        switch (kind) {
          case ElementwiseKind::kAdd: db[i] += dy[i]; break;
          case ElementwiseKind::kSub: db[i] -= dy[i]; break;
          default: db[i] += dy[i] * av[i]; break;
        }
      }
    }
  });
  return y;
}

Tensor Tape::add_row(const Tensor& t, const Tensor& bias) {
  require_matrix("add_row", t);
  const std::size_t m = t.rows(), n = t.cols();
  if (bias.size() != n) {
    throw ShapeError(fmt::format("add_row: bias {} does not match {}",
                                 shape_string(bias.shape()),
                                 shape_string(t.shape())));
  }
  auto tv = t.values();
  auto bv = bias.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = tv[i * n + j] + bv[j];
  const Tensor inputs[] = {t, bias};
  Tensor y = make_output(t.shape(), std::move(out), inputs);
  record(y, [t, bias, y, m, n]() mutable {
    auto dy = y.grad();
    if (t.requires_grad()) {
      auto dt = t.mutable_grad();
      for (std::size_t i = 0; i < dt.size(); ++i) dt[i] += dy[i];
    }
    if (bias.requires_grad()) {
      auto db = bias.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) db[j] += dy[i * n + j];
    }
  });
  return y;
}

Tensor Tape::mul_scalar(const Tensor& t, const Tensor& s) {
  require_scalar("mul_scalar", s);
  const double sv = s.item();
  auto tv = t.values();
  std::vector<double> out(tv.size());
  for (std::size_t i = 0; i < tv.size(); ++i) out[i] = tv[i] * sv;
  const Tensor inputs[] = {t, s};
  Tensor y = make_output(t.shape(), std::move(out), inputs);
  record(y, [t, s, y]() mutable {
    auto dy = y.grad();
    auto tv = t.values();
    if (t.requires_grad()) {
      const double sv = s.item();
      auto dt = t.mutable_grad();
      for (std::size_t i = 0; i < dt.size(); ++i) dt[i] += dy[i] * sv;
    }
    if (s.requires_grad()) {
      double acc = 0.0;
      for (std::size_t i = 0; i < dy.size(); ++i) acc += dy[i] * tv[i];
      s.mutable_grad()[0] += acc;
    }
  });
  return y;
}

Tensor Tape::add_scalar(const Tensor& t, const Tensor& s) {
  require_scalar("add_scalar", s);
  const double sv = s.item();
  auto tv = t.values();
  std::vector<double> out(tv.size());
  for (std::size_t i = 0; i < tv.size(); ++i) out[i] = tv[i] + sv;
  const Tensor inputs[] = {t, s};
  Tensor y = make_output(t.shape(), std::move(out), inputs);
  record(y, [t, s, y]() mutable {
    auto dy = y.grad();
    if (t.requires_grad()) {
      auto dt = t.mutable_grad();
      for (std::size_t i = 0; i < dt.size(); ++i) dt[i] += dy[i];
    }
    if (s.requires_grad()) {
      double acc = 0.0;
      for (double g : dy) acc += g;
      s.mutable_grad()[0] += acc;
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Reductions

Tensor Tape::reduce(ReduceKind kind, const Tensor& t,
                    std::optional<std::size_t> axis) {
  // View the input as outer x len x inner and reduce the middle extent.
  std::size_t outer = 1, len = t.size(), inner = 1;
  Shape out_shape = {1};
  if (axis) {
    if (t.rank() == 0 || *axis >= t.rank()) {
      throw ShapeError(fmt::format("reduce: axis {} invalid for shape {}",
                                   *axis, shape_string(t.shape())));
    }
    const auto& s = t.shape();
    len = s[*axis];
    outer = 1;
    for (std::size_t d = 0; d < *axis; ++d) outer *= s[d];
    inner = 1;
    for (std::size_t d = *axis + 1; d < s.size(); ++d) inner *= s[d];
    out_shape.clear();
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != *axis) out_shape.push_back(s[d]);
    if (out_shape.empty()) out_shape = {1};
  }
  if (len == 0) throw ShapeError("reduce: empty axis");

  auto tv = t.values();
  std::vector<double> out(outer * inner);
  std::vector<std::size_t> argmax;
  if (kind == ReduceKind::kMax) argmax.resize(outer * inner);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * len * inner + i;
      double acc = kind == ReduceKind::kMax ? tv[base] : 0.0;
      std::size_t best = 0;
      for (std::size_t l = 0; l < len; ++l) {
        const double v = tv[base + l * inner];
        if (kind == ReduceKind::kMax) {
          if (v > acc) {
            acc = v;
            best = l;
          }
        } else {
          acc += v;
        }
      }
      if (kind == ReduceKind::kMean) acc /= static_cast<double>(len);
      out[o * inner + i] = acc;
      if (kind == ReduceKind::kMax) argmax[o * inner + i] = best;
    }
  }
  const Tensor inputs[] = {t};
  Tensor y = make_output(std::move(out_shape), std::move(out), inputs);
  record(y, [kind, t, y, outer, len, inner,
             argmax = std::move(argmax)]() mutable {
    auto dy = y.grad();
    auto dt = t.mutable_grad();
    const double scale =
        kind == ReduceKind::kMean ? 1.0 / static_cast<double>(len) : 1.0;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        const double g = dy[o * inner + i];
        if (kind == ReduceKind::kMax) {
          dt[base + argmax[o * inner + i] * inner] += g;
        } else {
          for (std::size_t l = 0; l < len; ++l) dt[base + l * inner] += g * scale;
        }
      }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Indexing

Tensor Tape::gather(const Tensor& src, std::span<const std::ptrdiff_t> index,
                    Shape shape) {
  if (index.size() != element_count(shape)) {
    throw ShapeError(fmt::format("gather: {} indices for output shape {}",
                                 index.size(), shape_string(shape)));
  }
  auto sv = src.values();
  std::vector<double> out(index.size(), 0.0);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0) continue;
    if (static_cast<std::size_t>(index[i]) >= sv.size()) {
      throw ShapeError(fmt::format("gather: index {} out of range for {}",
                                   index[i], shape_string(src.shape())));
    }
    out[i] = sv[static_cast<std::size_t>(index[i])];
  }
  const Tensor inputs[] = {src};
  Tensor y = make_output(std::move(shape), std::move(out), inputs);
  record(y, [src, y, idx = std::vector<std::ptrdiff_t>(index.begin(),
                                                       index.end())]() mutable {
    auto dy = y.grad();
    auto ds = src.mutable_grad();
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (idx[i] >= 0) ds[static_cast<std::size_t>(idx[i])] += dy[i];
  });
  return y;
}

Tensor Tape::gather_rows(const Tensor& src, std::span<const std::size_t> rows) {
  require_matrix("gather_rows", src);
  const std::size_t n = src.cols();
  std::vector<std::ptrdiff_t> index;
  index.reserve(rows.size() * n);
  for (std::size_t r : rows) {
    if (r >= src.rows()) {
      throw ShapeError(fmt::format("gather_rows: row {} out of range for {}",
                                   r, shape_string(src.shape())));
    }
    for (std::size_t j = 0; j < n; ++j)
      index.push_back(static_cast<std::ptrdiff_t>(r * n + j));
  }
  return gather(src, index, {rows.size(), n});
}

// ---------------------------------------------------------------------------
// Pairwise metrics

namespace {

void require_pairwise(const char* op, const Tensor& a, const Tensor& b) {
  require_matrix(op, a);
  require_matrix(op, b);
  if (a.cols() != b.cols()) {
    throw ShapeError(fmt::format("{}: feature widths differ, {} vs {}", op,
                                 shape_string(a.shape()),
                                 shape_string(b.shape())));
  }
}

std::vector<double> row_norms(const char* op, const Tensor& t) {
  const std::size_t m = t.rows(), d = t.cols();
  auto v = t.values();
  std::vector<double> norms(m);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += v[i * d + k] * v[i * d + k];
    norms[i] = std::sqrt(acc);
    if (norms[i] == 0.0) {
      throw DomainError(fmt::format("{}: zero vector at row {}", op, i));
    }
  }
  return norms;
}

}  // namespace

Tensor Tape::pairwise_sq_dist(const Tensor& a, const Tensor& b) {
  require_pairwise("pairwise_sq_dist", a, b);
  const std::size_t m = a.rows(), n = b.rows(), d = a.cols();
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = av[i * d + k] - bv[j * d + k];
        acc += diff * diff;
      }
      out[i * n + j] = acc;
    }
  const Tensor inputs[] = {a, b};
  Tensor y = make_output({m, n}, std::move(out), inputs);
  record(y, [a, b, y, m, n, d]() mutable {
    auto dy = y.grad();
    auto av = a.values();
    auto bv = b.values();
    std::span<double> da, db;
    if (a.requires_grad()) da = a.mutable_grad();
    if (b.requires_grad()) db = b.mutable_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double g = 2.0 * dy[i * n + j];
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = av[i * d + k] - bv[j * d + k];
          if (!da.empty()) da[i * d + k] += g * diff;
          if (!db.empty()) db[j * d + k] -= g * diff;
        }
      }
  });
  return y;
}

Tensor Tape::pairwise_cosine(const Tensor& a, const Tensor& b) {
  require_pairwise("pairwise_cosine", a, b);
  const std::size_t m = a.rows(), n = b.rows(), d = a.cols();
  const auto na = row_norms("pairwise_cosine", a);
  const auto nb = row_norms("pairwise_cosine", b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += av[i * d + k] * bv[j * d + k];
      out[i * n + j] = dot / (na[i] * nb[j]);
    }
  const Tensor inputs[] = {a, b};
  Tensor y = make_output({m, n}, std::move(out), inputs);
  record(y, [a, b, y, m, n, d, na, nb]() mutable {
    // d cos / d a_i = b_j / (|a_i||b_j|) - cos * a_i / |a_i|^2
    auto dy = y.grad();
    auto yv = y.values();
    auto av = a.values();
    auto bv = b.values();
    std::span<double> da, db;
    if (a.requires_grad()) da = a.mutable_grad();
    if (b.requires_grad()) db = b.mutable_grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double g = dy[i * n + j];
        const double c = yv[i * n + j];
        const double inv = 1.0 / (na[i] * nb[j]);
        for (std::size_t k = 0; k < d; ++k) {
          const double ak = av[i * d + k], bk = bv[j * d + k];
          if (!da.empty()) da[i * d + k] += g * (bk * inv - c * ak / (na[i] * na[i]));
          if (!db.empty()) db[j * d + k] += g * (ak * inv - c * bk / (nb[j] * nb[j]));
        }
      }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Batch normalization

Tensor Tape::batch_norm(const Tensor& t, const Tensor& scale,
                        const Tensor& shift, double eps) {
  require_matrix("batch_norm", t);
  const std::size_t m = t.rows(), n = t.cols();
  if (scale.size() != n || shift.size() != n) {
    throw ShapeError(fmt::format("batch_norm: affine params {} / {} for {}",
                                 shape_string(scale.shape()),
                                 shape_string(shift.shape()),
                                 shape_string(t.shape())));
  }
  auto tv = t.values();
  auto gv = scale.values();
  auto bv = shift.values();
  std::vector<double> xhat(m * n), inv_std(n), out(m * n);
  for (std::size_t j = 0; j < n; ++j) {
    double mu = 0.0;
    for (std::size_t i = 0; i < m; ++i) mu += tv[i * n + j];
    mu /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double c = tv[i * n + j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(m);
    inv_std[j] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < m; ++i) {
      xhat[i * n + j] = (tv[i * n + j] - mu) * inv_std[j];
      out[i * n + j] = gv[j] * xhat[i * n + j] + bv[j];
    }
  }
  const Tensor inputs[] = {t, scale, shift};
  Tensor y = make_output({m, n}, std::move(out), inputs);
  record(y, [t, scale, shift, y, m, n, xhat = std::move(xhat),
             inv_std = std::move(inv_std)]() mutable {
    auto dy = y.grad();
    auto gv = scale.values();
    const double md = static_cast<double>(m);
    for (std::size_t j = 0; j < n; ++j) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        sum_dy += dy[i * n + j];
        sum_dy_xhat += dy[i * n + j] * xhat[i * n + j];
      }
      if (scale.requires_grad()) scale.mutable_grad()[j] += sum_dy_xhat;
      if (shift.requires_grad()) shift.mutable_grad()[j] += sum_dy;
      if (t.requires_grad()) {
        auto dt = t.mutable_grad();
        for (std::size_t i = 0; i < m; ++i) {
          dt[i * n + j] += gv[j] * inv_std[j] / md *
                           (md * dy[i * n + j] - sum_dy -
                            xhat[i * n + j] * sum_dy_xhat);
        }
      }
    }
  });
  return y;
}

}  // namespace amfsl
