#ifndef AMFSL_MODEL_H_
#define AMFSL_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amfsl/dataset.h"
#include "amfsl/dense.h"
#include "amfsl/episode.h"
#include "amfsl/semantics.h"
#include "amfsl/tensor.h"

namespace amfsl {

// Multi-layer perceptron, relu between layers and none after the last.
class EmbeddingNet {
 public:
  EmbeddingNet() = default;
  explicit EmbeddingNet(std::vector<Dense> layers);
  static EmbeddingNet random(std::size_t input_dim,
                             std::span<const std::size_t> widths, Rng& rng);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  const std::vector<Dense>& layers() const { return layers_; }
  std::vector<Dense>& layers() { return layers_; }

  // x is [batch x input_dim].
  Tensor forward(Tape& tape, const Tensor& x) const;
  // Single-sample forward pass without gradient tracking.
  std::vector<double> embed(std::span<const double> x) const;

  EmbeddingNet clone() const;

 private:
  std::vector<Dense> layers_;
};

enum class MetricKind { kNegSqEuclidean, kCosine };

std::string_view metric_name(MetricKind kind);
std::optional<MetricKind> parse_metric(std::string_view name);

// D(z, r): -gamma * ||z - r||^2 or gamma * cos(z, r).
struct Metric {
  MetricKind kind = MetricKind::kNegSqEuclidean;
  Tensor gamma = Tensor::scalar(1.0);  // requires_grad iff trainable

  static Metric make(MetricKind kind, double gamma, bool trainable);

  // [m x n] similarities between query rows z and class representations r.
  Tensor logits(Tape& tape, const Tensor& z, const Tensor& r) const;
  Metric clone() const { return {kind, gamma.clone()}; }
};

double similarity(const Metric& metric, std::span<const double> z,
                  std::span<const double> r);

// Row k = mean of the support embeddings labeled k. `support` holds n_t*n_s
// class-major rows.
Tensor prototypes(Tape& tape, const Tensor& support, std::size_t way);
Tensor prototypes(Tape& tape, const EmbeddingNet& net, const Dataset& dataset,
                  const Episode& episode);

struct ModelConfig {
  std::vector<std::size_t> widths = {64, 64};
  MetricKind metric = MetricKind::kNegSqEuclidean;
  double gamma = 1.0;
  bool train_gamma = false;
  std::size_t generator_hidden = 8;
  bool generator_batch_norm = false;
};

using NamedTensor = std::pair<std::string, Tensor>;

// Every learnable quantity of a run. The class-relevant and task-relevant
// generators always exist; the loss decides which ones are trained.
struct ModelParams {
  EmbeddingNet embed;
  Metric metric;
  ClassRelevantGenerator class_relevant;
  TaskRelevantGenerator task_relevant;

  static ModelParams init(const ModelConfig& cfg, std::size_t input_dim,
                          std::size_t way, std::uint64_t seed);

  // Dotted names in a fixed order, e.g. "embed.layer0.weight".
  std::vector<NamedTensor> named_tensors() const;
  ModelParams clone() const;
};

}  // namespace amfsl

#endif  // AMFSL_MODEL_H_
