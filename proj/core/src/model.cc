#include "amfsl/model.h"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "amfsl/errors.h"

namespace amfsl {

EmbeddingNet::EmbeddingNet(std::vector<Dense> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("embedding net needs at least one layer");
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in() != layers_[i - 1].out()) {
      throw ConfigError(fmt::format("embedding layer {} takes {} inputs, previous emits {}",
                                    i, layers_[i].in(), layers_[i - 1].out()));
    }
  }
}

EmbeddingNet EmbeddingNet::random(std::size_t input_dim,
                                  std::span<const std::size_t> widths, Rng& rng) {
  std::vector<Dense> layers;
  std::size_t in = input_dim;
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("embedding layer width must be positive");
    layers.push_back(Dense::random(in, w, rng));
    in = w;
  }
  return EmbeddingNet(std::move(layers));
}

std::size_t EmbeddingNet::input_dim() const { return layers_.front().in(); }
std::size_t EmbeddingNet::output_dim() const { return layers_.back().out(); }

Tensor EmbeddingNet::forward(Tape& tape, const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != input_dim()) {
    throw ShapeError(fmt::format("embed: input {} does not match input dim {}",
                                 shape_string(x.shape()), input_dim()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i].forward(tape, h);
    if (i + 1 < layers_.size()) h = tape.relu(h);
  }
  return h;
}

std::vector<double> EmbeddingNet::embed(std::span<const double> x) const {
  Tape tape(false);
  Tensor out = forward(tape, Tensor::from({1, x.size()}, {x.begin(), x.end()}));
  return {out.values().begin(), out.values().end()};
}

EmbeddingNet EmbeddingNet::clone() const {
  std::vector<Dense> layers;
  for (const auto& l : layers_) layers.push_back(l.clone());
  return EmbeddingNet(std::move(layers));
}

// ---------------------------------------------------------------------------

std::string_view metric_name(MetricKind kind) {
  return kind == MetricKind::kCosine ? "cosine" : "neg_sq_euclidean";
}

std::optional<MetricKind> parse_metric(std::string_view name) {
  if (name == "neg_sq_euclidean") return MetricKind::kNegSqEuclidean;
  if (name == "cosine") return MetricKind::kCosine;
  return std::nullopt;
}

Metric Metric::make(MetricKind kind, double gamma, bool trainable) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw ConfigError(fmt::format("metric temperature must be positive, got {}", gamma));
  }
  return {kind, Tensor::scalar(gamma, trainable)};
}

Tensor Metric::logits(Tape& tape, const Tensor& z, const Tensor& r) const {
  if (kind == MetricKind::kCosine) {
    return tape.mul_scalar(tape.pairwise_cosine(z, r), gamma);
  }
  return tape.neg(tape.mul_scalar(tape.pairwise_sq_dist(z, r), gamma));
}

double similarity(const Metric& metric, std::span<const double> z,
                  std::span<const double> r) {
  if (z.size() != r.size()) {
    throw ShapeError(fmt::format("similarity: dimension mismatch {} vs {}",
                                 z.size(), r.size()));
  }
  Tape tape(false);
  Tensor out = metric.logits(tape, Tensor::from({1, z.size()}, {z.begin(), z.end()}),
                             Tensor::from({1, r.size()}, {r.begin(), r.end()}));
  return out.item();
}

Tensor prototypes(Tape& tape, const Tensor& support, std::size_t way) {
  if (support.rank() != 2 || way == 0 || support.rows() % way != 0) {
    throw ShapeError(fmt::format("prototypes: {} support rows for {} classes",
                                 support.rows(), way));
  }
  const std::size_t n = support.rows(), shot = n / way;
  std::vector<double> avg(way * n, 0.0);
  for (std::size_t k = 0; k < way; ++k)
    for (std::size_t s = 0; s < shot; ++s)
      avg[k * n + k * shot + s] = 1.0 / static_cast<double>(shot);
  return tape.matmul(Tensor::from({way, n}, std::move(avg)), support);
}

Tensor prototypes(Tape& tape, const EmbeddingNet& net, const Dataset& dataset,
                  const Episode& episode) {
  Tensor x = Tensor::from({episode.support.size(), dataset.feature_dim()},
                          gather_features(dataset, episode.support));
  return prototypes(tape, net.forward(tape, x), episode.way());
}

// ---------------------------------------------------------------------------

ModelParams ModelParams::init(const ModelConfig& cfg, std::size_t input_dim,
                              std::size_t way, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::kInit);
  ModelParams p;
  p.embed = EmbeddingNet::random(input_dim, cfg.widths, rng);
  p.metric = Metric::make(cfg.metric, cfg.gamma, cfg.train_gamma);
  p.task_relevant = TaskRelevantGenerator(
      {.way = way, .hidden = cfg.generator_hidden, .batch_norm = cfg.generator_batch_norm},
      rng);
  return p;
}

std::vector<NamedTensor> ModelParams::named_tensors() const {
  std::vector<NamedTensor> out;
  const auto& layers = embed.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.emplace_back(fmt::format("embed.layer{}.weight", i), layers[i].weight);
    out.emplace_back(fmt::format("embed.layer{}.bias", i), layers[i].bias);
  }
  out.emplace_back("metric.gamma", metric.gamma);
  out.emplace_back("class_relevant.alpha", class_relevant.alpha);
  out.emplace_back("class_relevant.beta", class_relevant.beta);
  if (task_relevant.defined()) {
    for (auto& [name, t] : task_relevant.tensors())
      out.emplace_back("task_relevant." + name, t);
  }
  return out;
}

ModelParams ModelParams::clone() const {
  return {embed.clone(), metric.clone(), class_relevant.clone(), task_relevant.clone()};
}

}  // namespace amfsl
