#include "amfsl/semantics.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace amfsl {

std::vector<double> similarity_matrix(const SemanticStore& store,
                                      std::span<const ClassId> classes) {
  const std::size_t n = classes.size();
  std::vector<double> sim(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      sim[i * n + j] = store.similarity(classes[i], classes[j]);
  return sim;
}

std::vector<std::size_t> competitor_order(std::span<const ClassId> classes,
                                          std::size_t target) {
  std::vector<std::size_t> order;
  for (std::size_t k = 0; k < classes.size(); ++k)
    if (k != target) order.push_back(k);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return classes[a] < classes[b];
  });
  return order;
}

Tensor naive_margins(std::size_t way, double margin) {
  std::vector<double> m(way * way, margin);
  for (std::size_t i = 0; i < way; ++i) m[i * way + i] = 0.0;
  return Tensor::from({way, way}, std::move(m));
}

Tensor ClassRelevantGenerator::margins(Tape& tape, const SemanticStore& store,
                                       std::span<const ClassId> classes) const {
  const std::size_t n = classes.size();
  Tensor sim = Tensor::from({n, n}, similarity_matrix(store, classes));
  return tape.add_scalar(tape.mul_scalar(sim, alpha), beta);
}

// ---------------------------------------------------------------------------

TaskRelevantGenerator::TaskRelevantGenerator(const TaskRelevantConfig& cfg,
                                             Rng& rng)
    : cfg_(cfg) {
  if (cfg.way < 2 || cfg.hidden == 0) {
    throw ConfigError(fmt::format(
        "task-relevant generator needs way >= 2 and hidden >= 1 (got {}, {})",
        cfg.way, cfg.hidden));
  }
  hidden_ = Dense::random(width(), cfg.hidden, rng);
  output_ = Dense::zeros(cfg.hidden, width());
  if (cfg.batch_norm) {
    bn_hidden_scale_ = Tensor::parameter({cfg.hidden}, std::vector<double>(cfg.hidden, 1.0));
    bn_hidden_shift_ = Tensor::parameter({cfg.hidden}, std::vector<double>(cfg.hidden, 0.0));
    bn_output_scale_ = Tensor::parameter({width()}, std::vector<double>(width(), 1.0));
    bn_output_shift_ = Tensor::parameter({width()}, std::vector<double>(width(), 0.0));
  }
}

Tensor TaskRelevantGenerator::forward(Tape& tape, const Tensor& similarities) const {
  if (similarities.rank() != 2 || similarities.cols() != width()) {
    throw ConfigError(fmt::format(
        "task-relevant generator built for {}-way episodes takes {} similarities, got {}",
        cfg_.way, width(), shape_string(similarities.shape())));
  }
  Tensor h = hidden_.forward(tape, similarities);
  if (cfg_.batch_norm) h = tape.batch_norm(h, bn_hidden_scale_, bn_hidden_shift_);
  h = tape.relu(h);
  Tensor out = output_.forward(tape, h);
  if (cfg_.batch_norm) {
    out = tape.relu(tape.batch_norm(out, bn_output_scale_, bn_output_shift_));
  }
  return out;
}

Tensor TaskRelevantGenerator::margin_matrix(Tape& tape, const SemanticStore& store,
                                            std::span<const ClassId> classes) const {
  const std::size_t n = classes.size();
  if (n != cfg_.way) {
    throw ConfigError(fmt::format(
        "task-relevant generator built for {}-way episodes, got {} classes",
        cfg_.way, n));
  }
  const auto sim = similarity_matrix(store, classes);
  std::vector<double> inputs;
  inputs.reserve(n * (n - 1));
  std::vector<std::ptrdiff_t> scatter(n * n, -1);
  for (std::size_t y = 0; y < n; ++y) {
    const auto order = competitor_order(classes, y);
    for (std::size_t j = 0; j < order.size(); ++j) {
      inputs.push_back(sim[y * n + order[j]]);
      scatter[y * n + order[j]] = static_cast<std::ptrdiff_t>(y * (n - 1) + j);
    }
  }
  Tensor out = forward(tape, Tensor::from({n, n - 1}, std::move(inputs)));
  return tape.gather(out, scatter, {n, n});
}

Tensor TaskRelevantGenerator::margins_for(Tape& tape, const SemanticStore& store,
                                          std::span<const ClassId> classes,
                                          std::size_t target) const {
  if (target >= classes.size()) {
    throw std::out_of_range(fmt::format("target position {} outside {}-way episode",
                                        target, classes.size()));
  }
  const std::size_t n = classes.size();
  Tensor full = margin_matrix(tape, store, classes);
  std::vector<std::ptrdiff_t> index;
  for (std::size_t k : competitor_order(classes, target))
    index.push_back(static_cast<std::ptrdiff_t>(target * n + k));
  return tape.gather(full, index, {n - 1});
}

std::vector<std::pair<std::string, Tensor>> TaskRelevantGenerator::tensors() const {
  std::vector<std::pair<std::string, Tensor>> out = {
      {"layer0.weight", hidden_.weight},
      {"layer0.bias", hidden_.bias},
      {"layer1.weight", output_.weight},
      {"layer1.bias", output_.bias},
  };
  if (cfg_.batch_norm) {
    out.emplace_back("bn0.scale", bn_hidden_scale_);
    out.emplace_back("bn0.shift", bn_hidden_shift_);
    out.emplace_back("bn1.scale", bn_output_scale_);
    out.emplace_back("bn1.shift", bn_output_shift_);
  }
  return out;
}

TaskRelevantGenerator TaskRelevantGenerator::clone() const {
  TaskRelevantGenerator g;
  g.cfg_ = cfg_;
  if (!defined()) return g;
  g.hidden_ = hidden_.clone();
  g.output_ = output_.clone();
  if (cfg_.batch_norm) {
    g.bn_hidden_scale_ = bn_hidden_scale_.clone();
    g.bn_hidden_shift_ = bn_hidden_shift_.clone();
    g.bn_output_scale_ = bn_output_scale_.clone();
    g.bn_output_shift_ = bn_output_shift_.clone();
  }
  return g;
}

}  // namespace amfsl
