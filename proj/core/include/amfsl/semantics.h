#ifndef AMFSL_SEMANTICS_H_
#define AMFSL_SEMANTICS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "amfsl/dense.h"
#include "amfsl/errors.h"
#include "amfsl/random.h"
#include "amfsl/semantic_store.h"
#include "amfsl/tensor.h"

namespace amfsl {

// Margin matrices below are [n_t x n_t] tensors indexed by episode position:
// entry [y][k] is the margin added to competitor k's logit when the target
// is y. The diagonal is never read by the loss.

// Row-major [n x n] cosine similarities between the classes' vectors.
std::vector<double> similarity_matrix(const SemanticStore& store,
                                      std::span<const ClassId> classes);

// Episode positions of the competitors of `target`, ordered by ascending
// class id. This is the input order of the task-relevant generator.
std::vector<std::size_t> competitor_order(std::span<const ClassId> classes,
                                          std::size_t target);

// Constant off-diagonal margin m.
Tensor naive_margins(std::size_t way, double margin);

// m[i][j] = alpha * sim(e_i, e_j) + beta.
struct ClassRelevantGenerator {
  Tensor alpha = Tensor::parameter({1}, {0.0});
  Tensor beta = Tensor::parameter({1}, {0.0});

  Tensor margins(Tape& tape, const SemanticStore& store,
                 std::span<const ClassId> classes) const;

  ClassRelevantGenerator clone() const { return {alpha.clone(), beta.clone()}; }
};

struct TaskRelevantConfig {
  std::size_t way = 5;  // the generator maps way-1 similarities to way-1 margins
  std::size_t hidden = 8;
  bool batch_norm = false;
};

// Two fully-connected layers over the similarities between a target class
// and its competitors, relu after the first. With batch_norm each layer is
// followed by batch normalization over the episode's target rows and a relu.
class TaskRelevantGenerator {
 public:
  TaskRelevantGenerator() = default;
  // Random hidden layer, all-zero output layer (so margins start at 0).
  TaskRelevantGenerator(const TaskRelevantConfig& cfg, Rng& rng);

  const TaskRelevantConfig& config() const { return cfg_; }
  std::size_t width() const { return cfg_.way - 1; }
  bool defined() const { return hidden_.weight.defined(); }

  // [n_t x n_t] margins for every target class of the episode.
  Tensor margin_matrix(Tape& tape, const SemanticStore& store,
                       std::span<const ClassId> classes) const;
  // [n_t - 1] margins of one target, in competitor_order().
  Tensor margins_for(Tape& tape, const SemanticStore& store,
                     std::span<const ClassId> classes, std::size_t target) const;
  // Raw generator map on a [rows x (n_t-1)] similarity matrix.
  Tensor forward(Tape& tape, const Tensor& similarities) const;

  Dense& hidden() { return hidden_; }
  Dense& output() { return output_; }
  const Dense& hidden() const { return hidden_; }
  const Dense& output() const { return output_; }

  // (name suffix, tensor) in a stable order.
  std::vector<std::pair<std::string, Tensor>> tensors() const;
  TaskRelevantGenerator clone() const;

 private:
  TaskRelevantConfig cfg_;
  Dense hidden_;
  Dense output_;
  // Batch-norm affine parameters, present only with cfg_.batch_norm.
  Tensor bn_hidden_scale_, bn_hidden_shift_, bn_output_scale_, bn_output_shift_;
};

}  // namespace amfsl

#endif  // AMFSL_SEMANTICS_H_
