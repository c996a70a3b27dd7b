#ifndef AMFSL_LOSS_H_
#define AMFSL_LOSS_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "amfsl/dataset.h"
#include "amfsl/episode.h"
#include "amfsl/model.h"
#include "amfsl/tensor.h"

namespace amfsl {

enum class LossType { kPlain, kNaive, kClassRelevant, kTaskRelevant };

std::string_view loss_type_name(LossType type);
std::optional<LossType> parse_loss_type(std::string_view name);

struct LossKind {
  LossType type = LossType::kPlain;
  double margin = 0.0;  // kNaive only

  static LossKind plain() { return {}; }
  // Throws ConfigError for negative or non-finite margins.
  static LossKind naive(double margin);
  static LossKind class_relevant() { return {LossType::kClassRelevant, 0.0}; }
  static LossKind task_relevant() { return {LossType::kTaskRelevant, 0.0}; }

  static constexpr LossType kAll[] = {LossType::kPlain, LossType::kNaive,
                                      LossType::kClassRelevant,
                                      LossType::kTaskRelevant};
};

struct LossTerm {
  double p;     // probability assigned to the target
  double loss;  // -log p
};

// Softmax cross-entropy over logits, max-subtracted.
LossTerm plain_loss(std::span<const double> logits, std::size_t target);

// p = e^{l_y} / (e^{l_y} + sum_{k != y} e^{l_k + m_k}). `margins` holds the
// n_t - 1 competitor margins in ascending position order (target skipped).
LossTerm margined_loss(std::span<const double> logits, std::size_t target,
                       std::span<const double> margins);

// Same kernel on full-width rows: margins[k] is added to logit k for k != y,
// margins[y] is ignored. Also returns d loss / d logits (and, for k != y,
// d loss / d margins, which is the same value) in `grad` when non-empty.
LossTerm margined_loss_row(std::span<const double> logits, std::size_t target,
                           std::span<const double> margins,
                           std::span<double> grad = {});

// Per-row loss of logits[m x n] under margins[m x n]; output shape [m].
// Target probabilities are written to `probs` when given.
Tensor margined_nll(Tape& tape, const Tensor& logits, const Tensor& margins,
                    std::span<const std::size_t> targets,
                    std::vector<double>* probs = nullptr);

struct QueryLoss {
  std::size_t query;
  double p;
  double loss;
};

struct LossReport {
  std::vector<QueryLoss> per_query;
  Tensor total;  // scalar mean over the query set, on the tape
};

// [queries x way] metric logits of the episode's queries against its
// support prototypes.
Tensor episode_logits(Tape& tape, const ModelParams& params, const Dataset& dataset,
                      const Episode& episode);

// [way x way] margins selected by `kind` (zeros for kPlain).
Tensor episode_margins(Tape& tape, const LossKind& kind, const ModelParams& params,
                       const SemanticStore* store, const Episode& episode);

// Embeds support and query sets, builds prototypes, and averages the margined
// loss of every query. `store` is required for the semantic loss kinds.
LossReport episode_loss(Tape& tape, const LossKind& kind, const Episode& episode,
                        const Dataset& dataset, const ModelParams& params,
                        const SemanticStore* store);

}  // namespace amfsl

#endif  // AMFSL_LOSS_H_
