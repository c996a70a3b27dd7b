#ifndef AMFSL_TRAIN_H_
#define AMFSL_TRAIN_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "amfsl/dataset.h"
#include "amfsl/episode.h"
#include "amfsl/loss.h"
#include "amfsl/model.h"

namespace amfsl {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::size_t step = 0;
};

OptimizerState make_optimizer_state(std::span<const Tensor> params);

// One bias-corrected adaptive-moment update from the params' grad buffers.
void adam_step(OptimizerState& state, std::span<Tensor> params, const AdamConfig& hyper);

// Parameters updated when training with `kind`: the embedding, gamma when it
// requires a gradient, and the generator the loss consults.
std::vector<NamedTensor> trainable_parameters(const ModelParams& params, const LossKind& kind);

struct TrainConfig {
  std::size_t episodes = 2000;
  EpisodeConfig episode;
  LossKind loss;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::size_t val_every = 100;  // 0 disables validation
  std::size_t val_episodes = 50;
};

struct TrainLogRow {
  std::size_t episode;
  double loss;
  std::optional<double> val_accuracy;  // percent
};

struct TrainLog {
  std::vector<TrainLogRow> rows;

  // Header `episode,loss,val_acc`; val_acc left empty when not measured.
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  ModelParams params;
  TrainLog log;
};

// Episodic training: sample, loss, backward, Adam step. `initial` is not
// modified. Throws TrainingDiverged on a non-finite loss.
TrainResult train(const TrainConfig& cfg, const Dataset& dataset, const SemanticStore& store,
                  const ModelParams& initial);

// ---------------------------------------------------------------------------
// Finite-difference gradient check

// Denominator floor of the relative error, so parameters whose true gradient
// is (near) zero are judged on absolute error. Round-off in the difference
// quotient is about eps * |loss| / h, i.e. ~1e-10 for losses of a few tens
// at h = 1e-5.
inline constexpr double kGradcheckFloor = 1e-5;

struct GradcheckReport {
  double max_rel_err = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;  // at the worst entry
  double numeric = 0.0;
  std::size_t checked = 0;
  // Smallest |relu input| at the checked point. Central differences are
  // only trustworthy when this is well above h.
  double relu_margin = 0.0;

  bool passed(double tolerance) const { return max_rel_err <= tolerance; }
};

// Compares tape gradients of `loss` against central differences with step h
// for every entry of every parameter that requires a gradient.
GradcheckReport gradcheck(const std::function<Tensor(Tape&)>& loss,
                          std::span<const NamedTensor> params, double h);

// Relu margin required of a gradcheck probe point.
inline constexpr double kGradcheckReluMargin = 1e-3;

GradcheckReport gradcheck(const LossKind& kind, const Episode& episode,
                          const Dataset& dataset, const SemanticStore& store,
                          const ModelParams& params, double h);

}  // namespace amfsl

#endif  // AMFSL_TRAIN_H_
