#ifndef AMFSL_ORACLE_H_
#define AMFSL_ORACLE_H_

#include <cstddef>
#include <vector>

#include "amfsl/dataset.h"
#include "amfsl/episode.h"
#include "amfsl/loss.h"
#include "amfsl/model.h"

namespace amfsl::oracle {

// Plain nested-vector copy of a model. The oracle never touches tensors or
// tapes; it recomputes episode losses with scalar loops and the textbook
// (unshifted) softmax, as an independent check on the tape pipeline.
struct Layer {
  std::vector<std::vector<double>> weight;  // [in][out]
  std::vector<double> bias;
};

struct Params {
  std::vector<Layer> embed;
  bool cosine = false;
  double gamma = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
  Layer gen_hidden;
  Layer gen_output;
  bool gen_batch_norm = false;
  std::vector<double> bn_hidden_scale, bn_hidden_shift, bn_output_scale, bn_output_shift;
};

Params snapshot(const ModelParams& params);

struct Result {
  std::vector<double> p;     // per query
  std::vector<double> loss;  // per query
  double total = 0.0;
};

Result episode_loss(const LossKind& kind, const Episode& episode, const Dataset& dataset,
                    const SemanticStore& store, const Params& params);

}  // namespace amfsl::oracle

#endif  // AMFSL_ORACLE_H_
