#ifndef AMFSL_DENSE_H_
#define AMFSL_DENSE_H_

#include <cstddef>

#include "amfsl/random.h"
#include "amfsl/tensor.h"

namespace amfsl {

// Fully-connected layer, y = x W + b with W stored [in x out].
struct Dense {
  Tensor weight;
  Tensor bias;

  std::size_t in() const { return weight.rows(); }
  std::size_t out() const { return weight.cols(); }

  Tensor forward(Tape& tape, const Tensor& x) const {
    return tape.add_row(tape.matmul(x, weight), bias);
  }

  // He-uniform weights, zero bias.
  static Dense random(std::size_t in, std::size_t out, Rng& rng);
  static Dense zeros(std::size_t in, std::size_t out);

  Dense clone() const { return {weight.clone(), bias.clone()}; }
};

}  // namespace amfsl

#endif  // AMFSL_DENSE_H_
