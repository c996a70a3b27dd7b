#include "amfsl/dense.h"

#include <cmath>
#include <vector>

namespace amfsl {

Dense Dense::random(std::size_t in, std::size_t out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  std::vector<double> w(in * out);
  for (double& v : w) v = uniform(rng);
  return {Tensor::parameter({in, out}, std::move(w)),
          Tensor::parameter({out}, std::vector<double>(out, 0.0))};
}

Dense Dense::zeros(std::size_t in, std::size_t out) {
  return {Tensor::parameter({in, out}, std::vector<double>(in * out, 0.0)),
          Tensor::parameter({out}, std::vector<double>(out, 0.0))};
}

}  // namespace amfsl
