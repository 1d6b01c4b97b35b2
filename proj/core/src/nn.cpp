#include "sola/nn.hpp"

#include <cmath>

#include "sola/error.hpp"

namespace sola::nn {

ad::Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  ad::Tensor t(fan_in, fan_out);
  for (double& v : t.values()) v = rng.uniform(-limit, limit);
  return t;
}

Linear::Linear(ad::ParameterStore& store, const std::string& name, std::size_t in,
               std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw ParameterError("Linear " + name + ": zero-width layer");
  weight_ = store.add(name + ".weight", glorot_uniform(in, out, rng));
  bias_ = store.add(name + ".bias", ad::Tensor(1, out));
}

ad::Value Linear::operator()(const ad::Value& x) const {
  if (x.cols() != weight_.rows()) {
    throw DimensionError("Linear: input " + x.data().shape_string() + " vs weight " +
                         weight_.data().shape_string());
  }
  return ad::add_row(ad::matmul(x, weight_), bias_);
}

}  // namespace sola::nn
