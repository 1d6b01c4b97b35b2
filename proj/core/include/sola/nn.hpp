#pragma once

#include <string>

#include "sola/autodiff/ops.hpp"
#include "sola/autodiff/parameter.hpp"
#include "sola/rng.hpp"

namespace sola::nn {

/// Glorot-uniform initialization for a fan_in × fan_out weight.
ad::Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// y = x W + b with W: in × out, b: 1 × out.
class Linear {
 public:
  Linear() = default;
  Linear(ad::ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         Rng& rng);

  ad::Value operator()(const ad::Value& x) const;

  const ad::Value& weight() const { return weight_; }
  const ad::Value& bias() const { return bias_; }
  std::size_t in_features() const { return weight_.rows(); }
  std::size_t out_features() const { return weight_.cols(); }

 private:
  ad::Value weight_;
  ad::Value bias_;
};

}  // namespace sola::nn
