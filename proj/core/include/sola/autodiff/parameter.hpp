#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sola/autodiff/value.hpp"

namespace sola::ad {

struct Parameter {
  std::string name;  // dotted path, e.g. "encoder.layer0.mlp.w1"
  Value value;
};

/// Ordered registry of named trainable tensors. Names are unique; iteration
/// order is insertion order, which fixes the optimizer state layout.
class ParameterStore {
 public:
  static constexpr int kFormatVersion = 1;

  Value add(std::string name, Tensor init);
  bool contains(std::string_view name) const;
  const Value& get(std::string_view name) const;

  std::span<const Parameter> parameters() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad() const;

  /// {"format": "sola.params", "version": 1, "params": [{name, shape, data}]}
  nlohmann::json to_json() const;
  /// Overwrites values in place. Every stored name must be present with the
  /// same shape, otherwise CompatibilityError.
  void load_json(const nlohmann::json& doc);

  void save(const std::filesystem::path& path) const;
  void load(const std::filesystem::path& path);

 private:
  std::vector<Parameter> params_;
};

nlohmann::json tensor_to_json(const Tensor& t);
Tensor tensor_from_json(const nlohmann::json& j);

}  // namespace sola::ad
