#include "sola/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "sola/error.hpp"

namespace sola::ad {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), values_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values)) {
  if (values_.size() != rows * cols) {
    throw DimensionError("Tensor: " + std::to_string(values_.size()) +
                         " values do not fill shape " + ad::shape_string(rows, cols));
  }
}

Tensor::Tensor(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  values_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionError("Tensor: ragged initializer");
    values_.insert(values_.end(), r.begin(), r.end());
  }
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::column(std::vector<double> values) {
  std::size_t n = values.size();
  return Tensor(n, 1, std::move(values));
}

void Tensor::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const { return ad::shape_string(rows_, cols_); }

std::string shape_string(std::size_t rows, std::size_t cols) {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

}  // namespace sola::ad
