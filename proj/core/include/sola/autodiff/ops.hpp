#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sola/autodiff/value.hpp"
#include "sola/rng.hpp"

namespace sola::ad {

/// Reduce over every entry.
inline constexpr int kAllAxes = -1;

// Linear algebra ------------------------------------------------------------

Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);

// Elementwise. Binary ops need equal shapes or one 1×1 operand. -------------

Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value div(const Value& a, const Value& b);
Value neg(const Value& a);
Value relu(const Value& a);
Value exp(const Value& a);
/// Natural log; input is clamped below at 1e-12.
Value log(const Value& a);
Value sqrt(const Value& a);
/// max(a, floor) elementwise; gradient passes only where a > floor.
Value clamp_min(const Value& a, double floor);
Value scale(const Value& a, double factor);
Value shift(const Value& a, double offset);

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }
inline Value operator*(const Value& a, const Value& b) { return mul(a, b); }
inline Value operator/(const Value& a, const Value& b) { return div(a, b); }
inline Value operator-(const Value& a) { return neg(a); }
inline Value operator*(const Value& a, double s) { return scale(a, s); }
inline Value operator*(double s, const Value& a) { return scale(a, s); }
inline Value operator+(const Value& a, double s) { return shift(a, s); }
inline Value operator-(const Value& a, double s) { return shift(a, -s); }

// Row/column broadcasting -----------------------------------------------------

/// x[i, :] + row[0, :]
Value add_row(const Value& x, const Value& row);
/// x[i, :] * row[0, :]
Value mul_row(const Value& x, const Value& row);
/// x[i, :] * col[i, 0]
Value mul_col(const Value& x, const Value& col);
/// x[i, :] / col[i, 0]
Value div_col(const Value& x, const Value& col);

// Reductions. axis 0 reduces rows (-> 1×n), axis 1 reduces columns (-> m×1). -

Value sum(const Value& x, int axis = kAllAxes);
Value mean(const Value& x, int axis = kAllAxes);
/// Ties route the gradient to the lowest index.
Value max(const Value& x, int axis = kAllAxes);

// Distributions over the last axis ------------------------------------------

/// Row-wise softmax(x / temperature), stabilized by the row max.
Value softmax(const Value& x, double temperature = 1.0);
Value log_softmax(const Value& x, double temperature = 1.0);

/// Forward value `hard`, gradient routed unchanged into `soft`.
Value straight_through(const Tensor& hard, const Value& soft);

/// Matrix of standard Gumbel draws, one row at a time.
Tensor gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng);

struct GumbelSample {
  Value output;             // one-hot (straight-through) if hard, else soft
  Value soft;               // softmax((logits + noise) / temperature)
  std::vector<int> choice;  // argmax per row
};

/// Row-wise Gumbel-Softmax with caller-supplied noise. Entries of `logits`
/// equal to -inf are never chosen.
GumbelSample gumbel_sample(const Value& logits, const Tensor& noise, double temperature,
                           bool hard);

Value gumbel_softmax(const Value& logits, double temperature, bool hard, Rng& rng);

// Structural ------------------------------------------------------------------

/// axis 0 stacks rows, axis 1 stacks columns.
Value concat(std::span<const Value> parts, int axis);
Value concat(std::initializer_list<Value> parts, int axis);

Value gather_rows(const Value& x, std::span<const int> index);
/// out[index[i], :] += x[i, :]; out has `out_rows` rows.
Value index_add(const Value& x, std::span<const int> index, std::size_t out_rows);
Value slice_cols(const Value& x, std::size_t begin, std::size_t end);
Value reshape(const Value& x, std::size_t rows, std::size_t cols);
/// Entries where mask is nonzero are replaced by `fill`; no gradient flows there.
Value masked_fill(const Value& x, std::span<const std::uint8_t> mask, double fill);
/// Column vector [x(rows[i], cols[i])].
Value pick(const Value& x, std::span<const int> rows, std::span<const int> cols);

}  // namespace sola::ad
