#include "sola/losses.hpp"

#include <cmath>
#include <limits>

#include "sola/error.hpp"

namespace sola {

using ad::Tensor;
using ad::Value;

namespace {

constexpr double kNormFloor = 1e-12;

Value norm_product(const Value& sq1, const Value& sq2) {
  const double f2 = kNormFloor * kNormFloor;
  return ad::sqrt(ad::clamp_min(sq1, f2) * ad::clamp_min(sq2, f2));
}

}  // namespace

Value nt_xent(const Value& z, double tau) {
  if (!(tau > 0.0)) throw ParameterError("contrastive temperature must be positive");
  const std::size_t rows = z.rows();
  if (rows == 0 || rows % 2 != 0) {
    throw ContractError("nt_xent needs 2M rows with M >= 1, got " + std::to_string(rows));
  }
  if (rows == 2) return Value::scalar(0.0);
  const double f2 = kNormFloor * kNormFloor;
  Value norms = ad::sqrt(ad::clamp_min(ad::sum(z * z, 1), f2));
  Value unit = ad::div_col(z, norms);
  Value sim = ad::scale(ad::matmul(unit, ad::transpose(unit)), 1.0 / tau);
  std::vector<std::uint8_t> diag(rows * rows, 0);
  for (std::size_t i = 0; i < rows; ++i) diag[i * rows + i] = 1;
  Value logp = ad::log_softmax(ad::masked_fill(sim, diag, -std::numeric_limits<double>::infinity()));
  std::vector<int> r(rows), partner(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    r[i] = static_cast<int>(i);
    partner[i] = static_cast<int>(i ^ 1U);
  }
  return -ad::mean(ad::pick(logp, r, partner));
}

Value flat_cosine(const Value& a, const Value& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError("cosine: shape " + ad::shape_string(a.rows(), a.cols()) + " vs " +
                        ad::shape_string(b.rows(), b.cols()));
  }
  return ad::sum(a * b) / norm_product(ad::sum(a * a), ad::sum(b * b));
}

Value similarity_loss(const AugmentedView& v1, const AugmentedView& v2) {
  if (v1.num_nodes != v2.num_nodes || v1.state.rows() != v2.state.rows()) {
    throw ContractError("similarity_loss: views come from different graphs");
  }
  Value s = flat_cosine(v1.state_soft, v2.state_soft);
  // Both adjacencies are symmetric, so the factor 2 from mirrored entries
  // cancels in the cosine and only the upper triangle is summed.
  std::vector<int> i1, i2;
  for (std::size_t a = 0, b = 0; a < v1.edges.size() && b < v2.edges.size();) {
    if (v1.edges[a] < v2.edges[b]) {
      ++a;
    } else if (v2.edges[b] < v1.edges[a]) {
      ++b;
    } else {
      i1.push_back(static_cast<int>(a++));
      i2.push_back(static_cast<int>(b++));
    }
  }
  if (v1.edges.empty() || v2.edges.empty()) return s;
  const Value& w1 = v1.edge_weight_soft;
  const Value& w2 = v2.edge_weight_soft;
  Value dot = i1.empty() ? Value::scalar(0.0)
                         : ad::sum(ad::gather_rows(w1, i1) * ad::gather_rows(w2, i2));
  return s + dot / norm_product(ad::sum(w1 * w1), ad::sum(w2 * w2));
}

Value similarity_loss(std::span<const AugmentedView> v1, std::span<const AugmentedView> v2) {
  if (v1.size() != v2.size() || v1.empty()) {
    throw ContractError("similarity_loss: view lists must be non-empty and aligned");
  }
  Value total = similarity_loss(v1[0], v2[0]);
  for (std::size_t i = 1; i < v1.size(); ++i) total = total + similarity_loss(v1[i], v2[i]);
  return ad::scale(total, 1.0 / static_cast<double>(v1.size()));
}

Value cross_entropy(const Value& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows() || labels.empty()) {
    throw ContractError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(logits.rows()) + " rows");
  }
  std::vector<int> rows(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= logits.cols()) {
      throw ContractError("cross_entropy: label " + std::to_string(labels[i]) + " out of range [0, " +
                          std::to_string(logits.cols()) + ")");
    }
    rows[i] = static_cast<int>(i);
  }
  return -ad::mean(ad::pick(ad::log_softmax(logits), rows, labels));
}

Value classification_loss(const Value& original, const Value& view1, const Value& view2,
                          std::span<const int> labels) {
  return cross_entropy(original, labels) + cross_entropy(view1, labels) +
         cross_entropy(view2, labels);
}

LossBundle LossBundle::combine(Value cl, Value sim, std::optional<Value> cls, const LossWeights& w) {
  LossBundle b;
  b.cl = std::move(cl);
  b.sim = std::move(sim);
  b.cls = std::move(cls);
  b.weights = w;
  b.total = ad::scale(b.cl, w.cl) + ad::scale(b.sim, w.sim);
  if (b.cls) b.total = b.total + ad::scale(*b.cls, w.cls);
  return b;
}

}  // namespace sola
