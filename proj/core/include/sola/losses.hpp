#pragma once

#include <optional>
#include <span>
#include <vector>

#include "sola/autodiff/ops.hpp"
#include "sola/viewgen.hpp"

namespace sola {

/// Contrastive loss over 2M projected rows where rows (2k, 2k+1) are the two
/// views of graph k. Cosine similarity, temperature tau, averaged over both
/// directions of every positive pair. M = 1 gives exactly 0.
ad::Value nt_xent(const ad::Value& z, double tau);

/// Cosine similarity of two equally shaped matrices flattened to vectors.
/// Norms are floored at 1e-12; identical inputs give exactly 1.
ad::Value flat_cosine(const ad::Value& a, const ad::Value& b);

/// cos(S1, S2) + cos(A1, A2) over the soft state matrices and soft
/// adjacencies of two views of one graph. The adjacency term is computed on
/// the candidate edge lists without materializing N × N.
ad::Value similarity_loss(const AugmentedView& v1, const AugmentedView& v2);

/// Mean of similarity_loss over aligned view lists.
ad::Value similarity_loss(std::span<const AugmentedView> v1, std::span<const AugmentedView> v2);

/// Softmax cross-entropy averaged over rows.
ad::Value cross_entropy(const ad::Value& logits, std::span<const int> labels);

/// CE(original) + CE(view 1) + CE(view 2).
ad::Value classification_loss(const ad::Value& original, const ad::Value& view1,
                              const ad::Value& view2, std::span<const int> labels);

struct LossWeights {
  double cl = 1.0;
  double sim = 0.5;
  double cls = 1.0;
};

struct LossBundle {
  ad::Value cl;
  ad::Value sim;
  std::optional<ad::Value> cls;
  LossWeights weights;
  ad::Value total;

  static LossBundle combine(ad::Value cl, ad::Value sim, std::optional<ad::Value> cls,
                            const LossWeights& w);
};

}  // namespace sola
