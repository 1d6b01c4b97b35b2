#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "sola/error.hpp"
#include "sola/trainer.hpp"

namespace sola {

using ad::Tensor;

std::vector<std::vector<int>> stratified_folds(std::span<const int> labels, int k, Rng& rng) {
  if (k < 2 || static_cast<std::size_t>(k) > labels.size()) {
    throw ParameterError("folds must be in [2, " + std::to_string(labels.size()) + "], got " +
                         std::to_string(k));
  }
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  std::size_t next = 0;
  for (auto& [label, members] : by_class) {
    rng.shuffle(members);
    for (int i : members) folds[next++ % folds.size()].push_back(i);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<int> stratified_subset(std::span<const int> labels, double fraction, Rng& rng) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ParameterError("label fraction must be in (0, 1]");
  }
  std::map<int, std::vector<int>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(static_cast<int>(i));
  std::vector<int> out;
  for (auto& [label, members] : by_class) {
    const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    if (take == 0) {
      throw StratificationError("no labeled graphs for class " + std::to_string(label) + " at fraction " +
                                std::to_string(fraction));
    }
    rng.shuffle(members);
    out.insert(out.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

struct Problem {
  const std::vector<double>* x;  // n × (d + 1), standardized, last column 1
  std::span<const int> y;
  std::size_t n, d1, c;
  double l2;
};

// Mean cross-entropy plus l2/2 |W|^2 (bias excluded) and its gradient.
double objective(const gsl_vector* w, void* params, gsl_vector* grad) {
  const auto& p = *static_cast<const Problem*>(params);
  if (grad) gsl_vector_set_zero(grad);
  std::vector<double> logits(p.c);
  double loss = 0.0;
  for (std::size_t i = 0; i < p.n; ++i) {
    const double* row = p.x->data() + i * p.d1;
    double top = -INFINITY;
    for (std::size_t k = 0; k < p.c; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < p.d1; ++j) s += row[j] * gsl_vector_get(w, j * p.c + k);
      logits[k] = s;
      top = std::max(top, s);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - top);
    const double lse = top + std::log(z);
    loss += lse - logits[static_cast<std::size_t>(p.y[i])];
    if (grad) {
      for (std::size_t k = 0; k < p.c; ++k) {
        const double g = std::exp(logits[k] - lse) - (static_cast<int>(k) == p.y[i] ? 1.0 : 0.0);
        for (std::size_t j = 0; j < p.d1; ++j) {
          const std::size_t idx = j * p.c + k;
          gsl_vector_set(grad, idx, gsl_vector_get(grad, idx) + g * row[j] / static_cast<double>(p.n));
        }
      }
    }
  }
  loss /= static_cast<double>(p.n);
  for (std::size_t j = 0; j + 1 < p.d1; ++j) {
    for (std::size_t k = 0; k < p.c; ++k) {
      const std::size_t idx = j * p.c + k;
      const double wv = gsl_vector_get(w, idx);
      loss += 0.5 * p.l2 * wv * wv;
      if (grad) gsl_vector_set(grad, idx, gsl_vector_get(grad, idx) + p.l2 * wv);
    }
  }
  return loss;
}

double f_only(const gsl_vector* w, void* params) { return objective(w, params, nullptr); }
void df_only(const gsl_vector* w, void* params, gsl_vector* g) { objective(w, params, g); }
void fdf(const gsl_vector* w, void* params, double* f, gsl_vector* g) { *f = objective(w, params, g); }

}  // namespace

void LogisticRegression::fit(const Tensor& x, std::span<const int> y, int num_classes, double l2,
                             int max_iter) {
  if (x.rows() != y.size() || y.empty()) throw ContractError("probe: label count mismatch");
  if (num_classes < 2) throw ParameterError("probe needs at least two classes");
  gsl_set_error_handler_off();
  classes_ = num_classes;
  const std::size_t n = x.rows(), d = x.cols(), c = static_cast<std::size_t>(num_classes);
  mean_.assign(d, 0.0);
  scale_.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0, ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x(i, j);
    mean_[j] = s / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) ss += (x(i, j) - mean_[j]) * (x(i, j) - mean_[j]);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    scale_[j] = sd > 1e-12 ? 1.0 / sd : 0.0;  // constant columns carry no signal
  }
  std::vector<double> xs(n * (d + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) xs[i * (d + 1) + j] = (x(i, j) - mean_[j]) * scale_[j];
    xs[i * (d + 1) + d] = 1.0;
  }
  Problem prob{&xs, y, n, d + 1, c, l2};
  gsl_multimin_function_fdf fn{&f_only, &df_only, &fdf, (d + 1) * c, &prob};
  gsl_vector* w = gsl_vector_calloc((d + 1) * c);
  gsl_multimin_fdfminimizer* s =
      gsl_multimin_fdfminimizer_alloc(gsl_multimin_fdfminimizer_vector_bfgs2, (d + 1) * c);
  gsl_multimin_fdfminimizer_set(s, &fn, w, 0.1, 0.1);
  for (int it = 0; it < max_iter; ++it) {
    if (gsl_multimin_fdfminimizer_iterate(s) != GSL_SUCCESS) break;  // no further progress
    if (gsl_multimin_test_gradient(s->gradient, 1e-6) == GSL_SUCCESS) break;
  }
  w_ = Tensor(d + 1, c);
  for (std::size_t i = 0; i < w_.size(); ++i) w_[i] = gsl_vector_get(s->x, i);
  gsl_multimin_fdfminimizer_free(s);
  gsl_vector_free(w);
}

std::vector<int> LogisticRegression::predict(const Tensor& x) const {
  const std::size_t d = mean_.size(), c = static_cast<std::size_t>(classes_);
  if (x.cols() != d) throw ContractError("probe: feature width mismatch");
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double best = -INFINITY;
    for (std::size_t k = 0; k < c; ++k) {
      double s = w_(d, k);
      for (std::size_t j = 0; j < d; ++j) s += (x(i, j) - mean_[j]) * scale_[j] * w_(j, k);
      if (s > best) {
        best = s;
        out[i] = static_cast<int>(k);
      }
    }
  }
  return out;
}

EvalResult linear_probe(const Tensor& embeddings, std::span<const int> labels, int num_classes,
                        int folds, std::uint64_t seed, double l2, int max_iter) {
  if (embeddings.rows() != labels.size()) throw ContractError("probe: label count mismatch");
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng = Rng(seed).split({static_cast<std::uint64_t>(attempt)});
    auto parts = stratified_folds(labels, folds, rng);
    std::vector<std::vector<int>> train_sets;
    bool single_class = false;
    for (std::size_t f = 0; f < parts.size(); ++f) {
      std::vector<bool> is_test(labels.size(), false);
      for (int i : parts[f]) is_test[i] = true;
      std::vector<int> train;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (!is_test[i]) train.push_back(static_cast<int>(i));
      bool same = std::all_of(train.begin(), train.end(),
                              [&](int i) { return labels[i] == labels[train.front()]; });
      single_class |= same || parts[f].empty();
      train_sets.push_back(std::move(train));
    }
    if (single_class) continue;
    EvalResult r;
    for (std::size_t f = 0; f < parts.size(); ++f) {
      auto gather = [&](const std::vector<int>& idx, std::vector<int>& y) {
        Tensor x(idx.size(), embeddings.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
          for (std::size_t j = 0; j < embeddings.cols(); ++j) x(i, j) = embeddings(idx[i], j);
          y.push_back(labels[idx[i]]);
        }
        return x;
      };
      std::vector<int> ytr, yte;
      Tensor xtr = gather(train_sets[f], ytr), xte = gather(parts[f], yte);
      LogisticRegression lr;
      lr.fit(xtr, ytr, num_classes, l2, max_iter);
      auto pred = lr.predict(xte);
      int hit = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == yte[i];
      r.folds.push_back(static_cast<double>(hit) / static_cast<double>(pred.size()));
    }
    r.mean = std::accumulate(r.folds.begin(), r.folds.end(), 0.0) / static_cast<double>(r.folds.size());
    double var = 0.0;
    for (double a : r.folds) var += (a - r.mean) * (a - r.mean);
    r.std = std::sqrt(var / static_cast<double>(r.folds.size()));
    return r;
  }
  throw StratificationError("could not build folds with two classes in every training part");
}

}  // namespace sola
