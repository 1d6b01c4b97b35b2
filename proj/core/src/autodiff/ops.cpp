#include "sola/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sola/error.hpp"

namespace sola::ad {
namespace {

constexpr double kLogFloor = 1e-12;

Tensor* grad_of(const NodePtr& n) { return n->requires_grad ? &n->ensure_grad() : nullptr; }

bool is_scalar(const Tensor& t) { return t.rows() == 1 && t.cols() == 1; }

void check_binary(const Value& a, const Value& b, const char* op) {
  if (!a.defined() || !b.defined()) throw ContractError(std::string(op) + ": undefined operand");
  const Tensor& x = a.data();
  const Tensor& y = b.data();
  if (x.same_shape(y) || is_scalar(x) || is_scalar(y)) return;
  throw DimensionError(std::string(op) + ": incompatible shapes " + x.shape_string() + " and " +
                       y.shape_string());
}

void check_index(int idx, std::size_t bound, const char* op) {
  if (idx < 0 || static_cast<std::size_t>(idx) >= bound) {
    throw DimensionError(std::string(op) + ": index " + std::to_string(idx) +
                         " out of range for extent " + std::to_string(bound));
  }
}

// Applies f(x_i, y_i) with scalar broadcasting; dfa/dfb give the partials.
template <typename F, typename DA, typename DB>
Value binary(const Value& a, const Value& b, const char* op, F f, DA dfa, DB dfb) {
  check_binary(a, b, op);
  const Tensor& x = a.data();
  const Tensor& y = b.data();
  const Tensor& big = x.size() >= y.size() ? x : y;
  Tensor out(big.rows(), big.cols());
  const bool xs = x.size() != out.size();
  const bool ys = y.size() != out.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = f(x[xs ? 0 : i], y[ys ? 0 : i]);
  }
  return make_result(std::move(out), op, {a, b}, [xs, ys, dfa, dfb](Node& self) {
    const Tensor& xa = self.parents[0]->data;
    const Tensor& yb = self.parents[1]->data;
    Tensor* ga = grad_of(self.parents[0]);
    Tensor* gb = grad_of(self.parents[1]);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      double xi = xa[xs ? 0 : i];
      double yi = yb[ys ? 0 : i];
      double g = self.grad[i];
      if (ga) (*ga)[xs ? 0 : i] += g * dfa(xi, yi);
      if (gb) (*gb)[ys ? 0 : i] += g * dfb(xi, yi);
    }
  });
}

template <typename F, typename D>
Value unary(const Value& a, const char* op, F f, D df) {
  if (!a.defined()) throw ContractError(std::string(op) + ": undefined operand");
  const Tensor& x = a.data();
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return make_result(std::move(out), op, {a}, [df](Node& self) {
    const Tensor& xa = self.parents[0]->data;
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      ga[i] += self.grad[i] * df(xa[i], self.data[i]);
    }
  });
}

void check_temperature(double t, const char* op) {
  if (!(t > 0.0) || !std::isfinite(t)) {
    throw ParameterError(std::string(op) + ": temperature must be positive and finite, got " +
                         std::to_string(t));
  }
}

}  // namespace

Value matmul(const Value& a, const Value& b) {
  const Tensor& x = a.data();
  const Tensor& y = b.data();
  if (x.cols() != y.rows()) {
    throw DimensionError("matmul: inner dimensions differ, " + x.shape_string() + " x " +
                         y.shape_string());
  }
  const std::size_t m = x.rows(), k = x.cols(), n = y.cols();
  Tensor out(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) out(i, j) += xv * y(p, j);
    }
  }
  return make_result(std::move(out), "matmul", {a, b}, [m, k, n](Node& self) {
    const Tensor& xa = self.parents[0]->data;
    const Tensor& yb = self.parents[1]->data;
    const Tensor& g = self.grad;
    if (Tensor* ga = grad_of(self.parents[0])) {
      // dA = dC * B^T
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g(i, j) * yb(p, j);
          (*ga)(i, p) += acc;
        }
      }
    }
    if (Tensor* gb = grad_of(self.parents[1])) {
      // dB = A^T * dC
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double xv = xa(i, p);
          if (xv == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) (*gb)(p, j) += xv * g(i, j);
        }
      }
    }
  });
}

Value transpose(const Value& a) {
  const Tensor& x = a.data();
  Tensor out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  return make_result(std::move(out), "transpose", {a}, [](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += self.grad(j, i);
  });
}

Value add(const Value& a, const Value& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Value sub(const Value& a, const Value& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Value mul(const Value& a, const Value& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Value div(const Value& a, const Value& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; }, [](double x, double y) { return -x / (y * y); });
}

Value neg(const Value& a) {
  return unary(
      a, "neg", [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Value relu(const Value& a) {
  return unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value exp(const Value& a) {
  return unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Value log(const Value& a) {
  return unary(
      a, "log", [](double x) { return std::log(std::max(x, kLogFloor)); },
      [](double x, double) { return x >= kLogFloor ? 1.0 / x : 0.0; });
}

Value sqrt(const Value& a) {
  return unary(
      a, "sqrt", [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Value clamp_min(const Value& a, double floor) {
  return unary(
      a, "clamp_min", [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Value scale(const Value& a, double factor) {
  return unary(
      a, "scale", [factor](double x) { return x * factor; },
      [factor](double, double) { return factor; });
}

Value shift(const Value& a, double offset) {
  return unary(
      a, "shift", [offset](double x) { return x + offset; }, [](double, double) { return 1.0; });
}

Value add_row(const Value& x, const Value& row) {
  const Tensor& a = x.data();
  const Tensor& r = row.data();
  if (r.rows() != 1 || r.cols() != a.cols()) {
    throw DimensionError("add_row: row " + r.shape_string() + " does not match " +
                         a.shape_string());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) += r[j];
  return make_result(std::move(out), "add_row", {x, row}, [](Node& self) {
    const Tensor& g = self.grad;
    if (Tensor* gx = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
    }
    if (Tensor* gr = grad_of(self.parents[1])) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gr)[j] += g(i, j);
    }
  });
}

Value mul_row(const Value& x, const Value& row) {
  const Tensor& a = x.data();
  const Tensor& r = row.data();
  if (r.rows() != 1 || r.cols() != a.cols()) {
    throw DimensionError("mul_row: row " + r.shape_string() + " does not match " +
                         a.shape_string());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) *= r[j];
  return make_result(std::move(out), "mul_row", {x, row}, [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& a = self.parents[0]->data;
    const Tensor& r = self.parents[1]->data;
    if (Tensor* gx = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gx)(i, j) += g(i, j) * r[j];
    }
    if (Tensor* gr = grad_of(self.parents[1])) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gr)[j] += g(i, j) * a(i, j);
    }
  });
}

Value mul_col(const Value& x, const Value& col) {
  const Tensor& a = x.data();
  const Tensor& c = col.data();
  if (c.cols() != 1 || c.rows() != a.rows()) {
    throw DimensionError("mul_col: column " + c.shape_string() + " does not match " +
                         a.shape_string());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) *= c[i];
  return make_result(std::move(out), "mul_col", {x, col}, [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& a = self.parents[0]->data;
    const Tensor& c = self.parents[1]->data;
    if (Tensor* gx = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gx)(i, j) += g(i, j) * c[i];
    }
    if (Tensor* gc = grad_of(self.parents[1])) {
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * a(i, j);
        (*gc)[i] += acc;
      }
    }
  });
}

Value div_col(const Value& x, const Value& col) {
  const Tensor& a = x.data();
  const Tensor& c = col.data();
  if (c.cols() != 1 || c.rows() != a.rows()) {
    throw DimensionError("div_col: column " + c.shape_string() + " does not match " +
                         a.shape_string());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) /= c[i];
  return make_result(std::move(out), "div_col", {x, col}, [](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& a = self.parents[0]->data;
    const Tensor& c = self.parents[1]->data;
    if (Tensor* gx = grad_of(self.parents[0])) {
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) (*gx)(i, j) += g(i, j) / c[i];
    }
    if (Tensor* gc = grad_of(self.parents[1])) {
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) acc -= g(i, j) * a(i, j);
        (*gc)[i] += acc / (c[i] * c[i]);
      }
    }
  });
}

namespace {

void check_axis(const Tensor& x, int axis, const char* op) {
  if (axis != kAllAxes && axis != 0 && axis != 1) {
    throw ContractError(std::string(op) + ": invalid axis " + std::to_string(axis));
  }
  std::size_t extent = axis == kAllAxes ? x.size() : (axis == 0 ? x.rows() : x.cols());
  if (extent == 0) {
    throw DomainError(std::string(op) + ": empty reduction extent on " + x.shape_string());
  }
}

// Output shape and the output slot each input entry reduces into.
std::pair<std::size_t, std::size_t> reduced_shape(const Tensor& x, int axis) {
  if (axis == kAllAxes) return {1, 1};
  if (axis == 0) return {1, x.cols()};
  return {x.rows(), 1};
}

std::size_t slot(std::size_t i, std::size_t j, int axis) {
  if (axis == kAllAxes) return 0;
  return axis == 0 ? j : i;
}

}  // namespace

Value sum(const Value& x, int axis) {
  const Tensor& a = x.data();
  check_axis(a, axis, "sum");
  auto [r, c] = reduced_shape(a, axis);
  Tensor out(r, c);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out[slot(i, j, axis)] += a(i, j);
  return make_result(std::move(out), "sum", {x}, [axis](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += self.grad[slot(i, j, axis)];
  });
}

Value mean(const Value& x, int axis) {
  const Tensor& a = x.data();
  check_axis(a, axis, "mean");
  const double extent = static_cast<double>(
      axis == kAllAxes ? a.size() : (axis == 0 ? a.rows() : a.cols()));
  auto [r, c] = reduced_shape(a, axis);
  Tensor out(r, c);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out[slot(i, j, axis)] += a(i, j);
  for (double& v : out.values()) v /= extent;
  return make_result(std::move(out), "mean", {x}, [axis, extent](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j)
        ga(i, j) += self.grad[slot(i, j, axis)] / extent;
  });
}

Value max(const Value& x, int axis) {
  const Tensor& a = x.data();
  check_axis(a, axis, "max");
  auto [r, c] = reduced_shape(a, axis);
  Tensor out(r, c, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> arg(out.size(), 0);
  std::vector<bool> seen(out.size(), false);
  // Row-major scan: the first strictly greater value wins, so ties keep the
  // lowest flat index.
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      std::size_t s = slot(i, j, axis);
      if (!seen[s] || a(i, j) > out[s]) {
        out[s] = a(i, j);
        arg[s] = i * a.cols() + j;
        seen[s] = true;
      }
    }
  }
  return make_result(std::move(out), "max", {x}, [arg = std::move(arg)](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t s = 0; s < arg.size(); ++s) ga[arg[s]] += self.grad[s];
  });
}

namespace {

Tensor softmax_rows(const Tensor& x, double temperature) {
  Tensor out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto row = x.row_span(i);
    double m = *std::max_element(row.begin(), row.end());
    if (!std::isfinite(m)) throw NonFiniteError("softmax: row has no finite entry");
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double e = std::exp((row[j] - m) / temperature);
      out(i, j) = e;
      z += e;
    }
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= z;
  }
  return out;
}

}  // namespace

Value softmax(const Value& x, double temperature) {
  check_temperature(temperature, "softmax");
  const Tensor& a = x.data();
  if (a.cols() == 0) throw DomainError("softmax: empty row");
  return make_result(softmax_rows(a, temperature), "softmax", {x}, [temperature](Node& self) {
    const Tensor& y = self.data;
    const Tensor& g = self.grad;
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        ga(i, j) += y(i, j) * (g(i, j) - dot) / temperature;
    }
  });
}

Value log_softmax(const Value& x, double temperature) {
  check_temperature(temperature, "log_softmax");
  const Tensor& a = x.data();
  if (a.cols() == 0) throw DomainError("log_softmax: empty row");
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = a.row_span(i);
    double m = *std::max_element(row.begin(), row.end());
    if (!std::isfinite(m)) throw NonFiniteError("log_softmax: row has no finite entry");
    double z = 0.0;
    for (double v : row) z += std::exp((v - m) / temperature);
    double lse = std::log(z);
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = (row[j] - m) / temperature - lse;
  }
  return make_result(std::move(out), "log_softmax", {x}, [temperature](Node& self) {
    const Tensor& y = self.data;
    const Tensor& g = self.grad;
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gsum = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) gsum += g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        ga(i, j) += (g(i, j) - std::exp(y(i, j)) * gsum) / temperature;
    }
  });
}

Value straight_through(const Tensor& hard, const Value& soft) {
  if (!hard.same_shape(soft.data())) {
    throw DimensionError("straight_through: " + hard.shape_string() + " vs " +
                         soft.data().shape_string());
  }
  return make_result(hard, "straight_through", {soft}, [](Node& self) {
    Tensor& gs = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += self.grad[i];
  });
}

Tensor gumbel_noise(std::size_t rows, std::size_t cols, Rng& rng) {
  Tensor t(rows, cols);
  for (double& v : t.values()) v = rng.gumbel();
  return t;
}

GumbelSample gumbel_sample(const Value& logits, const Tensor& noise, double temperature,
                           bool hard) {
  check_temperature(temperature, "gumbel_softmax");
  const Tensor& l = logits.data();
  if (!noise.same_shape(l)) {
    throw DimensionError("gumbel_softmax: noise " + noise.shape_string() + " vs logits " +
                         l.shape_string());
  }
  for (double v : l.values()) {
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
      throw NonFiniteError("gumbel_softmax: logits must be finite (or -inf for masked entries)");
    }
  }
  GumbelSample s;
  Value perturbed = add(logits, Value::constant(noise));
  s.soft = softmax(perturbed, temperature);
  const Tensor& p = perturbed.data();
  Tensor onehot(l.rows(), l.cols());
  s.choice.resize(l.rows());
  for (std::size_t i = 0; i < l.rows(); ++i) {
    auto row = p.row_span(i);
    auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    s.choice[i] = static_cast<int>(best);
    onehot(i, best) = 1.0;
  }
  s.output = hard ? straight_through(onehot, s.soft) : s.soft;
  return s;
}

Value gumbel_softmax(const Value& logits, double temperature, bool hard, Rng& rng) {
  check_temperature(temperature, "gumbel_softmax");
  Tensor noise = gumbel_noise(logits.rows(), logits.cols(), rng);
  return gumbel_sample(logits, noise, temperature, hard).output;
}

Value concat(std::span<const Value> parts, int axis) {
  if (parts.empty()) throw ContractError("concat: no parts");
  if (axis != 0 && axis != 1) throw ContractError("concat: axis must be 0 or 1");
  if (parts.size() == 1) return parts[0];
  std::size_t rows = 0, cols = 0;
  const Tensor& first = parts[0].data();
  for (const Value& v : parts) {
    const Tensor& t = v.data();
    if (axis == 0) {
      if (t.cols() != first.cols()) {
        throw DimensionError("concat(axis 0): column counts differ, " + first.shape_string() +
                             " vs " + t.shape_string());
      }
      rows += t.rows();
      cols = t.cols();
    } else {
      if (t.rows() != first.rows()) {
        throw DimensionError("concat(axis 1): row counts differ, " + first.shape_string() +
                             " vs " + t.shape_string());
      }
      cols += t.cols();
      rows = t.rows();
    }
  }
  Tensor out(rows, cols);
  std::size_t offset = 0;
  for (const Value& v : parts) {
    const Tensor& t = v.data();
    for (std::size_t i = 0; i < t.rows(); ++i)
      for (std::size_t j = 0; j < t.cols(); ++j) {
        if (axis == 0)
          out(offset + i, j) = t(i, j);
        else
          out(i, offset + j) = t(i, j);
      }
    offset += axis == 0 ? t.rows() : t.cols();
  }
  std::vector<Value> parents(parts.begin(), parts.end());
  return make_result(std::move(out), "concat", std::move(parents), [axis](Node& self) {
    std::size_t off = 0;
    for (const NodePtr& p : self.parents) {
      const std::size_t r = p->data.rows(), c = p->data.cols();
      if (Tensor* gp = grad_of(p)) {
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < c; ++j)
            (*gp)(i, j) += axis == 0 ? self.grad(off + i, j) : self.grad(i, off + j);
      }
      off += axis == 0 ? r : c;
    }
  });
}

Value concat(std::initializer_list<Value> parts, int axis) {
  return concat(std::span<const Value>(parts.begin(), parts.size()), axis);
}

Value gather_rows(const Value& x, std::span<const int> index) {
  const Tensor& a = x.data();
  Tensor out(index.size(), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    check_index(index[i], a.rows(), "gather_rows");
    auto src = a.row_span(static_cast<std::size_t>(index[i]));
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  std::vector<int> idx(index.begin(), index.end());
  return make_result(std::move(out), "gather_rows", {x}, [idx = std::move(idx)](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    const std::size_t c = ga.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto r = static_cast<std::size_t>(idx[i]);
      for (std::size_t j = 0; j < c; ++j) ga(r, j) += self.grad(i, j);
    }
  });
}

Value index_add(const Value& x, std::span<const int> index, std::size_t out_rows) {
  const Tensor& a = x.data();
  if (index.size() != a.rows()) {
    throw DimensionError("index_add: " + std::to_string(index.size()) + " indices for " +
                         a.shape_string());
  }
  Tensor out(out_rows, a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    check_index(index[i], out_rows, "index_add");
    const auto r = static_cast<std::size_t>(index[i]);
    for (std::size_t j = 0; j < a.cols(); ++j) out(r, j) += a(i, j);
  }
  std::vector<int> idx(index.begin(), index.end());
  return make_result(std::move(out), "index_add", {x}, [idx = std::move(idx)](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    const std::size_t c = ga.cols();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto r = static_cast<std::size_t>(idx[i]);
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += self.grad(r, j);
    }
  });
}

Value slice_cols(const Value& x, std::size_t begin, std::size_t end) {
  const Tensor& a = x.data();
  if (begin > end || end > a.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside " + a.shape_string());
  }
  Tensor out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a(i, j);
  return make_result(std::move(out), "slice_cols", {x}, [begin](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < self.grad.rows(); ++i)
      for (std::size_t j = 0; j < self.grad.cols(); ++j) ga(i, begin + j) += self.grad(i, j);
  });
}

Value reshape(const Value& x, std::size_t rows, std::size_t cols) {
  const Tensor& a = x.data();
  if (rows * cols != a.size()) {
    throw DimensionError("reshape: cannot view " + a.shape_string() + " as " +
                         ad::shape_string(rows, cols));
  }
  Tensor out(rows, cols, a.values());
  return make_result(std::move(out), "reshape", {x}, [](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Value masked_fill(const Value& x, std::span<const std::uint8_t> mask, double fill) {
  const Tensor& a = x.data();
  if (mask.size() != a.size()) {
    throw DimensionError("masked_fill: mask of " + std::to_string(mask.size()) + " for " +
                         a.shape_string());
  }
  Tensor out = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mask[i]) out[i] = fill;
  std::vector<std::uint8_t> m(mask.begin(), mask.end());
  return make_result(std::move(out), "masked_fill", {x}, [m = std::move(m)](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (!m[i]) ga[i] += self.grad[i];
  });
}

Value pick(const Value& x, std::span<const int> rows, std::span<const int> cols) {
  const Tensor& a = x.data();
  if (rows.size() != cols.size()) throw DimensionError("pick: index lists differ in length");
  Tensor out(rows.size(), 1);
  std::vector<std::size_t> flat(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    check_index(rows[i], a.rows(), "pick");
    check_index(cols[i], a.cols(), "pick");
    flat[i] = static_cast<std::size_t>(rows[i]) * a.cols() + static_cast<std::size_t>(cols[i]);
    out[i] = a[flat[i]];
  }
  return make_result(std::move(out), "pick", {x}, [flat = std::move(flat)](Node& self) {
    Tensor& ga = self.parents[0]->ensure_grad();
    for (std::size_t i = 0; i < flat.size(); ++i) ga[flat[i]] += self.grad[i];
  });
}

}  // namespace sola::ad
