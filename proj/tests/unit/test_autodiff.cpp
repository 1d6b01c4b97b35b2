#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "oracles.hpp"
#include "sola/autodiff/ops.hpp"
#include "sola/autodiff/parameter.hpp"
#include "sola/error.hpp"
#include "sola/nn.hpp"
#include "sola/rng.hpp"

using namespace sola;
using namespace sola::ad;
using sola::testing::gradcheck;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

void expect_tensor_near(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], tol) << "entry " << i;
}

}  // namespace

TEST(Matmul, IdentityAndHandArithmetic) {
  Value a = Value::constant(Tensor::identity(2));
  Value b = Value::constant(Tensor{{1, 2}, {3, 4}});
  EXPECT_EQ(matmul(a, b).data(), (Tensor{{1, 2}, {3, 4}}));
  EXPECT_EQ(matmul(Value::constant(Tensor{{1, 2}}), Value::constant(Tensor{{3}, {4}})).data(),
            (Tensor{{11}}));
}

TEST(Matmul, GradientOfSumIsOnes) {
  Value a = Value::variable(Tensor{{1, 2}, {3, 4}});
  Value b = Value::constant(Tensor::identity(2));
  sum(matmul(a, b)).backward();
  EXPECT_EQ(a.grad(), Tensor(2, 2, 1.0));
  auto check = gradcheck([](const auto& v) { return sum(matmul(v[0], v[1])); },
                         {Tensor{{1, 2}, {3, 4}}, Tensor::identity(2)});
  EXPECT_LT(check.max_rel_error, 1e-6);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Value a = Value::constant(Tensor(2, 3));
  Value b = Value::constant(Tensor(2, 3));
  try {
    matmul(a, b);
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos) << e.what();
  }
}

TEST(Elementwise, ReluForwardAndNegativeBranch) {
  Value x = Value::variable(Tensor{{-1, 0, 2}});
  Value y = relu(x);
  EXPECT_EQ(y.data(), (Tensor{{0, 0, 2}}));
  sum(y).backward();
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(Elementwise, LogDerivativeAndClamp) {
  Value x = Value::variable(Tensor::scalar(2.0));
  log(x).backward();
  EXPECT_NEAR(x.grad()[0], 0.5, 1e-12);
  auto check = gradcheck([](const auto& v) { return sum(log(v[0])); }, {Tensor{{2.0}}});
  EXPECT_LT(check.max_rel_error, 1e-8);
  EXPECT_NEAR(log(Value::scalar(0.0)).item(), std::log(1e-12), 1e-9);
  EXPECT_TRUE(std::isfinite(log(Value::scalar(-3.0)).item()));
}

TEST(Elementwise, ScalarBroadcastOnly) {
  Value a = Value::constant(Tensor{{1, 2, 3}});
  EXPECT_EQ((a * Value::scalar(2.0)).data(), (Tensor{{2, 4, 6}}));
  EXPECT_EQ((Value::scalar(6.0) / a).data(), (Tensor{{6, 3, 2}}));
  EXPECT_THROW(add(a, Value::constant(Tensor(3, 1))), DimensionError);
}

TEST(Softmax, ClosedForms) {
  expect_tensor_near(softmax(Value::constant(Tensor{{0, 0, 0}})).data(),
                     Tensor{{1.0 / 3, 1.0 / 3, 1.0 / 3}}, 1e-15);
  expect_tensor_near(softmax(Value::constant(Tensor{{std::log(2.0), 0}})).data(),
                     Tensor{{2.0 / 3, 1.0 / 3}}, 1e-15);
  EXPECT_THROW(softmax(Value::constant(Tensor{{1, 2}}), 0.0), ParameterError);
  EXPECT_THROW(softmax(Value::constant(Tensor{{1, 2}}), -1.0), ParameterError);
}

TEST(Softmax, JacobianMatchesFiniteDifferences) {
  // Each output coordinate separately, against a fixed weighting.
  for (int k = 0; k < 3; ++k) {
    auto check = gradcheck(
        [k](const auto& v) { return pick(softmax(v[0], 0.7), std::vector<int>{0}, std::vector<int>{k}); },
        {Tensor{{1, 2, 3}}});
    EXPECT_LT(check.max_rel_error, 1e-5);
  }
}

TEST(Softmax, RowsSumToOneProperty) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x = random_tensor(3, 6, rng, -30, 30);
    Tensor y = softmax(Value::constant(x), rng.uniform(0.05, 5.0)).data();
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (std::size_t c = 0; c < 6; ++c) {
        EXPECT_GE(y(r, c), 0.0);
        EXPECT_LE(y(r, c), 1.0);
        s += y(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Gumbel, HardOutputIsOneHotWithGradient) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    Value logits = Value::variable(random_tensor(1, 5, rng, -3, 3));
    Value y = gumbel_softmax(logits, 0.5, true, rng);
    double total = 0;
    int ones = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      total += y.data()[i];
      ones += y.data()[i] == 1.0;
      EXPECT_TRUE(y.data()[i] == 0.0 || y.data()[i] == 1.0);
    }
    EXPECT_EQ(total, 1.0);
    EXPECT_EQ(ones, 1);
    // Weighting breaks the sum-to-one cancellation of the softmax Jacobian.
    sum(mul(y, Value::constant(Tensor{{1, 2, 3, 4, 5}}))).backward();
    double norm = 0;
    for (std::size_t i = 0; i < 5; ++i) norm += std::abs(logits.grad()[i]);
    EXPECT_GT(norm, 0.0);
  }
}

TEST(Gumbel, ArgmaxFrequenciesMatchProbabilities) {
  Rng rng(3);
  const int n = 100000;
  for (auto logits : {Tensor{{0.0, 0.0}}, Tensor{{std::log(9.0), 0.0}}}) {
    int first = 0;
    Value l = Value::constant(logits);
    for (int i = 0; i < n; ++i) first += gumbel_softmax(l, 1.0, true, rng).data()[0] == 1.0;
    double expected = std::exp(logits[0]) / (std::exp(logits[0]) + std::exp(logits[1]));
    EXPECT_NEAR(first / static_cast<double>(n), expected, 0.01);
  }
}

TEST(Gumbel, MaskedLogitsNeverChosen) {
  Rng rng(2);
  const double ninf = -std::numeric_limits<double>::infinity();
  Value logits = Value::variable(Tensor{{0.0, ninf, 0.5, ninf}});
  for (int i = 0; i < 2000; ++i) {
    auto s = gumbel_sample(logits, gumbel_noise(1, 4, rng), 1.0, true);
    EXPECT_NE(s.choice[0], 1);
    EXPECT_NE(s.choice[0], 3);
    EXPECT_TRUE(s.soft.data().all_finite());
  }
  EXPECT_THROW(gumbel_softmax(logits, 0.0, true, rng), ParameterError);
}

TEST(Concat, ForwardAndSplitGradient) {
  Value a = Value::variable(Tensor{{1}});
  Value b = Value::variable(Tensor{{2}});
  Value c = concat({a, b}, 0);
  EXPECT_EQ(c.data(), (Tensor{{1}, {2}}));
  sum(c).backward();
  EXPECT_EQ(a.grad()[0], 1.0);
  EXPECT_EQ(b.grad()[0], 1.0);
  EXPECT_EQ(concat({a}, 1).data(), a.data());
  EXPECT_THROW(concat({Value::constant(Tensor(1, 2)), Value::constant(Tensor(1, 3))}, 0),
               DimensionError);
}

TEST(Reduce, MeanSumMax) {
  EXPECT_EQ(mean(Value::constant(Tensor{{2, 4}})).item(), 3.0);
  Value x = Value::variable(Tensor{{1, 3, 2}});
  Value m = max(x);
  EXPECT_EQ(m.item(), 3.0);
  m.backward();
  EXPECT_EQ(x.grad(), (Tensor{{0, 1, 0}}));
  Value t = Value::variable(Tensor{{5, 5}});
  max(t).backward();
  EXPECT_EQ(t.grad(), (Tensor{{1, 0}}));
  EXPECT_THROW(sum(Value::constant(Tensor(0, 3)), 0), DomainError);
  EXPECT_THROW(mean(Value::constant(Tensor(0, 3))), DomainError);
  EXPECT_THROW(max(Value::constant(Tensor(2, 0)), 1), DomainError);
}

TEST(Backward, AccumulatesAcrossCalls) {
  Value x = Value::variable(Tensor{{1, 2, 3}});
  Value s = sum(x);
  s.backward();
  EXPECT_EQ(x.grad(), (Tensor{{1, 1, 1}}));
  s.backward();
  EXPECT_EQ(x.grad(), (Tensor{{2, 2, 2}}));
  x.zero_grad();
  s.backward();
  EXPECT_EQ(x.grad(), (Tensor{{1, 1, 1}}));
  EXPECT_THROW(x.backward(), ContractError);
}

TEST(Backward, SharedSubexpressionEqualsExpandedTree) {
  Rng rng(8);
  Tensor x0 = random_tensor(2, 3, rng);
  Value x = Value::variable(x0);
  Value e = exp(x);
  sum(mul(e, e) + e).backward();
  Value y = Value::variable(x0);
  sum(mul(exp(y), exp(y)) + exp(y)).backward();
  expect_tensor_near(x.grad(), y.grad(), 1e-12);
}

TEST(Backward, ThreeLayerMlpMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    std::vector<Tensor> in = {random_tensor(4, 3, rng), random_tensor(3, 5, rng),
                              random_tensor(1, 5, rng), random_tensor(5, 4, rng),
                              random_tensor(4, 2, rng)};
    auto check = gradcheck(
        [](const auto& v) {
          Value h = relu(add_row(matmul(v[0], v[1]), v[2]));
          h = relu(matmul(h, v[3]));
          return mean(matmul(h, v[4]));
        },
        in);
    EXPECT_LT(check.max_rel_error, 1e-4) << "seed " << seed;
  }
}

TEST(ParameterStore, RoundTripAndCompatibility) {
  Rng rng(4);
  ParameterStore store;
  nn::Linear lin(store, "head", 3, 2, rng);
  EXPECT_EQ(store.size(), 2u);
  EXPECT_EQ(store.scalar_count(), 8u);
  EXPECT_THROW(store.add("head.weight", Tensor(1, 1)), ContractError);

  auto path = std::filesystem::temp_directory_path() / "sola_params_roundtrip.json";
  store.save(path);
  ParameterStore other;
  Rng rng2(99);
  nn::Linear lin2(other, "head", 3, 2, rng2);
  EXPECT_NE(other.get("head.weight").data(), store.get("head.weight").data());
  other.load(path);
  EXPECT_EQ(other.get("head.weight").data(), store.get("head.weight").data());
  EXPECT_EQ(other.get("head.bias").data(), store.get("head.bias").data());

  ParameterStore wrong;
  nn::Linear lin3(wrong, "head", 4, 2, rng2);
  EXPECT_THROW(wrong.load(path), CompatibilityError);
  std::filesystem::remove(path);
}
