#include "amfsl/tensor.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "test_support.h"

namespace amfsl {
namespace {

using testing::finite_difference_check;
using testing::random_tensor;
using testing::vals;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tape tape;
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor m = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(vals(tape.matmul(eye, m)), (std::vector<double>{1, 2, 3, 4}));
}

TEST(Matmul, Projection) {
  Tape tape;
  Tensor p = Tensor::from({2, 2}, {1, 0, 0, 0});
  Tensor v = Tensor::from({2, 1}, {5, 7});
  Tensor out = tape.matmul(p, v);
  EXPECT_EQ(out.shape(), (Shape{2, 1}));
  EXPECT_EQ(vals(out), (std::vector<double>{5, 0}));
}

TEST(Matmul, MatchesTripleLoop) {
  Tensor a = random_tensor({3, 3}, 1, false);
  Tensor b = random_tensor({3, 3}, 2, false);
  Tape tape;
  Tensor c = tape.matmul(a, b);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double want = 0.0;
      for (std::size_t k = 0; k < 3; ++k) want += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), want, 1e-12);
    }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  Tape tape;
  try {
    tape.matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Matmul, Associative) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor a = random_tensor({3, 4}, seed, false);
    Tensor b = random_tensor({4, 5}, seed + 100, false);
    Tensor c = random_tensor({5, 2}, seed + 200, false);
    Tape tape;
    Tensor left = tape.matmul(tape.matmul(a, b), c);
    Tensor right = tape.matmul(a, tape.matmul(b, c));
    for (std::size_t i = 0; i < left.size(); ++i)
      EXPECT_NEAR(left.at(i), right.at(i), 1e-9 * std::max(1.0, std::abs(right.at(i))));
  }
}

TEST(Elementwise, ForwardValues) {
  Tape tape;
  EXPECT_EQ(vals(tape.relu(Tensor::from({3}, {-1, 0, 2}))), (std::vector<double>{0, 0, 2}));
  EXPECT_EQ(vals(tape.exp(Tensor::from({1}, {0}))), (std::vector<double>{1}));
  EXPECT_NEAR(tape.log(tape.exp(Tensor::from({1}, {0.3}))).item(), 0.3, 1e-12);
  EXPECT_EQ(vals(tape.neg(Tensor::from({2}, {1, -2}))), (std::vector<double>{-1, 2}));
  Tensor a = Tensor::from({2}, {1, 2}), b = Tensor::from({2}, {3, 5});
  EXPECT_EQ(vals(tape.add(a, b)), (std::vector<double>{4, 7}));
  EXPECT_EQ(vals(tape.sub(a, b)), (std::vector<double>{-2, -3}));
  EXPECT_EQ(vals(tape.mul(a, b)), (std::vector<double>{3, 10}));
}

TEST(Elementwise, LogOfNonPositiveReportsIndex) {
  Tape tape;
  try {
    tape.log(Tensor::from({3}, {1.0, 2.0, -0.5}));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos) << e.what();
  }
}

TEST(Elementwise, BinaryShapeMismatch) {
  Tape tape;
  EXPECT_THROW(tape.add(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST(Elementwise, UnaryKindGivenTwoOperandsIsRejected) {
  Tape tape;
  EXPECT_THROW(tape.elementwise(ElementwiseKind::kRelu, Tensor::zeros({1}), Tensor::zeros({1})),
               std::invalid_argument);
  EXPECT_THROW(tape.elementwise(ElementwiseKind::kAdd, Tensor::zeros({1})),
               std::invalid_argument);
}

TEST(Relu, DerivativeAtZeroIsZero) {
  Tensor x = Tensor::from({3}, {-1, 0, 2}, true);
  Tape tape;
  tape.backward(tape.sum(tape.relu(x)));
  EXPECT_EQ(vals(Tensor::from({3}, {x.grad()[0], x.grad()[1], x.grad()[2]})),
            (std::vector<double>{0, 0, 1}));
  EXPECT_EQ(tape.relu_margin(), 0.0);
}

TEST(Relu, PropagatesNan) {
  Tape tape;
  const Tensor y = tape.relu(Tensor::from({1}, {std::nan("")}));
  EXPECT_TRUE(std::isnan(y.item()));
}

TEST(Reduce, SumMeanMax) {
  Tape tape;
  EXPECT_EQ(tape.sum(Tensor::from({3}, {1, 2, 3})).item(), 6.0);
  EXPECT_EQ(tape.mean(Tensor::from({4}, {2.5, 2.5, 2.5, 2.5})).item(), 2.5);
  EXPECT_EQ(tape.max(Tensor::from({3}, {2, 5, 5})).item(), 5.0);
}

TEST(Reduce, MaxRoutesAdjointToFirstMaximum) {
  Tensor x = Tensor::from({3}, {2, 5, 5}, true);
  Tape tape;
  tape.backward(tape.max(x));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(Reduce, AlongAxis) {
  Tape tape;
  Tensor m = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(vals(tape.sum(m, 0)), (std::vector<double>{5, 7, 9}));
  EXPECT_EQ(vals(tape.sum(m, 1)), (std::vector<double>{6, 15}));
  EXPECT_EQ(vals(tape.max(m, 1)), (std::vector<double>{3, 6}));
  EXPECT_EQ(vals(tape.mean(m, 0)), (std::vector<double>{2.5, 3.5, 4.5}));
}

TEST(Reduce, EmptyAxisRejected) {
  Tape tape;
  EXPECT_THROW(tape.sum(Tensor::zeros({2, 0}), 1), ShapeError);
  EXPECT_THROW(tape.sum(Tensor::zeros({0})), ShapeError);
  EXPECT_THROW(tape.sum(Tensor::zeros({2, 2}), 2), ShapeError);
}

TEST(Backward, SumGivesOnes) {
  Tensor w = random_tensor({2, 3}, 5);
  Tape tape;
  tape.backward(tape.sum(w));
  for (double g : w.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareGivesTwiceInput) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  tape.backward(tape.sum(tape.mul(w, w)));
  EXPECT_EQ(w.grad()[0], 2.0);
  EXPECT_EQ(w.grad()[1], 4.0);
}

TEST(Backward, NonScalarRootRejected) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  Tape tape;
  Tensor y = tape.relu(w);
  EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Backward, FanOutSumsContributions) {
  // f = sum(exp(x)) + sum(x * 3): df/dx = exp(x) + 3.
  Tensor x = Tensor::from({3}, {0.1, -0.4, 0.7}, true);
  Tensor three = Tensor::scalar(3.0);
  Tape tape;
  Tensor f = tape.add(tape.sum(tape.exp(x)), tape.sum(tape.mul_scalar(x, three)));
  tape.backward(f);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(x.grad()[i], std::exp(x.at(i)) + 3.0, 1e-15);
}

TEST(Backward, LeafGradientsAccumulateAcrossCalls) {
  Tensor x = Tensor::from({1}, {2.0}, true);
  Tape tape;
  Tensor f = tape.sum(tape.mul(x, x));
  tape.backward(f);
  tape.backward(f);
  EXPECT_EQ(x.grad()[0], 8.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Backward, NonRecordingTapeTracksNothing) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  Tape tape(false);
  Tensor y = tape.sum(tape.mul(x, x));
  EXPECT_FALSE(y.requires_grad());
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Gather, ZeroFillAndScatterBack) {
  Tensor src = Tensor::from({3}, {10, 20, 30}, true);
  const std::ptrdiff_t idx[] = {2, -1, 0, 2};
  Tape tape;
  Tensor g = tape.gather(src, idx, {2, 2});
  EXPECT_EQ(vals(g), (std::vector<double>{30, 0, 10, 30}));
  tape.backward(tape.sum(g));
  EXPECT_EQ(src.grad()[0], 1.0);
  EXPECT_EQ(src.grad()[1], 0.0);
  EXPECT_EQ(src.grad()[2], 2.0);
}

TEST(Gather, OutOfRangeRejected) {
  Tape tape;
  const std::ptrdiff_t idx[] = {3};
  EXPECT_THROW(tape.gather(Tensor::zeros({3}), idx, {1}), ShapeError);
}

TEST(PairwiseCosine, ZeroRowIsDomainError) {
  Tape tape;
  EXPECT_THROW(tape.pairwise_cosine(Tensor::from({1, 2}, {0, 0}), Tensor::from({1, 2}, {1, 0})),
               DomainError);
}

// Each op inside a small composition, against central differences at
// h = 1e-5. Batch-norm input gradients nearly cancel, so entries below 1e-4
// are judged on absolute error.
TEST(Gradients, EveryOpMatchesFiniteDifferences) {
  struct Case {
    const char* name;
    std::function<Tensor(Tape&, const std::vector<Tensor>&)> f;
    std::vector<Shape> shapes;
  };
  const std::vector<Case> cases = {
      {"matmul", [](Tape& t, const auto& x) { return t.sum(t.exp(t.matmul(x[0], x[1]))); },
       {{2, 3}, {3, 2}}},
      {"add", [](Tape& t, const auto& x) { return t.sum(t.exp(t.add(x[0], x[1]))); },
       {{4}, {4}}},
      {"sub", [](Tape& t, const auto& x) { return t.sum(t.exp(t.sub(x[0], x[1]))); },
       {{4}, {4}}},
      {"mul", [](Tape& t, const auto& x) { return t.sum(t.mul(t.mul(x[0], x[1]), x[0])); },
       {{4}, {4}}},
      {"relu", [](Tape& t, const auto& x) { return t.sum(t.mul(t.relu(x[0]), x[0])); }, {{6}}},
      {"exp", [](Tape& t, const auto& x) { return t.sum(t.exp(x[0])); }, {{5}}},
      {"log",
       [](Tape& t, const auto& x) { return t.sum(t.log(t.add_scalar(t.exp(x[0]), t.exp(x[1])))); },
       {{5}, {1}}},
      {"neg", [](Tape& t, const auto& x) { return t.sum(t.exp(t.neg(x[0]))); }, {{3}}},
      {"add_row", [](Tape& t, const auto& x) { return t.sum(t.exp(t.add_row(x[0], x[1]))); },
       {{3, 2}, {2}}},
      {"mul_scalar",
       [](Tape& t, const auto& x) { return t.sum(t.exp(t.mul_scalar(x[0], x[1]))); },
       {{3, 2}, {1}}},
      {"add_scalar",
       [](Tape& t, const auto& x) { return t.sum(t.exp(t.add_scalar(x[0], x[1]))); },
       {{3, 2}, {1}}},
      {"sum_axis", [](Tape& t, const auto& x) { return t.sum(t.exp(t.sum(x[0], 1))); },
       {{3, 4}}},
      {"mean_axis", [](Tape& t, const auto& x) { return t.sum(t.exp(t.mean(x[0], 0))); },
       {{3, 4}}},
      {"max_axis", [](Tape& t, const auto& x) { return t.sum(t.exp(t.max(x[0], 1))); },
       {{3, 4}}},
      {"gather",
       [](Tape& t, const auto& x) {
         const std::ptrdiff_t idx[] = {0, 3, -1, 3, 1, 2};
         return t.sum(t.exp(t.gather(x[0], idx, {2, 3})));
       },
       {{4}}},
      {"gather_rows",
       [](Tape& t, const auto& x) {
         const std::size_t rows[] = {2, 0, 2};
         return t.sum(t.exp(t.gather_rows(x[0], rows)));
       },
       {{3, 2}}},
      {"pairwise_sq_dist",
       [](Tape& t, const auto& x) { return t.sum(t.exp(t.neg(t.pairwise_sq_dist(x[0], x[1])))); },
       {{3, 4}, {2, 4}}},
      {"pairwise_cosine",
       [](Tape& t, const auto& x) { return t.sum(t.exp(t.pairwise_cosine(x[0], x[1]))); },
       {{3, 4}, {2, 4}}},
      {"batch_norm",
       [](Tape& t, const auto& x) {
         Tensor y = t.batch_norm(x[0], x[1], x[2]);
         return t.sum(t.mul(y, t.exp(y)));
       },
       {{4, 3}, {3}, {3}}},
  };
  std::uint64_t seed = 1;
  for (const auto& c : cases) {
    std::vector<Tensor> leaves;
    for (const auto& s : c.shapes) leaves.push_back(random_tensor(s, seed++));
    const auto r = finite_difference_check([&](Tape& t) { return c.f(t, leaves); }, leaves, 1e-5, 1e-4);
    if (r.relu_margin < 1e-3) continue;  // probe landed near a kink
    EXPECT_LT(r.max_rel_err, 1e-6) << c.name;
  }
}

TEST(Gradients, ComposedGraphMatchesFiniteDifferences) {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tensor x = random_tensor({4, 3}, seed * 7 + 1);
    Tensor w1 = random_tensor({3, 5}, seed * 7 + 2);
    Tensor b1 = random_tensor({5}, seed * 7 + 3);
    Tensor w2 = random_tensor({5, 2}, seed * 7 + 4);
    Tensor protos = random_tensor({3, 2}, seed * 7 + 5);
    Tensor scale = Tensor::from({1}, {0.7}, true);
    auto f = [&](Tape& t) {
      Tensor h = t.relu(t.add_row(t.matmul(x, w1), b1));
      Tensor z = t.matmul(h, w2);
      Tensor logits = t.mul_scalar(t.neg(t.pairwise_sq_dist(z, protos)), scale);
      Tensor lse = t.log(t.sum(t.exp(logits), 1));
      Tensor top = t.max(logits, 1);
      return t.mean(t.sub(lse, top));
    };
    // Round-off in the quotient is ~eps * |f| / h, so h = 1e-5 here.
    const auto r = finite_difference_check(f, {x, w1, b1, w2, protos, scale}, 1e-5, 1e-6);
    if (r.relu_margin < 1e-3) continue;
    ++checked;
    EXPECT_LT(r.max_rel_err, 1e-7) << "seed " << seed;
  }
  EXPECT_GE(checked, 5);
}

TEST(TensorHandle, CopiesShareAndCloneDetaches) {
  Tensor a = Tensor::from({2}, {1, 2}, true);
  Tensor b = a;
  Tensor c = a.clone();
  a.mutable_values()[0] = 9;
  EXPECT_EQ(b.at(0), 9.0);
  EXPECT_EQ(c.at(0), 1.0);
  EXPECT_TRUE(a.same_storage(b));
  EXPECT_FALSE(a.same_storage(c));
  EXPECT_FALSE(a.detached().requires_grad());
}

TEST(TensorHandle, ValueCountMustMatchShape) {
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor::zeros({2}).item(), ShapeError);
}

}  // namespace
}  // namespace amfsl
