#include "amfsl/semantics.h"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "amfsl/errors.h"
#include "amfsl/semantic_store.h"
#include "test_support.h"

namespace amfsl {
namespace {

TEST(CosineSim, HandValues) {
  const std::vector<double> x = {1, 0}, y = {0, 1};
  EXPECT_EQ(cosine_sim(x, y), 0.0);
  const std::vector<double> e = {0.3, -1.2, 2.0};
  EXPECT_NEAR(cosine_sim(e, e), 1.0, 1e-15);
  // 32 / sqrt(14 * 77)
  const std::vector<double> a = {1, 2, 3}, b = {4, 5, 6};
  EXPECT_NEAR(cosine_sim(a, b), 0.97463184619707621, 1e-15);
}

TEST(CosineSim, SymmetricAndScaleInvariant) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto a = testing::random_values(6, seed);
    const auto b = testing::random_values(6, seed + 1000);
    std::vector<double> scaled = a;
    for (double& v : scaled) v *= 3.7;
    EXPECT_EQ(cosine_sim(a, b), cosine_sim(b, a));
    EXPECT_NEAR(cosine_sim(scaled, b), cosine_sim(a, b), 1e-12);
  }
}

TEST(CosineSim, ZeroVectorIsDomainError) {
  const std::vector<double> z = {0, 0}, e = {1, 0};
  EXPECT_THROW(cosine_sim(z, e), std::domain_error);
}

SemanticStore store_of(const std::vector<std::vector<double>>& vecs) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < vecs.size(); ++i) names.push_back("c" + std::to_string(i));
  SemanticStore s(names);
  for (std::size_t i = 0; i < vecs.size(); ++i) s.set(i, vecs[i]);
  return s;
}

TEST(SemanticStoreType, Validation) {
  SemanticStore s({"cat", "dog"});
  EXPECT_THROW(s.set(0, {0.0, 0.0}), std::domain_error);
  s.set(0, {1.0, 0.0});
  EXPECT_THROW(s.set(1, {1.0, 0.0, 0.0}), std::invalid_argument);
  try {
    s.vector(1);
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("dog"), std::string::npos) << e.what();
  }
}

TEST(ClassRelevant, Substitution) {
  // sim(c0, c1) = 0.8
  const SemanticStore store = store_of({{1, 0}, {0.8, 0.6}, {1, 0}});
  ClassRelevantGenerator g;
  g.alpha.mutable_values()[0] = 1.0;
  g.beta.mutable_values()[0] = 0.5;
  Tape tape;
  const ClassId classes[] = {0, 1, 2};
  const Tensor m = g.margins(tape, store, classes);
  EXPECT_NEAR(m.at(0, 1), 1.3, 1e-15);
  EXPECT_NEAR(m.at(1, 0), 1.3, 1e-15);
  EXPECT_NEAR(m.at(0, 2), 1.5, 1e-15);  // identical vectors: alpha + beta
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.at(i, j), m.at(j, i));
}

TEST(ClassRelevant, ZeroAlphaIsNaive) {
  const SemanticStore store = store_of({{1, 0}, {0.8, 0.6}, {-1, 0.1}});
  ClassRelevantGenerator g;
  g.beta.mutable_values()[0] = 0.25;
  Tape tape;
  const ClassId classes[] = {2, 0, 1};
  const Tensor m = g.margins(tape, store, classes);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      EXPECT_EQ(m.at(i, j), 0.25);
    }
}

TEST(ClassRelevant, CoefficientGradients) {
  const SemanticStore store = store_of({{1, 0}, {0.8, 0.6}, {-0.6, 0.8}});
  ClassRelevantGenerator g;
  g.alpha.mutable_values()[0] = 0.3;
  g.beta.mutable_values()[0] = -0.2;
  const ClassId classes[] = {0, 1, 2};
  // d m[0][1] / d alpha = sim = 0.8, d / d beta = 1
  const std::ptrdiff_t pick[] = {1};
  auto f = [&](Tape& t) { return t.sum(t.gather(g.margins(t, store, classes), pick, {1})); };
  const auto r = testing::finite_difference_check(f, {g.alpha, g.beta}, 1e-6);
  EXPECT_LT(r.max_rel_err, 1e-8);
  EXPECT_NEAR(g.alpha.grad()[0], 0.8, 1e-15);
  EXPECT_EQ(g.beta.grad()[0], 1.0);
}

TEST(NaiveMargins, ConstantOffDiagonal) {
  const Tensor m = naive_margins(3, 0.7);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(m.at(i, j), i == j ? 0.0 : 0.7);
}

TEST(CompetitorOrder, SortedByClassId) {
  const ClassId classes[] = {7, 2, 9, 4};
  EXPECT_EQ(competitor_order(classes, 0), (std::vector<std::size_t>{1, 3, 2}));
  EXPECT_EQ(competitor_order(classes, 2), (std::vector<std::size_t>{1, 3, 0}));
}

TEST(TaskRelevant, ZeroOutputLayerGivesZeroMargins) {
  Rng rng = make_rng(1);
  for (bool bn : {false, true}) {
    TaskRelevantGenerator g({4, 8, bn}, rng);
    Tape tape;
    const Tensor out = g.forward(tape, testing::random_tensor({4, 3}, 3, false));
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(TaskRelevant, IdentityLayersGiveReluOfSimilarities) {
  Rng rng = make_rng(1);
  TaskRelevantGenerator g({4, 3, false}, rng);
  const std::vector<double> eye = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::copy(eye.begin(), eye.end(), g.hidden().weight.mutable_values().begin());
  std::copy(eye.begin(), eye.end(), g.output().weight.mutable_values().begin());
  for (double& b : g.hidden().bias.mutable_values()) b = 0.0;
  const Tensor sims = Tensor::from({2, 3}, {0.5, -0.2, 0.9, -1.0, 0.0, 0.3});
  Tape tape;
  const Tensor out = g.forward(tape, sims);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out.at(i), std::max(0.0, sims.at(i)));
}

TEST(TaskRelevant, MarginMatrixUsesCanonicalOrder) {
  // Identity generator on a 3-way episode: margin[y][k] = relu(sim(y, k)).
  Rng rng = make_rng(1);
  TaskRelevantGenerator g({3, 2, false}, rng);
  const std::vector<double> eye = {1, 0, 0, 1};
  std::copy(eye.begin(), eye.end(), g.hidden().weight.mutable_values().begin());
  std::copy(eye.begin(), eye.end(), g.output().weight.mutable_values().begin());
  const SemanticStore store = store_of({{1, 0}, {0.8, 0.6}, {0.6, 0.8}, {0, 1}});
  const ClassId classes[] = {3, 0, 2};
  Tape tape;
  const Tensor m = g.margin_matrix(tape, store, classes);
  for (std::size_t y = 0; y < 3; ++y)
    for (std::size_t k = 0; k < 3; ++k) {
      const double want = y == k ? 0.0 : std::max(0.0, store.similarity(classes[y], classes[k]));
      EXPECT_NEAR(m.at(y, k), want, 1e-15) << y << "," << k;
    }
  const Tensor row = g.margins_for(tape, store, classes, 0);
  // competitors of class 3 in id order: class 0 (pos 1), class 2 (pos 2)
  EXPECT_NEAR(row.at(0), m.at(0, 1), 0.0);
  EXPECT_NEAR(row.at(1), m.at(0, 2), 0.0);
}

TEST(TaskRelevant, WidthMismatchIsConfigError) {
  Rng rng = make_rng(1);
  TaskRelevantGenerator g({5, 8, false}, rng);
  Tape tape;
  EXPECT_THROW(g.forward(tape, Tensor::zeros({5, 3})), ConfigError);
  const SemanticStore store = store_of({{1, 0}, {0, 1}, {1, 1}});
  const ClassId classes[] = {0, 1, 2};
  EXPECT_THROW(g.margin_matrix(tape, store, classes), ConfigError);
}

TEST(TaskRelevant, DeterministicInSeed) {
  Rng a = make_rng(4), b = make_rng(4);
  TaskRelevantGenerator ga({5, 8, false}, a), gb({5, 8, false}, b);
  EXPECT_TRUE(std::equal(ga.hidden().weight.values().begin(), ga.hidden().weight.values().end(),
                         gb.hidden().weight.values().begin()));
}

TEST(TaskRelevant, NotPermutationEquivariant) {
  Rng rng = make_rng(2);
  TaskRelevantGenerator g({4, 8, false}, rng);
  Rng noise = make_rng(3);
  std::normal_distribution<double> n01;
  for (double& w : g.output().weight.mutable_values()) w = n01(noise);
  const Tensor x = Tensor::from({1, 3}, {0.9, 0.1, -0.4});
  const Tensor perm = Tensor::from({1, 3}, {0.1, -0.4, 0.9});
  Tape tape;
  const Tensor a = g.forward(tape, x), b = g.forward(tape, perm);
  // Permuting inputs does not simply permute outputs.
  EXPECT_FALSE(a.at(0) == b.at(2) && a.at(1) == b.at(0) && a.at(2) == b.at(1));
}

}  // namespace
}  // namespace amfsl
