#include "amfsl/episode.h"

#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "amfsl/dataset.h"

namespace amfsl {
namespace {

Dataset make_dataset(std::size_t n_base, std::size_t per_class) {
  std::vector<std::string> names;
  std::vector<Split> splits;
  for (std::size_t i = 0; i < n_base; ++i) {
    names.push_back("b" + std::to_string(i));
    splits.push_back(Split::kBase);
  }
  names.push_back("novel");
  splits.push_back(Split::kNovel);
  Dataset d(1, names, splits);
  for (ClassId c = 0; c < names.size(); ++c)
    for (std::size_t s = 0; s < per_class; ++s) {
      const double x[] = {static_cast<double>(c * 1000 + s)};
      d.add_sample(c, x);
    }
  return d;
}

void expect_valid(const Dataset& d, const EpisodeConfig& cfg, const Episode& ep) {
  ASSERT_EQ(ep.way(), cfg.way);
  ASSERT_EQ(ep.support.size(), cfg.way * cfg.shot);
  ASSERT_EQ(ep.query.size(), cfg.way * cfg.queries);
  EXPECT_EQ(ep.shot(), cfg.shot);
  std::set<ClassId> classes(ep.classes.begin(), ep.classes.end());
  EXPECT_EQ(classes.size(), cfg.way);
  for (ClassId c : classes) EXPECT_EQ(d.split(c), cfg.split);
  std::set<std::size_t> used;
  for (std::size_t i = 0; i < ep.support.size(); ++i) {
    const auto& it = ep.support[i];
    EXPECT_EQ(it.label, i / cfg.shot);  // class-major
    EXPECT_EQ(d.label(it.sample), ep.classes[it.label]);
    EXPECT_TRUE(used.insert(it.sample).second);
  }
  for (std::size_t i = 0; i < ep.query.size(); ++i) {
    const auto& it = ep.query[i];
    EXPECT_EQ(it.label, i / cfg.queries);
    EXPECT_EQ(d.label(it.sample), ep.classes[it.label]);
    EXPECT_TRUE(used.insert(it.sample).second);
  }
}

TEST(SampleEpisode, InvariantsOverRandomConfigs) {
  const Dataset d = make_dataset(12, 9);
  Rng cfg_rng = make_rng(5);
  Rng rng = make_rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    EpisodeConfig cfg;
    cfg.way = std::uniform_int_distribution<std::size_t>(2, 12)(cfg_rng);
    cfg.shot = std::uniform_int_distribution<std::size_t>(1, 4)(cfg_rng);
    cfg.queries = std::uniform_int_distribution<std::size_t>(1, 9 - cfg.shot)(cfg_rng);
    expect_valid(d, cfg, sample_episode(d, cfg, rng));
  }
}

TEST(SampleEpisode, WayEqualToPoolTakesAllClasses) {
  const Dataset d = make_dataset(5, 4);
  Rng rng = make_rng(1);
  EpisodeConfig cfg{5, 1, 3, Split::kBase};
  const Episode ep = sample_episode(d, cfg, rng);
  std::set<ClassId> got(ep.classes.begin(), ep.classes.end());
  EXPECT_EQ(got, (std::set<ClassId>{0, 1, 2, 3, 4}));
}

TEST(SampleEpisode, ExactlyEnoughSamples) {
  const Dataset d = make_dataset(3, 4);
  Rng rng = make_rng(1);
  EpisodeConfig cfg{3, 1, 3, Split::kBase};
  expect_valid(d, cfg, sample_episode(d, cfg, rng));
}

TEST(SampleEpisode, SameSeedSameEpisode) {
  const Dataset d = make_dataset(10, 20);
  Rng a = make_rng(9), b = make_rng(9);
  EXPECT_EQ(sample_episode(d, EpisodeConfig{}, a), sample_episode(d, EpisodeConfig{}, b));
}

TEST(SampleEpisode, ErrorsStateRequiredAndAvailable) {
  const Dataset d = make_dataset(3, 4);
  Rng rng = make_rng(1);
  try {
    sample_episode(d, EpisodeConfig{5, 1, 1, Split::kBase}, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("needs 5"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("has 3"), std::string::npos) << e.what();
  }
  try {
    sample_episode(d, EpisodeConfig{2, 2, 3, Split::kBase}, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("has 4 samples"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("needs 5"), std::string::npos) << e.what();
  }
  EXPECT_THROW(sample_episode(d, EpisodeConfig{1, 1, 1, Split::kBase}, rng),
               std::invalid_argument);
  EXPECT_THROW(sample_episode(d, EpisodeConfig{2, 0, 1, Split::kBase}, rng),
               std::invalid_argument);
  EXPECT_THROW(sample_episode(d, EpisodeConfig{2, 1, 0, Split::kBase}, rng),
               std::invalid_argument);
}

// Each class appears in an episode with probability 5/20; over 10^4 draws
// its count is Binomial(10^4, 1/4): mean 2500, sd sqrt(1875).
TEST(SampleEpisode, ClassFrequenciesAreUniform) {
  const Dataset d = make_dataset(20, 2);
  Rng rng = make_rng(17);
  std::vector<int> counts(20, 0);
  const EpisodeConfig cfg{5, 1, 1, Split::kBase};
  for (int i = 0; i < 10000; ++i)
    for (ClassId c : sample_episode(d, cfg, rng).classes) ++counts[c];
  const double sd = std::sqrt(10000 * 0.25 * 0.75);
  for (int c : counts) EXPECT_LE(std::abs(c - 2500.0), 3.0 * sd);
}

TEST(GatherFeatures, RowMajorInItemOrder) {
  const Dataset d = make_dataset(3, 4);
  const std::vector<EpisodeItem> items = {{5, 0}, {0, 1}};
  EXPECT_EQ(gather_features(d, items), (std::vector<double>{1001, 0}));
}

}  // namespace
}  // namespace amfsl
