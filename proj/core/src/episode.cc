#include "amfsl/episode.h"

#include <stdexcept>

#include <fmt/format.h>

namespace amfsl {

void EpisodeConfig::validate() const {
  if (way < 2) {
    throw std::invalid_argument(fmt::format("episode way must be >= 2, got {}", way));
  }
  if (shot < 1) {
    throw std::invalid_argument(fmt::format("episode shot must be >= 1, got {}", shot));
  }
  if (queries < 1) {
    throw std::invalid_argument(
        fmt::format("episode queries must be >= 1, got {}", queries));
  }
}

namespace {

// First k entries of a partial Fisher-Yates shuffle of `pool`.
template <typename T>
std::vector<T> draw_without_replacement(std::vector<T> pool, std::size_t k,
                                        Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

Episode sample_episode(const Dataset& dataset, const EpisodeConfig& cfg,
                       Rng& rng) {
  cfg.validate();
  const auto pool = dataset.classes_in(cfg.split);
  if (pool.size() < cfg.way) {
    throw std::invalid_argument(fmt::format(
        "{}-way episode needs {} {} classes, dataset has {}", cfg.way, cfg.way,
        split_name(cfg.split), pool.size()));
  }
  const std::size_t per_class = cfg.shot + cfg.queries;
  for (ClassId id : pool) {
    if (dataset.samples_of(id).size() < per_class) {
      throw std::invalid_argument(fmt::format(
          "class '{}' has {} samples, episode needs {} ({} shot + {} query)",
          dataset.class_name(id), dataset.samples_of(id).size(), per_class,
          cfg.shot, cfg.queries));
    }
  }

  Episode ep;
  ep.classes = draw_without_replacement(pool, cfg.way, rng);
  for (std::size_t label = 0; label < ep.classes.size(); ++label) {
    const auto picked =
        draw_without_replacement(dataset.samples_of(ep.classes[label]), per_class, rng);
    for (std::size_t i = 0; i < per_class; ++i) {
      auto& dest = i < cfg.shot ? ep.support : ep.query;
      dest.push_back({picked[i], label});
    }
  }
  return ep;
}

std::vector<double> gather_features(const Dataset& dataset,
                                    const std::vector<EpisodeItem>& items) {
  std::vector<double> out;
  out.reserve(items.size() * dataset.feature_dim());
  for (const auto& item : items) {
    auto x = dataset.features(item.sample);
    out.insert(out.end(), x.begin(), x.end());
  }
  return out;
}

}  // namespace amfsl
