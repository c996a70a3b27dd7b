#ifndef AMFSL_EPISODE_H_
#define AMFSL_EPISODE_H_

#include <cstddef>
#include <vector>

#include "amfsl/dataset.h"
#include "amfsl/random.h"

namespace amfsl {

struct EpisodeConfig {
  std::size_t way = 5;       // n_t
  std::size_t shot = 1;      // n_s
  std::size_t queries = 15;  // n_q, per class
  Split split = Split::kBase;

  void validate() const;
};

// A dataset sample tagged with its position in Episode::classes.
struct EpisodeItem {
  std::size_t sample;
  std::size_t label;

  bool operator==(const EpisodeItem&) const = default;
};

// One n_t-way n_s-shot task. Support and query items are class-major:
// all of class 0, then class 1, and so on.
struct Episode {
  std::vector<ClassId> classes;
  std::vector<EpisodeItem> support;
  std::vector<EpisodeItem> query;

  std::size_t way() const { return classes.size(); }
  std::size_t shot() const { return way() == 0 ? 0 : support.size() / way(); }

  bool operator==(const Episode&) const = default;
};

// Classes uniformly without replacement from cfg.split; within each class,
// shot + queries samples uniformly without replacement (first `shot` go to
// the support set).
Episode sample_episode(const Dataset& dataset, const EpisodeConfig& cfg,
                       Rng& rng);

// Row-major [items x feature_dim] matrix of the items' features.
std::vector<double> gather_features(const Dataset& dataset,
                                    const std::vector<EpisodeItem>& items);

}  // namespace amfsl

#endif  // AMFSL_EPISODE_H_
