#ifndef AMFSL_RUN_CONFIG_H_
#define AMFSL_RUN_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "amfsl/dataset.h"
#include "amfsl/episode.h"
#include "amfsl/loss.h"
#include "amfsl/model.h"
#include "amfsl/train.h"

namespace amfsl {

enum class DataSource { kBlobs, kFiles };

// Everything one run needs, with defaults for every field. The text form is
// a TOML subset: `[section]` headers, `key = value` lines, `#` comments;
// values are integers, floats, booleans, "strings" or [integer, lists].
//
//   seed = 0
//   [datasets]   source ("blobs"|"files"), dir, n_base, n_val, n_novel,
//                semantic_dim, feature_dim, samples_per_class,
//                semantic_noise, feature_noise, mixing_seed
//   [episodes]   way, shot, queries
//   [model]      widths, metric, gamma, train_gamma
//   [semantics]  generator_hidden, generator_batch_norm
//   [losses]     kind ("plain"|"naive"|"class_relevant"|"task_relevant"), margin
//   [train]      episodes, step_size, beta1, beta2, epsilon, val_every, val_episodes
//   [eval]       episodes, gfsl_shots, gfsl_queries, checkpoint
//   [gradcheck]  h, tolerance, perturb_generators
//   [oracle]     episodes, tolerance
//
// Unknown sections or keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;

  DataSource source = DataSource::kBlobs;
  std::filesystem::path data_dir = "data";
  BlobSpec blobs;

  EpisodeConfig episode;
  ModelConfig model;

  LossType loss = LossType::kPlain;
  double margin = 0.5;

  std::size_t train_episodes = 2000;
  AdamConfig adam;
  std::size_t val_every = 100;
  std::size_t val_episodes = 50;

  std::size_t eval_episodes = 600;
  std::vector<std::size_t> gfsl_shots = {1, 2, 5, 10, 20};
  std::size_t gfsl_queries = 15;
  std::filesystem::path checkpoint;

  double gradcheck_h = 1e-5;
  double gradcheck_tolerance = 1e-4;
  bool gradcheck_perturb_generators = true;

  std::size_t oracle_episodes = 100;
  double oracle_tolerance = 1e-10;

  // Throws ConfigError naming the line and key on malformed input.
  static RunConfig parse(std::string_view text, std::string_view source_name = "<config>");
  static RunConfig load(const std::filesystem::path& path);

  LossKind loss_kind() const;
  TrainConfig train_config() const;
  void validate() const;

  // Compact JSON echo of every field, in a fixed order.
  std::string to_json() const;
  // Parseable text form; parse(to_toml()) reproduces the config.
  std::string to_toml() const;
};

}  // namespace amfsl

#endif  // AMFSL_RUN_CONFIG_H_
