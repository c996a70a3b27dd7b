#ifndef AMFSL_TOOLS_COMMANDS_H_
#define AMFSL_TOOLS_COMMANDS_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "amfsl/dataset.h"
#include "amfsl/model.h"
#include "amfsl/random.h"
#include "amfsl/run_config.h"
#include "amfsl/train.h"

namespace amfsl::cli {

// Flags shared by every subcommand.
struct Options {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;  // replaces the config seed
  std::filesystem::path out = ".";
  bool json = false;
  std::optional<std::filesystem::path> checkpoint;  // eval / gfsl-eval
};

// Exit codes: 0 success, 1 the command ran but its check failed,
// 2 bad input (config, data, IO).
inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitError = 2;

RunConfig resolve_config(const Options& options);
LabeledData load_data(const RunConfig& cfg);

// Random nonzero values for the class-relevant coefficients and the task
// generator's output layer, which otherwise start at zero and would hide
// gradient paths through the margins.
void perturb_generators(ModelParams& params, Rng& rng);

struct OracleCheck {
  std::size_t episodes = 0;
  std::size_t comparisons = 0;
  double max_rel_err = 0.0;
  std::string worst;  // description of the worst comparison
};

// Compares the tape episode loss against the scalar oracle on random tiny
// episodes (2-4 way, 1-2 shot, 1-3 queries, 3-dim embeddings) for every
// loss kind. Per-query losses, probabilities and the mean are compared.
OracleCheck oracle_check(const RunConfig& cfg, const Dataset& dataset,
                         const SemanticStore& store);

// One finite-difference check of the configured loss on a probe episode.
GradcheckReport gradcheck_run(const RunConfig& cfg, const LabeledData& data);

int gen_data(const Options& options, std::ostream& out);
int train(const Options& options, std::ostream& out);
int eval(const Options& options, std::ostream& out);
int gfsl_eval(const Options& options, std::ostream& out);
int gradcheck(const Options& options, std::ostream& out);
int oracle(const Options& options, std::ostream& out);

// Runs `command`, turning exceptions into a message on `err` and kExitError.
int guarded(const std::function<int()>& command, std::ostream& err);

}  // namespace amfsl::cli

#endif  // AMFSL_TOOLS_COMMANDS_H_
