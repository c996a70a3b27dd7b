#ifndef AMFSL_EVAL_H_
#define AMFSL_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "amfsl/dataset.h"
#include "amfsl/episode.h"
#include "amfsl/model.h"

namespace amfsl {

inline constexpr std::size_t kDefaultTestEpisodes = 600;

struct EvalReport {
  double mean_accuracy = 0.0;  // percent
  double ci95 = 0.0;           // percent, 1.96 * sd / sqrt(n), sd with n-1
  std::size_t n_episodes = 0;
  std::vector<double> episode_accuracies;  // fractions in [0, 1]
};

// Aggregates per-episode accuracies (fractions) into a report.
EvalReport summarize_accuracies(std::vector<double> accuracies);

// Index of the largest logit; the first one on ties.
std::size_t argmax(std::span<const double> logits);

// Margin-free meta-testing: each query goes to the prototype with the
// highest metric similarity. No semantic information is consulted.
EvalReport evaluate(const ModelParams& params, const Dataset& dataset,
                    const EpisodeConfig& cfg, std::size_t n_episodes, std::uint64_t seed);

struct GfslReport {
  std::size_t shots = 0;
  double novel_accuracy = 0.0;  // percent, novel-class queries
  double all_accuracy = 0.0;    // percent, every query
  std::size_t novel_queries = 0;
  std::size_t all_queries = 0;
};

// Generalized few-shot evaluation over the union of base and novel classes.
// Per class, a seeded shuffle reserves the first `queries_per_class` samples
// as queries. Base classes are represented by the mean embedding of all
// their remaining samples, novel classes by the mean of the next `shots`
// samples. Queries are labeled by the best-scoring representation.
// The shuffle depends only on the seed, so larger shot counts extend the
// support sets of smaller ones while the queries stay fixed.
GfslReport evaluate_generalized(const ModelParams& params, const Dataset& dataset,
                                std::size_t shots, std::size_t queries_per_class,
                                std::uint64_t seed);

// Report output: CSV (header + one row), aligned text, and JSON.
std::string eval_report_csv(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);
std::string eval_report_json(const EvalReport& report);
std::string gfsl_reports_csv(std::span<const GfslReport> reports);
std::string gfsl_reports_table(std::span<const GfslReport> reports);
std::string gfsl_reports_json(std::span<const GfslReport> reports);

}  // namespace amfsl

#endif  // AMFSL_EVAL_H_
