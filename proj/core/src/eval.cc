#include "amfsl/eval.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "json.hpp"

#include "amfsl/loss.h"

namespace amfsl {

EvalReport summarize_accuracies(std::vector<double> accuracies) {
  EvalReport r;
  r.n_episodes = accuracies.size();
  if (accuracies.empty()) return r;
  const double n = static_cast<double>(accuracies.size());
  const double mean = std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : accuracies) ss += (a - mean) * (a - mean);
  const double sd = accuracies.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  r.mean_accuracy = 100.0 * mean;
  r.ci95 = 100.0 * 1.96 * sd / std::sqrt(n);
  r.episode_accuracies = std::move(accuracies);
  return r;
}

std::size_t argmax(std::span<const double> logits) {
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

EvalReport evaluate(const ModelParams& params, const Dataset& dataset,
                    const EpisodeConfig& cfg, std::size_t n_episodes, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::kEval);
  std::vector<double> accuracies;
  accuracies.reserve(n_episodes);
  for (std::size_t e = 0; e < n_episodes; ++e) {
    const Episode ep = sample_episode(dataset, cfg, rng);
    Tape tape(false);
    const Tensor logits = episode_logits(tape, params, dataset, ep);
    const std::size_t way = ep.way();
    std::size_t correct = 0;
    for (std::size_t q = 0; q < ep.query.size(); ++q) {
      if (argmax(logits.values().subspan(q * way, way)) == ep.query[q].label) ++correct;
    }
    accuracies.push_back(static_cast<double>(correct) /
                         static_cast<double>(ep.query.size()));
  }
  return summarize_accuracies(std::move(accuracies));
}

GfslReport evaluate_generalized(const ModelParams& params, const Dataset& dataset,
                                std::size_t shots, std::size_t queries_per_class,
                                std::uint64_t seed) {
  if (shots == 0) throw std::invalid_argument("generalized eval needs shots >= 1");
  const auto base = dataset.classes_in(Split::kBase);
  const auto novel = dataset.classes_in(Split::kNovel);
  for (ClassId id : novel) {
    if (dataset.samples_of(id).size() < shots + queries_per_class) {
      throw std::invalid_argument(fmt::format(
          "novel class '{}' has {} samples, generalized eval needs {} ({} shot + {} query)",
          dataset.class_name(id), dataset.samples_of(id).size(), shots + queries_per_class,
          shots, queries_per_class));
    }
  }
  for (ClassId id : base) {
    if (dataset.samples_of(id).size() <= queries_per_class) {
      throw std::invalid_argument(fmt::format(
          "base class '{}' has {} samples, needs more than {} held-out queries",
          dataset.class_name(id), dataset.samples_of(id).size(), queries_per_class));
    }
  }

  Rng rng = make_rng(seed, streams::kGfsl);
  std::vector<ClassId> label_space = base;
  label_space.insert(label_space.end(), novel.begin(), novel.end());

  const std::size_t d = params.embed.output_dim();
  std::vector<double> reps;  // [label_space x d]
  struct Query {
    std::size_t sample;
    std::size_t label;
    bool is_novel;
  };
  std::vector<Query> queries;
  for (std::size_t pos = 0; pos < label_space.size(); ++pos) {
    const ClassId id = label_space[pos];
    const bool is_novel = pos >= base.size();
    auto pool = dataset.samples_of(id);
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t i = 0; i < queries_per_class; ++i) queries.push_back({pool[i], pos, is_novel});
    const std::size_t first = queries_per_class;
    const std::size_t last = is_novel ? first + shots : pool.size();
    std::vector<double> mean(d, 0.0);
    for (std::size_t i = first; i < last; ++i) {
      const auto z = params.embed.embed(dataset.features(pool[i]));
      for (std::size_t k = 0; k < d; ++k) mean[k] += z[k];
    }
    for (double& v : mean) v /= static_cast<double>(last - first);
    reps.insert(reps.end(), mean.begin(), mean.end());
  }

  GfslReport r;
  r.shots = shots;
  if (queries.empty() || label_space.empty()) return r;
  std::vector<double> x;
  for (const auto& q : queries) {
    auto f = dataset.features(q.sample);
    x.insert(x.end(), f.begin(), f.end());
  }
  Tape tape(false);
  const Tensor z = params.embed.forward(tape, Tensor::from({queries.size(), dataset.feature_dim()},
                                                           std::move(x)));
  const Tensor logits =
      params.metric.logits(tape, z, Tensor::from({label_space.size(), d}, std::move(reps)));
  std::size_t novel_correct = 0, all_correct = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const bool hit =
        argmax(logits.values().subspan(i * label_space.size(), label_space.size())) ==
        queries[i].label;
    all_correct += hit;
    if (queries[i].is_novel) {
      ++r.novel_queries;
      novel_correct += hit;
    }
  }
  r.all_queries = queries.size();
  r.all_accuracy = 100.0 * static_cast<double>(all_correct) / static_cast<double>(r.all_queries);
  if (r.novel_queries > 0) {
    r.novel_accuracy =
        100.0 * static_cast<double>(novel_correct) / static_cast<double>(r.novel_queries);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Formatting

std::string eval_report_csv(const EvalReport& r) {
  return fmt::format("n_episodes,mean_accuracy,ci95\n{},{:.4f},{:.4f}\n", r.n_episodes,
                     r.mean_accuracy, r.ci95);
}

std::string eval_report_table(const EvalReport& r) {
  return fmt::format("{:<12} {:>10} {:>8}\n{:<12} {:>10.2f} {:>8.2f}\n", "episodes",
                     "accuracy", "ci95", r.n_episodes, r.mean_accuracy, r.ci95);
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["n_episodes"] = r.n_episodes;
  j["mean_accuracy"] = r.mean_accuracy;
  j["ci95"] = r.ci95;
  j["episode_accuracies"] = r.episode_accuracies;
  return j.dump(2) + "\n";
}

std::string gfsl_reports_csv(std::span<const GfslReport> reports) {
  std::string out = "shots,novel_accuracy,all_accuracy,novel_queries,all_queries\n";
  for (const auto& r : reports) {
    out += fmt::format("{},{:.4f},{:.4f},{},{}\n", r.shots, r.novel_accuracy, r.all_accuracy,
                       r.novel_queries, r.all_queries);
  }
  return out;
}

std::string gfsl_reports_table(std::span<const GfslReport> reports) {
  std::string out = fmt::format("{:>6} {:>10} {:>10}\n", "shots", "novel", "all");
  for (const auto& r : reports) {
    out += fmt::format("{:>6} {:>10.2f} {:>10.2f}\n", r.shots, r.novel_accuracy, r.all_accuracy);
  }
  return out;
}

std::string gfsl_reports_json(std::span<const GfslReport> reports) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : reports) {
    nlohmann::ordered_json j;
    j["shots"] = r.shots;
    j["novel_accuracy"] = r.novel_accuracy;
    j["all_accuracy"] = r.all_accuracy;
    j["novel_queries"] = r.novel_queries;
    j["all_queries"] = r.all_queries;
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

}  // namespace amfsl
