#include "amfsl/loss.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "amfsl/errors.h"

namespace amfsl {

std::string_view loss_type_name(LossType type) {
  switch (type) {
    case LossType::kPlain: return "plain";
    case LossType::kNaive: return "naive";
    case LossType::kClassRelevant: return "class_relevant";
    case LossType::kTaskRelevant: return "task_relevant";
  }
  return "?";
}

std::optional<LossType> parse_loss_type(std::string_view name) {
  for (LossType t : LossKind::kAll)
    if (loss_type_name(t) == name) return t;
  return std::nullopt;
}

LossKind LossKind::naive(double margin) {
  if (!(margin >= 0.0) || !std::isfinite(margin)) {
    throw ConfigError(fmt::format("naive margin must be finite and >= 0, got {}", margin));
  }
  return {LossType::kNaive, margin};
}

// ---------------------------------------------------------------------------
// Kernel

LossTerm margined_loss_row(std::span<const double> logits, std::size_t target,
                           std::span<const double> margins, std::span<double> grad) {
  const std::size_t n = logits.size();
  if (target >= n || margins.size() != n) {
    throw ShapeError(fmt::format("margined loss: target {} with {} logits and {} margins",
                                 target, n, margins.size()));
  }
  // Shift by the max of the margin-augmented logits.
  auto augmented = [&](std::size_t k) {
    return k == target ? logits[k] : logits[k] + margins[k];
  };
  double top = augmented(0);
  for (std::size_t k = 1; k < n; ++k) top = std::max(top, augmented(k));
  double rest = 0.0;  // competitors only
  for (std::size_t k = 0; k < n; ++k)
    if (k != target) rest += std::exp(augmented(k) - top);
  const double shifted_target = logits[target] - top;
  const double total = rest + std::exp(shifted_target);
  // With the target on top the loss is log(1 + rest), which can sit far
  // below one ulp of 1.
  const bool target_on_top = shifted_target == 0.0;
  const double loss =
      target_on_top ? std::log1p(rest) : std::log(total) - shifted_target;
  LossTerm term{std::exp(shifted_target) / total, loss};
  if (!grad.empty()) {
    for (std::size_t k = 0; k < n; ++k) {
      if (k != target) {
        grad[k] = std::exp(augmented(k) - top) / total;
      } else {
        grad[k] = target_on_top ? -rest / total : term.p - 1.0;
      }
    }
  }
  return term;
}

LossTerm margined_loss(std::span<const double> logits, std::size_t target,
                       std::span<const double> margins) {
  const std::size_t n = logits.size();
  if (n == 0 || margins.size() + 1 != n) {
    throw ShapeError(fmt::format("margined loss: {} margins for {} logits (expected {})",
                                 margins.size(), n, n == 0 ? 0 : n - 1));
  }
  if (target >= n) {
    throw ShapeError(fmt::format("margined loss: target {} out of {} classes", target, n));
  }
  std::vector<double> full(n, 0.0);
  for (std::size_t k = 0, j = 0; k < n; ++k)
    if (k != target) full[k] = margins[j++];
  return margined_loss_row(logits, target, full);
}

LossTerm plain_loss(std::span<const double> logits, std::size_t target) {
  const std::vector<double> zeros(logits.size(), 0.0);
  return margined_loss_row(logits, target, zeros);
}

Tensor margined_nll(Tape& tape, const Tensor& logits, const Tensor& margins,
                    std::span<const std::size_t> targets, std::vector<double>* probs) {
  if (logits.rank() != 2 || logits.shape() != margins.shape() ||
      targets.size() != logits.rows()) {
    throw ShapeError(fmt::format("margined_nll: logits {}, margins {}, {} targets",
                                 shape_string(logits.shape()),
                                 shape_string(margins.shape()), targets.size()));
  }
  const std::size_t m = logits.rows(), n = logits.cols();
  auto lv = logits.values();
  auto mv = margins.values();
  std::vector<double> out(m), dlogits(m * n);
  if (probs) probs->resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const LossTerm term =
        margined_loss_row(lv.subspan(i * n, n), targets[i], mv.subspan(i * n, n),
                          std::span<double>(dlogits).subspan(i * n, n));
    out[i] = term.loss;
    if (probs) (*probs)[i] = term.p;
  }
  const Tensor inputs[] = {logits, margins};
  Tensor y = tape.make_output({m}, std::move(out), inputs);
  tape.record(y, [logits, margins, y, m, n, dlogits = std::move(dlogits),
                  t = std::vector<std::size_t>(targets.begin(), targets.end())]() mutable {
    auto dy = y.grad();
    if (logits.requires_grad()) {
      auto dl = logits.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k) dl[i * n + k] += dy[i] * dlogits[i * n + k];
    }
    if (margins.requires_grad()) {
      auto dm = margins.mutable_grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < n; ++k)
          if (k != t[i]) dm[i * n + k] += dy[i] * dlogits[i * n + k];
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// Episode

Tensor episode_logits(Tape& tape, const ModelParams& params, const Dataset& dataset,
                      const Episode& episode) {
  const std::size_t ns = episode.support.size(), nq = episode.query.size();
  std::vector<double> x = gather_features(dataset, episode.support);
  const auto xq = gather_features(dataset, episode.query);
  x.insert(x.end(), xq.begin(), xq.end());
  Tensor emb = params.embed.forward(tape, Tensor::from({ns + nq, dataset.feature_dim()},
                                                       std::move(x)));
  std::vector<std::size_t> support_rows(ns), query_rows(nq);
  for (std::size_t i = 0; i < ns; ++i) support_rows[i] = i;
  for (std::size_t i = 0; i < nq; ++i) query_rows[i] = ns + i;
  Tensor protos = prototypes(tape, tape.gather_rows(emb, support_rows), episode.way());
  return params.metric.logits(tape, tape.gather_rows(emb, query_rows), protos);
}

Tensor episode_margins(Tape& tape, const LossKind& kind, const ModelParams& params,
                       const SemanticStore* store, const Episode& episode) {
  const std::size_t way = episode.way();
  switch (kind.type) {
    case LossType::kPlain:
      return naive_margins(way, 0.0);
    case LossType::kNaive:
      return naive_margins(way, kind.margin);
    case LossType::kClassRelevant:
    case LossType::kTaskRelevant:
      break;
  }
  if (store == nullptr) {
    throw ConfigError(fmt::format("{} loss needs a semantic store", loss_type_name(kind.type)));
  }
  if (kind.type == LossType::kClassRelevant) {
    return params.class_relevant.margins(tape, *store, episode.classes);
  }
  if (!params.task_relevant.defined()) {
    throw ConfigError("task_relevant loss needs a task-relevant generator");
  }
  return params.task_relevant.margin_matrix(tape, *store, episode.classes);
}

LossReport episode_loss(Tape& tape, const LossKind& kind, const Episode& episode,
                        const Dataset& dataset, const ModelParams& params,
                        const SemanticStore* store) {
  Tensor logits = episode_logits(tape, params, dataset, episode);
  Tensor margin_matrix = episode_margins(tape, kind, params, store, episode);
  std::vector<std::size_t> targets;
  targets.reserve(episode.query.size());
  for (const auto& q : episode.query) targets.push_back(q.label);
  std::vector<double> probs;
  Tensor per_query = margined_nll(tape, logits, tape.gather_rows(margin_matrix, targets),
                                  targets, &probs);

  LossReport report;
  const auto losses = per_query.values();
  for (std::size_t i = 0; i < losses.size(); ++i) {
    report.per_query.push_back({i, probs[i], losses[i]});
  }
  report.total = tape.mean(per_query);
  return report;
}

}  // namespace amfsl
