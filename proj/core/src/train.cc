#include "amfsl/train.h"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "amfsl/errors.h"
#include "amfsl/eval.h"

namespace amfsl {

void AdamConfig::validate() const {
  if (!(step_size >= 0.0)) {
    throw ConfigError(fmt::format("step size must be >= 0, got {}", step_size));
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError(fmt::format("moment decay rates must lie in [0, 1), got {} and {}",
                                  beta1, beta2));
  }
  if (!(epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
}

OptimizerState make_optimizer_state(std::span<const Tensor> params) {
  OptimizerState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(OptimizerState& state, std::span<Tensor> params, const AdamConfig& hyper) {
  if (state.first_moment.size() != params.size()) {
    throw ShapeError(fmt::format("adam: state tracks {} tensors, given {}",
                                 state.first_moment.size(), params.size()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto g = params[i].grad();
    auto w = params[i].mutable_values();
    if (m.size() != w.size() || g.size() != w.size()) {
      throw ShapeError(fmt::format("adam: buffer size mismatch on tensor {}", i));
    }
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g[k];
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g[k] * g[k];
      w[k] -= hyper.step_size * (m[k] / c1) / (std::sqrt(v[k] / c2) + hyper.epsilon);
    }
  }
}

std::vector<NamedTensor> trainable_parameters(const ModelParams& params, const LossKind& kind) {
  std::vector<NamedTensor> out;
  for (auto& [name, t] : params.named_tensors()) {
    if (!t.requires_grad()) continue;
    if (name.starts_with("class_relevant.") && kind.type != LossType::kClassRelevant) continue;
    if (name.starts_with("task_relevant.") && kind.type != LossType::kTaskRelevant) continue;
    out.emplace_back(name, t);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string TrainLog::to_csv() const {
  std::string out = "episode,loss,val_acc\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.17g},", r.episode, r.loss);
    if (r.val_accuracy) out += fmt::format("{:.17g}", *r.val_accuracy);
    out += '\n';
  }
  return out;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << to_csv();
}

namespace {

std::string parameter_norms(std::span<const NamedTensor> params) {
  std::string out;
  for (const auto& [name, t] : params) {
    double ss = 0.0;
    for (double v : t.values()) ss += v * v;
    out += fmt::format("{}{}={:.6g}", out.empty() ? "" : ", ", name, std::sqrt(ss));
  }
  return out;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& dataset, const SemanticStore& store,
                  const ModelParams& initial) {
  cfg.episode.validate();
  cfg.adam.validate();
  TrainResult result{initial.clone(), {}};
  const auto named = trainable_parameters(result.params, cfg.loss);
  std::vector<Tensor> params;
  for (const auto& [_, t] : named) params.push_back(t);
  OptimizerState state = make_optimizer_state(params);

  EpisodeConfig val_cfg = cfg.episode;
  val_cfg.split = Split::kVal;
  Rng rng = make_rng(cfg.seed, streams::kTrainEpisodes);

  for (std::size_t e = 0; e < cfg.episodes; ++e) {
    const Episode ep = sample_episode(dataset, cfg.episode, rng);
    for (auto& p : params) p.zero_grad();
    Tape tape;
    const LossReport report = episode_loss(tape, cfg.loss, ep, dataset, result.params, &store);
    const double loss = report.total.item();
    if (!std::isfinite(loss)) {
      throw TrainingDiverged(fmt::format("non-finite loss at episode {}; parameter norms: {}",
                                         e, parameter_norms(named)));
    }
    tape.backward(report.total);
    adam_step(state, params, cfg.adam);

    TrainLogRow row{e, loss, std::nullopt};
    if (cfg.val_every > 0 && (e + 1) % cfg.val_every == 0) {
      row.val_accuracy = evaluate(result.params, dataset, val_cfg, cfg.val_episodes,
                                  cfg.seed + e)
                             .mean_accuracy;
    }
    result.log.rows.push_back(row);
  }
  return result;
}

// ---------------------------------------------------------------------------

GradcheckReport gradcheck(const std::function<Tensor(Tape&)>& loss,
                          std::span<const NamedTensor> params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("gradcheck step must be positive");
  std::vector<Tensor> tensors;
  for (const auto& [_, t] : params)
    if (t.requires_grad()) tensors.push_back(t);
  for (auto& t : tensors) t.zero_grad();
  double relu_margin = 0.0;
  {
    Tape tape;
    Tensor root = loss(tape);
    tape.backward(root);
    relu_margin = tape.relu_margin();
  }
  auto evaluate_loss = [&] {
    Tape tape(false);
    return loss(tape).item();
  };

  GradcheckReport report;
  report.relu_margin = relu_margin;
  for (const auto& [name, param] : params) {
    if (!param.requires_grad()) continue;
    Tensor t = param;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto w = t.mutable_values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double up = evaluate_loss();
      w[i] = saved - h;
      const double down = evaluate_loss();
      w[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double denom =
          std::max({std::abs(analytic[i]), std::abs(numeric), kGradcheckFloor});
      const double rel = std::abs(analytic[i] - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_err || report.checked == 1) {
        report.max_rel_err = rel;
        report.worst_parameter = name;
        report.worst_index = i;
        report.analytic = analytic[i];
        report.numeric = numeric;
      }
    }
  }
  return report;
}

GradcheckReport gradcheck(const LossKind& kind, const Episode& episode,
                          const Dataset& dataset, const SemanticStore& store,
                          const ModelParams& params, double h) {
  const auto named = trainable_parameters(params, kind);
  return gradcheck(
      [&](Tape& tape) {
        return episode_loss(tape, kind, episode, dataset, params, &store).total;
      },
      named, h);
}

}  // namespace amfsl
