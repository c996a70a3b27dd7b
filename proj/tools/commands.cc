#include "commands.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "amfsl/checkpoint.h"
#include "amfsl/episode.h"
#include "amfsl/errors.h"
#include "amfsl/eval.h"
#include "amfsl/loss.h"
#include "amfsl/oracle.h"

namespace amfsl::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error(fmt::format("cannot open {} for writing", path.string()));
  f << text;
  if (!f.flush()) throw std::runtime_error(fmt::format("write to {} failed", path.string()));
}

fs::path prepare_out(const Options& options) {
  std::error_code ec;
  fs::create_directories(options.out, ec);
  if (ec) {
    throw std::runtime_error(
        fmt::format("cannot create output directory {}: {}", options.out.string(), ec.message()));
  }
  return options.out;
}

double rel_err(double a, double b) {
  const double diff = std::abs(a - b);
  return b == 0.0 ? diff : diff / std::abs(b);
}

ModelParams load_trained(const Options& options, const RunConfig& cfg, const Dataset& dataset) {
  fs::path path;
  if (options.checkpoint) {
    path = *options.checkpoint;
  } else if (!cfg.checkpoint.empty()) {
    path = cfg.checkpoint;
  } else {
    throw ConfigError("no checkpoint given: pass --checkpoint or set [eval] checkpoint");
  }
  ModelParams params = ModelParams::init(cfg.model, dataset.feature_dim(), cfg.episode.way, cfg.seed);
  try {
    load_params(params, read_checkpoint(path));
  } catch (const std::exception& e) {
    throw std::runtime_error(fmt::format("{}: {}", path.string(), e.what()));
  }
  return params;
}

}  // namespace

RunConfig resolve_config(const Options& options) {
  RunConfig cfg = options.config ? RunConfig::load(*options.config) : RunConfig{};
  if (options.seed) cfg.seed = *options.seed;
  cfg.validate();
  return cfg;
}

LabeledData load_data(const RunConfig& cfg) {
  if (cfg.source == DataSource::kFiles) return load_csv(DataFiles::in_directory(cfg.data_dir));
  return generate_blobs(cfg.blobs, cfg.seed);
}

void perturb_generators(ModelParams& params, Rng& rng) {
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  params.class_relevant.alpha.mutable_values()[0] = coef(rng);
  params.class_relevant.beta.mutable_values()[0] = 0.5 * coef(rng);
  if (!params.task_relevant.defined()) return;
  std::normal_distribution<double> noise(0.0, 0.5);
  const Dense& out = params.task_relevant.output();
  for (double& w : out.weight.mutable_values()) w = noise(rng);
  for (double& b : out.bias.mutable_values()) b = noise(rng);
}

OracleCheck oracle_check(const RunConfig& cfg, const Dataset& dataset,
                         const SemanticStore& store) {
  const std::size_t n_base = dataset.classes_in(Split::kBase).size();
  if (n_base < 2) throw ConfigError("oracle check needs at least 2 base classes");
  Rng rng = make_rng(cfg.seed, streams::kProbe);
  auto draw = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  OracleCheck check;
  auto compare = [&](double tape, double reference, const std::string& what) {
    const double e = rel_err(tape, reference);
    if (check.comparisons == 0 || e > check.max_rel_err) {
      check.max_rel_err = e;
      check.worst = fmt::format("{}: tape {:.17g} oracle {:.17g}", what, tape, reference);
    }
    ++check.comparisons;
  };

  for (std::size_t i = 0; i < cfg.oracle_episodes; ++i) {
    EpisodeConfig ec;
    ec.way = draw(2, std::min<std::size_t>(4, n_base));
    ec.shot = draw(1, 2);
    ec.queries = draw(1, 3);
    const Episode ep = sample_episode(dataset, ec, rng);

    ModelConfig mc = cfg.model;
    mc.widths = {4, 3};
    mc.metric = i % 2 == 0 ? MetricKind::kNegSqEuclidean : MetricKind::kCosine;
    mc.gamma = 0.5 + 1.5 * unit(rng);
    mc.train_gamma = false;
    mc.generator_batch_norm = i % 4 >= 2;
    ModelParams params = ModelParams::init(mc, dataset.feature_dim(), ec.way, rng());
    perturb_generators(params, rng);
    // Nonzero biases keep cosine away from all-zero embeddings.
    std::normal_distribution<double> bias_noise(0.0, 0.1);
    for (const Dense& layer : params.embed.layers())
      for (double& b : layer.bias.mutable_values()) b = bias_noise(rng);
    const oracle::Params snap = oracle::snapshot(params);

    const LossKind kinds[] = {LossKind::plain(), LossKind::naive(unit(rng)),
                              LossKind::class_relevant(), LossKind::task_relevant()};
    for (const LossKind& kind : kinds) {
      Tape tape(false);
      const LossReport got = episode_loss(tape, kind, ep, dataset, params, &store);
      const oracle::Result want = oracle::episode_loss(kind, ep, dataset, store, snap);
      const auto name = loss_type_name(kind.type);
      for (std::size_t q = 0; q < got.per_query.size(); ++q) {
        compare(got.per_query[q].loss, want.loss[q],
                fmt::format("episode {} {} query {} loss", i, name, q));
        compare(got.per_query[q].p, want.p[q],
                fmt::format("episode {} {} query {} p", i, name, q));
      }
      compare(got.total.item(), want.total, fmt::format("episode {} {} mean loss", i, name));
    }
    ++check.episodes;
  }
  return check;
}

GradcheckReport gradcheck_run(const RunConfig& cfg, const LabeledData& data) {
  ModelParams params =
      ModelParams::init(cfg.model, data.dataset.feature_dim(), cfg.episode.way, cfg.seed);
  Rng rng = make_rng(cfg.seed, streams::kProbe);
  if (cfg.gradcheck_perturb_generators) perturb_generators(params, rng);
  const LossKind kind = cfg.loss_kind();
  // Draw probe episodes until no relu input sits near its kink; fall back to
  // the best one seen.
  Episode best;
  double best_margin = -1.0;
  for (int attempt = 0; attempt < 1000 && best_margin < kGradcheckReluMargin; ++attempt) {
    Episode ep = sample_episode(data.dataset, cfg.train_config().episode, rng);
    Tape probe(false);
    episode_loss(probe, kind, ep, data.dataset, params, &data.semantics);
    if (probe.relu_margin() > best_margin) {
      best_margin = probe.relu_margin();
      best = std::move(ep);
    }
  }
  return gradcheck(kind, best, data.dataset, data.semantics, params, cfg.gradcheck_h);
}

int gen_data(const Options& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = prepare_out(options);
  const LabeledData data = generate_blobs(cfg.blobs, cfg.seed);
  const DataFiles files = DataFiles::in_directory(dir);
  save_csv(data.dataset, data.semantics, files);
  if (options.json) {
    Json j;
    j["classes"] = data.dataset.num_classes();
    j["samples"] = data.dataset.num_samples();
    j["features"] = files.features.string();
    j["semantics"] = files.semantics.string();
    j["splits"] = files.splits.string();
    out << j.dump(2) << "\n";
  } else {
    fmt::print(out, "wrote {} samples of {} classes to {}\n", data.dataset.num_samples(),
               data.dataset.num_classes(), dir.string());
  }
  return kExitOk;
}

int train(const Options& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = prepare_out(options);
  const LabeledData data = load_data(cfg);
  const ModelParams initial =
      ModelParams::init(cfg.model, data.dataset.feature_dim(), cfg.episode.way, cfg.seed);
  TrainResult result;
  try {
    result = amfsl::train(cfg.train_config(), data.dataset, data.semantics, initial);
  } catch (const TrainingDiverged& e) {
    fmt::print(out, "training diverged: {}\n", e.what());
    return kExitCheckFailed;
  }
  const fs::path checkpoint = dir / "checkpoint.json";
  const fs::path log = dir / "train_log.csv";
  save_checkpoint(checkpoint, result.params, cfg.to_json());
  result.log.write_csv(log);

  std::optional<double> last_val;
  for (const auto& row : result.log.rows)
    if (row.val_accuracy) last_val = row.val_accuracy;
  const double final_loss = result.log.rows.empty() ? 0.0 : result.log.rows.back().loss;
  if (options.json) {
    Json j;
    j["episodes"] = result.log.rows.size();
    j["final_loss"] = final_loss;
    j["val_accuracy"] = last_val ? Json(*last_val) : Json(nullptr);
    j["alpha"] = result.params.class_relevant.alpha.item();
    j["beta"] = result.params.class_relevant.beta.item();
    j["checkpoint"] = checkpoint.string();
    j["log"] = log.string();
    out << j.dump(2) << "\n";
  } else {
    fmt::print(out, "trained {} episodes with {} loss, final loss {:.6f}\n",
               result.log.rows.size(), loss_type_name(cfg.loss), final_loss);
    if (last_val) fmt::print(out, "last validation accuracy {:.2f}%\n", *last_val);
    fmt::print(out, "wrote {} and {}\n", checkpoint.string(), log.string());
  }
  return kExitOk;
}

int eval(const Options& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = prepare_out(options);
  const LabeledData data = load_data(cfg);
  const ModelParams params = load_trained(options, cfg, data.dataset);
  EpisodeConfig ec = cfg.episode;
  ec.split = Split::kNovel;
  const EvalReport report = evaluate(params, data.dataset, ec, cfg.eval_episodes, cfg.seed);
  write_text(dir / "eval_report.csv", eval_report_csv(report));
  write_text(dir / "eval_report.txt", eval_report_table(report));
  if (options.json) {
    write_text(dir / "eval_report.json", eval_report_json(report));
    out << eval_report_json(report);
  } else {
    out << eval_report_table(report);
  }
  return kExitOk;
}

int gfsl_eval(const Options& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = prepare_out(options);
  const LabeledData data = load_data(cfg);
  const ModelParams params = load_trained(options, cfg, data.dataset);
  std::vector<GfslReport> reports;
  for (std::size_t shots : cfg.gfsl_shots) {
    reports.push_back(
        evaluate_generalized(params, data.dataset, shots, cfg.gfsl_queries, cfg.seed));
  }
  write_text(dir / "gfsl_report.csv", gfsl_reports_csv(reports));
  write_text(dir / "gfsl_report.txt", gfsl_reports_table(reports));
  if (options.json) {
    write_text(dir / "gfsl_report.json", gfsl_reports_json(reports));
    out << gfsl_reports_json(reports);
  } else {
    out << gfsl_reports_table(reports);
  }
  return kExitOk;
}

int gradcheck(const Options& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = prepare_out(options);
  const LabeledData data = load_data(cfg);
  const GradcheckReport r = gradcheck_run(cfg, data);
  const bool ok = r.passed(cfg.gradcheck_tolerance);

  write_text(dir / "gradcheck_report.csv",
             fmt::format("loss,checked,max_rel_err,worst_parameter,worst_index,analytic,numeric,"
                         "relu_margin,tolerance,passed\n{},{},{:.6e},{},{},{:.17g},{:.17g},{:.6e},"
                         "{:.6e},{}\n",
                         loss_type_name(cfg.loss), r.checked, r.max_rel_err, r.worst_parameter,
                         r.worst_index, r.analytic, r.numeric, r.relu_margin,
                         cfg.gradcheck_tolerance, ok));
  if (options.json) {
    Json j;
    j["loss"] = loss_type_name(cfg.loss);
    j["checked"] = r.checked;
    j["max_rel_err"] = r.max_rel_err;
    j["worst_parameter"] = r.worst_parameter;
    j["worst_index"] = r.worst_index;
    j["analytic"] = r.analytic;
    j["numeric"] = r.numeric;
    j["relu_margin"] = r.relu_margin;
    j["tolerance"] = cfg.gradcheck_tolerance;
    j["passed"] = ok;
    out << j.dump(2) << "\n";
  } else {
    fmt::print(out, "{} entries checked, max relative error {:.3e} at {}[{}] ({:.10g} vs {:.10g})\n",
               r.checked, r.max_rel_err, r.worst_parameter, r.worst_index, r.analytic,
               r.numeric);
    fmt::print(out, "smallest relu input {:.3e}\n", r.relu_margin);
    fmt::print(out, "{}\n", ok ? "PASS" : "FAIL");
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int oracle(const Options& options, std::ostream& out) {
  const RunConfig cfg = resolve_config(options);
  const fs::path dir = prepare_out(options);
  const LabeledData data = load_data(cfg);
  const OracleCheck r = oracle_check(cfg, data.dataset, data.semantics);
  const bool ok = r.max_rel_err <= cfg.oracle_tolerance;

  write_text(dir / "oracle_report.csv",
             fmt::format("episodes,comparisons,max_rel_err,tolerance,passed\n{},{},{:.6e},{:.6e},{}\n",
                         r.episodes, r.comparisons, r.max_rel_err, cfg.oracle_tolerance, ok));
  if (options.json) {
    Json j;
    j["episodes"] = r.episodes;
    j["comparisons"] = r.comparisons;
    j["max_rel_err"] = r.max_rel_err;
    j["worst"] = r.worst;
    j["tolerance"] = cfg.oracle_tolerance;
    j["passed"] = ok;
    out << j.dump(2) << "\n";
  } else {
    fmt::print(out, "{} episodes x 4 loss kinds, {} comparisons, max relative error {:.3e}\n",
               r.episodes, r.comparisons, r.max_rel_err);
    fmt::print(out, "worst: {}\n{}\n", r.worst, ok ? "PASS" : "FAIL");
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int guarded(const std::function<int()>& command, std::ostream& err) {
  try {
    return command();
  } catch (const std::exception& e) {
    fmt::print(err, "amfsl: error: {}\n", e.what());
    return kExitError;
  }
}

}  // namespace amfsl::cli
