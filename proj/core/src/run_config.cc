#include "amfsl/run_config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <variant>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "json.hpp"

#include "amfsl/errors.h"

namespace amfsl {

namespace {

using IntList = std::vector<std::int64_t>;
using Value = std::variant<std::int64_t, double, bool, std::string, IntList>;

struct Located {
  Value value;
  std::size_t line;
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Strips a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_string = !in_string;
    if (s[i] == '#' && !in_string) return s.substr(0, i);
  }
  return s;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Value> parse_value(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s == "true") return Value(true);
  if (s == "false") return Value(false);
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') return std::nullopt;
    return Value(std::string(s.substr(1, s.size() - 2)));
  }
  if (s.front() == '[') {
    if (s.back() != ']') return std::nullopt;
    IntList list;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    while (!body.empty()) {
      const std::size_t comma = body.find(',');
      auto item = parse_int(trim(body.substr(0, comma)));
      if (!item) return std::nullopt;
      list.push_back(*item);
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
    }
    return Value(std::move(list));
  }
  if (auto i = parse_int(s)) return Value(*i);
  double d = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(d)) return Value(d);
  return std::nullopt;
}

std::string describe(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        else if constexpr (std::is_same_v<T, std::string>) return fmt::format("\"{}\"", x);
        else if constexpr (std::is_same_v<T, IntList>) return fmt::format("[{}]", fmt::join(x, ", "));
        else return fmt::format("{}", x);
      },
      v);
}

// Typed field access shared by parse, to_json and to_toml.
struct Field {
  std::string section;  // empty for top level
  std::string key;
  std::function<void(RunConfig&, const Value&)> set;  // throws std::string on type error
  std::function<Value(const RunConfig&)> get;
};

std::size_t as_count(const Value& v) {
  if (auto* i = std::get_if<std::int64_t>(&v); i && *i >= 0) return static_cast<std::size_t>(*i);
  throw std::string("expected a nonnegative integer");
}

double as_double(const Value& v) {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  throw std::string("expected a number");
}

bool as_bool(const Value& v) {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  throw std::string("expected true or false");
}

std::string as_string(const Value& v) {
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  throw std::string("expected a quoted string");
}

std::vector<std::size_t> as_counts(const Value& v) {
  auto* list = std::get_if<IntList>(&v);
  if (!list) throw std::string("expected a list of integers");
  std::vector<std::size_t> out;
  for (auto i : *list) {
    if (i < 0) throw std::string("expected nonnegative integers");
    out.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

Value count_value(std::size_t n) { return Value(static_cast<std::int64_t>(n)); }

Value counts_value(const std::vector<std::size_t>& v) {
  IntList out(v.begin(), v.end());
  return Value(std::move(out));
}

#define AMFSL_COUNT(sec, name, member) \
  Field{sec, name, [](RunConfig& c, const Value& v) { c.member = as_count(v); }, \
        [](const RunConfig& c) { return count_value(c.member); }}
#define AMFSL_DOUBLE(sec, name, member) \
  Field{sec, name, [](RunConfig& c, const Value& v) { c.member = as_double(v); }, \
        [](const RunConfig& c) { return Value(c.member); }}
#define AMFSL_BOOL(sec, name, member) \
  Field{sec, name, [](RunConfig& c, const Value& v) { c.member = as_bool(v); }, \
        [](const RunConfig& c) { return Value(c.member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> kFields = {
      Field{"", "seed",
            [](RunConfig& c, const Value& v) { c.seed = as_count(v); },
            [](const RunConfig& c) { return Value(static_cast<std::int64_t>(c.seed)); }},
      Field{"datasets", "source",
            [](RunConfig& c, const Value& v) {
              const auto s = as_string(v);
              if (s == "blobs") c.source = DataSource::kBlobs;
              else if (s == "files") c.source = DataSource::kFiles;
              else throw std::string("expected \"blobs\" or \"files\"");
            },
            [](const RunConfig& c) {
              return Value(std::string(c.source == DataSource::kBlobs ? "blobs" : "files"));
            }},
      Field{"datasets", "dir",
            [](RunConfig& c, const Value& v) { c.data_dir = as_string(v); },
            [](const RunConfig& c) { return Value(c.data_dir.string()); }},
      AMFSL_COUNT("datasets", "n_base", blobs.n_base),
      AMFSL_COUNT("datasets", "n_val", blobs.n_val),
      AMFSL_COUNT("datasets", "n_novel", blobs.n_novel),
      AMFSL_COUNT("datasets", "semantic_dim", blobs.semantic_dim),
      AMFSL_COUNT("datasets", "feature_dim", blobs.feature_dim),
      AMFSL_COUNT("datasets", "samples_per_class", blobs.samples_per_class),
      AMFSL_DOUBLE("datasets", "semantic_noise", blobs.semantic_noise),
      AMFSL_DOUBLE("datasets", "feature_noise", blobs.feature_noise),
      AMFSL_COUNT("datasets", "mixing_seed", blobs.mixing_seed),
      AMFSL_COUNT("episodes", "way", episode.way),
      AMFSL_COUNT("episodes", "shot", episode.shot),
      AMFSL_COUNT("episodes", "queries", episode.queries),
      Field{"model", "widths",
            [](RunConfig& c, const Value& v) { c.model.widths = as_counts(v); },
            [](const RunConfig& c) { return counts_value(c.model.widths); }},
      Field{"model", "metric",
            [](RunConfig& c, const Value& v) {
              auto m = parse_metric(as_string(v));
              if (!m) throw std::string("expected \"neg_sq_euclidean\" or \"cosine\"");
              c.model.metric = *m;
            },
            [](const RunConfig& c) { return Value(std::string(metric_name(c.model.metric))); }},
      AMFSL_DOUBLE("model", "gamma", model.gamma),
      AMFSL_BOOL("model", "train_gamma", model.train_gamma),
      AMFSL_COUNT("semantics", "generator_hidden", model.generator_hidden),
      AMFSL_BOOL("semantics", "generator_batch_norm", model.generator_batch_norm),
      Field{"losses", "kind",
            [](RunConfig& c, const Value& v) {
              auto t = parse_loss_type(as_string(v));
              if (!t) {
                throw std::string(
                    "expected \"plain\", \"naive\", \"class_relevant\" or \"task_relevant\"");
              }
              c.loss = *t;
            },
            [](const RunConfig& c) { return Value(std::string(loss_type_name(c.loss))); }},
      AMFSL_DOUBLE("losses", "margin", margin),
      AMFSL_COUNT("train", "episodes", train_episodes),
      AMFSL_DOUBLE("train", "step_size", adam.step_size),
      AMFSL_DOUBLE("train", "beta1", adam.beta1),
      AMFSL_DOUBLE("train", "beta2", adam.beta2),
      AMFSL_DOUBLE("train", "epsilon", adam.epsilon),
      AMFSL_COUNT("train", "val_every", val_every),
      AMFSL_COUNT("train", "val_episodes", val_episodes),
      AMFSL_COUNT("eval", "episodes", eval_episodes),
      Field{"eval", "gfsl_shots",
            [](RunConfig& c, const Value& v) { c.gfsl_shots = as_counts(v); },
            [](const RunConfig& c) { return counts_value(c.gfsl_shots); }},
      AMFSL_COUNT("eval", "gfsl_queries", gfsl_queries),
      Field{"eval", "checkpoint",
            [](RunConfig& c, const Value& v) { c.checkpoint = as_string(v); },
            [](const RunConfig& c) { return Value(c.checkpoint.string()); }},
      AMFSL_DOUBLE("gradcheck", "h", gradcheck_h),
      AMFSL_DOUBLE("gradcheck", "tolerance", gradcheck_tolerance),
      AMFSL_BOOL("gradcheck", "perturb_generators", gradcheck_perturb_generators),
      AMFSL_COUNT("oracle", "episodes", oracle_episodes),
      AMFSL_DOUBLE("oracle", "tolerance", oracle_tolerance),
  };
  return kFields;
}

#undef AMFSL_COUNT
#undef AMFSL_DOUBLE
#undef AMFSL_BOOL

const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields())
    if (f.section == section && f.key == key) return &f;
  return nullptr;
}

bool known_section(std::string_view section) {
  for (const auto& f : fields())
    if (f.section == section) return true;
  return false;
}

}  // namespace

RunConfig RunConfig::parse(std::string_view text, std::string_view source_name) {
  RunConfig cfg;
  std::string section;
  std::map<std::string, std::size_t> seen;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    ++line_no;
    const std::string_view line = trim(strip_comment(text.substr(start, end - start)));
    start = end + 1;
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw ConfigError(fmt::format("{}:{}: malformed section header", source_name, line_no));
      }
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_section(section) || section.empty()) {
        throw ConfigError(fmt::format("{}:{}: unknown section [{}]", source_name, line_no, section));
      }
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", source_name, line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string qualified = section.empty() ? key : section + "." + key;
    const Field* field = find_field(section, key);
    if (!field) {
      throw ConfigError(fmt::format("{}:{}: unknown key '{}'", source_name, line_no, qualified));
    }
    if (auto [it, fresh] = seen.emplace(qualified, line_no); !fresh) {
      throw ConfigError(fmt::format("{}:{}: key '{}' already set on line {}", source_name,
                                    line_no, qualified, it->second));
    }
    const auto value = parse_value(trim(line.substr(eq + 1)));
    if (!value) {
      throw ConfigError(fmt::format("{}:{}: cannot parse value of '{}'", source_name, line_no,
                                    qualified));
    }
    try {
      field->set(cfg, *value);
    } catch (const std::string& why) {
      throw ConfigError(fmt::format("{}:{}: '{}': {}", source_name, line_no, qualified, why));
    }
    if (end == text.size()) break;
  }
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", source_name, e.what()));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(fmt::format("cannot open config {}", path.string()));
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text, path.string());
}

LossKind RunConfig::loss_kind() const {
  switch (loss) {
    case LossType::kNaive: return LossKind::naive(margin);
    case LossType::kClassRelevant: return LossKind::class_relevant();
    case LossType::kTaskRelevant: return LossKind::task_relevant();
    case LossType::kPlain: break;
  }
  return LossKind::plain();
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.episodes = train_episodes;
  t.episode = episode;
  t.episode.split = Split::kBase;
  t.loss = loss_kind();
  t.adam = adam;
  t.seed = seed;
  t.val_every = val_every;
  t.val_episodes = val_episodes;
  return t;
}

void RunConfig::validate() const {
  try {
    episode.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  adam.validate();
  if (source == DataSource::kBlobs) {
    try {
      blobs.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  if (model.widths.empty()) throw ConfigError("model.widths must list at least one layer");
  for (auto w : model.widths)
    if (w == 0) throw ConfigError("model.widths entries must be positive");
  if (!(model.gamma > 0.0)) throw ConfigError("model.gamma must be positive");
  if (model.generator_hidden == 0) throw ConfigError("semantics.generator_hidden must be positive");
  if (loss == LossType::kNaive) LossKind::naive(margin);
  if (!(margin >= 0.0)) throw ConfigError("losses.margin must be >= 0");
  for (auto s : gfsl_shots)
    if (s == 0) throw ConfigError("eval.gfsl_shots entries must be positive");
  if (!(gradcheck_h > 0.0)) throw ConfigError("gradcheck.h must be positive");
}

std::string RunConfig::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& f : fields()) {
    nlohmann::ordered_json value = std::visit(
        [](const auto& x) { return nlohmann::ordered_json(x); }, f.get(*this));
    if (f.section.empty()) doc[f.key] = std::move(value);
    else doc[f.section][f.key] = std::move(value);
  }
  return doc.dump();
}

std::string RunConfig::to_toml() const {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    if (f.section != section) {
      section = f.section;
      out += fmt::format("\n[{}]\n", section);
    }
    const Value v = f.get(*this);
    if (auto* d = std::get_if<double>(&v)) {
      out += fmt::format("{} = {:.17g}\n", f.key, *d);
    } else {
      out += fmt::format("{} = {}\n", f.key, describe(v));
    }
  }
  return out;
}

}  // namespace amfsl
