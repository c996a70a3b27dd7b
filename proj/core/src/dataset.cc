#include "amfsl/dataset.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "amfsl/random.h"

namespace amfsl {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kBase: return "base";
    case Split::kVal: return "val";
    case Split::kNovel: return "novel";
  }
  return "?";
}

std::optional<Split> parse_split(std::string_view name) {
  if (name == "base") return Split::kBase;
  if (name == "val") return Split::kVal;
  if (name == "novel") return Split::kNovel;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// SemanticStore

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(fmt::format(
        "cosine_sim: dimension mismatch {} vs {}", a.size(), b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw std::domain_error("cosine_sim: zero vector");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

void SemanticStore::set(ClassId id, std::vector<double> vec) {
  if (id >= names_.size()) {
    throw std::out_of_range(fmt::format("semantic store: unknown class id {}", id));
  }
  if (vec.empty()) {
    throw std::invalid_argument(
        fmt::format("semantic vector for '{}' is empty", names_[id]));
  }
  if (dim_ != 0 && vec.size() != dim_) {
    throw std::invalid_argument(
        fmt::format("semantic vector for '{}' has dimension {}, expected {}",
                    names_[id], vec.size(), dim_));
  }
  if (std::all_of(vec.begin(), vec.end(), [](double v) { return v == 0.0; })) {
    throw std::domain_error(
        fmt::format("semantic vector for '{}' is the zero vector", names_[id]));
  }
  dim_ = vec.size();
  vectors_[id] = std::move(vec);
}

std::span<const double> SemanticStore::vector(ClassId id) const {
  if (!contains(id)) {
    if (id < names_.size()) {
      throw std::out_of_range(
          fmt::format("no semantic vector for class '{}'", names_[id]));
    }
    throw std::out_of_range(fmt::format("no semantic vector for class id {}", id));
  }
  return *vectors_[id];
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::size_t feature_dim, std::vector<std::string> class_names,
                 std::vector<Split> splits)
    : feature_dim_(feature_dim),
      class_names_(std::move(class_names)),
      splits_(std::move(splits)),
      by_class_(class_names_.size()) {
  if (splits_.size() != class_names_.size()) {
    throw std::invalid_argument(
        fmt::format("dataset: {} class names but {} split assignments",
                    class_names_.size(), splits_.size()));
  }
  for (std::size_t i = 0; i < class_names_.size(); ++i)
    for (std::size_t j = 0; j < i; ++j)
      if (class_names_[i] == class_names_[j]) {
        throw std::invalid_argument(
            fmt::format("dataset: duplicate class name '{}'", class_names_[i]));
      }
}

void Dataset::add_sample(ClassId label, std::span<const double> features) {
  if (label >= class_names_.size()) {
    throw std::out_of_range(fmt::format("dataset: unknown class id {}", label));
  }
  if (features.size() != feature_dim_) {
    throw std::invalid_argument(
        fmt::format("dataset: sample has {} features, expected {}",
                    features.size(), feature_dim_));
  }
  by_class_[label].push_back(labels_.size());
  labels_.push_back(label);
  features_.insert(features_.end(), features.begin(), features.end());
}

std::optional<ClassId> Dataset::find_class(std::string_view name) const {
  auto it = std::find(class_names_.begin(), class_names_.end(), name);
  if (it == class_names_.end()) return std::nullopt;
  return static_cast<ClassId>(it - class_names_.begin());
}

std::vector<ClassId> Dataset::classes_in(Split split) const {
  std::vector<ClassId> out;
  for (ClassId id = 0; id < splits_.size(); ++id)
    if (splits_[id] == split) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic blobs

void BlobSpec::validate() const {
  if (n_classes() == 0) throw std::invalid_argument("blobs: no classes");
  if (semantic_dim == 0 || feature_dim == 0) {
    throw std::invalid_argument("blobs: dimensions must be positive");
  }
  if (feature_noise < 0.0 || semantic_noise < 0.0) {
    throw std::invalid_argument("blobs: noise levels must be nonnegative");
  }
}

namespace {

std::vector<std::vector<double>> unit_semantic_vectors(const BlobSpec& spec,
                                                       Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> out(spec.n_classes());
  for (auto& e : out) {
    double norm = 0.0;
    do {
      e.assign(spec.semantic_dim, 0.0);
      norm = 0.0;
      for (double& v : e) {
        v = normal(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : e) v /= norm;
  }
  return out;
}

// A[d_x x d_s], entries N(0, 1).
std::vector<double> mixing_matrix(const BlobSpec& spec) {
  Rng rng = make_rng(spec.mixing_seed, 0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(spec.feature_dim * spec.semantic_dim);
  for (double& v : a) v = normal(rng);
  return a;
}

struct BlobDraw {
  std::vector<std::vector<double>> semantic;
  std::vector<std::vector<double>> means;
};

std::vector<double> apply_mixing(const BlobSpec& spec, const std::vector<double>& a,
                                 std::span<const double> e) {
  std::vector<double> mu(spec.feature_dim, 0.0);
  for (std::size_t r = 0; r < spec.feature_dim; ++r) {
    for (std::size_t c = 0; c < spec.semantic_dim; ++c)
      mu[r] += a[r * spec.semantic_dim + c] * e[c];
  }
  return mu;
}

BlobDraw draw_classes(const BlobSpec& spec, Rng& rng) {
  spec.validate();
  BlobDraw draw;
  draw.semantic = unit_semantic_vectors(spec, rng);
  const auto a = mixing_matrix(spec);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (const auto& e : draw.semantic) draw.means.push_back(apply_mixing(spec, a, e));
  for (auto& mu : draw.means)
    for (double& v : mu) v += spec.semantic_noise * normal(rng);
  return draw;
}

}  // namespace

std::vector<std::vector<double>> blob_class_means(const BlobSpec& spec,
                                                  std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::kData);
  return draw_classes(spec, rng).means;
}

std::vector<double> blob_feature_mean(const BlobSpec& spec,
                                      std::span<const double> semantic) {
  spec.validate();
  if (semantic.size() != spec.semantic_dim) {
    throw std::invalid_argument(fmt::format("blobs: semantic vector of length {}, expected {}",
                                            semantic.size(), spec.semantic_dim));
  }
  return apply_mixing(spec, mixing_matrix(spec), semantic);
}

LabeledData generate_blobs(const BlobSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, streams::kData);
  const BlobDraw draw = draw_classes(spec, rng);

  std::vector<std::string> names;
  std::vector<Split> splits;
  for (std::size_t i = 0; i < spec.n_classes(); ++i) {
    names.push_back(fmt::format("class_{:03}", i));
    splits.push_back(i < spec.n_base                ? Split::kBase
                     : i < spec.n_base + spec.n_val ? Split::kVal
                                                    : Split::kNovel);
  }
  LabeledData out{Dataset(spec.feature_dim, names, std::move(splits)),
                  SemanticStore(names)};

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(spec.feature_dim);
  for (ClassId id = 0; id < spec.n_classes(); ++id) {
    out.semantics.set(id, draw.semantic[id]);
    for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
      for (std::size_t d = 0; d < spec.feature_dim; ++d)
        x[d] = draw.means[id][d] + spec.feature_noise * normal(rng);
      out.dataset.add_sample(id, x);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// File formats

DataFiles DataFiles::in_directory(const std::filesystem::path& dir) {
  return {dir / "features.csv", dir / "semantics.txt", dir / "splits.csv"};
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view field, const std::filesystem::path& path,
                    std::size_t line_no) {
  double v = 0.0;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw std::runtime_error(fmt::format("{}:{}: invalid number '{}'",
                                         path.string(), line_no, field));
  }
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  }
  return out;
}

}  // namespace

LabeledData load_csv(const DataFiles& files) {
  // Splits define the class list and its order.
  std::vector<std::string> names;
  std::vector<Split> splits;
  {
    auto in = open_input(files.splits);
    std::string raw;
    for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
      const std::string_view line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_fields(line, ',');
      const auto split = fields.size() == 2 ? parse_split(fields[1]) : std::nullopt;
      if (!split) {
        throw std::runtime_error(fmt::format(
            "{}:{}: expected '<class>,<base|val|novel>'", files.splits.string(),
            line_no));
      }
      if (std::find(names.begin(), names.end(), fields[0]) != names.end()) {
        throw std::runtime_error(fmt::format("{}:{}: class '{}' listed twice",
                                             files.splits.string(), line_no,
                                             fields[0]));
      }
      names.emplace_back(fields[0]);
      splits.push_back(*split);
    }
  }
  if (names.empty()) {
    throw std::runtime_error(fmt::format("{}: no classes", files.splits.string()));
  }

  std::size_t feature_dim = 0;
  std::vector<std::pair<ClassId, std::vector<double>>> rows;
  {
    auto in = open_input(files.features);
    std::string raw;
    if (!std::getline(in, raw)) {
      throw std::runtime_error(fmt::format("{}: missing header", files.features.string()));
    }
    const auto header = split_fields(trim_cr(raw), ',');
    if (header.size() < 2 || header[0] != "class") {
      throw std::runtime_error(fmt::format(
          "{}:1: header must be 'class,<f0>,...'", files.features.string()));
    }
    feature_dim = header.size() - 1;
    for (std::size_t line_no = 2; std::getline(in, raw); ++line_no) {
      const std::string_view line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_fields(line, ',');
      if (fields.size() != feature_dim + 1) {
        throw std::runtime_error(fmt::format(
            "{}:{}: row has {} features, header declares {}",
            files.features.string(), line_no, fields.size() - 1, feature_dim));
      }
      auto it = std::find(names.begin(), names.end(), fields[0]);
      if (it == names.end()) {
        throw std::runtime_error(fmt::format("{}:{}: class '{}' not in split file",
                                             files.features.string(), line_no,
                                             fields[0]));
      }
      std::vector<double> x(feature_dim);
      for (std::size_t d = 0; d < feature_dim; ++d)
        x[d] = parse_double(fields[d + 1], files.features, line_no);
      rows.emplace_back(static_cast<ClassId>(it - names.begin()), std::move(x));
    }
  }
  if (rows.empty()) {
    throw std::runtime_error(fmt::format("{}: no samples", files.features.string()));
  }

  LabeledData out{Dataset(feature_dim, names, splits), SemanticStore(names)};
  for (const auto& [label, x] : rows) out.dataset.add_sample(label, x);
  for (ClassId id = 0; id < names.size(); ++id) {
    if (out.dataset.samples_of(id).empty()) {
      throw std::runtime_error(fmt::format("{}: class '{}' has no samples",
                                           files.features.string(), names[id]));
    }
  }

  {
    auto in = open_input(files.semantics);
    std::string raw;
    for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
      const std::string_view line = trim_cr(raw);
      if (line.empty()) continue;
      const auto fields = split_fields(line, ' ');
      auto id = out.dataset.find_class(fields[0]);
      if (!id) continue;
      if (fields.size() < 2) {
        throw std::runtime_error(fmt::format("{}:{}: no vector for '{}'",
                                             files.semantics.string(), line_no,
                                             fields[0]));
      }
      std::vector<double> v;
      for (std::size_t i = 1; i < fields.size(); ++i)
        v.push_back(parse_double(fields[i], files.semantics, line_no));
      try {
        out.semantics.set(*id, std::move(v));
      } catch (const std::exception& e) {
        throw std::runtime_error(fmt::format("{}:{}: {}", files.semantics.string(),
                                             line_no, e.what()));
      }
    }
  }
  for (ClassId id = 0; id < names.size(); ++id) {
    if (!out.semantics.contains(id)) {
      throw std::runtime_error(fmt::format("{}: missing class '{}'",
                                           files.semantics.string(), names[id]));
    }
  }
  return out;
}

void save_csv(const Dataset& dataset, const SemanticStore& semantics,
              const DataFiles& files) {
  {
    auto out = open_output(files.features);
    out << "class";
    for (std::size_t d = 0; d < dataset.feature_dim(); ++d) out << ",f" << d;
    out << '\n';
    for (std::size_t s = 0; s < dataset.num_samples(); ++s) {
      out << dataset.class_name(dataset.label(s));
      for (double v : dataset.features(s)) fmt::print(out, ",{:.17g}", v);
      out << '\n';
    }
  }
  {
    auto out = open_output(files.semantics);
    for (ClassId id = 0; id < dataset.num_classes(); ++id) {
      out << dataset.class_name(id);
      for (double v : semantics.vector(id)) fmt::print(out, " {:.17g}", v);
      out << '\n';
    }
  }
  {
    auto out = open_output(files.splits);
    for (ClassId id = 0; id < dataset.num_classes(); ++id)
      out << dataset.class_name(id) << ',' << split_name(dataset.split(id)) << '\n';
  }
}

}  // namespace amfsl
