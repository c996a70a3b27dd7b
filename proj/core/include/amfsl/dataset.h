#ifndef AMFSL_DATASET_H_
#define AMFSL_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "amfsl/semantic_store.h"

namespace amfsl {

enum class Split { kBase, kVal, kNovel };

std::string_view split_name(Split split);
std::optional<Split> parse_split(std::string_view name);

// Labeled feature vectors over named classes, each class assigned to exactly
// one of the base / val / novel splits.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t feature_dim, std::vector<std::string> class_names,
          std::vector<Split> splits);

  void add_sample(ClassId label, std::span<const double> features);

  std::size_t feature_dim() const { return feature_dim_; }
  std::size_t num_samples() const { return labels_.size(); }
  std::size_t num_classes() const { return class_names_.size(); }

  std::span<const double> features(std::size_t sample) const {
    return {features_.data() + sample * feature_dim_, feature_dim_};
  }
  ClassId label(std::size_t sample) const { return labels_[sample]; }
  const std::string& class_name(ClassId id) const { return class_names_[id]; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  Split split(ClassId id) const { return splits_[id]; }
  std::optional<ClassId> find_class(std::string_view name) const;

  // Ascending class ids assigned to `split`.
  std::vector<ClassId> classes_in(Split split) const;
  // Sample indices of a class, in insertion order.
  const std::vector<std::size_t>& samples_of(ClassId id) const {
    return by_class_[id];
  }

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t feature_dim_ = 0;
  std::vector<std::string> class_names_;
  std::vector<Split> splits_;
  std::vector<double> features_;
  std::vector<ClassId> labels_;
  std::vector<std::vector<std::size_t>> by_class_;
};

// Synthetic classes whose feature means are a fixed linear image of their
// semantic vectors, so semantically close classes are also hard to tell
// apart in feature space.
struct BlobSpec {
  std::size_t n_base = 20;
  std::size_t n_val = 5;
  std::size_t n_novel = 5;
  std::size_t semantic_dim = 16;
  std::size_t feature_dim = 32;
  std::size_t samples_per_class = 60;
  double semantic_noise = 0.05;  // sigma_s, perturbs class means
  double feature_noise = 1.0;    // sigma_x, per-sample isotropic noise
  std::uint64_t mixing_seed = 7;  // draws the semantic -> feature map

  std::size_t n_classes() const { return n_base + n_val + n_novel; }
  void validate() const;
};

struct LabeledData {
  Dataset dataset;
  SemanticStore semantics;
};

// Deterministic in (spec, seed). Class means are drawn before any sample, so
// they do not depend on feature_noise or samples_per_class.
LabeledData generate_blobs(const BlobSpec& spec, std::uint64_t seed);

// Class feature means mu_i = A e_i + eps_i used by generate_blobs.
std::vector<std::vector<double>> blob_class_means(const BlobSpec& spec,
                                                  std::uint64_t seed);

// The noise-free part A e of a class mean, A fixed by spec.mixing_seed.
std::vector<double> blob_feature_mean(const BlobSpec& spec,
                                      std::span<const double> semantic);

struct DataFiles {
  std::filesystem::path features;   // class,f0,f1,...
  std::filesystem::path semantics;  // GloVe text: name v0 v1 ...
  std::filesystem::path splits;     // name,base|val|novel

  static DataFiles in_directory(const std::filesystem::path& dir);
};

// Class ids follow the order of the split file. Semantic entries for names
// outside the split file are ignored.
LabeledData load_csv(const DataFiles& files);
void save_csv(const Dataset& dataset, const SemanticStore& semantics,
              const DataFiles& files);

}  // namespace amfsl

#endif  // AMFSL_DATASET_H_
