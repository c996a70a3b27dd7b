#ifndef AMFSL_SEMANTIC_STORE_H_
#define AMFSL_SEMANTIC_STORE_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace amfsl {

using ClassId = std::size_t;

// Cosine of the angle between two nonzero vectors of equal length.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Class id -> semantic (word) vector. Every stored vector has the same
// dimension and is nonzero.
class SemanticStore {
 public:
  SemanticStore() = default;
  // `class_names` labels ids in error messages; vectors are added via set().
  explicit SemanticStore(std::vector<std::string> class_names)
      : names_(std::move(class_names)), vectors_(names_.size()) {}

  void set(ClassId id, std::vector<double> vec);

  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return names_.size(); }
  bool contains(ClassId id) const {
    return id < vectors_.size() && vectors_[id].has_value();
  }
  std::span<const double> vector(ClassId id) const;
  double similarity(ClassId a, ClassId b) const {
    return cosine_sim(vector(a), vector(b));
  }

  bool operator==(const SemanticStore&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::optional<std::vector<double>>> vectors_;
  std::size_t dim_ = 0;
};

}  // namespace amfsl

#endif  // AMFSL_SEMANTIC_STORE_H_
