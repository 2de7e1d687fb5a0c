#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "svdkd/modality.hpp"

namespace svdkd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct SampleMeta {
  std::int64_t identity_id = 0;
  Modality modality = Modality::kRgb;
  std::int64_t sample_id = 0;

  friend bool operator==(const SampleMeta&, const SampleMeta&) = default;
};

// n x d feature matrix plus per-row metadata, optionally paired with the raw
// n x d_in inputs a student consumes. Immutable once constructed; the
// constructor enforces every invariant and throws DataError on violation:
//  - meta.size() == features.rows()
//  - every feature (and raw input) is finite
//  - sample ids are unique, identity ids are non-negative and cover [0, C)
//  - raw_inputs, when present, has the same row count
class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(Matrix features, std::vector<SampleMeta> meta,
               std::optional<Matrix> raw_inputs = std::nullopt,
               std::string source_tag = "");

  const Matrix& features() const { return features_; }
  const std::vector<SampleMeta>& meta() const { return meta_; }
  const std::optional<Matrix>& raw_inputs() const { return raw_inputs_; }
  const std::string& source_tag() const { return source_tag_; }

  std::size_t size() const { return meta_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features_.cols()); }
  std::size_t input_dim() const {
    return raw_inputs_ ? static_cast<std::size_t>(raw_inputs_->cols()) : 0;
  }
  std::size_t identity_count() const { return identity_count_; }

  // Row indices whose modality equals m, in ascending row order.
  std::vector<std::size_t> rows_with_modality(Modality m) const;

  // Same rows and metadata with a different feature matrix (e.g. student
  // outputs for the same samples). Raw inputs are dropped.
  EmbeddingSet with_features(Matrix features, std::string source_tag) const;

  friend bool operator==(const EmbeddingSet& a, const EmbeddingSet& b);

 private:
  Matrix features_;
  std::vector<SampleMeta> meta_;
  std::optional<Matrix> raw_inputs_;
  std::string source_tag_;
  std::size_t identity_count_ = 0;
};

}  // namespace svdkd
