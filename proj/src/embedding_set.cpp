#include "svdkd/embedding_set.hpp"

#include <algorithm>
#include <cstring>
#include <string>
#include <unordered_set>

#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

bool all_finite(const Matrix& m) { return m.size() == 0 || m.allFinite(); }

bool bit_equal(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return a.size() == 0 ||
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

EmbeddingSet::EmbeddingSet(Matrix features, std::vector<SampleMeta> meta,
                           std::optional<Matrix> raw_inputs, std::string source_tag)
    : features_(std::move(features)),
      meta_(std::move(meta)),
      raw_inputs_(std::move(raw_inputs)),
      source_tag_(std::move(source_tag)) {
  const auto n = static_cast<std::size_t>(features_.rows());
  if (meta_.size() != n) {
    throw DataError("metadata has " + std::to_string(meta_.size()) + " entries but features have " +
                    std::to_string(n) + " rows");
  }
  if (!all_finite(features_)) throw DataError("feature matrix contains non-finite values");
  if (raw_inputs_) {
    if (static_cast<std::size_t>(raw_inputs_->rows()) != n) {
      throw DataError("raw_inputs has " + std::to_string(raw_inputs_->rows()) +
                      " rows but features have " + std::to_string(n));
    }
    if (!all_finite(*raw_inputs_)) throw DataError("raw_inputs contains non-finite values");
  }

  std::unordered_set<std::int64_t> sample_ids;
  std::int64_t max_id = -1;
  for (const auto& m : meta_) {
    if (m.identity_id < 0) throw DataError("negative identity id " + std::to_string(m.identity_id));
    if (m.sample_id < 0) throw DataError("negative sample id " + std::to_string(m.sample_id));
    if (!sample_ids.insert(m.sample_id).second) {
      throw DataError("duplicate sample id " + std::to_string(m.sample_id));
    }
    max_id = std::max(max_id, m.identity_id);
  }
  std::vector<bool> seen(static_cast<std::size_t>(max_id + 1), false);
  for (const auto& m : meta_) seen[static_cast<std::size_t>(m.identity_id)] = true;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (!seen[c]) {
      throw DataError("identity ids must cover [0, C); id " + std::to_string(c) + " is missing");
    }
  }
  identity_count_ = seen.size();
}

std::vector<std::size_t> EmbeddingSet::rows_with_modality(Modality m) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < meta_.size(); ++i) {
    if (meta_[i].modality == m) rows.push_back(i);
  }
  return rows;
}

EmbeddingSet EmbeddingSet::with_features(Matrix features, std::string source_tag) const {
  return EmbeddingSet(std::move(features), meta_, std::nullopt, std::move(source_tag));
}

bool operator==(const EmbeddingSet& a, const EmbeddingSet& b) {
  if (a.meta_ != b.meta_ || a.source_tag_ != b.source_tag_) return false;
  if (!bit_equal(a.features_, b.features_)) return false;
  if (a.raw_inputs_.has_value() != b.raw_inputs_.has_value()) return false;
  return !a.raw_inputs_ || bit_equal(*a.raw_inputs_, *b.raw_inputs_);
}

}  // namespace svdkd
