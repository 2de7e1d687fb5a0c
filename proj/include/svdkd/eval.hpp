#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "svdkd/embedding_set.hpp"

namespace svdkd {

struct EvalTask {
  Modality query = Modality::kSketch;
  Modality gallery = Modality::kRgb;

  // "sketch:rgb" style; ArgumentError for equal modalities or bad syntax.
  static EvalTask parse(std::string_view text);
  std::string name() const;  // "sketch:rgb"

  friend bool operator==(const EvalTask&, const EvalTask&) = default;
};

// The three cross-modal tasks reported for the quadruple-modality setting:
// sketch->rgb, ir->rgb, text->rgb.
std::vector<EvalTask> default_eval_tasks();

// Which feature source serves as query and gallery.
enum class EvalMode { kC2C, kE2E, kE2C };

EvalMode parse_eval_mode(std::string_view text);  // c2c | e2e | e2c
std::string_view to_string(EvalMode mode);

struct RankingMetrics {
  double rank1 = 0.0;
  double rank5 = 0.0;
  double rank10 = 0.0;
  double map = 0.0;
  double minp = 0.0;
  std::size_t n_queries = 0;
};

struct QueryResult {
  double average_precision = 0.0;
  double inverse_negative_penalty = 0.0;
  std::size_t first_match_rank = 0;  // 1-based
};

// Gallery rows of one modality, L2-normalized once for repeated ranking.
class GalleryView {
 public:
  GalleryView(const EmbeddingSet& set, Modality modality);
  GalleryView(const Matrix& features, std::vector<std::int64_t> identity_ids,
              std::vector<std::int64_t> sample_ids);

  std::size_t size() const { return identity_ids_.size(); }
  const Matrix& normalized() const { return normalized_; }
  const std::vector<std::int64_t>& identity_ids() const { return identity_ids_; }
  const std::vector<std::int64_t>& sample_ids() const { return sample_ids_; }
  bool contains_identity(std::int64_t id) const;

 private:
  Matrix normalized_;
  std::vector<std::int64_t> identity_ids_;
  std::vector<std::int64_t> sample_ids_;
};

// Ranks the gallery by descending cosine similarity, ties by ascending
// sample id. AP averages precision at every true-match position; INP is the
// true-match count over the rank of the last true match. ArgumentError when
// the gallery holds no row of query_id.
QueryResult evaluate_query(const Eigen::Ref<const Eigen::RowVectorXd>& query,
                           std::int64_t query_id, const GalleryView& gallery);

// Queries are the rows of task.query modality in query_set that have at least
// one match among the task.gallery rows of gallery_set. Sources must agree
// with the mode: C2C cloud/cloud, E2E edge/edge, E2C edge/cloud, where a
// "synthetic" set counts as cloud. ArgumentError on a source mismatch,
// EvalError when no query is eligible.
RankingMetrics evaluate_retrieval(const EmbeddingSet& query_set, const EmbeddingSet& gallery_set,
                                  const EvalTask& task, EvalMode mode);

// Same ranking without the source check, for in-memory student outputs.
RankingMetrics evaluate_features(const EmbeddingSet& query_set, const EmbeddingSet& gallery_set,
                                 const EvalTask& task);

struct MetricsRow {
  EvalTask task;
  EvalMode mode = EvalMode::kE2C;
  RankingMetrics metrics;
};

// task,mode,rank1,rank5,rank10,map,minp,n_queries
void write_metrics_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path);

}  // namespace svdkd
