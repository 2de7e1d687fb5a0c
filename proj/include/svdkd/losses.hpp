#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "svdkd/embedding_set.hpp"
#include "svdkd/spectral.hpp"

namespace svdkd {

// Scalar objective plus its gradient with respect to the differentiable
// feature input. grad_aux carries a second gradient block where an objective
// has one: the logits gradient inside task_loss, the gallery-side gradient of
// sdm_pair_loss.
struct LossResult {
  double value = 0.0;
  Matrix grad_features;
  std::optional<Matrix> grad_aux;
};

struct LossWeights {
  double task = 0.01;
  double cosine = 0.29;
  double pcm = 0.35;
  double fr = 0.35;

  // ArgumentError unless all weights are >= 0 and sum to 1 within 1e-9.
  void validate() const;
};

struct TaskLossConfig {
  double margin = 0.3;   // triplet hinge margin
  double tau = 0.02;     // SDM temperature
  double epsilon = 1e-8; // SDM stabilizer inside log(q + eps)

  void validate() const;
};

using Labels = std::vector<std::int64_t>;

// Softmax cross-entropy averaged over rows. grad_features is d/dlogits.
LossResult id_loss(const Matrix& logits, std::span<const std::int64_t> labels);

// Batch-hard triplet loss on squared Euclidean distances. For each anchor the
// farthest same-identity row and the nearest other-identity row are selected
// (lowest index on ties); the gradient is the subgradient through those pairs.
// MiningError when an anchor has no positive or no negative.
LossResult triplet_loss(const Matrix& features, std::span<const std::int64_t> labels,
                        double margin);

// One direction of similarity distribution matching: rows of `queries`
// against all rows of `gallery`. grad_features is d/dqueries, grad_aux is
// d/dgallery. Every query needs at least one gallery row with its label.
LossResult sdm_pair_loss(const Matrix& queries, const Matrix& gallery,
                         std::span<const std::int64_t> query_labels,
                         std::span<const std::int64_t> gallery_labels,
                         const TaskLossConfig& cfg);

struct SdmTotalResult {
  LossResult loss;          // gradient over the full batch (N x d)
  int directional_terms = 0;
  bool degenerate = false;  // fewer than two modalities with a cross-modal match
};

// Sums both directions over every modality pair present in the batch that
// shares at least one identity. Queries without a match on the other side are
// dropped from that direction.
SdmTotalResult sdm_total(const Matrix& features, std::span<const std::int64_t> labels,
                         std::span<const Modality> modalities, const TaskLossConfig& cfg);

struct TaskLossResult {
  LossResult loss;  // grad_features: d/dfeatures, grad_aux: d/dlogits
  double id = 0.0;
  double triplet = 0.0;
  double sdm = 0.0;
  int sdm_terms = 0;
};

// id + triplet + sdm with unit weights.
TaskLossResult task_loss(const Matrix& features, const Matrix& logits,
                         std::span<const std::int64_t> labels,
                         std::span<const Modality> modalities, const TaskLossConfig& cfg);

// Mean of 1 - cos(teacher_i, student_i). Gradient with respect to the
// student only. DataError on a zero-norm row.
LossResult cosine_loss(const Matrix& teacher, const Matrix& student);

// cosine_loss after projecting both operands onto the teacher's top-k right
// singular vectors. DataError when a projected row vanishes.
LossResult pcm_loss(const Matrix& teacher, const Matrix& student, const ProjectionBasis& basis);

// 1 - cos(vec(G_t), vec(G_s)) with G = F^T F / N, the d x d dimension Gram
// over the batch. Gradient with respect to the student.
LossResult fr_loss(const Matrix& teacher, const Matrix& student);

// Linear blend of the four components. The logits gradient of the task term
// is scaled by weights.task and returned in grad_aux.
LossResult distill_loss(const LossResult& task, const LossResult& cosine, const LossResult& pcm,
                        const LossResult& fr, const LossWeights& weights);

}  // namespace svdkd
