#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "svdkd/embedding_set.hpp"
#include "svdkd/eval.hpp"
#include "svdkd/losses.hpp"
#include "svdkd/sampler.hpp"
#include "svdkd/spectral.hpp"
#include "svdkd/student.hpp"

namespace svdkd {

// Distillation run settings. Paper-scale values are noted where they differ
// from the desk-scale defaults.
struct TrainConfig {
  std::size_t epochs = 20;              // paper: 60
  std::size_t steps_per_epoch = 0;      // 0: rows / (P K), at least 1
  std::size_t batch_identities = 4;     // P; paper: 16 (batch 128)
  std::size_t batch_per_identity = 8;   // K
  LossWeights weights;                  // (0.01, 0.29, 0.35, 0.35)
  TaskLossConfig task;
  std::size_t pcm_k = 50;
  double lr_initial = 1e-3;             // paper: 1e-5
  double lr_min = 1e-6;
  AdamWConfig adamw;
  LoraConfig lora;
  std::size_t hidden_dim = 128;
  std::size_t depth = 8;
  std::uint64_t seed = 0;
  bool gradient_check = true;           // finite-difference guard on step 0
  std::vector<EvalTask> eval_tasks = default_eval_tasks();

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  double lr = 0.0;
  double task = 0.0;
  double cosine = 0.0;
  double pcm = 0.0;
  double fr = 0.0;
  double total = 0.0;   // weighted objective that was minimized
  double shared = 0.0;  // task + cosine, unweighted
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  std::vector<MetricsRow> metrics;
  double mean_map = 0.0;
};

struct TrainingLog {
  LossWeights weights;
  TaskLossConfig task;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  double gradient_check_error = 0.0;  // max relative error of the step-0 check
};

// Student inputs and aligned teacher rows for one sampled batch.
struct BatchData {
  Matrix inputs;
  std::vector<Modality> modalities;
  Labels labels;
  Matrix teacher;
};

BatchData gather_batch(const EmbeddingSet& teacher_set, const Batch& batch);

// Forward pass, all four objectives and their weighted combination.
struct BatchObjective {
  TaskLossResult task;
  LossResult cosine;
  LossResult pcm;
  LossResult fr;
  LossResult total;
  ForwardCache cache;
};

BatchObjective evaluate_objective(const StudentModel& model, const BatchData& data,
                                  const ProjectionBasis& basis, const TrainConfig& cfg);

// Full backward pass for the weighted objective; returns gradients shaped
// like the model.
StudentModel objective_gradient(const StudentModel& model, const BatchData& data,
                                const BatchObjective& objective);

// One AdamW update at learning rate `lr`. The record carries unweighted
// component values. NumericalError when the loss or any gradient is not
// finite.
StepRecord train_step(StudentModel& model, AdamW& optimizer, const BatchData& data,
                      const ProjectionBasis& basis, const TrainConfig& cfg, double lr);

// Compares the analytic gradient of the weighted objective against central
// differences (h = 1e-5) on `entries` randomly chosen trainable parameters.
// Returns the max of |a - f| / max(|a|, |f|, 1e-6).
double gradient_spot_check(const StudentModel& model, const BatchData& data,
                           const ProjectionBasis& basis, const TrainConfig& cfg, Rng& rng,
                           std::size_t entries = 32);

struct TrainResult {
  StudentModel model;
  TrainingLog log;
};

// SVD of the teacher features (computed once), frozen top-k basis, then
// epochs x steps of PK batches. When `heldout` is given, E2E metrics on it
// are recorded after every epoch. The step-0 gradient spot check throws
// NumericalError above 1e-3.
TrainResult train_distill(const EmbeddingSet& teacher_set, const TrainConfig& cfg,
                          const EmbeddingSet* heldout = nullptr);

// Student outputs for every row of `set` (which must carry raw inputs),
// tagged "edge".
EmbeddingSet embed_with_student(const StudentModel& model, const EmbeddingSet& set);

// Mean E2E mAP over `tasks` for the student on `heldout`.
std::vector<MetricsRow> evaluate_student(const StudentModel& model, const EmbeddingSet& heldout,
                                         const std::vector<EvalTask>& tasks);

// step,lr,task,cosine,pcm,fr,total,shared
void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path);

// epoch,task,rank1,rank5,rank10,map,minp,n_queries
void write_epoch_metrics_csv(const TrainingLog& log, const std::filesystem::path& path);

}  // namespace svdkd
