#include "svdkd/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

constexpr double kSpotCheckBound = 1e-3;

bool finite(const Matrix& m) { return m.size() == 0 || m.allFinite(); }

std::vector<ParamBlock> blocks_of(StudentModel& model) { return parameter_blocks(model); }

}  // namespace

void TrainConfig::validate() const {
  weights.validate();
  task.validate();
  if (batch_identities < 1) throw ArgumentError("train: batch_identities (P) must be >= 1");
  if (batch_per_identity < 2) throw ArgumentError("train: batch_per_identity (K) must be >= 2");
  if (pcm_k < 1) throw ArgumentError("train: pcm_k must be >= 1");
  if (!(lr_initial > 0.0) || !(lr_min >= 0.0)) throw ArgumentError("train: learning rates must be positive");
  if (lr_min > lr_initial) throw ArgumentError("train: lr_min must not exceed lr_initial");
  if (hidden_dim < 1) throw ArgumentError("train: hidden_dim must be >= 1");
  if (lora.enabled && (lora.rank < 1 || lora.stride < 1)) {
    throw ArgumentError("train: LoRA rank and stride must be >= 1");
  }
}

BatchData gather_batch(const EmbeddingSet& teacher_set, const Batch& batch) {
  if (!teacher_set.raw_inputs()) throw ArgumentError("batch requires raw inputs");
  const auto n = static_cast<Eigen::Index>(batch.size());
  BatchData data;
  data.inputs.resize(n, static_cast<Eigen::Index>(teacher_set.input_dim()));
  data.teacher.resize(n, static_cast<Eigen::Index>(teacher_set.dim()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = batch.indices[static_cast<std::size_t>(i)];
    data.inputs.row(i) = teacher_set.raw_inputs()->row(static_cast<Eigen::Index>(row));
    data.teacher.row(i) = teacher_set.features().row(static_cast<Eigen::Index>(row));
    data.modalities.push_back(teacher_set.meta()[row].modality);
    data.labels.push_back(teacher_set.meta()[row].identity_id);
  }
  return data;
}

BatchObjective evaluate_objective(const StudentModel& model, const BatchData& data,
                                  const ProjectionBasis& basis, const TrainConfig& cfg) {
  BatchObjective out;
  out.cache = forward_cached(model, data.inputs, data.modalities);
  const Matrix& student = out.cache.features;
  out.task = task_loss(student, out.cache.logits, data.labels, data.modalities, cfg.task);
  out.cosine = cosine_loss(data.teacher, student);
  out.pcm = pcm_loss(data.teacher, student, basis);
  out.fr = fr_loss(data.teacher, student);
  out.total = distill_loss(out.task.loss, out.cosine, out.pcm, out.fr, cfg.weights);
  return out;
}

StudentModel objective_gradient(const StudentModel& model, const BatchData& data,
                                const BatchObjective& objective) {
  StudentModel grads = zeros_like(model);
  const Matrix* grad_logits = objective.total.grad_aux ? &*objective.total.grad_aux : nullptr;
  backward(model, objective.cache, data.inputs, data.modalities, objective.total.grad_features,
           grad_logits, grads);
  return grads;
}

StepRecord train_step(StudentModel& model, AdamW& optimizer, const BatchData& data,
                      const ProjectionBasis& basis, const TrainConfig& cfg, double lr) {
  const std::size_t step = optimizer.steps();
  const BatchObjective objective = evaluate_objective(model, data, basis, cfg);
  StepRecord record;
  record.step = step;
  record.lr = lr;
  record.task = objective.task.loss.value;
  record.cosine = objective.cosine.value;
  record.pcm = objective.pcm.value;
  record.fr = objective.fr.value;
  record.total = objective.total.value;
  record.shared = record.task + record.cosine;
  if (!std::isfinite(record.total) || !finite(objective.total.grad_features)) {
    throw NumericalError("non-finite loss or feature gradient at step " + std::to_string(step));
  }

  StudentModel grads = objective_gradient(model, data, objective);
  const auto params = blocks_of(model);
  const auto grad_blocks = blocks_of(grads);
  for (const auto& g : grad_blocks) {
    for (double v : g.values) {
      if (!std::isfinite(v)) {
        throw NumericalError("non-finite gradient in " + g.name + " at step " + std::to_string(step));
      }
    }
  }
  optimizer.step(params, grad_blocks, lr);
  return record;
}

double gradient_spot_check(const StudentModel& model, const BatchData& data,
                           const ProjectionBasis& basis, const TrainConfig& cfg, Rng& rng,
                           std::size_t entries) {
  StudentModel probe = model;
  const BatchObjective objective = evaluate_objective(probe, data, basis, cfg);
  StudentModel grads = objective_gradient(probe, data, objective);
  auto params = parameter_blocks(probe);
  const auto grad_blocks = parameter_blocks(grads);

  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (!params[b].trainable) continue;
    for (std::size_t i = 0; i < params[b].values.size(); ++i) candidates.emplace_back(b, i);
  }
  // A step that carries a ReLU pre-activation across zero gives a one-sided
  // difference, so a disagreeing entry is re-measured at a 100x smaller step.
  const auto central = [&](double& theta, double h) {
    const double saved = theta;
    theta = saved + h;
    const double up = evaluate_objective(probe, data, basis, cfg).total.value;
    theta = saved - h;
    const double down = evaluate_objective(probe, data, basis, cfg).total.value;
    theta = saved;
    return (up - down) / (2.0 * h);
  };
  const auto relative = [](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    return std::abs(analytic - numeric) / scale;
  };
  double worst = 0.0;
  for (std::size_t e = 0; e < entries && !candidates.empty(); ++e) {
    const auto [b, i] = candidates[rng.uniform_index(candidates.size())];
    const double analytic = grad_blocks[b].values[i];
    double error = relative(analytic, central(params[b].values[i], 1e-5));
    if (error >= kSpotCheckBound) error = relative(analytic, central(params[b].values[i], 1e-7));
    worst = std::max(worst, error);
  }
  return worst;
}

EmbeddingSet embed_with_student(const StudentModel& model, const EmbeddingSet& set) {
  if (!set.raw_inputs()) throw ArgumentError("embedding with the student requires raw inputs");
  std::vector<Modality> modalities;
  modalities.reserve(set.size());
  for (const auto& m : set.meta()) modalities.push_back(m.modality);
  return set.with_features(forward(model, *set.raw_inputs(), modalities), "edge");
}

std::vector<MetricsRow> evaluate_student(const StudentModel& model, const EmbeddingSet& heldout,
                                         const std::vector<EvalTask>& tasks) {
  const EmbeddingSet edge = embed_with_student(model, heldout);
  std::vector<MetricsRow> rows;
  for (const auto& task : tasks) {
    rows.push_back({task, EvalMode::kE2E, evaluate_retrieval(edge, edge, task, EvalMode::kE2E)});
  }
  return rows;
}

TrainResult train_distill(const EmbeddingSet& teacher_set, const TrainConfig& cfg,
                          const EmbeddingSet* heldout) {
  cfg.validate();
  const auto& tag = teacher_set.source_tag();
  if (tag != "cloud" && tag != "synthetic") {
    throw ArgumentError("train_distill: teacher set must be tagged cloud or synthetic, got '" +
                        tag + "'");
  }
  if (!teacher_set.raw_inputs()) throw ArgumentError("train_distill: teacher set has no raw inputs");
  if (cfg.pcm_k > teacher_set.dim()) {
    throw ArgumentError("train_distill: pcm_k " + std::to_string(cfg.pcm_k) +
                        " exceeds feature dimension " + std::to_string(teacher_set.dim()));
  }
  if (heldout != nullptr && heldout->dim() != teacher_set.dim()) {
    throw ArgumentError("train_distill: held-out set dimension differs from the teacher");
  }

  StudentShape shape;
  shape.input_dim = teacher_set.input_dim();
  shape.hidden_dim = cfg.hidden_dim;
  shape.depth = cfg.depth;
  shape.output_dim = teacher_set.dim();
  shape.classes = teacher_set.identity_count();

  Rng rng(cfg.seed);
  TrainResult result;
  result.model = StudentModel::initialize(shape, rng.next_u64());
  if (cfg.lora.enabled) result.model = lora_attach(result.model, cfg.lora, rng);
  result.log.weights = cfg.weights;
  result.log.task = cfg.task;
  if (cfg.epochs == 0) return result;

  const SvdFactors factors = thin_svd(teacher_set.features());
  const ProjectionBasis basis = top_k_basis(factors, cfg.pcm_k);

  const std::size_t batch_size = cfg.batch_identities * cfg.batch_per_identity;
  const std::size_t steps_per_epoch =
      cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch : std::max<std::size_t>(1, teacher_set.size() / batch_size);
  const std::size_t total_steps = cfg.epochs * steps_per_epoch;

  AdamW optimizer(cfg.adamw);
  Rng check_rng(rng.next_u64());
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const Batch batch =
          sample_batch(teacher_set, cfg.batch_identities, cfg.batch_per_identity, rng);
      const BatchData data = gather_batch(teacher_set, batch);
      const std::size_t step = optimizer.steps();
      if (step == 0 && cfg.gradient_check) {
        const double err = gradient_spot_check(result.model, data, basis, cfg, check_rng);
        result.log.gradient_check_error = err;
        if (!(err < kSpotCheckBound)) {
          std::ostringstream msg;
          msg << "train_distill: step-0 gradient spot check failed (max relative error " << err
              << ")";
          throw NumericalError(msg.str());
        }
      }
      const double lr = cosine_lr(step, total_steps, cfg.lr_initial, cfg.lr_min);
      result.log.steps.push_back(train_step(result.model, optimizer, data, basis, cfg, lr));
    }
    if (heldout != nullptr) {
      EpochRecord record;
      record.epoch = epoch;
      record.metrics = evaluate_student(result.model, *heldout, cfg.eval_tasks);
      for (const auto& row : record.metrics) record.mean_map += row.metrics.map;
      if (!record.metrics.empty()) record.mean_map /= static_cast<double>(record.metrics.size());
      result.log.epochs.push_back(std::move(record));
    }
  }
  return result;
}

void write_training_log_csv(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "step,lr,task,cosine,pcm,fr,total,shared\n";
  char buf[512];
  for (const auto& r : log.steps) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.lr,
                  r.task, r.cosine, r.pcm, r.fr, r.total, r.shared);
    out << buf;
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

void write_epoch_metrics_csv(const TrainingLog& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "epoch,task,rank1,rank5,rank10,map,minp,n_queries\n";
  char buf[512];
  for (const auto& e : log.epochs) {
    for (const auto& row : e.metrics) {
      const auto& m = row.metrics;
      std::snprintf(buf, sizeof(buf), "%zu,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n", e.epoch,
                    row.task.name().c_str(), m.rank1, m.rank5, m.rank10, m.map, m.minp,
                    m.n_queries);
      out << buf;
    }
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace svdkd
