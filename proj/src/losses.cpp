#include "svdkd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "svdkd/diagnostics.hpp"
#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

void require_rows(const Matrix& m, std::size_t labels, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != labels) {
    throw ArgumentError(std::string(what) + ": " + std::to_string(m.rows()) + " rows but " +
                        std::to_string(labels) + " labels");
  }
  if (m.rows() == 0) throw ArgumentError(std::string(what) + ": empty batch");
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(what) + ": teacher is " + std::to_string(a.rows()) + "x" +
                        std::to_string(a.cols()) + " but student is " + std::to_string(b.rows()) +
                        "x" + std::to_string(b.cols()));
  }
  if (a.rows() == 0) throw ArgumentError(std::string(what) + ": empty batch");
}

Vector row_norms(const Matrix& m, const char* what) {
  Vector norms = m.rowwise().norm();
  for (Eigen::Index i = 0; i < norms.size(); ++i) {
    if (!(norms[i] > 0.0)) {
      throw DataError(std::string(what) + ": row " + std::to_string(i) + " has zero norm");
    }
  }
  return norms;
}

// Backpropagates a gradient taken with respect to row-normalized x / |x|
// into x itself.
Matrix through_row_normalization(const Matrix& normalized, const Vector& norms,
                                 const Matrix& grad_normalized) {
  Matrix out(normalized.rows(), normalized.cols());
  for (Eigen::Index i = 0; i < normalized.rows(); ++i) {
    const double radial = normalized.row(i).dot(grad_normalized.row(i));
    out.row(i) = (grad_normalized.row(i) - radial * normalized.row(i)) / norms[i];
  }
  return out;
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

void scatter_add_rows(Matrix& target, const Matrix& block, const std::vector<std::size_t>& rows) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    target.row(static_cast<Eigen::Index>(rows[i])) += block.row(static_cast<Eigen::Index>(i));
  }
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {task, cosine, pcm, fr}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw ArgumentError("loss weights must be finite and non-negative");
    }
  }
  const double sum = task + cosine + pcm + fr;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ArgumentError("loss weights must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

void TaskLossConfig::validate() const {
  if (!(margin >= 0.0)) throw ArgumentError("triplet margin must be >= 0");
  if (!(tau > 0.0)) throw ArgumentError("SDM temperature tau must be > 0");
  if (!(epsilon > 0.0)) throw ArgumentError("SDM epsilon must be > 0");
}

LossResult id_loss(const Matrix& logits, std::span<const std::int64_t> labels) {
  require_rows(logits, labels.size(), "id_loss");
  if (!logits.allFinite()) throw ArgumentError("id_loss: logits must be finite");
  const Eigen::Index n = logits.rows();
  const Eigen::Index classes = logits.cols();
  LossResult out;
  out.grad_features = Matrix::Zero(n, classes);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::int64_t y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) {
      throw ArgumentError("id_loss: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    const double peak = logits.row(i).maxCoeff();
    const double lse = peak + std::log((logits.row(i).array() - peak).exp().sum());
    total += lse - logits(i, y);
    out.grad_features.row(i) = (logits.row(i).array() - lse).exp();
    out.grad_features(i, y) -= 1.0;
  }
  out.value = total / static_cast<double>(n);
  out.grad_features /= static_cast<double>(n);
  return out;
}

LossResult triplet_loss(const Matrix& features, std::span<const std::int64_t> labels,
                        double margin) {
  require_rows(features, labels.size(), "triplet_loss");
  if (!(margin >= 0.0)) throw ArgumentError("triplet_loss: margin must be >= 0");
  const Eigen::Index n = features.rows();

  Matrix dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      dist(i, j) = (features.row(i) - features.row(j)).squaredNorm();
    }
  }

  LossResult out;
  out.grad_features = Matrix::Zero(n, features.cols());
  const double scale = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (Eigen::Index a = 0; a < n; ++a) {
    Eigen::Index pos = -1;
    Eigen::Index neg = -1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == a) continue;
      if (labels[j] == labels[a]) {
        if (pos < 0 || dist(a, j) > dist(a, pos)) pos = j;
      } else if (neg < 0 || dist(a, j) < dist(a, neg)) {
        neg = j;
      }
    }
    if (pos < 0 || neg < 0) {
      throw MiningError("triplet_loss: anchor " + std::to_string(a) + " has no " +
                        (pos < 0 ? "positive" : "negative") + " in the batch");
    }
    const double hinge = dist(a, pos) - dist(a, neg) + margin;
    if (hinge <= 0.0) continue;
    total += hinge;
    const Eigen::RowVectorXd to_pos = features.row(a) - features.row(pos);
    const Eigen::RowVectorXd to_neg = features.row(a) - features.row(neg);
    out.grad_features.row(a) += 2.0 * scale * (to_pos - to_neg);
    out.grad_features.row(pos) -= 2.0 * scale * to_pos;
    out.grad_features.row(neg) += 2.0 * scale * to_neg;
  }
  out.value = total * scale;
  return out;
}

LossResult sdm_pair_loss(const Matrix& queries, const Matrix& gallery,
                         std::span<const std::int64_t> query_labels,
                         std::span<const std::int64_t> gallery_labels,
                         const TaskLossConfig& cfg) {
  require_rows(queries, query_labels.size(), "sdm_pair_loss queries");
  require_rows(gallery, gallery_labels.size(), "sdm_pair_loss gallery");
  if (queries.cols() != gallery.cols()) throw ArgumentError("sdm_pair_loss: dimension mismatch");
  if (!(cfg.tau > 0.0)) throw ArgumentError("sdm_pair_loss: tau must be > 0");
  if (!(cfg.epsilon > 0.0)) throw ArgumentError("sdm_pair_loss: epsilon must be > 0");

  const Eigen::Index nq = queries.rows();
  const Eigen::Index ng = gallery.rows();
  const Vector q_norm = row_norms(queries, "sdm_pair_loss queries");
  const Vector g_norm = row_norms(gallery, "sdm_pair_loss gallery");
  const Matrix q_hat = q_norm.cwiseInverse().asDiagonal() * queries;
  const Matrix g_hat = g_norm.cwiseInverse().asDiagonal() * gallery;
  const Matrix logits = (q_hat * g_hat.transpose()) / cfg.tau;

  Matrix grad_sim(nq, ng);
  double total = 0.0;
  const double log_eps = std::log(cfg.epsilon);
  for (Eigen::Index i = 0; i < nq; ++i) {
    double matches = 0.0;
    for (Eigen::Index j = 0; j < ng; ++j) matches += gallery_labels[j] == query_labels[i] ? 1.0 : 0.0;
    if (matches == 0.0) {
      throw ArgumentError("sdm_pair_loss: query " + std::to_string(i) +
                          " has no matching identity in the gallery");
    }
    const double peak = logits.row(i).maxCoeff();
    const double lse = peak + std::log((logits.row(i).array() - peak).exp().sum());
    double row_loss = 0.0;
    Eigen::RowVectorXd log_p = logits.row(i).array() - lse;
    Eigen::RowVectorXd p = log_p.array().exp();
    Eigen::RowVectorXd g(ng);
    for (Eigen::Index j = 0; j < ng; ++j) {
      const double log_target = gallery_labels[j] == query_labels[i]
                                    ? std::log(1.0 / matches + cfg.epsilon)
                                    : log_eps;
      g[j] = log_p[j] - log_target;
      row_loss += p[j] * g[j];
    }
    total += row_loss;
    grad_sim.row(i) = p.array() * (g.array() - row_loss);
  }
  const double scale = 1.0 / static_cast<double>(nq);
  grad_sim *= scale / cfg.tau;

  LossResult out;
  out.value = total * scale;
  out.grad_features = through_row_normalization(q_hat, q_norm, grad_sim * g_hat);
  out.grad_aux = through_row_normalization(g_hat, g_norm, grad_sim.transpose() * q_hat);
  return out;
}

SdmTotalResult sdm_total(const Matrix& features, std::span<const std::int64_t> labels,
                         std::span<const Modality> modalities, const TaskLossConfig& cfg) {
  require_rows(features, labels.size(), "sdm_total");
  if (modalities.size() != labels.size()) {
    throw ArgumentError("sdm_total: modality count does not match batch size");
  }
  std::array<std::vector<std::size_t>, kModalityCount> rows;
  for (std::size_t i = 0; i < modalities.size(); ++i) rows[index_of(modalities[i])].push_back(i);

  SdmTotalResult out;
  out.loss.grad_features = Matrix::Zero(features.rows(), features.cols());

  auto direction = [&](const std::vector<std::size_t>& from, const std::vector<std::size_t>& to) {
    std::unordered_set<std::int64_t> gallery_ids;
    for (std::size_t r : to) gallery_ids.insert(labels[r]);
    std::vector<std::size_t> queries;
    for (std::size_t r : from) {
      if (gallery_ids.contains(labels[r])) queries.push_back(r);
    }
    if (queries.empty()) return;
    Labels q_labels;
    Labels g_labels;
    for (std::size_t r : queries) q_labels.push_back(labels[r]);
    for (std::size_t r : to) g_labels.push_back(labels[r]);
    const LossResult term = sdm_pair_loss(gather_rows(features, queries), gather_rows(features, to),
                                          q_labels, g_labels, cfg);
    out.loss.value += term.value;
    scatter_add_rows(out.loss.grad_features, term.grad_features, queries);
    scatter_add_rows(out.loss.grad_features, *term.grad_aux, to);
    ++out.directional_terms;
  };

  for (const auto& [a, b] : modality_pairs()) {
    const auto& rows_a = rows[index_of(a)];
    const auto& rows_b = rows[index_of(b)];
    if (rows_a.empty() || rows_b.empty()) continue;
    direction(rows_a, rows_b);
    direction(rows_b, rows_a);
  }
  if (out.directional_terms == 0) {
    out.degenerate = true;
    warn("sdm_total: batch has no cross-modal identity matches; SDM contributes 0");
  }
  return out;
}

TaskLossResult task_loss(const Matrix& features, const Matrix& logits,
                         std::span<const std::int64_t> labels,
                         std::span<const Modality> modalities, const TaskLossConfig& cfg) {
  cfg.validate();
  const LossResult id = id_loss(logits, labels);
  const LossResult tri = triplet_loss(features, labels, cfg.margin);
  const SdmTotalResult sdm = sdm_total(features, labels, modalities, cfg);

  TaskLossResult out;
  out.id = id.value;
  out.triplet = tri.value;
  out.sdm = sdm.loss.value;
  out.sdm_terms = sdm.directional_terms;
  out.loss.value = id.value + tri.value + sdm.loss.value;
  out.loss.grad_features = tri.grad_features + sdm.loss.grad_features;
  out.loss.grad_aux = id.grad_features;
  return out;
}

LossResult cosine_loss(const Matrix& teacher, const Matrix& student) {
  require_same_shape(teacher, student, "cosine_loss");
  const Vector t_norm = row_norms(teacher, "cosine_loss teacher");
  const Vector s_norm = row_norms(student, "cosine_loss student");
  const Eigen::Index n = teacher.rows();
  const double scale = 1.0 / static_cast<double>(n);

  LossResult out;
  out.grad_features.resize(n, student.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double cos = teacher.row(i).dot(student.row(i)) / (t_norm[i] * s_norm[i]);
    total += 1.0 - cos;
    out.grad_features.row(i) =
        -scale * (teacher.row(i) / (t_norm[i] * s_norm[i]) -
                  cos * student.row(i) / (s_norm[i] * s_norm[i]));
  }
  out.value = total * scale;
  return out;
}

LossResult pcm_loss(const Matrix& teacher, const Matrix& student, const ProjectionBasis& basis) {
  require_same_shape(teacher, student, "pcm_loss");
  if (basis.dim() != static_cast<std::size_t>(teacher.cols())) {
    throw ArgumentError("pcm_loss: basis dimension " + std::to_string(basis.dim()) +
                        " does not match feature dimension " + std::to_string(teacher.cols()));
  }
  const Matrix t_proj = teacher * basis.vk;
  const Matrix s_proj = student * basis.vk;
  LossResult projected;
  try {
    projected = cosine_loss(t_proj, s_proj);
  } catch (const DataError& e) {
    throw DataError(std::string("pcm_loss: projected row vanishes (features orthogonal to the "
                                "retained subspace): ") + e.what());
  }
  LossResult out;
  out.value = projected.value;
  out.grad_features = projected.grad_features * basis.vk.transpose();
  return out;
}

LossResult fr_loss(const Matrix& teacher, const Matrix& student) {
  require_same_shape(teacher, student, "fr_loss");
  row_norms(teacher, "fr_loss teacher");
  row_norms(student, "fr_loss student");
  const double n = static_cast<double>(teacher.rows());
  const Matrix g_t = teacher.transpose() * teacher / n;
  const Matrix g_s = student.transpose() * student / n;
  const double nt = g_t.norm();
  const double ns = g_s.norm();
  const double cos = g_t.cwiseProduct(g_s).sum() / (nt * ns);

  const Matrix grad_gram = -(g_t / (nt * ns) - cos * g_s / (ns * ns));
  LossResult out;
  out.value = 1.0 - cos;
  out.grad_features = student * (grad_gram + grad_gram.transpose()) / n;
  return out;
}

LossResult distill_loss(const LossResult& task, const LossResult& cosine, const LossResult& pcm,
                        const LossResult& fr, const LossWeights& weights) {
  weights.validate();
  const auto& shape = cosine.grad_features;
  for (const LossResult* part : {&task, &pcm, &fr}) {
    if (part->grad_features.rows() != shape.rows() || part->grad_features.cols() != shape.cols()) {
      throw ArgumentError("distill_loss: component gradients have different shapes");
    }
  }
  LossResult out;
  out.value = weights.task * task.value + weights.cosine * cosine.value + weights.pcm * pcm.value +
              weights.fr * fr.value;
  out.grad_features = weights.task * task.grad_features + weights.cosine * cosine.grad_features +
                      weights.pcm * pcm.grad_features + weights.fr * fr.grad_features;
  if (task.grad_aux) out.grad_aux = weights.task * *task.grad_aux;
  return out;
}

}  // namespace svdkd
