#include "svdkd/student.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

DenseLayer make_layer(std::size_t in, std::size_t out, double stddev, Rng& rng) {
  DenseLayer layer;
  layer.weight.resize(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  for (Eigen::Index j = 0; j < layer.weight.cols(); ++j) {
    for (Eigen::Index i = 0; i < layer.weight.rows(); ++i) layer.weight(i, j) = stddev * rng.normal();
  }
  layer.bias = Vector::Zero(static_cast<Eigen::Index>(out));
  return layer;
}

DenseLayer zero_layer(const DenseLayer& like) {
  DenseLayer out;
  out.weight = Matrix::Zero(like.weight.rows(), like.weight.cols());
  out.bias = Vector::Zero(like.bias.size());
  out.frozen = like.frozen;
  if (like.lora) {
    out.lora = LoraAdapter{Matrix::Zero(like.lora->a.rows(), like.lora->a.cols()),
                           Matrix::Zero(like.lora->b.rows(), like.lora->b.cols())};
  }
  return out;
}

std::span<double> span_of(Matrix& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

void append_layer(std::vector<ParamBlock>& out, const std::string& prefix, DenseLayer& layer) {
  out.push_back({prefix + ".weight", span_of(layer.weight), !layer.frozen});
  out.push_back({prefix + ".bias", span_of(layer.bias), !layer.frozen});
  if (layer.lora) {
    out.push_back({prefix + ".lora_a", span_of(layer.lora->a), true});
    out.push_back({prefix + ".lora_b", span_of(layer.lora->b), true});
  }
}

Matrix affine(const DenseLayer& layer, const Matrix& x) {
  Matrix y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  return y;
}

Matrix relu(const Matrix& x) {
  return x.unaryExpr([](double v) { return v > 0.0 ? v : 0.0; });
}

std::array<std::vector<Eigen::Index>, kModalityCount> rows_by_modality(
    std::span<const Modality> modalities) {
  std::array<std::vector<Eigen::Index>, kModalityCount> rows;
  for (std::size_t i = 0; i < modalities.size(); ++i) {
    rows[index_of(modalities[i])].push_back(static_cast<Eigen::Index>(i));
  }
  return rows;
}

}  // namespace

StudentModel StudentModel::initialize(const StudentShape& shape, std::uint64_t seed) {
  if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.output_dim == 0 ||
      shape.classes == 0) {
    throw ArgumentError("student dimensions must be positive");
  }
  Rng rng(seed);
  StudentModel model;
  model.shape = shape;
  const double proj_std = std::sqrt(1.0 / static_cast<double>(shape.input_dim));
  for (auto& layer : model.input_proj) {
    layer = make_layer(shape.input_dim, shape.hidden_dim, proj_std, rng);
  }
  const double trunk_std = std::sqrt(2.0 / static_cast<double>(shape.hidden_dim));
  for (std::size_t l = 0; l < shape.depth; ++l) {
    model.trunk.push_back(make_layer(shape.hidden_dim, shape.hidden_dim, trunk_std, rng));
  }
  model.output_proj = make_layer(shape.hidden_dim, shape.output_dim,
                                 std::sqrt(1.0 / static_cast<double>(shape.hidden_dim)), rng);
  model.classifier = make_layer(shape.output_dim, shape.classes,
                                std::sqrt(1.0 / static_cast<double>(shape.output_dim)), rng);
  return model;
}

bool StudentModel::lora_active() const {
  return std::any_of(trunk.begin(), trunk.end(), [](const DenseLayer& l) { return l.lora.has_value(); });
}

std::vector<std::size_t> StudentModel::adapted_layers() const {
  std::vector<std::size_t> out;
  for (std::size_t l = 0; l < trunk.size(); ++l) {
    if (trunk[l].lora) out.push_back(l + 1);
  }
  return out;
}

StudentModel zeros_like(const StudentModel& model) {
  StudentModel out;
  out.shape = model.shape;
  for (std::size_t m = 0; m < kModalityCount; ++m) out.input_proj[m] = zero_layer(model.input_proj[m]);
  for (const auto& layer : model.trunk) out.trunk.push_back(zero_layer(layer));
  out.output_proj = zero_layer(model.output_proj);
  out.classifier = zero_layer(model.classifier);
  return out;
}

std::vector<ParamBlock> parameter_blocks(StudentModel& model) {
  std::vector<ParamBlock> out;
  for (Modality m : kAllModalities) {
    append_layer(out, "input_proj." + std::string(to_string(m)), model.input_proj[index_of(m)]);
  }
  for (std::size_t l = 0; l < model.trunk.size(); ++l) {
    append_layer(out, "trunk." + std::to_string(l), model.trunk[l]);
  }
  append_layer(out, "output_proj", model.output_proj);
  append_layer(out, "classifier", model.classifier);
  return out;
}

std::size_t parameter_count(const StudentModel& model) {
  StudentModel copy = model;
  std::size_t total = 0;
  for (const auto& block : parameter_blocks(copy)) total += block.values.size();
  return total;
}

std::vector<std::size_t> lora_layer_plan(std::size_t depth, std::size_t stride,
                                         std::size_t dense_tail) {
  if (stride < 1) throw ArgumentError("LoRA stride must be >= 1");
  if (depth < dense_tail) {
    throw ArgumentError("trunk depth " + std::to_string(depth) + " is smaller than dense_tail " +
                        std::to_string(dense_tail));
  }
  std::vector<std::size_t> layers;
  for (std::size_t j = depth; j > depth - dense_tail; --j) layers.push_back(j);
  const std::size_t below = depth - dense_tail;
  for (std::size_t j = below; j >= 1; --j) {
    if ((below - j + 1) % stride == 0) layers.push_back(j);
  }
  std::sort(layers.begin(), layers.end());
  return layers;
}

StudentModel lora_attach(const StudentModel& model, const LoraConfig& cfg, Rng& rng) {
  if (cfg.rank < 1) throw ArgumentError("LoRA rank must be >= 1");
  const std::size_t width = model.shape.hidden_dim;
  if (cfg.rank * 4 > width) {
    throw ArgumentError("LoRA rank " + std::to_string(cfg.rank) +
                        " must not exceed a quarter of the hidden width " + std::to_string(width));
  }
  const auto plan = lora_layer_plan(model.trunk.size(), cfg.stride, cfg.dense_tail);
  StudentModel out = model;
  const double a_std = 1.0 / std::sqrt(static_cast<double>(width));
  for (std::size_t l : plan) {
    DenseLayer& layer = out.trunk[l - 1];
    LoraAdapter adapter;
    adapter.a.resize(static_cast<Eigen::Index>(cfg.rank), static_cast<Eigen::Index>(layer.in_dim()));
    for (Eigen::Index j = 0; j < adapter.a.cols(); ++j) {
      for (Eigen::Index i = 0; i < adapter.a.rows(); ++i) adapter.a(i, j) = a_std * rng.normal();
    }
    adapter.b = Matrix::Zero(static_cast<Eigen::Index>(layer.out_dim()),
                             static_cast<Eigen::Index>(cfg.rank));
    layer.lora = std::move(adapter);
  }
  for (auto& layer : out.trunk) layer.frozen = true;
  return out;
}

DenseLayer lora_merge(const DenseLayer& layer) {
  DenseLayer out = layer;
  if (out.lora) {
    out.weight += out.lora->b * out.lora->a;
    out.lora.reset();
  }
  return out;
}

StudentModel lora_merge_all(const StudentModel& model) {
  StudentModel out = model;
  for (auto& layer : out.trunk) layer = lora_merge(layer);
  return out;
}

ForwardCache forward_cached(const StudentModel& model, const Matrix& inputs,
                            std::span<const Modality> modalities) {
  if (static_cast<std::size_t>(inputs.cols()) != model.shape.input_dim) {
    throw ArgumentError("student forward: input width " + std::to_string(inputs.cols()) +
                        " but the model expects " + std::to_string(model.shape.input_dim));
  }
  if (static_cast<std::size_t>(inputs.rows()) != modalities.size()) {
    throw ArgumentError("student forward: one modality per input row is required");
  }
  ForwardCache cache;
  cache.projected.resize(inputs.rows(), static_cast<Eigen::Index>(model.shape.hidden_dim));
  const auto groups = rows_by_modality(modalities);
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    if (groups[m].empty()) continue;
    const Matrix x = inputs(groups[m], Eigen::all);
    cache.projected(groups[m], Eigen::all) = affine(model.input_proj[m], x);
  }

  const Matrix* current = &cache.projected;
  cache.adapter_mid.resize(model.trunk.size());
  cache.pre.resize(model.trunk.size());
  cache.post.resize(model.trunk.size());
  for (std::size_t l = 0; l < model.trunk.size(); ++l) {
    const DenseLayer& layer = model.trunk[l];
    cache.pre[l] = affine(layer, *current);
    if (layer.lora) {
      cache.adapter_mid[l] = *current * layer.lora->a.transpose();
      cache.pre[l] += cache.adapter_mid[l] * layer.lora->b.transpose();
    }
    cache.post[l] = relu(cache.pre[l]);
    current = &cache.post[l];
  }
  cache.features = affine(model.output_proj, *current);
  cache.logits = affine(model.classifier, cache.features);
  return cache;
}

Matrix forward(const StudentModel& model, const Matrix& inputs,
               std::span<const Modality> modalities) {
  return forward_cached(model, inputs, modalities).features;
}

void backward(const StudentModel& model, const ForwardCache& cache, const Matrix& inputs,
              std::span<const Modality> modalities, const Matrix& grad_features,
              const Matrix* grad_logits, StudentModel& grads) {
  Matrix d_features = grad_features;
  if (grad_logits != nullptr) {
    grads.classifier.weight.noalias() += grad_logits->transpose() * cache.features;
    grads.classifier.bias += grad_logits->colwise().sum().transpose();
    d_features.noalias() += *grad_logits * model.classifier.weight;
  }

  const Matrix& last = model.trunk.empty() ? cache.projected : cache.post.back();
  grads.output_proj.weight.noalias() += d_features.transpose() * last;
  grads.output_proj.bias += d_features.colwise().sum().transpose();
  Matrix d_hidden = d_features * model.output_proj.weight;

  for (std::size_t l = model.trunk.size(); l-- > 0;) {
    const DenseLayer& layer = model.trunk[l];
    DenseLayer& g = grads.trunk[l];
    const Matrix& input = l == 0 ? cache.projected : cache.post[l - 1];
    const Matrix d_pre =
        d_hidden.cwiseProduct(cache.pre[l].unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    if (!layer.frozen) {
      g.weight.noalias() += d_pre.transpose() * input;
      g.bias += d_pre.colwise().sum().transpose();
    }
    d_hidden = d_pre * layer.weight;
    if (layer.lora) {
      g.lora->b.noalias() += d_pre.transpose() * cache.adapter_mid[l];
      const Matrix d_mid = d_pre * layer.lora->b;
      g.lora->a.noalias() += d_mid.transpose() * input;
      d_hidden.noalias() += d_mid * layer.lora->a;
    }
  }

  const auto groups = rows_by_modality(modalities);
  for (std::size_t m = 0; m < kModalityCount; ++m) {
    if (groups[m].empty()) continue;
    const Matrix d_proj = d_hidden(groups[m], Eigen::all);
    const Matrix x = inputs(groups[m], Eigen::all);
    grads.input_proj[m].weight.noalias() += d_proj.transpose() * x;
    grads.input_proj[m].bias += d_proj.colwise().sum().transpose();
  }
}

void AdamW::step(const std::vector<ParamBlock>& params, const std::vector<ParamBlock>& grads,
                 double lr) {
  if (params.size() != grads.size()) throw ArgumentError("AdamW: parameter/gradient count mismatch");
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.values.size(), 0.0);
      second_.emplace_back(p.values.size(), 0.0);
    }
  }
  if (first_.size() != params.size()) throw ArgumentError("AdamW: parameter layout changed");
  ++step_;
  const double t = static_cast<double>(step_);
  const double bias1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg_.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    const auto& g = grads[b];
    if (p.values.size() != g.values.size() || p.values.size() != first_[b].size()) {
      throw ArgumentError("AdamW: block " + p.name + " changed shape");
    }
    if (!p.trainable) continue;
    auto& m = first_[b];
    auto& v = second_[b];
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double grad = g.values[i];
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad;
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad * grad;
      const double m_hat = m[i] / bias1;
      const double v_hat = v[i] / bias2;
      p.values[i] *= 1.0 - lr * cfg_.weight_decay;
      p.values[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  }
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_initial, double lr_min) {
  if (step > total_steps) return lr_min;
  if (total_steps == 0) return lr_initial;
  if (step == total_steps) return lr_min;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_initial - lr_min) * (1.0 + std::cos(M_PI * progress));
}

}  // namespace svdkd
