#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "svdkd/embedding_set.hpp"
#include "svdkd/random.hpp"

namespace svdkd {

// Low-rank update delta_W = B A added to a frozen base weight.
struct LoraAdapter {
  Matrix a;  // r x in
  Matrix b;  // out x r

  std::size_t rank() const { return static_cast<std::size_t>(a.rows()); }
  Matrix delta() const { return b * a; }
};

// Affine map y = W x + b (weight is out x in). When `frozen` is set the base
// weight and bias receive no updates; an attached adapter stays trainable.
struct DenseLayer {
  Matrix weight;
  Vector bias;
  std::optional<LoraAdapter> lora;
  bool frozen = false;

  std::size_t in_dim() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_dim() const { return static_cast<std::size_t>(weight.rows()); }
};

struct StudentShape {
  std::size_t input_dim = 64;
  std::size_t hidden_dim = 128;
  std::size_t depth = 8;
  std::size_t output_dim = 256;
  std::size_t classes = 1;

  friend bool operator==(const StudentShape&, const StudentShape&) = default;
};

struct LoraConfig {
  bool enabled = false;
  std::size_t rank = 16;
  std::size_t stride = 2;
  std::size_t dense_tail = 4;
};

// Modality-routed encoder: one input projection per modality, a shared trunk
// of `depth` ReLU layers, a linear output projection into the teacher's
// feature space and a linear identity classifier on top of the features.
struct StudentModel {
  StudentShape shape;
  std::array<DenseLayer, kModalityCount> input_proj;
  std::vector<DenseLayer> trunk;
  DenseLayer output_proj;
  DenseLayer classifier;

  // He-normal weights, zero biases.
  static StudentModel initialize(const StudentShape& shape, std::uint64_t seed);

  bool lora_active() const;
  // 1-based indices of trunk layers that carry an adapter.
  std::vector<std::size_t> adapted_layers() const;
};

// Same structure as `model` with every parameter set to zero; used as the
// gradient accumulator.
StudentModel zeros_like(const StudentModel& model);

// One named, contiguous parameter block.
struct ParamBlock {
  std::string name;
  std::span<double> values;
  bool trainable = true;
};

// Deterministic order: input projections (modality order), trunk layers
// (base weight, bias, then lora.a, lora.b), output projection, classifier.
std::vector<ParamBlock> parameter_blocks(StudentModel& model);
std::size_t parameter_count(const StudentModel& model);

// 1-based trunk layers receiving adapters: the last `dense_tail` layers, plus
// every `stride`-th layer counting backward from the one just below them.
std::vector<std::size_t> lora_layer_plan(std::size_t depth, std::size_t stride,
                                         std::size_t dense_tail);

// Attaches adapters following lora_layer_plan. B starts at zero and A at small
// Gaussian values, so the forward pass is unchanged. Every trunk base weight
// is frozen. ArgumentError on rank or stride < 1, depth < dense_tail, or rank
// larger than a quarter of the hidden width.
StudentModel lora_attach(const StudentModel& model, const LoraConfig& cfg, Rng& rng);

// W' = W + B A; the adapter is removed.
DenseLayer lora_merge(const DenseLayer& layer);
StudentModel lora_merge_all(const StudentModel& model);

// Activations kept for the backward pass.
struct ForwardCache {
  Matrix projected;                 // N x h, input projections
  std::vector<Matrix> adapter_mid;  // per trunk layer: X A^T (empty without adapter)
  std::vector<Matrix> pre;          // per trunk layer pre-activation
  std::vector<Matrix> post;         // per trunk layer ReLU output
  Matrix features;                  // N x d
  Matrix logits;                    // N x C
};

// Rows of `inputs` are routed through the projection of their modality.
// ArgumentError when dimensions disagree with the model.
ForwardCache forward_cached(const StudentModel& model, const Matrix& inputs,
                            std::span<const Modality> modalities);
Matrix forward(const StudentModel& model, const Matrix& inputs,
               std::span<const Modality> modalities);

// Accumulates parameter gradients into `grads` (shaped like `model`) given
// upstream gradients for the features and optionally the logits. Gradients
// of frozen blocks are left at zero.
void backward(const StudentModel& model, const ForwardCache& cache, const Matrix& inputs,
              std::span<const Modality> modalities, const Matrix& grad_features,
              const Matrix* grad_logits, StudentModel& grads);

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
};

// Decoupled weight decay Adam. Moments are laid out in parameter_blocks order.
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  // theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps) for every
  // trainable block; frozen blocks are untouched.
  void step(const std::vector<ParamBlock>& params, const std::vector<ParamBlock>& grads,
            double lr);

  std::uint64_t steps() const { return step_; }
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

// lr_min + (lr_initial - lr_min) (1 + cos(pi step / total)) / 2, clamped to
// lr_min past the end. A zero-length schedule returns lr_initial at step 0.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_initial, double lr_min);

}  // namespace svdkd
