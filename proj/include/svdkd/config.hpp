#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svdkd/eval.hpp"
#include "svdkd/synth.hpp"
#include "svdkd/train.hpp"

namespace svdkd {

// The JSON document accepted by `--config`. Every section and field is
// optional; missing fields keep their defaults. Unknown keys are rejected and
// the loss weights must sum to 1.
//
// {
//   "synth": {n_identities, samples_per_modality, d, d_in, latent_rank,
//             spectrum_decay, modality_gap, noise_sigma, input_noise_sigma,
//             basis_mixing, seed, heldout_identities},
//   "train": {epochs, steps_per_epoch, batch_identities, batch_per_identity,
//             weights: {task, cosine, pcm, fr}, margin, tau, epsilon, pcm_k,
//             lr_initial, lr_min, adamw: {beta1, beta2, epsilon, weight_decay},
//             lora: {enabled, rank, stride, dense_tail}, hidden_dim, depth,
//             seed, gradient_check, eval_tasks: ["sketch:rgb", ...]},
//   "eval":  {tasks: ["sketch:rgb", ...], mode: "e2c"}
// }
struct CliConfig {
  SynthConfig synth;
  std::size_t heldout_identities = 0;
  TrainConfig train;
  std::vector<EvalTask> eval_tasks = default_eval_tasks();
  EvalMode eval_mode = EvalMode::kE2C;
};

// ArgumentError on unknown keys, wrong types or invalid values.
CliConfig parse_config(const nlohmann::json& doc);
CliConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const SynthConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);

// Human-readable schema with defaults and their provenance, printed by
// `svdkd config-schema` and `--help`.
std::string config_schema_text();

}  // namespace svdkd
