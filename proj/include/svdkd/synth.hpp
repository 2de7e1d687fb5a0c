#pragma once

#include <cstdint>

#include "svdkd/embedding_set.hpp"

namespace svdkd {

// Synthetic teacher features with identity structure, per-modality offsets
// and a power-law singular spectrum, plus raw student inputs.
struct SynthConfig {
  std::size_t n_identities = 256;
  std::size_t samples_per_modality = 2;
  std::size_t d = 256;          // teacher feature dimension
  std::size_t d_in = 64;        // raw input dimension
  std::size_t latent_rank = 256;
  double spectrum_decay = 1.2;  // sigma_k proportional to k^-gamma
  double modality_gap = 0.2;    // norm of each modality offset relative to a prototype
  double noise_sigma = 0.1;     // latent noise on teacher rows
  double input_noise_sigma = 0.1;
  // 0 maps the latent axes onto randomly chosen signed coordinate axes; larger
  // values rotate the basis toward a dense random orthonormal frame.
  double basis_mixing = 0.05;
  std::uint64_t seed = 0;

  // ArgumentError unless latent_rank <= d, gamma > 0 and every scale >= 0.
  void validate() const;
};

// Construction, for latent code z = prototype[id] + offset[modality] + noise:
//   teacher row  = B diag(k^-gamma) z      (B: fixed d x latent_rank orthonormal)
//   raw input    = M prototype[id] + input noise   (M: fixed d_in x latent_rank)
// Prototypes are an orthogonalized Gaussian draw scaled so entries have unit
// variance, which makes the imposed spectrum hold for the prototype part
// whenever n_identities >= latent_rank. Rows are ordered identity-major, then
// modality, then sample; sample ids equal row indices. Source tag "synthetic".
EmbeddingSet generate_dataset(const SynthConfig& cfg);

struct SynthSplit {
  EmbeddingSet train;
  EmbeddingSet heldout;
};

// Generates cfg.n_identities identities sharing one basis, map and offsets,
// and moves the last `heldout_identities` of them into a second set with
// identity ids renumbered from 0. ArgumentError unless
// 0 < heldout_identities < n_identities.
SynthSplit generate_split(const SynthConfig& cfg, std::size_t heldout_identities);

}  // namespace svdkd
