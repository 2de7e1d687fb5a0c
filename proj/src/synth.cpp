#include "svdkd/synth.hpp"

#include <cmath>
#include <string>

#include <Eigen/QR>

#include "svdkd/errors.hpp"
#include "svdkd/random.hpp"

namespace svdkd {
namespace {

Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  }
  return m;
}

// Orthonormal columns spanning the same space as `m` (rows >= cols), with the
// sign of each column fixed so the QR factor has a positive diagonal.
Matrix orthonormal_columns(const Matrix& m) {
  Eigen::HouseholderQR<Matrix> qr(m);
  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
  const Matrix r = qr.matrixQR().topRows(m.cols()).template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

struct World {
  Matrix basis;         // d x r, orthonormal, columns scaled by the spectrum below
  Vector scales;        // r, k^-gamma
  Matrix input_map;     // d_in x r
  Matrix offsets;       // 4 x r
  Matrix prototypes;    // identities x r
};

World build_world(const SynthConfig& cfg, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(cfg.d);
  const auto r = static_cast<Eigen::Index>(cfg.latent_rank);
  const auto ids = static_cast<Eigen::Index>(cfg.n_identities);
  World w;

  // Signed random coordinate axes, perturbed toward a dense frame.
  std::vector<Eigen::Index> axes(static_cast<std::size_t>(d));
  for (Eigen::Index i = 0; i < d; ++i) axes[static_cast<std::size_t>(i)] = i;
  rng.shuffle(axes);
  Matrix seed_frame = Matrix::Zero(d, r);
  for (Eigen::Index k = 0; k < r; ++k) {
    seed_frame(axes[static_cast<std::size_t>(k)], k) = rng.uniform() < 0.5 ? -1.0 : 1.0;
  }
  seed_frame += cfg.basis_mixing / std::sqrt(static_cast<double>(d)) * gaussian(rng, d, r);
  w.basis = orthonormal_columns(seed_frame);

  w.scales.resize(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    w.scales[k] = std::pow(static_cast<double>(k + 1), -cfg.spectrum_decay);
  }

  w.input_map = gaussian(rng, static_cast<Eigen::Index>(cfg.d_in), r) /
                std::sqrt(static_cast<double>(r));

  // Each offset has norm modality_gap * sqrt(r), i.e. modality_gap times the
  // typical prototype norm.
  w.offsets = gaussian(rng, kModalityCount, r);
  for (Eigen::Index m = 0; m < w.offsets.rows(); ++m) {
    w.offsets.row(m) *= cfg.modality_gap * std::sqrt(static_cast<double>(r)) / w.offsets.row(m).norm();
  }

  const Matrix raw = gaussian(rng, ids, r);
  if (ids >= r) {
    w.prototypes = orthonormal_columns(raw) * std::sqrt(static_cast<double>(ids));
  } else {
    w.prototypes = orthonormal_columns(raw.transpose()).transpose() *
                   std::sqrt(static_cast<double>(r));
  }
  return w;
}

EmbeddingSet materialize(const SynthConfig& cfg, const World& w, std::size_t first_id,
                         std::size_t count, Rng& rng) {
  const auto r = static_cast<Eigen::Index>(cfg.latent_rank);
  const std::size_t rows = count * kModalityCount * cfg.samples_per_modality;
  Matrix latent(static_cast<Eigen::Index>(rows), r);
  Matrix inputs(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cfg.d_in));
  std::vector<SampleMeta> meta;
  meta.reserve(rows);

  Eigen::Index row = 0;
  for (std::size_t c = 0; c < count; ++c) {
    const Eigen::RowVectorXd proto = w.prototypes.row(static_cast<Eigen::Index>(first_id + c));
    const Eigen::RowVectorXd mapped = proto * w.input_map.transpose();
    for (Modality m : kAllModalities) {
      for (std::size_t s = 0; s < cfg.samples_per_modality; ++s, ++row) {
        Eigen::RowVectorXd z = proto + w.offsets.row(static_cast<Eigen::Index>(index_of(m)));
        for (Eigen::Index k = 0; k < r; ++k) z[k] += cfg.noise_sigma * rng.normal();
        latent.row(row) = z;
        Eigen::RowVectorXd x = mapped;
        for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += cfg.input_noise_sigma * rng.normal();
        inputs.row(row) = x;
        meta.push_back({static_cast<std::int64_t>(c), m, static_cast<std::int64_t>(row)});
      }
    }
  }
  Matrix features = latent * w.scales.asDiagonal() * w.basis.transpose();
  return EmbeddingSet(std::move(features), std::move(meta), std::move(inputs), "synthetic");
}

}  // namespace

void SynthConfig::validate() const {
  if (n_identities < 1) throw ArgumentError("synth: n_identities must be >= 1");
  if (samples_per_modality < 1) throw ArgumentError("synth: samples_per_modality must be >= 1");
  if (d < 1 || d_in < 1) throw ArgumentError("synth: d and d_in must be >= 1");
  if (latent_rank < 1) throw ArgumentError("synth: latent_rank must be >= 1");
  if (latent_rank > d) {
    throw ArgumentError("synth: latent_rank " + std::to_string(latent_rank) +
                        " exceeds feature dimension " + std::to_string(d));
  }
  if (!(spectrum_decay > 0.0)) throw ArgumentError("synth: spectrum_decay must be > 0");
  for (double s : {modality_gap, noise_sigma, input_noise_sigma, basis_mixing}) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ArgumentError("synth: scales must be finite and >= 0");
  }
}

EmbeddingSet generate_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const World w = build_world(cfg, rng);
  return materialize(cfg, w, 0, cfg.n_identities, rng);
}

SynthSplit generate_split(const SynthConfig& cfg, std::size_t heldout_identities) {
  cfg.validate();
  if (heldout_identities == 0 || heldout_identities >= cfg.n_identities) {
    throw ArgumentError("synth: held-out identity count must be in (0, n_identities)");
  }
  Rng rng(cfg.seed);
  const World w = build_world(cfg, rng);
  const std::size_t train_ids = cfg.n_identities - heldout_identities;
  EmbeddingSet train = materialize(cfg, w, 0, train_ids, rng);
  EmbeddingSet heldout = materialize(cfg, w, train_ids, heldout_identities, rng);
  return {std::move(train), std::move(heldout)};
}

}  // namespace svdkd
