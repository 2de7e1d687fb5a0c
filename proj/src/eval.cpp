#include "svdkd/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <string>

#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

bool is_cloud(const std::string& tag) { return tag == "cloud" || tag == "synthetic"; }
bool is_edge(const std::string& tag) { return tag == "edge"; }

void check_sources(const EmbeddingSet& query_set, const EmbeddingSet& gallery_set, EvalMode mode) {
  const auto& q = query_set.source_tag();
  const auto& g = gallery_set.source_tag();
  bool ok = false;
  std::string expected;
  switch (mode) {
    case EvalMode::kC2C:
      ok = is_cloud(q) && is_cloud(g);
      expected = "query and gallery both cloud";
      break;
    case EvalMode::kE2E:
      ok = is_edge(q) && is_edge(g);
      expected = "query and gallery both edge";
      break;
    case EvalMode::kE2C:
      ok = is_edge(q) && is_cloud(g);
      expected = "edge query and cloud gallery";
      break;
  }
  if (!ok) {
    throw ArgumentError(std::string(to_string(mode)) + " contract requires " + expected +
                        " (got query source '" + q + "', gallery source '" + g + "')");
  }
}

}  // namespace

EvalTask EvalTask::parse(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw ArgumentError("task must look like query:gallery, e.g. sketch:rgb");
  }
  EvalTask task;
  try {
    task.query = parse_modality(text.substr(0, colon));
    task.gallery = parse_modality(text.substr(colon + 1));
  } catch (const FormatError& e) {
    throw ArgumentError(e.what());
  }
  if (task.query == task.gallery) throw ArgumentError("task query and gallery modality must differ");
  return task;
}

std::string EvalTask::name() const {
  return std::string(to_string(query)) + ":" + std::string(to_string(gallery));
}

std::vector<EvalTask> default_eval_tasks() {
  return {{Modality::kSketch, Modality::kRgb},
          {Modality::kIr, Modality::kRgb},
          {Modality::kText, Modality::kRgb}};
}

EvalMode parse_eval_mode(std::string_view text) {
  if (text == "c2c") return EvalMode::kC2C;
  if (text == "e2e") return EvalMode::kE2E;
  if (text == "e2c") return EvalMode::kE2C;
  throw ArgumentError("mode must be one of c2c, e2e, e2c");
}

std::string_view to_string(EvalMode mode) {
  switch (mode) {
    case EvalMode::kC2C: return "c2c";
    case EvalMode::kE2E: return "e2e";
    case EvalMode::kE2C: return "e2c";
  }
  return "?";
}

GalleryView::GalleryView(const Matrix& features, std::vector<std::int64_t> identity_ids,
                         std::vector<std::int64_t> sample_ids)
    : normalized_(features),
      identity_ids_(std::move(identity_ids)),
      sample_ids_(std::move(sample_ids)) {
  if (static_cast<std::size_t>(features.rows()) != identity_ids_.size() ||
      identity_ids_.size() != sample_ids_.size()) {
    throw ArgumentError("GalleryView: features, identity ids and sample ids disagree in length");
  }
  for (Eigen::Index i = 0; i < normalized_.rows(); ++i) {
    const double norm = normalized_.row(i).norm();
    if (norm > 0.0) normalized_.row(i) /= norm;
  }
}

namespace {

GalleryView view_of(const EmbeddingSet& set, Modality modality) {
  const auto rows = set.rows_with_modality(modality);
  Matrix feats(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(set.dim()));
  std::vector<std::int64_t> ids;
  std::vector<std::int64_t> sids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    feats.row(static_cast<Eigen::Index>(i)) = set.features().row(static_cast<Eigen::Index>(rows[i]));
    ids.push_back(set.meta()[rows[i]].identity_id);
    sids.push_back(set.meta()[rows[i]].sample_id);
  }
  return GalleryView(feats, std::move(ids), std::move(sids));
}

}  // namespace

GalleryView::GalleryView(const EmbeddingSet& set, Modality modality)
    : GalleryView(view_of(set, modality)) {}

bool GalleryView::contains_identity(std::int64_t id) const {
  return std::find(identity_ids_.begin(), identity_ids_.end(), id) != identity_ids_.end();
}

QueryResult evaluate_query(const Eigen::Ref<const Eigen::RowVectorXd>& query,
                           std::int64_t query_id, const GalleryView& gallery) {
  if (query.size() != gallery.normalized().cols()) {
    throw ArgumentError("evaluate_query: query dimension does not match the gallery");
  }
  if (!gallery.contains_identity(query_id)) {
    throw ArgumentError("evaluate_query: gallery has no true match for identity " +
                        std::to_string(query_id));
  }
  const double qn = query.norm();
  const Eigen::RowVectorXd q_hat = qn > 0.0 ? Eigen::RowVectorXd(query / qn) : Eigen::RowVectorXd(query);
  const Vector sims = gallery.normalized() * q_hat.transpose();

  std::vector<std::size_t> order(gallery.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& sids = gallery.sample_ids();
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ia = static_cast<Eigen::Index>(a);
    const auto ib = static_cast<Eigen::Index>(b);
    if (sims[ia] != sims[ib]) return sims[ia] > sims[ib];
    return sids[a] < sids[b];
  });

  QueryResult out;
  std::size_t hits = 0;
  std::size_t last_hit = 0;
  double precision_sum = 0.0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    if (gallery.identity_ids()[order[pos]] != query_id) continue;
    ++hits;
    const std::size_t rank = pos + 1;
    if (hits == 1) out.first_match_rank = rank;
    last_hit = rank;
    precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  out.average_precision = precision_sum / static_cast<double>(hits);
  out.inverse_negative_penalty = static_cast<double>(hits) / static_cast<double>(last_hit);
  return out;
}

RankingMetrics evaluate_features(const EmbeddingSet& query_set, const EmbeddingSet& gallery_set,
                                 const EvalTask& task) {
  if (task.query == task.gallery) throw ArgumentError("task query and gallery modality must differ");
  if (query_set.dim() != gallery_set.dim()) {
    throw ArgumentError("query and gallery feature dimensions differ");
  }
  const GalleryView gallery(gallery_set, task.gallery);
  RankingMetrics out;
  std::size_t top1 = 0;
  std::size_t top5 = 0;
  std::size_t top10 = 0;
  double ap_sum = 0.0;
  double inp_sum = 0.0;
  for (std::size_t row : query_set.rows_with_modality(task.query)) {
    const std::int64_t id = query_set.meta()[row].identity_id;
    if (!gallery.contains_identity(id)) continue;
    const QueryResult r =
        evaluate_query(query_set.features().row(static_cast<Eigen::Index>(row)), id, gallery);
    ++out.n_queries;
    top1 += r.first_match_rank <= 1 ? 1 : 0;
    top5 += r.first_match_rank <= 5 ? 1 : 0;
    top10 += r.first_match_rank <= 10 ? 1 : 0;
    ap_sum += r.average_precision;
    inp_sum += r.inverse_negative_penalty;
  }
  if (out.n_queries == 0) {
    throw EvalError("no eligible " + task.name() + " queries: no " +
                    std::string(to_string(task.query)) + " row has a match in the " +
                    std::string(to_string(task.gallery)) + " gallery");
  }
  const double n = static_cast<double>(out.n_queries);
  out.rank1 = static_cast<double>(top1) / n;
  out.rank5 = static_cast<double>(top5) / n;
  out.rank10 = static_cast<double>(top10) / n;
  out.map = ap_sum / n;
  out.minp = inp_sum / n;
  return out;
}

RankingMetrics evaluate_retrieval(const EmbeddingSet& query_set, const EmbeddingSet& gallery_set,
                                  const EvalTask& task, EvalMode mode) {
  check_sources(query_set, gallery_set, mode);
  return evaluate_features(query_set, gallery_set, task);
}

void write_metrics_csv(std::span<const MetricsRow> rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "task,mode,rank1,rank5,rank10,map,minp,n_queries\n";
  char buf[256];
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%zu\n",
                  row.task.name().c_str(), std::string(to_string(row.mode)).c_str(), m.rank1,
                  m.rank5, m.rank10, m.map, m.minp, m.n_queries);
    out << buf;
  }
  if (!out) throw IoError("write to " + path.string() + " failed");
}

}  // namespace svdkd
