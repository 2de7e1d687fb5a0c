#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "../support/eval_oracle.hpp"
#include "../support/temp_dir.hpp"
#include "svdkd/errors.hpp"
#include "svdkd/eval.hpp"

using namespace svdkd;

namespace {

// Gallery of unit vectors at angles chosen so the ranking is known.
GalleryView ranked_gallery(const std::vector<std::int64_t>& ids) {
  const auto n = static_cast<Eigen::Index>(ids.size());
  Matrix g(n, 2);
  std::vector<std::int64_t> samples;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double angle = 0.1 * static_cast<double>(i);
    g(i, 0) = std::cos(angle);
    g(i, 1) = std::sin(angle);
    samples.push_back(i);
  }
  return GalleryView(g, ids, samples);
}

const Eigen::RowVector2d kQuery(1.0, 0.0);

}  // namespace

TEST_CASE("hand-enumerated rankings") {
  SUBCASE("positives at ranks 1 and 3 of 5") {
    const QueryResult r = evaluate_query(kQuery, 7, ranked_gallery({7, 1, 7, 2, 3}));
    CHECK(r.average_precision == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
    CHECK(r.inverse_negative_penalty == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    CHECK(r.first_match_rank == 1);
  }
  SUBCASE("all positives") {
    const QueryResult r = evaluate_query(kQuery, 1, ranked_gallery({1, 1, 1}));
    CHECK(r.average_precision == 1.0);
    CHECK(r.inverse_negative_penalty == 1.0);
  }
  SUBCASE("single positive ranked last of ten") {
    const QueryResult r = evaluate_query(kQuery, 5, ranked_gallery({0, 1, 2, 3, 4, 6, 7, 8, 9, 5}));
    CHECK(r.average_precision == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(r.inverse_negative_penalty == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(r.first_match_rank == 10);
  }
  SUBCASE("no positive") {
    CHECK_THROWS_AS(evaluate_query(kQuery, 4, ranked_gallery({0, 1})), ArgumentError);
  }
  SUBCASE("ties go to the lower sample id") {
    Matrix g(2, 2);
    g << 1, 0, 1, 0;
    const QueryResult r = evaluate_query(kQuery, 3, GalleryView(g, {0, 3}, {9, 4}));
    CHECK(r.first_match_rank == 1);
    const QueryResult r2 = evaluate_query(kQuery, 3, GalleryView(g, {0, 3}, {4, 9}));
    CHECK(r2.first_match_rank == 2);
  }
}

TEST_CASE("metrics equal the brute-force oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = oracle::random_retrieval_instance(rng, 10, 30, 5, 6);
    const EvalTask task{Modality::kSketch, Modality::kRgb};
    const RankingMetrics got = evaluate_retrieval(inst.query, inst.gallery, task, EvalMode::kE2C);
    const RankingMetrics want = oracle::brute_force_metrics(inst.query, inst.gallery, task);
    CHECK(got.n_queries == want.n_queries);
    CHECK(std::abs(got.rank1 - want.rank1) <= 1e-12);
    CHECK(std::abs(got.rank5 - want.rank5) <= 1e-12);
    CHECK(std::abs(got.rank10 - want.rank10) <= 1e-12);
    CHECK(std::abs(got.map - want.map) <= 1e-12);
    CHECK(std::abs(got.minp - want.minp) <= 1e-12);
    CHECK(got.rank1 <= got.rank5);
    CHECK(got.rank5 <= got.rank10);
  }
}

TEST_CASE("self retrieval is perfect") {
  Rng rng(5);
  const Matrix f = oracle::random_matrix(rng, 6, 4);
  std::vector<SampleMeta> qm, gm;
  for (int i = 0; i < 6; ++i) {
    qm.push_back({i, Modality::kIr, i});
    gm.push_back({i, Modality::kRgb, 100 + i});
  }
  const EmbeddingSet q(f, qm, std::nullopt, "edge");
  const EmbeddingSet g(f, gm, std::nullopt, "edge");
  const RankingMetrics m = evaluate_retrieval(q, g, {Modality::kIr, Modality::kRgb}, EvalMode::kE2E);
  CHECK(m.rank1 == 1.0);
  CHECK(m.map == 1.0);
  CHECK(m.minp == 1.0);
  CHECK(m.n_queries == 6);
}

TEST_CASE("invariances") {
  Rng rng(7);
  const auto inst = oracle::random_retrieval_instance(rng, 10, 30, 5, 6);
  const EvalTask task{Modality::kSketch, Modality::kRgb};
  const RankingMetrics base = evaluate_features(inst.query, inst.gallery, task);

  SUBCASE("gallery permutation") {
    std::vector<std::size_t> order(inst.gallery.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    Matrix f(inst.gallery.features().rows(), inst.gallery.features().cols());
    std::vector<SampleMeta> meta;
    for (std::size_t i = 0; i < order.size(); ++i) {
      f.row(static_cast<Eigen::Index>(i)) = inst.gallery.features().row(static_cast<Eigen::Index>(order[i]));
      meta.push_back(inst.gallery.meta()[order[i]]);
    }
    const EmbeddingSet shuffled(f, meta, std::nullopt, inst.gallery.source_tag());
    const RankingMetrics m = evaluate_features(inst.query, shuffled, task);
    CHECK(m.map == base.map);
    CHECK(m.minp == base.minp);
    CHECK(m.rank1 == base.rank1);
  }
  SUBCASE("query rescaling") {
    const EmbeddingSet scaled = inst.query.with_features(3.5 * inst.query.features(), "edge");
    const RankingMetrics m = evaluate_features(scaled, inst.gallery, task);
    CHECK(std::abs(m.map - base.map) < 1e-12);
    CHECK(std::abs(m.minp - base.minp) < 1e-12);
  }
}

TEST_CASE("mode contracts") {
  Rng rng(9);
  const auto inst = oracle::random_retrieval_instance(rng, 10, 30, 5, 6);
  const EvalTask task{Modality::kSketch, Modality::kRgb};
  const EmbeddingSet cloud_query = inst.query.with_features(inst.query.features(), "cloud");
  CHECK_THROWS_AS(evaluate_retrieval(cloud_query, inst.gallery, task, EvalMode::kE2C), ArgumentError);
  CHECK_THROWS_AS(evaluate_retrieval(inst.query, inst.gallery, task, EvalMode::kE2E), ArgumentError);
  CHECK_NOTHROW(evaluate_retrieval(cloud_query, inst.gallery, task, EvalMode::kC2C));
  const EmbeddingSet edge_gallery = inst.gallery.with_features(inst.gallery.features(), "edge");
  CHECK_NOTHROW(evaluate_retrieval(inst.query, edge_gallery, task, EvalMode::kE2E));

  SUBCASE("no eligible queries") {
    CHECK_THROWS_AS(evaluate_retrieval(inst.query, inst.gallery, {Modality::kText, Modality::kRgb},
                                       EvalMode::kE2C),
                    EvalError);
  }
}

TEST_CASE("task and mode parsing") {
  CHECK(EvalTask::parse("sketch:rgb") == EvalTask{Modality::kSketch, Modality::kRgb});
  CHECK(EvalTask::parse("ir:rgb").name() == "ir:rgb");
  CHECK_THROWS_AS(EvalTask::parse("rgb:rgb"), ArgumentError);
  CHECK_THROWS_AS(EvalTask::parse("rgb"), ArgumentError);
  CHECK_THROWS_AS(EvalTask::parse("rgb:depth"), ArgumentError);
  CHECK(parse_eval_mode("e2c") == EvalMode::kE2C);
  CHECK(to_string(EvalMode::kC2C) == "c2c");
  CHECK_THROWS_AS(parse_eval_mode("E2X"), ArgumentError);
  CHECK(default_eval_tasks().size() == 3);
}

TEST_CASE("metrics csv") {
  test_support::TempDir dir;
  std::vector<MetricsRow> rows = {{{Modality::kSketch, Modality::kRgb}, EvalMode::kE2C, {0.5, 0.75, 1.0, 0.6, 0.4, 4}}};
  write_metrics_csv(rows, dir.path() / "m.csv");
  std::ifstream in(dir.path() / "m.csv");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  CHECK(header == "task,mode,rank1,rank5,rank10,map,minp,n_queries");
  CHECK(line.rfind("sketch:rgb,e2c,0.5,0.75,1,", 0) == 0);
}
