#include "svdkd/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "svdkd/checkpoint.hpp"
#include "svdkd/config.hpp"
#include "svdkd/diagnostics.hpp"
#include "svdkd/errors.hpp"
#include "svdkd/io.hpp"
#include "svdkd/spectral.hpp"
#include "svdkd/synth.hpp"
#include "svdkd/train.hpp"

namespace svdkd {
namespace {

namespace fs = std::filesystem;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

CliConfig config_or_defaults(const std::string& path) {
  return path.empty() ? CliConfig{} : load_config(path);
}

EmbeddingSet load_set(const fs::path& path) { return load_embedding_set(path, format_for_path(path)); }

void save_set(const EmbeddingSet& set, const fs::path& path) {
  save_embedding_set(set, path, format_for_path(path));
}

struct GenArgs {
  std::string config, out, heldout_out;
};

void run_gen(const GenArgs& a, std::ostream& out) {
  const CliConfig cfg = config_or_defaults(a.config);
  if (!a.heldout_out.empty() && cfg.heldout_identities == 0) {
    throw ArgumentError("gen: --heldout-out needs synth.heldout_identities > 0 in the config");
  }
  if (cfg.heldout_identities > 0) {
    if (a.heldout_out.empty()) {
      throw ArgumentError("gen: synth.heldout_identities is set, pass --heldout-out");
    }
    const SynthSplit split = generate_split(cfg.synth, cfg.heldout_identities);
    save_set(split.train, a.out);
    save_set(split.heldout, a.heldout_out);
    out << "wrote " << split.train.size() << " rows to " << a.out << " and "
        << split.heldout.size() << " rows to " << a.heldout_out << "\n";
    return;
  }
  const EmbeddingSet set = generate_dataset(cfg.synth);
  save_set(set, a.out);
  out << "wrote " << set.size() << " rows to " << a.out << "\n";
}

struct AnalyzeArgs {
  std::string in, out, importance_out, modality;
  bool center = false;
};

fs::path importance_path(const AnalyzeArgs& a) {
  if (!a.importance_out.empty()) return a.importance_out;
  fs::path p(a.out);
  return p.parent_path() / (p.stem().string() + "_importance.csv");
}

void run_analyze(const AnalyzeArgs& a, std::ostream& out) {
  const EmbeddingSet set = load_set(a.in);
  Matrix features = set.features();
  if (!a.modality.empty()) {
    const auto rows = set.rows_with_modality(parse_modality(a.modality));
    if (rows.empty()) throw DataError("analyze: no rows with modality " + a.modality);
    Matrix subset(static_cast<Eigen::Index>(rows.size()), features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      subset.row(static_cast<Eigen::Index>(i)) = features.row(static_cast<Eigen::Index>(rows[i]));
    }
    features = std::move(subset);
  }
  if (a.center) features = center_columns(features);

  const SvdFactors svd = thin_svd(features);
  const SpectrumReport report = spectrum_report(svd);

  auto spectrum = open_out(a.out);
  spectrum << "component_index,sigma,weight,cumulative\n";
  for (Eigen::Index k = 0; k < report.weights.size(); ++k) {
    spectrum << (k + 1) << ',' << num(svd.singular_values(k)) << ',' << num(report.weights(k))
             << ',' << num(report.cumulative(k)) << '\n';
  }
  const fs::path imp_path = importance_path(a);
  auto importance = open_out(imp_path);
  importance << "dim_index,importance\n";
  for (Eigen::Index i = 0; i < report.importance.size(); ++i) {
    importance << i << ',' << num(report.importance(i)) << '\n';
  }
  out << "rows " << features.rows() << ", dim " << features.cols() << ", effective_rank_90 "
      << report.effective_rank_90 << ", effective_rank_99 " << report.effective_rank_99 << "\n";
  out << "wrote " << a.out << " and " << imp_path.string() << "\n";
}

struct DistillArgs {
  std::string teacher, config, out, log, heldout, metrics_out;
};

void run_distill(const DistillArgs& a, std::ostream& out) {
  const CliConfig cfg = config_or_defaults(a.config);
  if (!a.metrics_out.empty() && a.heldout.empty()) {
    throw ArgumentError("distill: --metrics-out needs --heldout");
  }
  const EmbeddingSet teacher = load_set(a.teacher);
  std::optional<EmbeddingSet> heldout;
  if (!a.heldout.empty()) heldout = load_set(a.heldout);

  const TrainResult result = train_distill(teacher, cfg.train, heldout ? &*heldout : nullptr);
  save_student(result.model, a.out, to_json(cfg.train));
  if (!a.log.empty()) write_training_log_csv(result.log, a.log);
  if (!a.metrics_out.empty()) write_epoch_metrics_csv(result.log, a.metrics_out);

  out << "steps " << result.log.steps.size() << ", step-0 gradient check error "
      << num(result.log.gradient_check_error) << "\n";
  if (!result.log.steps.empty()) {
    const StepRecord& last = result.log.steps.back();
    out << "final total " << num(last.total) << ", shared " << num(last.shared) << "\n";
  }
  if (!result.log.epochs.empty()) {
    out << "final held-out E2E mean mAP " << num(result.log.epochs.back().mean_map) << "\n";
  }
}

struct EvalArgs {
  std::string query, gallery, mode, out, config;
  std::vector<std::string> tasks;
};

void run_eval(const EvalArgs& a, std::ostream& out) {
  const CliConfig cfg = config_or_defaults(a.config);
  std::vector<EvalTask> tasks = cfg.eval_tasks;
  if (!a.tasks.empty()) {
    tasks.clear();
    for (const auto& t : a.tasks) tasks.push_back(EvalTask::parse(t));
  }
  const EvalMode mode = a.mode.empty() ? cfg.eval_mode : parse_eval_mode(a.mode);
  const EmbeddingSet query = load_set(a.query);
  const EmbeddingSet gallery = load_set(a.gallery);

  std::vector<MetricsRow> rows;
  for (const auto& task : tasks) {
    rows.push_back({task, mode, evaluate_retrieval(query, gallery, task, mode)});
    const auto& m = rows.back().metrics;
    out << task.name() << " " << to_string(mode) << ": rank1 " << m.rank1 << ", mAP " << m.map
        << ", mINP " << m.minp << " over " << m.n_queries << " queries\n";
  }
  write_metrics_csv(rows, a.out);
}

struct EmbedArgs {
  std::string student, in, out;
};

void run_embed(const EmbedArgs& a, std::ostream& out) {
  const LoadedStudent student = load_student(a.student);
  const EmbeddingSet set = load_set(a.in);
  const EmbeddingSet embedded = embed_with_student(student.model, set);
  save_set(embedded, a.out);
  out << "wrote " << embedded.size() << " edge rows to " << a.out << "\n";
}

struct BenchArgs {
  std::string student, out;
  std::vector<std::size_t> batches;
  std::size_t iters = 20;
};

void run_bench(const BenchArgs& a, std::ostream& out) {
  if (a.iters == 0) throw ArgumentError("bench: --iters must be positive");
  const LoadedStudent student = load_student(a.student);
  const StudentModel& model = student.model;
  std::vector<std::size_t> batches = a.batches;
  if (batches.empty()) batches = {1, 4, 16, 64};

  Rng rng(0);
  auto csv = open_out(a.out);
  csv << "batch_size,iters,latency_ms,throughput\n";
  for (std::size_t b : batches) {
    if (b == 0) throw ArgumentError("bench: batch sizes must be positive");
    Matrix inputs(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(model.shape.input_dim));
    for (Eigen::Index i = 0; i < inputs.size(); ++i) inputs.data()[i] = rng.normal();
    std::vector<Modality> mods(b);
    for (std::size_t i = 0; i < b; ++i) mods[i] = kAllModalities[i % kModalityCount];

    volatile double sink = forward(model, inputs, mods).sum();
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t it = 0; it < a.iters; ++it) sink = sink + forward(model, inputs, mods)(0, 0);
    const auto stop = std::chrono::steady_clock::now();
    (void)sink;

    const double total_ms = std::chrono::duration<double, std::milli>(stop - start).count();
    const double latency = total_ms / static_cast<double>(a.iters);
    const double throughput = latency > 0.0 ? static_cast<double>(b) * 1000.0 / latency : 0.0;
    csv << b << ',' << a.iters << ',' << num(latency) << ',' << num(throughput) << '\n';
    out << "batch " << b << ": " << latency << " ms, " << throughput << " samples/s\n";
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"svdkd: SVD-guided distillation of cross-modal ReID embeddings", "svdkd"};
  app.require_subcommand(1);
  app.footer("Exit codes: 0 success, 1 a library contract failed, 2 usage error.");

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic teacher EmbeddingSet");
  gen_cmd->add_option("--config", gen.config, "JSON config; the synth section is used (see config-schema)")
      ->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output set (.emb1, or .csv for CSV)")->required();
  gen_cmd->add_option("--heldout-out", gen.heldout_out,
                      "Output for the last synth.heldout_identities identities, renumbered from 0");

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "Singular spectrum of a feature set (the paper's low-rank teacher analysis)");
  analyze_cmd->add_option("--in", analyze.in, "Input set (.emb1 or .csv)")->required();
  analyze_cmd->add_option("--out", analyze.out,
                          "Spectrum CSV component_index,sigma,weight,cumulative; weight is "
                          "sigma_k^2 / sum sigma^2 as in the paper")
      ->required();
  analyze_cmd->add_option("--importance-out", analyze.importance_out,
                          "Importance CSV dim_index,importance, importance_i = sum_k |v_ik| w_k "
                          "(default <out>_importance.csv)");
  analyze_cmd->add_option("--modality", analyze.modality,
                          "Analyze only rows of rgb|ir|sketch|text (default: all modalities "
                          "pooled; the paper does not say)");
  analyze_cmd->add_flag("--center", analyze.center,
                        "Subtract column means first (default off: the paper decomposes F as is)");

  DistillArgs distill;
  auto* distill_cmd = app.add_subcommand(
      "distill", "Train a student against a teacher set with task, cosine, PCM and FR losses");
  distill_cmd->add_option("--teacher", distill.teacher, "Teacher set carrying raw inputs")
      ->required();
  distill_cmd->add_option("--config", distill.config,
                          "JSON config; train section (loss weights default to the paper's "
                          "0.01/0.29/0.35/0.35, k = 50, cosine lr schedule)")
      ->check(CLI::ExistingFile);
  distill_cmd->add_option("--out", distill.out, "Student checkpoint (STU1)")->required();
  distill_cmd->add_option("--log", distill.log,
                          "Per-step CSV step,lr,task,cosine,pcm,fr,total,shared; shared = task + "
                          "cosine as in the paper's convergence plots");
  distill_cmd->add_option("--heldout", distill.heldout,
                          "Held-out set evaluated E2E after every epoch");
  distill_cmd->add_option("--metrics-out", distill.metrics_out,
                          "Per-epoch CSV epoch,task,rank1,rank5,rank10,map,minp,n_queries");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand(
      "eval", "Rank-k, mAP and mINP for cross-modal retrieval (the paper's C2C/E2E/E2C protocol)");
  eval_cmd->add_option("--query", eval.query, "Query set")->required();
  eval_cmd->add_option("--gallery", eval.gallery, "Gallery set")->required();
  eval_cmd->add_option("--task", eval.tasks,
                       "query:gallery modality pair, repeatable (default sketch:rgb, ir:rgb, "
                       "text:rgb, the paper's quadruple-modality tasks)");
  eval_cmd->add_option("--mode", eval.mode,
                       "c2c | e2e | e2c; sets must be tagged cloud/edge accordingly (default e2c, "
                       "edge query against cloud gallery as in the paper)");
  eval_cmd->add_option("--config", eval.config, "JSON config; eval section supplies defaults")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--out", eval.out, "CSV task,mode,rank1,rank5,rank10,map,minp,n_queries")
      ->required();

  EmbedArgs embed;
  auto* embed_cmd = app.add_subcommand("embed", "Run a student over a set's raw inputs");
  embed_cmd->add_option("--student", embed.student, "Student checkpoint (STU1)")->required();
  embed_cmd->add_option("--in", embed.in, "Set carrying raw inputs")->required();
  embed_cmd->add_option("--out", embed.out, "Output set tagged edge")->required();

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand(
      "bench", "Student forward latency and throughput per batch size (edge deployment analog)");
  bench_cmd->add_option("--student", bench.student, "Student checkpoint (STU1)")->required();
  bench_cmd->add_option("--batch", bench.batches, "Batch size, repeatable (default 1 4 16 64)");
  bench_cmd->add_option("--iters", bench.iters, "Timed forward passes per batch size");
  bench_cmd->add_option("--out", bench.out, "CSV batch_size,iters,latency_ms,throughput")
      ->required();

  auto* schema_cmd = app.add_subcommand("config-schema", "Print the config schema and defaults");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  auto previous = set_warning_handler([&err](std::string_view msg) { err << "warning: " << msg << "\n"; });
  int status = 0;
  try {
    if (gen_cmd->parsed()) run_gen(gen, out);
    else if (analyze_cmd->parsed()) run_analyze(analyze, out);
    else if (distill_cmd->parsed()) run_distill(distill, out);
    else if (eval_cmd->parsed()) run_eval(eval, out);
    else if (embed_cmd->parsed()) run_embed(embed, out);
    else if (bench_cmd->parsed()) run_bench(bench, out);
    else if (schema_cmd->parsed()) out << config_schema_text();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    status = 1;
  }
  set_warning_handler(std::move(previous));
  return status;
}

}  // namespace svdkd
