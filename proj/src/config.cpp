#include "svdkd/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "svdkd/errors.hpp"

namespace svdkd {
namespace {

using nlohmann::json;

// Reads fields out of one JSON object and rejects any key it was not asked
// about.
class Fields {
 public:
  Fields(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ArgumentError("config: '" + where_ + "' must be a JSON object");
  }

  void size(const char* key, std::size_t& target) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      target = v->get<std::size_t>();
    }
  }
  void u64(const char* key, std::uint64_t& target) {
    if (const json* v = take(key)) {
      if (!v->is_number_unsigned()) fail(key, "a non-negative integer");
      target = v->get<std::uint64_t>();
    }
  }
  void real(const char* key, double& target) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "a number");
      target = v->get<double>();
    }
  }
  void boolean(const char* key, bool& target) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(key, "true or false");
      target = v->get<bool>();
    }
  }
  void tasks(const char* key, std::vector<EvalTask>& target) {
    if (const json* v = take(key)) {
      if (!v->is_array()) fail(key, "an array of \"query:gallery\" strings");
      target.clear();
      for (const auto& item : *v) {
        if (!item.is_string()) fail(key, "an array of \"query:gallery\" strings");
        target.push_back(EvalTask::parse(item.get<std::string>()));
      }
    }
  }
  void mode(const char* key, EvalMode& target) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "one of c2c, e2e, e2c");
      target = parse_eval_mode(v->get<std::string>());
    }
  }
  const json* object(const char* key) { return take(key); }

  void finish() const {
    for (const auto& [key, value] : obj_.items()) {
      if (!seen_.contains(key)) {
        throw ArgumentError("config: unknown key '" + key + "' in '" + where_ + "'");
      }
    }
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }
  [[noreturn]] void fail(const char* key, const char* expected) const {
    throw ArgumentError("config: '" + where_ + "." + key + "' must be " + expected);
  }

  const json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

void parse_synth(const json& obj, CliConfig& cfg) {
  Fields f(obj, "synth");
  auto& s = cfg.synth;
  f.size("n_identities", s.n_identities);
  f.size("samples_per_modality", s.samples_per_modality);
  f.size("d", s.d);
  f.size("d_in", s.d_in);
  f.size("latent_rank", s.latent_rank);
  f.real("spectrum_decay", s.spectrum_decay);
  f.real("modality_gap", s.modality_gap);
  f.real("noise_sigma", s.noise_sigma);
  f.real("input_noise_sigma", s.input_noise_sigma);
  f.real("basis_mixing", s.basis_mixing);
  f.u64("seed", s.seed);
  f.size("heldout_identities", cfg.heldout_identities);
  f.finish();
  s.validate();
}

void parse_train(const json& obj, TrainConfig& t) {
  Fields f(obj, "train");
  f.size("epochs", t.epochs);
  f.size("steps_per_epoch", t.steps_per_epoch);
  f.size("batch_identities", t.batch_identities);
  f.size("batch_per_identity", t.batch_per_identity);
  if (const json* w = f.object("weights")) {
    Fields wf(*w, "train.weights");
    wf.real("task", t.weights.task);
    wf.real("cosine", t.weights.cosine);
    wf.real("pcm", t.weights.pcm);
    wf.real("fr", t.weights.fr);
    wf.finish();
  }
  f.real("margin", t.task.margin);
  f.real("tau", t.task.tau);
  f.real("epsilon", t.task.epsilon);
  f.size("pcm_k", t.pcm_k);
  f.real("lr_initial", t.lr_initial);
  f.real("lr_min", t.lr_min);
  if (const json* a = f.object("adamw")) {
    Fields af(*a, "train.adamw");
    af.real("beta1", t.adamw.beta1);
    af.real("beta2", t.adamw.beta2);
    af.real("epsilon", t.adamw.epsilon);
    af.real("weight_decay", t.adamw.weight_decay);
    af.finish();
  }
  if (const json* l = f.object("lora")) {
    Fields lf(*l, "train.lora");
    lf.boolean("enabled", t.lora.enabled);
    lf.size("rank", t.lora.rank);
    lf.size("stride", t.lora.stride);
    lf.size("dense_tail", t.lora.dense_tail);
    lf.finish();
  }
  f.size("hidden_dim", t.hidden_dim);
  f.size("depth", t.depth);
  f.u64("seed", t.seed);
  f.boolean("gradient_check", t.gradient_check);
  f.tasks("eval_tasks", t.eval_tasks);
  f.finish();
  t.validate();
}

}  // namespace

CliConfig parse_config(const json& doc) {
  CliConfig cfg;
  Fields root(doc, "<root>");
  if (const json* s = root.object("synth")) parse_synth(*s, cfg);
  if (const json* t = root.object("train")) parse_train(*t, cfg.train);
  if (const json* e = root.object("eval")) {
    Fields ef(*e, "eval");
    ef.tasks("tasks", cfg.eval_tasks);
    ef.mode("mode", cfg.eval_mode);
    ef.finish();
  }
  root.finish();
  cfg.synth.validate();
  cfg.train.validate();
  return cfg;
}

CliConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ArgumentError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

json to_json(const SynthConfig& s) {
  return {{"n_identities", s.n_identities},
          {"samples_per_modality", s.samples_per_modality},
          {"d", s.d},
          {"d_in", s.d_in},
          {"latent_rank", s.latent_rank},
          {"spectrum_decay", s.spectrum_decay},
          {"modality_gap", s.modality_gap},
          {"noise_sigma", s.noise_sigma},
          {"input_noise_sigma", s.input_noise_sigma},
          {"basis_mixing", s.basis_mixing},
          {"seed", s.seed}};
}

json to_json(const TrainConfig& t) {
  json tasks = json::array();
  for (const auto& task : t.eval_tasks) tasks.push_back(task.name());
  return {{"epochs", t.epochs},
          {"steps_per_epoch", t.steps_per_epoch},
          {"batch_identities", t.batch_identities},
          {"batch_per_identity", t.batch_per_identity},
          {"weights",
           {{"task", t.weights.task}, {"cosine", t.weights.cosine}, {"pcm", t.weights.pcm},
            {"fr", t.weights.fr}}},
          {"margin", t.task.margin},
          {"tau", t.task.tau},
          {"epsilon", t.task.epsilon},
          {"pcm_k", t.pcm_k},
          {"lr_initial", t.lr_initial},
          {"lr_min", t.lr_min},
          {"adamw",
           {{"beta1", t.adamw.beta1}, {"beta2", t.adamw.beta2}, {"epsilon", t.adamw.epsilon},
            {"weight_decay", t.adamw.weight_decay}}},
          {"lora",
           {{"enabled", t.lora.enabled}, {"rank", t.lora.rank}, {"stride", t.lora.stride},
            {"dense_tail", t.lora.dense_tail}}},
          {"hidden_dim", t.hidden_dim},
          {"depth", t.depth},
          {"seed", t.seed},
          {"gradient_check", t.gradient_check},
          {"eval_tasks", tasks}};
}

std::string config_schema_text() {
  return R"(Config file schema (JSON; every key optional, unknown keys rejected)

synth:
  n_identities          256     identities generated
  samples_per_modality  2       rows per (identity, modality)
  d                     256     teacher feature dimension
  d_in                  64      raw student input dimension
  latent_rank           256     latent dimension, <= d
  spectrum_decay        1.2     gamma in sigma_k ~ k^-gamma (long-tailed spectrum)
  modality_gap          0.2     modality offset norm relative to a prototype
  noise_sigma           0.1     latent noise on teacher rows
  input_noise_sigma     0.1     noise on raw inputs
  basis_mixing          0.05    0 = coordinate-aligned basis, larger = denser rotation
  seed                  0
  heldout_identities    0       identities written to --heldout-out by `gen`

train:
  epochs                20      paper: 60
  steps_per_epoch       0       0 = rows / (P*K)
  batch_identities      4       P; paper: 16 identities x 8 = batch 128
  batch_per_identity    8       K; paper: eight samples per identity
  weights.task          0.01    paper: lambda_task = 0.01
  weights.cosine        0.29    paper: 0.29 (config e); 0.99 for cosine-only (config b)
  weights.pcm           0.35    paper: 0.35 (config e)
  weights.fr            0.35    paper: 0.35 (config e); weights must sum to 1
  margin                0.3     triplet margin
  tau                   0.02    SDM temperature
  epsilon               1e-8    SDM stabilizer
  pcm_k                 50      paper: k = 50 principal components
  lr_initial            1e-3    paper: 1e-5
  lr_min                1e-6    paper: 1e-6, cosine schedule
  adamw.beta1           0.9
  adamw.beta2           0.999
  adamw.epsilon         1e-8
  adamw.weight_decay    0.01
  lora.enabled          false
  lora.rank             16      paper: rank 16
  lora.stride           2       paper: alpha = 2 (every 2nd layer below the dense tail)
  lora.dense_tail       4       paper: adapters on the final four layers
  hidden_dim            128
  depth                 8
  seed                  0
  gradient_check        true    finite-difference guard on the first step
  eval_tasks            ["sketch:rgb", "ir:rgb", "text:rgb"]

eval:
  tasks                 ["sketch:rgb", "ir:rgb", "text:rgb"]
  mode                  "e2c"   c2c | e2e | e2c
)";
}

}  // namespace svdkd
