#include "reltask/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "reltask/kernel.hpp"
#include "reltask/model.hpp"
#include "reltask/task.hpp"
#include "reltask/train.hpp"

namespace reltask {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot read file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write file: " + path);
  out << content;
  if (!out) fail(ErrorKind::kIo, "short write: " + path);
}

std::string config_hash(const std::string& config_json) {
  json j;
  try {
    j = json::parse(config_json);
  } catch (const std::exception& e) {
    fail(ErrorKind::kValidation, std::string("config: parse error: ") + e.what());
  }
  const std::string canon = j.dump();  // object keys are sorted
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string now_utc() {
  const auto t = std::chrono::system_clock::to_time_t(
      std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- schema validation -------------------------------------------------------

struct Schema {
  // key -> nested schema, or nullptr for a leaf of any JSON type.
  std::map<std::string, const Schema*> keys;
};

void validate_against(const json& j, const Schema& schema,
                      const std::string& where) {
  if (!j.is_object())
    fail(ErrorKind::kValidation, "config: expected object at " + where);
  for (const auto& [key, value] : j.items()) {
    auto it = schema.keys.find(key);
    if (it == schema.keys.end())
      fail(ErrorKind::kValidation,
           "config: unknown key '" + where + key + "'");
    if (it->second != nullptr) validate_against(value, *it->second, where + key + ".");
  }
}

const Schema kTaskSchema{{
    {"builtin", nullptr},
    {"params", nullptr},
    {"json", nullptr},
    {"file", nullptr},
    {"with_cls", nullptr},
    {"sigma", nullptr},
    {"vocab_size", nullptr},
}};

const Schema kModelSchema{{
    {"d_emb", nullptr},   {"d_head", nullptr},   {"d_mlp", nullptr},
    {"heads", nullptr},   {"depth", nullptr},    {"beta", nullptr},
    {"gamma", nullptr},   {"activation", nullptr}, {"attn_identity", nullptr},
    {"value_identity", nullptr}, {"tie_embeddings", nullptr},
    {"use_mlp", nullptr}, {"output", nullptr},   {"block_style", nullptr},
    {"use_residual", nullptr}, {"use_layernorm", nullptr},
    {"init", nullptr},
}};

const Schema kMlpSchema{{
    {"width", nullptr},
    {"hidden_layers", nullptr},
    {"activation", nullptr},
}};

const Schema kTrainSchema{{
    {"optimizer", nullptr}, {"lr", nullptr},        {"adam_beta1", nullptr},
    {"adam_beta2", nullptr}, {"adam_eps", nullptr}, {"batch_size", nullptr},
    {"epochs", nullptr},    {"loss", nullptr},      {"freeze_positional", nullptr},
    {"divergence_threshold", nullptr},
}};

const Schema kKernelSchema{{
    {"type", nullptr},
    {"beta", nullptr},
    {"gamma", nullptr},
    {"b1", nullptr},
    {"b2", nullptr},
    {"mc", nullptr},
}};

const Schema kGenSchema{{
    {"seed", nullptr},
    {"out_dir", nullptr},
    {"task", &kTaskSchema},
    {"n", nullptr},
    {"alphabet_size", nullptr},
}};

const Schema kTrainCmdSchema{{
    {"seed", nullptr},        {"out_dir", nullptr},
    {"task", &kTaskSchema},   {"n", nullptr},
    {"alphabet_size", nullptr},
    {"arch", nullptr},        {"model", &kModelSchema},
    {"mlp", &kMlpSchema},     {"train", &kTrainSchema},
    {"val_size", nullptr},    {"test_size", nullptr},
    {"eval_alphabet", nullptr},
    {"resume", nullptr},      {"save_checkpoint", nullptr},
}};

const Schema kKernelCmdSchema{{
    {"seed", nullptr},      {"out_dir", nullptr},
    {"task", &kTaskSchema}, {"n", nullptr},
    {"alphabet_size", nullptr},
    {"kernel", &kKernelSchema},
    {"lambda", nullptr},
}};

const Schema kNMatrixCmdSchema{{
    {"seed", nullptr},
    {"out_dir", nullptr},
    {"task", &kTaskSchema},
    {"kernel", &kKernelSchema},
}};

const Schema kProbeCmdSchema{{
    {"seed", nullptr},        {"out_dir", nullptr},
    {"d_emb", nullptr},       {"heads", nullptr},
    {"d_head", nullptr},      {"gamma", nullptr},
    {"alphabet", nullptr},    {"vocab", nullptr},
    {"n_seeds", nullptr},     {"value_identity", nullptr},
    {"train_only_b", nullptr}, {"rate_scale", nullptr},
}};

const Schema kSweepVariantSchema{{
    {"name", nullptr},
    {"model", &kModelSchema},
}};

const Schema kSweepCmdSchema{{
    {"seed", nullptr},       {"out_dir", nullptr},
    {"task", &kTaskSchema},  {"variants", nullptr},
    {"n_grid", nullptr},     {"lr_grid", nullptr},
    {"seeds", nullptr},      {"train", &kTrainSchema},
    {"model", &kModelSchema},
    {"val_size", nullptr},   {"test_size", nullptr},
    {"eval_alphabet", nullptr},
    {"jobs", nullptr},
}};

const Schema kFiguresCmdSchema{{
    {"seed", nullptr},
    {"out_dir", nullptr},
    {"which", nullptr},
    {"jobs", nullptr},
}};

const Schema kSelftestSchema{{
    {"seed", nullptr},
    {"out_dir", nullptr},
}};

// --- config helpers -----------------------------------------------------------

std::uint64_t seed_of(const json& config) {
  if (config.contains("seed")) return config.at("seed").get<std::uint64_t>();
  if (const char* env = std::getenv("RELTASK_SEED"))
    return std::strtoull(env, nullptr, 10);
  return 0;
}

std::string out_dir_of(const json& config, const std::string& command) {
  if (config.contains("out_dir")) return config.at("out_dir").get<std::string>();
  return "out/" + command;
}

TemplateTask task_of(const json& config) {
  if (!config.contains("task"))
    fail(ErrorKind::kValidation, "config: missing 'task'");
  const json& t = config.at("task");
  TemplateTask task;
  if (t.contains("builtin")) {
    const std::string name = t.at("builtin");
    const auto kind = builtin_from_name(name);
    if (!kind) fail(ErrorKind::kValidation, "unknown builtin task: " + name);
    BuiltinParams params;
    if (t.contains("params")) {
      const json& p = t.at("params");
      params.k = p.value("k", params.k);
      params.r = p.value("r", params.r);
      params.n_wildcards = p.value("n_wildcards", params.n_wildcards);
      params.n_regular = p.value("n_regular", params.n_regular);
      params.seed = p.value("seed", params.seed);
      params.disjoint = p.value("disjoint", params.disjoint);
      params.vocab_size = p.value("vocab_size", params.vocab_size);
    }
    task = make_builtin(*kind, params);
  } else if (t.contains("json")) {
    task = task_from_json(t.at("json").dump());
  } else if (t.contains("file")) {
    task = task_from_json(read_text_file(t.at("file")));
  } else {
    fail(ErrorKind::kValidation, "config: task needs builtin|json|file");
  }
  if (t.contains("sigma")) task.sigma = t.at("sigma").get<double>();
  if (t.contains("vocab_size"))
    task.vocab_size =
        std::max(task.vocab_size, t.at("vocab_size").get<std::int32_t>());
  if (t.value("with_cls", false)) task = with_cls(task);
  return task;
}

Activation activation_of(const json& j, const Activation& fallback) {
  if (!j.is_object() && j.is_string()) {
    const std::string kind = j.get<std::string>();
    if (kind == "relu") return Activation::relu();
    if (kind == "tanh") return Activation::tanh();
    fail(ErrorKind::kValidation, "activation string must be relu|tanh");
  }
  if (j.is_object()) {
    const std::string kind = j.at("kind");
    if (kind == "relu") return Activation::relu();
    if (kind == "tanh") return Activation::tanh();
    if (kind == "cosine")
      return Activation::cosine(j.value("b1", 1.0), j.value("b2", 0.0));
    fail(ErrorKind::kValidation, "unknown activation kind: " + kind);
  }
  return fallback;
}

std::pair<ModelConfig, InitScheme> model_of(const json& config,
                                            const TemplateTask& task) {
  ModelConfig mc;
  mc.k = task.k;
  mc.m = task.vocab_size;
  InitScheme scheme = InitScheme::kStandard;
  if (config.contains("model")) {
    const json& m = config.at("model");
    mc.d_emb = m.value("d_emb", mc.d_emb);
    mc.d_head = m.value("d_head", mc.d_head);
    mc.d_mlp = m.value("d_mlp", mc.d_mlp);
    mc.heads = m.value("heads", mc.heads);
    mc.depth = m.value("depth", mc.depth);
    mc.beta = m.value("beta", mc.beta);
    mc.gamma = m.value("gamma", mc.gamma);
    if (m.contains("activation"))
      mc.act = activation_of(m.at("activation"), mc.act);
    mc.attn_identity = m.value("attn_identity", false);
    mc.value_identity = m.value("value_identity", false);
    mc.tie_embeddings = m.value("tie_embeddings", task.symbolic);
    mc.use_mlp = m.value("use_mlp", true);
    if (m.contains("output"))
      mc.output = m.at("output") == "vocab_logits" ? OutputKind::kVocabLogits
                                                   : OutputKind::kScalar;
    else
      mc.output = task.symbolic ? OutputKind::kVocabLogits : OutputKind::kScalar;
    if (m.contains("block_style"))
      mc.block_style = m.at("block_style") == "practical"
                           ? BlockStyle::kPractical
                           : BlockStyle::kTheory;
    mc.use_residual = m.value("use_residual", true);
    mc.use_layernorm = m.value("use_layernorm", true);
    if (m.contains("init"))
      scheme = m.at("init") == "mean_field_copy" ? InitScheme::kMeanFieldCopy
                                                 : InitScheme::kStandard;
  } else {
    mc.tie_embeddings = task.symbolic;
    mc.output = task.symbolic ? OutputKind::kVocabLogits : OutputKind::kScalar;
  }
  if (task.symbolic) mc.tie_embeddings = true;
  return {mc, scheme};
}

TrainConfig train_of(const json& config, const TemplateTask& task,
                     std::uint64_t seed) {
  TrainConfig tc;
  tc.loss = task.symbolic ? LossKind::kCrossEntropy : LossKind::kMse;
  tc.seed = seed;
  if (config.contains("train")) {
    const json& t = config.at("train");
    if (t.contains("optimizer"))
      tc.optimizer = t.at("optimizer") == "sgd" ? OptimizerKind::kSgd
                                                : OptimizerKind::kAdam;
    tc.lr = t.value("lr", tc.lr);
    tc.adam_beta1 = t.value("adam_beta1", tc.adam_beta1);
    tc.adam_beta2 = t.value("adam_beta2", tc.adam_beta2);
    tc.adam_eps = t.value("adam_eps", tc.adam_eps);
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.epochs = t.value("epochs", tc.epochs);
    if (t.contains("loss"))
      tc.loss = t.at("loss") == "cross_entropy" ? LossKind::kCrossEntropy
                                                : LossKind::kMse;
    tc.freeze_positional = t.value("freeze_positional", tc.freeze_positional);
    tc.divergence_threshold =
        t.value("divergence_threshold", tc.divergence_threshold);
  }
  return tc;
}

std::unique_ptr<Kernel> kernel_of(const json& config) {
  std::string type = "trans";
  double beta = 0.5, gamma = 0.5, b1 = 1.0, b2 = 0.3;
  std::size_t mc = 4096;
  if (config.contains("kernel")) {
    const json& k = config.at("kernel");
    type = k.value("type", type);
    beta = k.value("beta", beta);
    gamma = k.value("gamma", gamma);
    b1 = k.value("b1", b1);
    b2 = k.value("b2", b2);
    mc = k.value("mc", mc);
  }
  return make_kernel(type, beta, gamma, b1, b2, mc);
}

struct Manifest {
  std::string hash;
  std::uint64_t seed = 0;
  std::string started;
  std::vector<std::string> outputs;
};

void finish_manifest(Manifest& m, const std::string& out_dir) {
  json j;
  j["config_hash"] = m.hash;
  j["seed"] = m.seed;
  j["version"] = kVersion;
  j["started"] = m.started;
  j["finished"] = now_utc();
  j["outputs"] = m.outputs;
  write_text_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

void emit(Manifest& m, const std::string& out_dir, const std::string& name,
          const std::string& content) {
  write_text_file(out_dir + "/" + name, content);
  m.outputs.push_back(name);
}

json report_for(const Manifest& m, const std::string& out_dir) {
  json j;
  j["config_hash"] = m.hash;
  j["out_dir"] = out_dir;
  j["outputs"] = m.outputs;
  return j;
}

// --- commands ------------------------------------------------------------------

CommandResult cmd_gen(const json& config) {
  validate_against(config, kGenSchema, "");
  const std::uint64_t seed = seed_of(config);
  const std::string out_dir = out_dir_of(config, "gen");
  TemplateTask task = task_of(config);
  const std::size_t n = config.value("n", std::size_t{256});
  const std::size_t alpha = config.value("alphabet_size", n);
  const Token lo = task.first_free_token();
  task.vocab_size =
      std::max(task.vocab_size, lo + static_cast<Token>(alpha));

  Manifest m{config_hash(config.dump()), seed, now_utc(), {}};
  const Dataset ds =
      sample_dataset(task, n, {lo, lo + static_cast<Token>(alpha)}, seed);
  emit(m, out_dir, "task.json", task_to_json(task) + "\n");
  emit(m, out_dir, "dataset.csv", dataset_to_csv(ds, m.hash));
  finish_manifest(m, out_dir);
  return {0, report_for(m, out_dir).dump(2)};
}

std::string training_log_csv(const TrainingLog& log, const std::string& hash) {
  std::ostringstream out;
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "# manifest=" << hash << "\n";
  out << "epoch,train_loss,val_loss,test_loss\n";
  for (std::size_t e = 0; e < log.train_loss.size(); ++e)
    out << e << "," << fmt(log.train_loss[e]) << "," << fmt(log.val_loss[e])
        << "," << fmt(log.test_loss[e]) << "\n";
  return out.str();
}

CommandResult cmd_train(const json& config) {
  validate_against(config, kTrainCmdSchema, "");
  const std::uint64_t seed = seed_of(config);
  const std::string out_dir = out_dir_of(config, "train");
  TemplateTask task = task_of(config);
  const std::size_t n = config.value("n", std::size_t{512});
  const std::size_t alpha = config.value("alphabet_size", n);
  const std::size_t val_size = config.value("val_size", std::size_t{100});
  const std::size_t test_size = config.value("test_size", std::size_t{100});
  const std::size_t eval_alpha = config.value("eval_alphabet", std::size_t{100});

  const Token lo = task.first_free_token();
  task.vocab_size = std::max(
      task.vocab_size,
      lo + static_cast<Token>(alpha + 2 * eval_alpha));
  const TokenRange train_alpha{lo, lo + static_cast<Token>(alpha)};
  const Dataset train_set =
      sample_dataset(task, n, train_alpha, Rng(seed).split("train").next_u64());
  const Dataset val_set = make_disjoint_eval_split(task, val_size, train_alpha,
                                                   seed ^ 0x5eedu, eval_alpha);
  const Dataset test_set = make_disjoint_eval_split(
      task, test_size, val_set.alphabet, seed ^ 0x7e57u, eval_alpha);

  Manifest m{config_hash(config.dump()), seed, now_utc(), {}};
  TrainConfig tc = train_of(config, task, seed);
  TrainingLog log;
  json summary;

  const std::string arch = config.value("arch", "transformer");
  if (arch == "mlp") {
    MlpConfig mlpc;
    mlpc.k = task.k;
    mlpc.m = task.vocab_size;
    if (config.contains("mlp")) {
      const json& j = config.at("mlp");
      mlpc.width = j.value("width", mlpc.width);
      mlpc.hidden_layers = j.value("hidden_layers", mlpc.hidden_layers);
      if (j.contains("activation"))
        mlpc.act = activation_of(j.at("activation"), mlpc.act);
    }
    Mlp mlp(mlpc, Rng(seed).split("init").next_u64());
    log = train(view_of(mlp), task, train_set, val_set, test_set, tc);
  } else if (arch == "transformer") {
    auto [mc, scheme] = model_of(config, task);
    Transformer model = config.contains("resume")
                            ? Transformer::load_checkpoint(
                                  config.at("resume").get<std::string>())
                            : Transformer(mc, scheme,
                                          Rng(seed).split("init").next_u64());
    log = train(view_of(model), task, train_set, val_set, test_set, tc);
    if (config.value("save_checkpoint", true)) {
      const std::string ckpt = out_dir + "/model.ckpt";
      model.save_checkpoint(ckpt);
      m.outputs.push_back("model.ckpt");
    }
  } else {
    fail(ErrorKind::kValidation, "config: arch must be transformer|mlp");
  }

  emit(m, out_dir, "training_log.csv", training_log_csv(log, m.hash));
  summary["best_epoch"] = log.best_epoch;
  summary["best_val_loss"] = log.best_val_loss;
  summary["best_test_loss"] = log.best_test_loss;
  summary["final_train_loss"] = log.final_train_loss;
  summary["final_val_loss"] = log.final_val_loss;
  summary["final_test_loss"] = log.final_test_loss;
  summary["wall_seconds"] = log.wall_seconds;
  emit(m, out_dir, "summary.json", summary.dump(2) + "\n");
  finish_manifest(m, out_dir);
  return {0, report_for(m, out_dir).dump(2)};
}

CommandResult cmd_kernel(const json& config) {
  validate_against(config, kKernelCmdSchema, "");
  const std::uint64_t seed = seed_of(config);
  const std::string out_dir = out_dir_of(config, "kernel");
  TemplateTask task = task_of(config);
  const std::size_t n = config.value("n", std::size_t{64});
  const std::size_t alpha = config.value("alphabet_size", n);
  const Token lo = task.first_free_token();
  task.vocab_size = std::max(
      task.vocab_size, lo + static_cast<Token>(alpha) +
                           static_cast<Token>(8 * task.n_wildcards + 16));
  const auto kernel = kernel_of(config);

  Manifest m{config_hash(config.dump()), seed, now_utc(), {}};
  const Dataset ds = sample_dataset(task, n, {lo, lo + static_cast<Token>(alpha)},
                                    Rng(seed).split("train").next_u64());
  const GramMatrix gram =
      build_gram(*kernel, ds, Rng(seed).split("gram").next_u64());
  const NMatrix nmat =
      build_n_matrix(task, *kernel, Rng(seed).split("n").next_u64());
  const BlockStats stats = block_structure_stats(gram, nmat);
  emit(m, out_dir, "gram.csv", gram_to_csv(gram, m.hash));
  emit(m, out_dir, "report.json", gram_report_to_json(gram, nmat, stats) + "\n");
  finish_manifest(m, out_dir);
  return {0, report_for(m, out_dir).dump(2)};
}

CommandResult cmd_nmatrix(const json& config) {
  validate_against(config, kNMatrixCmdSchema, "");
  const std::uint64_t seed = seed_of(config);
  const std::string out_dir = out_dir_of(config, "nmatrix");
  TemplateTask task = task_of(config);
  task.vocab_size = std::max(
      task.vocab_size,
      task.first_free_token() + static_cast<Token>(8 * task.n_wildcards + 16));
  const auto kernel = kernel_of(config);
  Manifest m{config_hash(config.dump()), seed, now_utc(), {}};
  const NMatrix nmat =
      build_n_matrix(task, *kernel, Rng(seed).split("n").next_u64());
  emit(m, out_dir, "nmatrix.json", nmatrix_to_json(nmat) + "\n");
  finish_manifest(m, out_dir);
  json report = report_for(m, out_dir);
  report["condition_number"] = std::isfinite(nmat.cond)
                                   ? json(nmat.cond)
                                   : json("inf");
  report["determinant"] = nmat.det;
  report["singular"] = !std::isfinite(nmat.cond) || std::abs(nmat.det) < 1e-10;
  return {0, report.dump(2)};
}

// Copy-task early-time probe: full-support training set over a small
// alphabet, one fresh test token, mean-field attention-only model.
CommandResult cmd_probe(const json& config) {
  validate_against(config, kProbeCmdSchema, "");
  const std::uint64_t seed = seed_of(config);
  const std::string out_dir = out_dir_of(config, "probe");
  std::vector<std::size_t> dembs = {64, 128, 256, 512, 1024};
  if (config.contains("d_emb"))
    dembs = config.at("d_emb").get<std::vector<std::size_t>>();
  const std::size_t heads = config.value("heads", std::size_t{8});
  const std::size_t d_head = config.value("d_head", std::size_t{32});
  const double gamma = config.value("gamma", 0.0);
  const std::size_t alphabet = config.value("alphabet", std::size_t{32});
  const std::int32_t vocab =
      config.value("vocab", static_cast<std::int32_t>(2 * alphabet));
  const std::size_t n_seeds = config.value("n_seeds", std::size_t{10});
  const bool train_only_b =
      config.value("train_only_b", false) || config.value("value_identity", false);
  const double rate_scale = config.value("rate_scale", 1.0);

  TemplateTask task = make_builtin(Builtin::kCopy);
  task.vocab_size = vocab;
  const Token lo = task.first_free_token();
  if (lo + static_cast<Token>(alphabet) >= vocab)
    fail(ErrorKind::kValidation, "probe: vocab too small for alphabet");

  Manifest m{config_hash(config.dump()), seed, now_utc(), {}};
  std::ostringstream csv;
  csv << "# manifest=" << m.hash << "\n";
  csv << "d_emb,seed,dtrain_dt,dtest_dt,term_O,term_V,term_P,term_E,term_b\n";
  json per_run = json::array();

  for (std::size_t d_emb : dembs) {
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const std::uint64_t run_seed =
          Rng(seed).split("probe").split(d_emb).split(s).next_u64();
      ModelConfig mc;
      mc.k = 1;
      mc.m = vocab;
      mc.d_emb = d_emb;
      mc.d_head = d_head;
      mc.d_mlp = 1;
      mc.heads = heads;
      mc.depth = 1;
      mc.beta = 1.0;
      mc.gamma = gamma;
      mc.use_mlp = false;
      mc.tie_embeddings = true;
      mc.output = OutputKind::kVocabLogits;
      mc.value_identity = train_only_b;
      mc.block_style = BlockStyle::kTheory;
      Transformer model(mc, InitScheme::kMeanFieldCopy, run_seed);

      // Full support of the training alphabet, one sample per token.
      Dataset train_set;
      train_set.k = 1;
      train_set.symbolic = true;
      train_set.alphabet = {lo, lo + static_cast<Token>(alphabet)};
      for (std::size_t t = 0; t < alphabet; ++t) {
        Sample sample;
        sample.tokens = {lo + static_cast<Token>(t)};
        sample.token_label = lo + static_cast<Token>(t);
        sample.template_index = 0;
        train_set.samples.push_back(sample);
      }
      Sample test_sample;
      test_sample.tokens = {lo + static_cast<Token>(alphabet)};
      test_sample.token_label = lo + static_cast<Token>(alphabet);
      test_sample.template_index = 0;

      std::map<std::string, double> rates;
      if (train_only_b) {
        rates["b"] = rate_scale / static_cast<double>(heads);
      } else {
        rates["O"] = rate_scale / static_cast<double>(heads);
        rates["V"] = rate_scale * static_cast<double>(d_emb) /
                     static_cast<double>(d_head);
        rates["P"] = rate_scale;
        rates["E"] = rate_scale;
      }

      ProbeReport report =
          grad_probe(view_of(model), train_set, test_sample, true, rates);
      report.d_emb = d_emb;
      report.heads = heads;
      report.vocab = vocab;
      per_run.push_back(json::parse(probe_report_to_json(report)));

      auto term = [&](const char* g) {
        auto it = report.test_terms.find(g);
        return it == report.test_terms.end() ? 0.0 : it->second;
      };
      char buf[64];
      auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        return std::string(buf);
      };
      csv << d_emb << "," << s << "," << fmt(report.dtrain_dt) << ","
          << fmt(report.dtest_dt) << "," << fmt(term("O")) << ","
          << fmt(term("V")) << "," << fmt(term("P")) << "," << fmt(term("E"))
          << "," << fmt(term("b")) << "\n";
    }
  }
  emit(m, out_dir, "probe.csv", csv.str());
  emit(m, out_dir, "probe.json", per_run.dump(2) + "\n");
  finish_manifest(m, out_dir);
  return {0, report_for(m, out_dir).dump(2)};
}

CommandResult cmd_sweep(const json& config) {
  validate_against(config, kSweepCmdSchema, "");
  const std::uint64_t seed = seed_of(config);
  const std::string out_dir = out_dir_of(config, "sweep");
  SweepSpec spec;
  spec.task = task_of(config);
  if (config.contains("n_grid"))
    spec.n_grid = config.at("n_grid").get<std::vector<std::size_t>>();
  else
    spec.n_grid = {128, 256, 512};
  spec.base = train_of(config, spec.task, seed);
  if (config.contains("lr_grid"))
    spec.lr_grid = config.at("lr_grid").get<std::vector<double>>();
  else
    spec.lr_grid = {spec.base.lr};
  if (config.contains("seeds"))
    spec.seeds = config.at("seeds").get<std::vector<std::uint64_t>>();
  spec.val_size = config.value("val_size", spec.val_size);
  spec.test_size = config.value("test_size", spec.test_size);
  spec.eval_alphabet = config.value("eval_alphabet", spec.eval_alphabet);
  spec.jobs = config.value("jobs", spec.jobs);

  const auto [base_model, base_scheme] = model_of(config, spec.task);
  if (config.contains("variants")) {
    for (const json& v : config.at("variants")) {
      validate_against(v, kSweepVariantSchema, "variants.");
      json merged = config;
      if (v.contains("model")) {
        json mm = config.value("model", json::object());
        mm.update(v.at("model"));
        merged["model"] = mm;
      }
      auto [mc, scheme] = model_of(merged, spec.task);
      spec.variants.push_back({v.at("name"), mc, scheme});
    }
  } else {
    ModelConfig vanilla = base_model;
    ModelConfig modified = base_model;
    modified.attn_identity = true;
    spec.variants.push_back({"vanilla", vanilla, base_scheme});
    spec.variants.push_back({"attn_identity", modified, base_scheme});
  }

  Manifest m{config_hash(config.dump()), seed, now_utc(), {}};
  const auto cells = run_sweep(spec);
  emit(m, out_dir, "sweep.csv", sweep_to_csv(cells, m.hash));

  const auto summary = summarize_sweep(cells);
  std::ostringstream sum_csv;
  sum_csv << "# manifest=" << m.hash << "\n";
  sum_csv << "variant,n,lr,median_val,median_test,failures\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  for (const auto& row : summary)
    sum_csv << row.variant << "," << row.n << "," << fmt(row.lr) << ","
            << fmt(row.median_val) << "," << fmt(row.median_test) << ","
            << row.failures << "\n";
  emit(m, out_dir, "summary.csv", sum_csv.str());
  finish_manifest(m, out_dir);

  std::size_t failures = 0;
  for (const auto& c : cells)
    if (!c.ok) ++failures;
  json report = report_for(m, out_dir);
  report["cells"] = cells.size();
  report["failures"] = failures;
  const int code = failures == 0 ? 0 : (failures == cells.size() ? 2 : 1);
  return {code, report.dump(2)};
}

CommandResult run_command_json(const std::string& command, const json& config);

CommandResult cmd_figures(const json& config) {
  validate_against(config, kFiguresCmdSchema, "");
  const std::uint64_t seed = seed_of(config);
  const std::string out_dir = out_dir_of(config, "figures");
  std::vector<std::string> which = {"fig1c", "fig2c", "fig4", "fig5a", "fig5b"};
  if (config.contains("which") && config.at("which").is_array())
    which = config.at("which").get<std::vector<std::string>>();
  const std::size_t jobs = config.value("jobs", std::size_t{1});

  Manifest m{config_hash(config.dump()), seed, now_utc(), {}};
  json chained = json::object();
  int worst = 0;
  for (const std::string& fig : which) {
    json sub;
    sub["seed"] = seed;
    sub["out_dir"] = out_dir + "/" + fig;
    std::string command = "sweep";
    if (fig == "fig1c") {
      sub["task"] = {{"builtin", "print_program"}};
      sub["n_grid"] = {128, 256, 512};
      sub["seeds"] = {0, 1};
      sub["model"] = {{"d_emb", 48},  {"d_head", 24},
                      {"d_mlp", 96},  {"heads", 4},
                      {"depth", 2},   {"gamma", 1.0},
                      {"beta", 1.0},  {"block_style", "practical"},
                      {"init", "mean_field_copy"}};
      sub["train"] = {{"epochs", 250}, {"batch_size", 128}, {"lr", 3e-3}};
      sub["jobs"] = jobs;
    } else if (fig == "fig2c") {
      sub["task"] = {{"builtin", "string_assign_program"}};
      sub["n_grid"] = {128, 256, 512};
      sub["seeds"] = {0, 1};
      sub["model"] = {{"d_emb", 48},  {"d_head", 24},
                      {"d_mlp", 96},  {"heads", 4},
                      {"depth", 2},   {"gamma", 1.0},
                      {"beta", 1.0},  {"block_style", "practical"},
                      {"init", "mean_field_copy"}};
      sub["variants"] = json::array(
          {{{"name", "vanilla"}, {"model", json::object()}},
           {{"name", "value_identity"},
            {"model", {{"value_identity", true}}}}});
      sub["train"] = {{"epochs", 250}, {"batch_size", 128}, {"lr", 3e-3}};
      sub["jobs"] = jobs;
    } else if (fig == "fig4") {
      command = "kernel";
      sub["task"] = {{"builtin", "same_different"}, {"with_cls", true}};
      sub["n"] = 96;
      sub["kernel"] = {{"type", "trans"}, {"beta", 0.5}, {"gamma", 0.5},
                       {"b1", 1.0},      {"b2", 0.3},   {"mc", 2048}};
    } else if (fig == "fig5a") {
      command = "probe";
      sub["d_emb"] = {64, 128, 256, 512, 1024};
      sub["n_seeds"] = 10;
    } else if (fig == "fig5b") {
      command = "probe";
      sub["d_emb"] = {64, 128, 256, 512, 1024};
      sub["n_seeds"] = 10;
      sub["train_only_b"] = true;
    } else {
      fail(ErrorKind::kValidation, "figures: unknown figure " + fig);
    }
    const CommandResult r = run_command_json(command, sub);
    chained[fig] = json::parse(r.report_json);
    worst = std::max(worst, r.exit_code);
    m.outputs.push_back(fig + "/");
  }
  finish_manifest(m, out_dir);
  json report = report_for(m, out_dir);
  report["figures"] = chained;
  return {worst, report.dump(2)};
}

// Fast consistency checks, one per acceptance criterion where a sub-minute
// check exists; the heavier criteria are listed and deferred to the
// acceptance suite binary.
CommandResult cmd_selftest(const json& config) {
  validate_against(config, kSelftestSchema, "");
  json checks = json::array();
  bool all_ok = true;
  auto record = [&](const std::string& id, const std::string& status,
                    const std::string& detail) {
    checks.push_back({{"id", id}, {"status", status}, {"detail", detail}});
    if (status == "fail") all_ok = false;
    std::cerr << "[" << status << "] " << id << ": " << detail << "\n";
  };

  // C1: uniform-softmax closed form.
  {
    Rng rng(7);
    bool ok = true;
    for (int trial = 0; trial < 10 && ok; ++trial) {
      const std::size_t k = 2 + rng.below(3);
      std::vector<Token> x, y;
      for (std::size_t i = 0; i < k; ++i) {
        x.push_back(static_cast<Token>(rng.below(6)));
        y.push_back(static_cast<Token>(rng.below(6)));
      }
      const double gamma = rng.uniform() * 2.0;
      Rng stream(1);
      const auto e = attn_kernel_value(x, y, 0.0, gamma, 1024, stream);
      double overlap = 0.0;
      for (Token xi : x)
        for (Token yj : y) overlap += xi == yj ? 1.0 : 0.0;
      const double expected =
          (overlap + gamma * gamma * static_cast<double>(k)) /
          static_cast<double>(k * k);
      ok = std::abs(e.value - expected) <= 1e-12 && e.std_error == 0.0;
    }
    record("C1", ok ? "pass" : "fail", "beta=0 attention kernel closed form");
  }
  record("C2", "deferred", "cosine lift vs nested MC oracle: acceptance suite");
  // C3: the singular half of the dichotomy.
  {
    const TemplateTask task = make_builtin(Builtin::kSameDifferent);
    const MlpCosKernel mlp_kernel;
    const NMatrix n = build_n_matrix(task, mlp_kernel, 3);
    const bool ok = std::abs(n.det) < 1e-10;
    record("C3", ok ? "pass" : "fail",
           "inner-product kernel N-matrix singular (det=" +
               std::to_string(n.det) + "); K_trans conditioning: acceptance");
  }
  // C4: exact prediction collapse under the inner-product kernel.
  {
    TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
    task.vocab_size = 256;
    const Token lo = task.first_free_token();
    const Dataset ds = sample_dataset(task, 64, {lo, lo + 64}, 11);
    const MlpCosKernel kernel;
    const GramMatrix gram = build_gram(kernel, ds, 1);
    const KrrModel krr = krr_fit(gram, ds.real_labels(), 64.0 / 4.0);
    const Token c = lo + 80, d = lo + 81;
    const std::vector<Token> cc = {c, c, kClsToken};
    const std::vector<Token> cd = {c, d, kClsToken};
    auto value_row = [&](const std::vector<Token>& x) {
      const auto kes = kernel_row(kernel, ds, x, 5);
      std::vector<double> kv(kes.size());
      for (std::size_t i = 0; i < kes.size(); ++i) kv[i] = kes[i].value;
      return kv;
    };
    const double pcc = krr_predict(krr, value_row(cc));
    const double pcd = krr_predict(krr, value_row(cd));
    const bool ok = pcc == pcd;
    record("C4", ok ? "pass" : "fail",
           "inner-product kernel cannot separate CC from CD (exact); "
           "K_trans error curve: acceptance");
  }
  record("C5", "deferred", "idealized-estimator bounds: acceptance suite");
  record("C6", "deferred", "copy-task inverse scaling probe: acceptance suite");
  record("C7", "deferred", "b-only probe closed form: acceptance suite");
  // C8: the exact permutation coupling on a tiny run.
  {
    const TemplateTask task = make_builtin(Builtin::kAbaVsAbb);
    MlpConfig mc;
    mc.k = 3;
    mc.m = task.vocab_size;
    mc.width = 32;
    mc.hidden_layers = 2;
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 32;
    tc.seed = 5;
    const Token lo = task.first_free_token();
    const TokenRange alpha{lo, lo + 32};
    const Token u1 = lo + 40, u2 = lo + 41;
    const auto report = mlp_permutation_test(mc, task, tc, 64, alpha,
                                             {u1, u2, u1}, {u1, u2, u2}, 3);
    const bool ok = report.max_coupling_gap == 0.0;
    record("C8", ok ? "pass" : "fail",
           "MLP column-permutation coupling exact; trained thresholds: acceptance");
  }
  record("C9", "deferred", "data-efficiency ordering sweep: acceptance suite");
  // C10: template zoo counts.
  {
    const bool ok =
        make_builtin(Builtin::kDistributionOf3).templates.size() == 144 &&
        make_builtin(Builtin::kMatchToSample).templates.size() == 40 &&
        make_builtin(Builtin::kMajority, {.k = 5}).templates.size() == 16;
    record("C10", ok ? "pass" : "fail",
           "distribution_of_3=144, match_to_sample=40, majority(5)=16");
  }
  // C11: oracle equivalence on a reduced family.
  {
    bool ok = true;
    const std::vector<TemplateSymbol> pool = {
        TemplateSymbol::regular(1), TemplateSymbol::wildcard(0),
        TemplateSymbol::wildcard(1)};
    std::vector<Template> family;
    for (std::size_t a = 0; a < pool.size(); ++a)
      for (std::size_t b = 0; b < pool.size(); ++b)
        for (std::size_t c = 0; c < pool.size(); ++c) {
          Template z;
          z.symbols = {pool[a], pool[b], pool[c]};
          z.label = TemplateLabel::real_value(0.0);
          family.push_back(z);
        }
    std::vector<Token> alphabet = {1, 2, 3, 4, 5};
    for (std::size_t i = 0; i < family.size() && ok; ++i) {
      for (std::size_t j = i; j < family.size() && ok; ++j) {
        bool witness = false;
        std::vector<Token> x(3);
        for (Token t1 : alphabet)
          for (Token t2 : alphabet)
            for (Token t3 : alphabet) {
              x = {t1, t2, t3};
              if (matches(x, family[i]) && matches(x, family[j]))
                witness = true;
            }
        ok = templates_disjoint(family[i], family[j]) == !witness;
      }
    }
    record("C11", ok ? "pass" : "fail",
           "disjointness matches exhaustive search (k=3 family); full k<=4: "
           "acceptance");
  }
  // C12: finite-difference gradient spot check on a tiny model.
  {
    ModelConfig mc;
    mc.k = 3;
    mc.m = 12;
    mc.d_emb = 6;
    mc.d_head = 4;
    mc.d_mlp = 8;
    mc.heads = 2;
    mc.attn_identity = true;
    mc.value_identity = true;
    Transformer model(mc, InitScheme::kStandard, 3);
    const std::vector<std::int32_t> tokens = {1, 5, 7, 2, 2, 9};
    Tensor targets({2});
    targets.at(0) = 0.3;
    targets.at(1) = -0.7;
    auto loss_value = [&]() {
      return mse_mean(model.forward_scalar(tokens, 2), targets).value().at(0);
    };
    Var loss = mse_mean(model.forward_scalar(tokens, 2), targets);
    loss.backward();
    bool ok = true;
    for (Var v : model.parameters()) {
      if (!v.has_grad()) continue;
      Tensor theta = v.value();
      Tensor fd(theta.shape());
      for (std::size_t i = 0; i < theta.size() && ok; ++i) {
        const double saved = theta.at(i);
        theta.at(i) = saved + 1e-4;
        v.set_value(theta);
        const double fp = loss_value();
        theta.at(i) = saved - 1e-4;
        v.set_value(theta);
        const double fm = loss_value();
        theta.at(i) = saved;
        v.set_value(theta);
        fd.at(i) = (fp - fm) / 2e-4;
      }
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < fd.size(); ++i) {
        const double d = fd.at(i) - v.grad().at(i);
        num += d * d;
        den += fd.at(i) * fd.at(i);
      }
      if (std::sqrt(num) > 1e-5 * std::max(1.0, std::sqrt(den))) ok = false;
    }
    record("C12", ok ? "pass" : "fail",
           "finite-difference gradient agreement on all parameter groups");
  }

  json report;
  report["checks"] = checks;
  report["ok"] = all_ok;
  return {all_ok ? 0 : 2, report.dump(2)};
}

CommandResult run_command_json(const std::string& command, const json& config) {
  if (command == "gen") return cmd_gen(config);
  if (command == "train") return cmd_train(config);
  if (command == "kernel") return cmd_kernel(config);
  if (command == "nmatrix") return cmd_nmatrix(config);
  if (command == "probe") return cmd_probe(config);
  if (command == "sweep") return cmd_sweep(config);
  if (command == "figures") return cmd_figures(config);
  if (command == "selftest") return cmd_selftest(config);
  fail(ErrorKind::kArgument, "unknown command: " + command);
}

}  // namespace

CommandResult run_command(const std::string& command,
                          const std::string& config_json) {
  json config;
  try {
    config = config_json.empty() ? json::object() : json::parse(config_json);
  } catch (const std::exception& e) {
    fail(ErrorKind::kValidation, std::string("config: parse error: ") + e.what());
  }
  return run_command_json(command, config);
}

}  // namespace reltask
