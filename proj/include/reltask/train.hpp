#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reltask/model.hpp"
#include "reltask/task.hpp"

namespace reltask {

enum class LossKind { kMse, kCrossEntropy };
enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double lr = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 1024;
  std::size_t epochs = 1000;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kMse;
  bool freeze_positional = false;
  double divergence_threshold = 1e6;

  void validate() const;
};

struct TrainingLog {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> test_loss;
  std::size_t best_epoch = 0;  // index into the epoch vectors
  double best_val_loss = 0.0;
  double best_test_loss = 0.0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  double final_test_loss = 0.0;
  double wall_seconds = 0.0;
};

// Uniform handle over trainable models: named parameter groups plus a
// batched forward producing either a batch x 1 prediction column or a
// batch x m logit matrix.
struct ModelView {
  std::vector<std::pair<std::string, std::vector<Var>>> groups;
  std::function<Var(const std::vector<std::int32_t>&, std::size_t)> forward;

  std::vector<Var> parameters(bool freeze_positional = false) const;
};

ModelView view_of(const Transformer& model);
ModelView view_of(const Mlp& model);

// Optimizer moments for checkpoint-resume at epoch boundaries.
struct ResumeState {
  std::size_t next_epoch = 0;
  std::size_t adam_steps = 0;
  std::vector<Tensor> adam_m;
  std::vector<Tensor> adam_v;
};

// Best-epoch-on-validation protocol: per-epoch train/val/test losses, best
// epoch by validation loss. Train/val/test substituted alphabets must be pairwise
// disjoint. Throws kDivergence naming the epoch if the loss blows up.
TrainingLog train(const ModelView& model, const TemplateTask& task,
                  const Dataset& train_set, const Dataset& val_set,
                  const Dataset& test_set, const TrainConfig& config,
                  ResumeState* resume = nullptr);

double eval_loss(const ModelView& model, const Dataset& ds, LossKind loss);

// Exact loss-derivative decomposition at t = 0 under gradient flow with
// per-group rates: dL/dt = -sum_g eta_g <grad_g L_train, grad_g L_(.)>.
struct ProbeReport {
  std::map<std::string, double> train_terms;
  std::map<std::string, double> test_terms;
  double dtrain_dt = 0.0;
  double dtest_dt = 0.0;
  std::size_t d_emb = 0;
  std::size_t heads = 0;
  std::int32_t vocab = 0;
  std::map<std::string, double> rates;
};

ProbeReport grad_probe(const ModelView& model, const Dataset& train_set,
                       const Sample& test_sample, bool symbolic,
                       const std::map<std::string, double>& rates);

std::string probe_report_to_json(const ProbeReport& report);

// Data-efficiency sweep over (variant, n, seed, lr) cells. Cell failures are
// recorded, not propagated.
struct SweepVariant {
  std::string name;
  ModelConfig config;
  InitScheme scheme = InitScheme::kStandard;
};

struct SweepSpec {
  TemplateTask task;
  std::vector<SweepVariant> variants;
  std::vector<std::size_t> n_grid;
  std::vector<double> lr_grid{1e-3};
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TrainConfig base;
  std::size_t val_size = 100;
  std::size_t test_size = 100;
  std::size_t eval_alphabet = 100;
  std::size_t jobs = 1;
};

struct SweepCellResult {
  std::string variant;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  double lr = 0.0;
  bool ok = false;
  std::string error;
  std::size_t best_epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double test_loss = 0.0;
};

std::vector<SweepCellResult> run_sweep(const SweepSpec& spec);

// Median best-epoch test loss per (variant, n); lr chosen per cell group by
// median validation loss.
struct SweepSummaryRow {
  std::string variant;
  std::size_t n = 0;
  double lr = 0.0;
  double median_val = 0.0;
  double median_test = 0.0;
  std::size_t failures = 0;
};

std::vector<SweepSummaryRow> summarize_sweep(
    const std::vector<SweepCellResult>& cells);

std::string sweep_to_csv(const std::vector<SweepCellResult>& cells,
                         const std::string& manifest_hash);

// Lemma-style indistinguishability check for MLPs on unseen-token strings:
// Monte-Carlo means over seeds plus the exact column-permutation coupling.
struct PermutationTestReport {
  double mean_f1 = 0.0;
  double mean_f2 = 0.0;
  double se_f1 = 0.0;
  double se_f2 = 0.0;
  double pooled_se = 0.0;
  double max_coupling_gap = 0.0;  // exact check; 0 bit-for-bit
  std::size_t seeds = 0;
};

PermutationTestReport mlp_permutation_test(
    const MlpConfig& config, const TemplateTask& task,
    const TrainConfig& train_config, std::size_t n_train,
    const TokenRange& train_alphabet, const std::vector<Token>& x1,
    const std::vector<Token>& x2, std::size_t n_seeds);

}  // namespace reltask
