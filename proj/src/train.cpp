#include "reltask/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <atomic>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

namespace reltask {

void TrainConfig::validate() const {
  if (lr <= 0.0) fail(ErrorKind::kValidation, "train config: lr must be positive");
  if (batch_size < 1) fail(ErrorKind::kValidation, "train config: batch size >= 1");
  if (divergence_threshold <= 0.0)
    fail(ErrorKind::kValidation, "train config: divergence threshold > 0");
}

std::vector<Var> ModelView::parameters(bool freeze_positional) const {
  std::vector<Var> out;
  for (const auto& [name, vars] : groups) {
    if (freeze_positional && name == "P") continue;
    for (const Var& v : vars) out.push_back(v);
  }
  return out;
}

ModelView view_of(const Transformer& model) {
  ModelView view;
  view.groups = model.groups();
  const bool logits = model.config().output == OutputKind::kVocabLogits;
  view.forward = [&model, logits](const std::vector<std::int32_t>& tokens,
                                  std::size_t batch) {
    return logits ? model.forward_logits(tokens, batch)
                  : model.forward_scalar(tokens, batch);
  };
  return view;
}

ModelView view_of(const Mlp& model) {
  ModelView view;
  view.groups = model.groups();
  view.forward = [&model](const std::vector<std::int32_t>& tokens,
                          std::size_t batch) {
    return model.forward(tokens, batch);
  };
  return view;
}

namespace {

std::vector<std::int32_t> flat_tokens(const Dataset& ds,
                                      const std::vector<std::size_t>& idx) {
  std::vector<std::int32_t> out;
  out.reserve(idx.size() * ds.k);
  for (std::size_t i : idx)
    for (Token t : ds.samples[i].tokens) out.push_back(t);
  return out;
}

Var batch_loss(const ModelView& model, const Dataset& ds,
               const std::vector<std::size_t>& idx, LossKind loss) {
  const std::vector<std::int32_t> tokens = flat_tokens(ds, idx);
  Var out = model.forward(tokens, idx.size());
  if (loss == LossKind::kMse) {
    Tensor targets({idx.size()});
    for (std::size_t i = 0; i < idx.size(); ++i)
      targets.at(i) = ds.samples[idx[i]].real_label;
    return mse_mean(out, targets);
  }
  std::vector<std::int32_t> labels;
  labels.reserve(idx.size());
  for (std::size_t i : idx) labels.push_back(ds.samples[i].token_label);
  return ce_mean(out, labels);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

class Optimizer {
 public:
  Optimizer(const TrainConfig& config, std::size_t n_params)
      : config_(config), m_(n_params), v_(n_params) {}

  void load(const ResumeState& state) {
    steps_ = state.adam_steps;
    if (!state.adam_m.empty()) m_ = state.adam_m;
    if (!state.adam_v.empty()) v_ = state.adam_v;
  }
  void save(ResumeState& state) const {
    state.adam_steps = steps_;
    state.adam_m = m_;
    state.adam_v = v_;
  }

  void step(std::vector<Var>& params) {
    ++steps_;
    for (std::size_t p = 0; p < params.size(); ++p) {
      Var& var = params[p];
      if (!var.has_grad()) continue;  // parameter unused by this loss
      Tensor theta = var.value();
      const Tensor& g = var.grad();
      if (config_.optimizer == OptimizerKind::kSgd) {
        for (std::size_t i = 0; i < theta.size(); ++i)
          theta.at(i) -= config_.lr * g.at(i);
      } else {
        if (m_[p].size() == 0) {
          m_[p] = Tensor(theta.shape());
          v_[p] = Tensor(theta.shape());
        }
        const double b1 = config_.adam_beta1;
        const double b2 = config_.adam_beta2;
        const double corr1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
        const double corr2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
        for (std::size_t i = 0; i < theta.size(); ++i) {
          m_[p].at(i) = b1 * m_[p].at(i) + (1.0 - b1) * g.at(i);
          v_[p].at(i) = b2 * v_[p].at(i) + (1.0 - b2) * g.at(i) * g.at(i);
          const double mhat = m_[p].at(i) / corr1;
          const double vhat = v_[p].at(i) / corr2;
          theta.at(i) -= config_.lr * mhat / (std::sqrt(vhat) + config_.adam_eps);
        }
      }
      var.set_value(std::move(theta));
      var.zero_grad();
    }
  }

 private:
  TrainConfig config_;
  std::size_t steps_ = 0;
  std::vector<Tensor> m_, v_;
};

void check_disjoint_alphabets(const TemplateTask& task, const Dataset& a,
                              const Dataset& b, const char* which) {
  const auto ta = a.substituted_tokens(task);
  const auto tb = b.substituted_tokens(task);
  std::vector<Token> inter;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(),
                        std::back_inserter(inter));
  if (!inter.empty())
    fail(ErrorKind::kValidation,
         std::string("train: ") + which +
             " substituted alphabets overlap (token " +
             std::to_string(inter.front()) + ")");
}

}  // namespace

double eval_loss(const ModelView& model, const Dataset& ds, LossKind loss) {
  if (ds.size() == 0) return 0.0;
  return batch_loss(model, ds, all_indices(ds.size()), loss).value().at(0);
}

TrainingLog train(const ModelView& model, const TemplateTask& task,
                  const Dataset& train_set, const Dataset& val_set,
                  const Dataset& test_set, const TrainConfig& config,
                  ResumeState* resume) {
  config.validate();
  check_disjoint_alphabets(task, train_set, val_set, "train/val");
  check_disjoint_alphabets(task, train_set, test_set, "train/test");
  check_disjoint_alphabets(task, val_set, test_set, "val/test");

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Var> params = model.parameters(config.freeze_positional);
  Optimizer opt(config, params.size());
  std::size_t start_epoch = 0;
  if (resume && resume->next_epoch > 0) {
    opt.load(*resume);
    start_epoch = resume->next_epoch;
  }
  for (Var& p : params) p.zero_grad();

  TrainingLog log;
  Rng shuffle_root = Rng(config.seed).split("shuffle");
  const std::size_t n = train_set.size();

  auto record_epoch = [&](double train_l) {
    log.train_loss.push_back(train_l);
    log.val_loss.push_back(eval_loss(model, val_set, config.loss));
    log.test_loss.push_back(eval_loss(model, test_set, config.loss));
  };

  if (config.epochs == start_epoch || config.epochs == 0) {
    // Evaluation-only run: report initialization losses.
    record_epoch(eval_loss(model, train_set, config.loss));
  }

  for (std::size_t epoch = start_epoch; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> order = all_indices(n);
    Rng erng = shuffle_root.split(epoch);
    for (std::size_t i = n; i > 1; --i)
      std::swap(order[i - 1], order[erng.below(i)]);

    double loss_acc = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      const std::vector<std::size_t> idx(order.begin() + start,
                                         order.begin() + stop);
      Var loss = batch_loss(model, train_set, idx, config.loss);
      const double lv = loss.value().at(0);
      if (!std::isfinite(lv) || lv > config.divergence_threshold)
        fail(ErrorKind::kDivergence,
             "train: loss diverged at epoch " + std::to_string(epoch) +
                 " (loss=" + std::to_string(lv) + ")");
      loss_acc += lv;
      ++batches;
      loss.backward();
      opt.step(params);
    }
    record_epoch(loss_acc / static_cast<double>(batches));
  }

  log.best_epoch = static_cast<std::size_t>(
      std::min_element(log.val_loss.begin(), log.val_loss.end()) -
      log.val_loss.begin());
  log.best_val_loss = log.val_loss[log.best_epoch];
  log.best_test_loss = log.test_loss[log.best_epoch];
  log.final_train_loss = log.train_loss.back();
  log.final_val_loss = log.val_loss.back();
  log.final_test_loss = log.test_loss.back();
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  if (resume) {
    opt.save(*resume);
    resume->next_epoch = config.epochs;
  }
  return log;
}

namespace {

using GroupGrads = std::vector<std::vector<Tensor>>;

GroupGrads snapshot_grads(const ModelView& model) {
  GroupGrads out;
  for (const auto& [name, vars] : model.groups) {
    std::vector<Tensor> grads;
    for (const Var& v : vars) {
      Var mutable_v = v;
      // Parameters untouched by the loss keep zero gradients.
      Tensor g = v.has_grad() ? v.grad() : Tensor(v.value().shape());
      grads.push_back(std::move(g));
      mutable_v.zero_grad();
    }
    out.push_back(std::move(grads));
  }
  return out;
}

}  // namespace

ProbeReport grad_probe(const ModelView& model, const Dataset& train_set,
                       const Sample& test_sample, bool symbolic,
                       const std::map<std::string, double>& rates) {
  const LossKind loss = symbolic ? LossKind::kCrossEntropy : LossKind::kMse;

  Var train_l =
      batch_loss(model, train_set, all_indices(train_set.size()), loss);
  train_l.backward();
  GroupGrads train_grads = snapshot_grads(model);

  Dataset single;
  single.k = train_set.k;
  single.symbolic = train_set.symbolic;
  single.samples = {test_sample};
  Var test_l = batch_loss(model, single, {0}, loss);
  test_l.backward();
  GroupGrads test_grads = snapshot_grads(model);

  ProbeReport report;
  report.rates = rates;
  for (std::size_t g = 0; g < model.groups.size(); ++g) {
    const std::string& name = model.groups[g].first;
    const auto it = rates.find(name);
    const double eta = it == rates.end() ? 0.0 : it->second;
    double tr = 0.0, te = 0.0;
    for (std::size_t p = 0; p < train_grads[g].size(); ++p) {
      tr += dot(train_grads[g][p], train_grads[g][p]);
      te += dot(train_grads[g][p], test_grads[g][p]);
    }
    report.train_terms[name] = -eta * tr;
    report.test_terms[name] = -eta * te;
    report.dtrain_dt -= eta * tr;
    report.dtest_dt -= eta * te;
  }
  return report;
}

std::string probe_report_to_json(const ProbeReport& report) {
  nlohmann::json j;
  j["train_terms"] = report.train_terms;
  j["test_terms"] = report.test_terms;
  j["dtrain_dt"] = report.dtrain_dt;
  j["dtest_dt"] = report.dtest_dt;
  j["d_emb"] = report.d_emb;
  j["heads"] = report.heads;
  j["vocab"] = report.vocab;
  j["rates"] = report.rates;
  return j.dump(2);
}

std::vector<SweepCellResult> run_sweep(const SweepSpec& spec) {
  for (std::size_t i = 1; i < spec.n_grid.size(); ++i)
    if (spec.n_grid[i] < spec.n_grid[i - 1])
      fail(ErrorKind::kArgument, "sweep: n grid must be ascending");

  struct Cell {
    std::size_t variant, n_idx, seed_idx, lr_idx;
  };
  std::vector<Cell> cells;
  for (std::size_t v = 0; v < spec.variants.size(); ++v)
    for (std::size_t ni = 0; ni < spec.n_grid.size(); ++ni)
      for (std::size_t li = 0; li < spec.lr_grid.size(); ++li)
        for (std::size_t si = 0; si < spec.seeds.size(); ++si)
          cells.push_back({v, ni, si, li});

  std::vector<SweepCellResult> results(cells.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= cells.size()) return;
      const Cell& cell = cells[c];
      const std::size_t n = spec.n_grid[cell.n_idx];
      const std::uint64_t seed = spec.seeds[cell.seed_idx];
      SweepCellResult& r = results[c];
      r.variant = spec.variants[cell.variant].name;
      r.n = n;
      r.seed = seed;
      r.lr = spec.lr_grid[cell.lr_idx];
      try {
        TemplateTask task = spec.task;
        const Token lo = task.first_free_token();
        const Token needed =
            lo + static_cast<Token>(n + 2 * spec.eval_alphabet);
        task.vocab_size = std::max(task.vocab_size, needed);
        const TokenRange train_alpha{lo, lo + static_cast<Token>(n)};
        Dataset train_set =
            sample_dataset(task, n, train_alpha, Rng(seed).split("train").next_u64());
        Dataset val_set = make_disjoint_eval_split(
            task, spec.val_size, train_alpha, seed ^ 0x5eedu, spec.eval_alphabet);
        const TokenRange val_alpha = val_set.alphabet;
        Dataset test_set = make_disjoint_eval_split(
            task, spec.test_size, val_alpha, seed ^ 0x7e57u, spec.eval_alphabet);

        ModelConfig mc = spec.variants[cell.variant].config;
        mc.k = task.k;
        mc.m = task.vocab_size;
        Transformer model(mc, spec.variants[cell.variant].scheme,
                          Rng(seed).split("init").next_u64());
        TrainConfig tc = spec.base;
        tc.seed = seed;
        tc.lr = spec.lr_grid[cell.lr_idx];
        const TrainingLog log =
            train(view_of(model), task, train_set, val_set, test_set, tc);
        r.ok = true;
        r.best_epoch = log.best_epoch;
        r.train_loss = log.train_loss[log.best_epoch];
        r.val_loss = log.best_val_loss;
        r.test_loss = log.best_test_loss;
      } catch (const std::exception& e) {
        r.ok = false;
        r.error = e.what();
      }
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, spec.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return results;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<SweepSummaryRow> summarize_sweep(
    const std::vector<SweepCellResult>& cells) {
  struct Key {
    std::string variant;
    std::size_t n;
    double lr;
    bool operator<(const Key& o) const {
      return std::tie(variant, n, lr) < std::tie(o.variant, o.n, o.lr);
    }
  };
  std::map<Key, std::vector<const SweepCellResult*>> by_key;
  for (const auto& c : cells) by_key[{c.variant, c.n, c.lr}].push_back(&c);

  // Per (variant, n): the lr with the best median validation loss wins.
  std::map<std::pair<std::string, std::size_t>, SweepSummaryRow> best;
  for (const auto& [key, group] : by_key) {
    std::vector<double> vals, tests;
    std::size_t failures = 0;
    for (const auto* c : group) {
      if (!c->ok) {
        ++failures;
        continue;
      }
      vals.push_back(c->val_loss);
      tests.push_back(c->test_loss);
    }
    SweepSummaryRow row;
    row.variant = key.variant;
    row.n = key.n;
    row.lr = key.lr;
    row.median_val = median(vals);
    row.median_test = median(tests);
    row.failures = failures;
    const auto bk = std::make_pair(key.variant, key.n);
    auto it = best.find(bk);
    if (it == best.end() ||
        (!std::isnan(row.median_val) &&
         (std::isnan(it->second.median_val) ||
          row.median_val < it->second.median_val)))
      best[bk] = row;
  }
  std::vector<SweepSummaryRow> out;
  for (const auto& [k, row] : best) out.push_back(row);
  return out;
}

std::string sweep_to_csv(const std::vector<SweepCellResult>& cells,
                         const std::string& manifest_hash) {
  std::ostringstream out;
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "# manifest=" << manifest_hash << "\n";
  out << "variant,n,seed,lr,epoch_best,train_loss,val_loss,test_loss\n";
  for (const auto& c : cells) {
    if (!c.ok) {
      out << c.variant << "," << c.n << "," << c.seed << "," << fmt(c.lr)
          << ",,,,\n";
      continue;
    }
    out << c.variant << "," << c.n << "," << c.seed << "," << fmt(c.lr) << ","
        << c.best_epoch << "," << fmt(c.train_loss) << "," << fmt(c.val_loss)
        << "," << fmt(c.test_loss) << "\n";
  }
  return out.str();
}

PermutationTestReport mlp_permutation_test(
    const MlpConfig& config, const TemplateTask& task,
    const TrainConfig& train_config, std::size_t n_train,
    const TokenRange& train_alphabet, const std::vector<Token>& x1,
    const std::vector<Token>& x2, std::size_t n_seeds) {
  if (x1.size() != task.k || x2.size() != task.k)
    fail(ErrorKind::kContract, "mlp_permutation_test: bad test string length");
  for (const auto* x : {&x1, &x2})
    for (Token t : *x)
      if (train_alphabet.contains(t))
        fail(ErrorKind::kContract,
             "mlp_permutation_test: test token " + std::to_string(t) +
                 " appears in the training alphabet");

  std::vector<double> f1s, f2s;
  double max_gap = 0.0;
  for (std::size_t s = 0; s < n_seeds; ++s) {
    const std::uint64_t seed = Rng(train_config.seed).split(s).next_u64();
    Dataset train_set = sample_dataset(task, n_train, train_alphabet, seed);
    // The protocol only needs a trained network; validation/test splits are
    // not part of this check.
    Mlp mlp(config, seed);
    ModelView view = view_of(mlp);
    TrainConfig tc = train_config;
    tc.seed = seed;
    std::vector<Var> params = view.parameters();
    Optimizer opt(tc, params.size());
    Rng shuffle_root = Rng(tc.seed).split("shuffle");
    const std::size_t n = train_set.size();
    for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
      std::vector<std::size_t> order = all_indices(n);
      Rng erng = shuffle_root.split(epoch);
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[erng.below(i)]);
      for (std::size_t start = 0; start < n; start += tc.batch_size) {
        const std::size_t stop = std::min(n, start + tc.batch_size);
        const std::vector<std::size_t> idx(order.begin() + start,
                                           order.begin() + stop);
        Var loss = batch_loss(view, train_set, idx, tc.loss);
        loss.backward();
        opt.step(params);
      }
    }

    const double f1 = mlp.forward(x1, 1).value().at(0);
    const double f2 = mlp.forward(x2, 1).value().at(0);
    f1s.push_back(f1);
    f2s.push_back(f2);

    std::vector<std::pair<Token, Token>> swaps;
    for (std::size_t i = 0; i < x1.size(); ++i) swaps.emplace_back(x1[i], x2[i]);
    Mlp coupled = mlp.with_permuted_input_columns(swaps);
    const double f1_coupled = coupled.forward(x1, 1).value().at(0);
    max_gap = std::max(max_gap, std::abs(f1_coupled - f2));
  }

  auto mean_se = [](const std::vector<double>& v) {
    const double mean =
        std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= std::max<std::size_t>(1, v.size() - 1);
    return std::make_pair(mean, std::sqrt(var / static_cast<double>(v.size())));
  };
  PermutationTestReport report;
  report.seeds = n_seeds;
  std::tie(report.mean_f1, report.se_f1) = mean_se(f1s);
  std::tie(report.mean_f2, report.se_f2) = mean_se(f2s);
  report.pooled_se =
      std::sqrt(report.se_f1 * report.se_f1 + report.se_f2 * report.se_f2);
  report.max_coupling_gap = max_gap;
  return report;
}

}  // namespace reltask
