#include <doctest.h>

#include <cmath>

#include "reltask/train.hpp"

using namespace reltask;

namespace {

struct Fixture {
  TemplateTask task;
  Dataset train_set, val_set, test_set;

  explicit Fixture(std::size_t n = 64, std::uint64_t seed = 1) {
    task = make_builtin(Builtin::kAbaVsAbb);
    task.vocab_size = 600;
    const Token lo = task.first_free_token();
    const TokenRange alpha{lo, lo + 64};
    train_set = sample_dataset(task, n, alpha, seed);
    val_set = make_disjoint_eval_split(task, 40, alpha, seed + 1, 64);
    test_set = make_disjoint_eval_split(task, 40, val_set.alphabet, seed + 2, 64);
  }

  ModelConfig model_config() const {
    ModelConfig mc;
    mc.k = task.k;
    mc.m = task.vocab_size;
    mc.d_emb = 12;
    mc.d_head = 6;
    mc.d_mlp = 16;
    mc.heads = 2;
    return mc;
  }

  TrainConfig train_config(std::size_t epochs = 10) const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = 32;
    tc.lr = 3e-3;
    tc.seed = 7;
    return tc;
  }
};

}  // namespace

TEST_CASE("training is deterministic given the seed") {
  Fixture f;
  Transformer m1(f.model_config(), InitScheme::kStandard, 5);
  Transformer m2(f.model_config(), InitScheme::kStandard, 5);
  const TrainingLog a =
      train(view_of(m1), f.task, f.train_set, f.val_set, f.test_set,
            f.train_config());
  const TrainingLog b =
      train(view_of(m2), f.task, f.train_set, f.val_set, f.test_set,
            f.train_config());
  REQUIRE(a.train_loss.size() == b.train_loss.size());
  for (std::size_t e = 0; e < a.train_loss.size(); ++e) {
    CHECK(a.train_loss[e] == b.train_loss[e]);
    CHECK(a.val_loss[e] == b.val_loss[e]);
    CHECK(a.test_loss[e] == b.test_loss[e]);
  }
  CHECK(a.best_epoch == b.best_epoch);
}

TEST_CASE("training reduces the loss on a learnable task") {
  Fixture f(128);
  Transformer model(f.model_config(), InitScheme::kStandard, 9);
  const TrainingLog log =
      train(view_of(model), f.task, f.train_set, f.val_set, f.test_set,
            f.train_config(60));
  CHECK(log.train_loss.back() < 0.5 * log.train_loss.front());
  CHECK(log.best_val_loss == log.val_loss[log.best_epoch]);
  for (double v : log.val_loss) CHECK(log.best_val_loss <= v);
  // Validation selection should not report a worse test loss than the final
  // epoch on these identically distributed splits.
  CHECK(log.best_test_loss <= log.final_test_loss + 1e-12);
}

TEST_CASE("a zero-epoch run reports initialization losses") {
  Fixture f;
  ModelConfig mc = f.model_config();
  Transformer model(mc, InitScheme::kStandard, 11);
  TrainConfig tc = f.train_config(0);
  const TrainingLog log = train(view_of(model), f.task, f.train_set, f.val_set,
                                f.test_set, tc);
  REQUIRE(log.train_loss.size() == 1);
  // Readout starts at zero, so every prediction is zero and the MSE is the
  // trivial loss.
  CHECK(log.train_loss[0] == doctest::Approx(1.0));
  CHECK(log.best_epoch == 0);
}

TEST_CASE("symbolic zero-epoch loss is log m for near-zero logits") {
  TemplateTask task = make_builtin(Builtin::kCopy);
  task.vocab_size = 128;
  const Token lo = task.first_free_token();
  const Dataset tr = sample_dataset(task, 24, {lo, lo + 24}, 1);
  const Dataset va = make_disjoint_eval_split(task, 12, {lo, lo + 24}, 2, 24);
  const Dataset te = make_disjoint_eval_split(task, 12, va.alphabet, 3, 24);

  ModelConfig mc;
  mc.k = 1;
  mc.m = task.vocab_size;
  mc.d_emb = 256;
  mc.d_head = 16;
  mc.heads = 4;
  mc.use_mlp = false;
  mc.tie_embeddings = true;
  mc.output = OutputKind::kVocabLogits;
  mc.gamma = 0.0;
  Transformer model(mc, InitScheme::kMeanFieldCopy, 5);
  TrainConfig tc;
  tc.epochs = 0;
  tc.loss = LossKind::kCrossEntropy;
  const TrainingLog log = train(view_of(model), task, tr, va, te, tc);
  CHECK(log.train_loss[0] ==
        doctest::Approx(std::log(task.vocab_size)).epsilon(0.02));
}

TEST_CASE("divergence aborts with the epoch in the diagnostic") {
  Fixture f;
  Transformer model(f.model_config(), InitScheme::kStandard, 13);
  TrainConfig tc = f.train_config(30);
  tc.lr = 1e4;  // guaranteed blow-up
  try {
    train(view_of(model), f.task, f.train_set, f.val_set, f.test_set, tc);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDivergence);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("overlapping alphabets are rejected") {
  Fixture f;
  Transformer model(f.model_config(), InitScheme::kStandard, 15);
  // Re-sample validation data from the training alphabet.
  Dataset bad_val = sample_dataset(f.task, 16, f.train_set.alphabet, 99);
  CHECK_THROWS_AS(train(view_of(model), f.task, f.train_set, bad_val,
                        f.test_set, f.train_config()),
                  Error);
}

TEST_CASE("adam with zero moment decay still descends at small rates") {
  Fixture f(128);
  Transformer model(f.model_config(), InitScheme::kStandard, 17);
  TrainConfig tc = f.train_config(3);
  tc.adam_beta1 = 0.0;
  tc.adam_beta2 = 0.0;
  tc.lr = 1e-4;
  const TrainingLog log = train(view_of(model), f.task, f.train_set, f.val_set,
                                f.test_set, tc);
  CHECK(log.train_loss.back() < log.train_loss.front());
}

TEST_CASE("sgd resume from the training state reproduces a straight run") {
  Fixture f;
  for (const OptimizerKind opt : {OptimizerKind::kSgd, OptimizerKind::kAdam}) {
    Transformer straight(f.model_config(), InitScheme::kStandard, 19);
    TrainConfig tc = f.train_config(8);
    tc.optimizer = opt;
    const TrainingLog full = train(view_of(straight), f.task, f.train_set,
                                   f.val_set, f.test_set, tc);

    Transformer resumed(f.model_config(), InitScheme::kStandard, 19);
    TrainConfig first_half = tc;
    first_half.epochs = 4;
    ResumeState state;
    train(view_of(resumed), f.task, f.train_set, f.val_set, f.test_set,
          first_half, &state);
    TrainConfig second_half = tc;  // epochs = 8, resumes at 4
    const TrainingLog tail = train(view_of(resumed), f.task, f.train_set,
                                   f.val_set, f.test_set, second_half, &state);
    CHECK(tail.final_test_loss == full.final_test_loss);
    CHECK(tail.final_train_loss == full.final_train_loss);
  }
}

TEST_CASE("grad probe: zero rates and directional-derivative agreement") {
  TemplateTask task = make_builtin(Builtin::kCopy);
  task.vocab_size = 48;
  const Token lo = task.first_free_token();

  ModelConfig mc;
  mc.k = 1;
  mc.m = task.vocab_size;
  mc.d_emb = 32;
  mc.d_head = 8;
  mc.heads = 4;
  mc.use_mlp = false;
  mc.tie_embeddings = true;
  mc.output = OutputKind::kVocabLogits;
  mc.gamma = 0.5;
  mc.value_identity = true;

  Dataset train_set;
  train_set.k = 1;
  train_set.symbolic = true;
  train_set.alphabet = {lo, lo + 16};
  for (Token t = lo; t < lo + 16; ++t) {
    Sample s;
    s.tokens = {t};
    s.token_label = t;
    train_set.samples.push_back(s);
  }
  Sample test_sample;
  test_sample.tokens = {lo + 20};
  test_sample.token_label = lo + 20;

  Transformer model(mc, InitScheme::kMeanFieldCopy, 21);

  SUBCASE("all rates zero means both derivatives vanish") {
    const ProbeReport r =
        grad_probe(view_of(model), train_set, test_sample, true, {});
    CHECK(r.dtrain_dt == 0.0);
    CHECK(r.dtest_dt == 0.0);
  }

  SUBCASE("probe equals the finite-difference directional derivative") {
    const std::map<std::string, double> rates = {
        {"O", 0.25}, {"V", 4.0}, {"P", 1.0}, {"E", 1.0}, {"b", 0.25}};
    const ProbeReport r =
        grad_probe(view_of(model), train_set, test_sample, true, rates);

    // Step every group in the gradient-flow direction and difference the
    // losses directly.
    const ModelView view = view_of(model);
    std::vector<std::int32_t> train_tokens;
    std::vector<std::int32_t> train_labels;
    for (const auto& s : train_set.samples) {
      train_tokens.push_back(s.tokens[0]);
      train_labels.push_back(s.token_label);
    }
    auto train_loss_value = [&]() {
      return ce_mean(view.forward(train_tokens, train_tokens.size()),
                     train_labels)
          .value()
          .at(0);
    };
    auto test_loss_value = [&]() {
      return ce_mean(view.forward(test_sample.tokens, 1),
                     {test_sample.token_label})
          .value()
          .at(0);
    };
    const double train0 = train_loss_value();
    const double test0 = test_loss_value();

    Var loss = ce_mean(view.forward(train_tokens, train_tokens.size()),
                       train_labels);
    loss.backward();
    const double eps = 1e-5;
    for (const auto& [name, vars] : view.groups) {
      const auto it = rates.find(name);
      const double eta = it == rates.end() ? 0.0 : it->second;
      for (Var v : vars) {
        if (!v.has_grad()) continue;
        Tensor theta = v.value();
        for (std::size_t i = 0; i < theta.size(); ++i)
          theta.at(i) -= eps * eta * v.grad().at(i);
        v.set_value(theta);
        v.zero_grad();
      }
    }
    const double dtrain_fd = (train_loss_value() - train0) / eps;
    const double dtest_fd = (test_loss_value() - test0) / eps;
    CHECK(std::abs(dtrain_fd - r.dtrain_dt) <=
          1e-3 * std::max(1.0, std::abs(r.dtrain_dt)));
    CHECK(std::abs(dtest_fd - r.dtest_dt) <=
          1e-3 * std::max(std::abs(r.dtest_dt), 1e-3));
  }
}

TEST_CASE("sweep records cell errors without aborting and is job-invariant") {
  SweepSpec spec;
  spec.task = make_builtin(Builtin::kAbaVsAbb);
  spec.task.vocab_size = 600;
  ModelConfig mc;
  mc.d_emb = 8;
  mc.d_head = 4;
  mc.d_mlp = 8;
  mc.heads = 2;
  spec.variants.push_back({"vanilla", mc, InitScheme::kStandard});
  // n = 1 cannot host two distinct wildcard tokens: the cell must fail
  // cleanly while the remaining cells complete.
  spec.n_grid = {1, 24};
  spec.seeds = {0, 1};
  spec.base.epochs = 3;
  spec.base.batch_size = 16;
  spec.base.lr = 1e-3;
  spec.val_size = 8;
  spec.test_size = 8;
  spec.eval_alphabet = 16;

  const auto cells = run_sweep(spec);
  REQUIRE(cells.size() == 4);
  std::size_t failed = 0, ok = 0;
  for (const auto& c : cells) {
    if (c.ok)
      ++ok;
    else
      ++failed;
  }
  CHECK(failed == 2);
  CHECK(ok == 2);

  SweepSpec par = spec;
  par.jobs = 2;
  const auto cells2 = run_sweep(par);
  CHECK(sweep_to_csv(cells, "h") == sweep_to_csv(cells2, "h"));

  const auto summary = summarize_sweep(cells);
  CHECK(!summary.empty());

  SweepSpec bad = spec;
  bad.n_grid = {24, 1};
  CHECK_THROWS_AS(run_sweep(bad), Error);
}

TEST_CASE("mlp permutation test: exact coupling and matched means") {
  TemplateTask task = make_builtin(Builtin::kAbaVsAbb);
  task.vocab_size = 128;
  const Token lo = task.first_free_token();
  const TokenRange alpha{lo, lo + 48};
  MlpConfig mc;
  mc.k = 3;
  mc.m = task.vocab_size;
  mc.width = 24;
  mc.hidden_layers = 2;
  TrainConfig tc;
  tc.epochs = 8;
  tc.batch_size = 32;
  tc.seed = 3;

  const Token u1 = lo + 60, u2 = lo + 61;
  const std::vector<Token> x1 = {u1, u2, u1};
  const std::vector<Token> x2 = {u1, u2, u2};
  const auto report =
      mlp_permutation_test(mc, task, tc, 96, alpha, x1, x2, 12);
  CHECK(report.max_coupling_gap == 0.0);
  CHECK(std::abs(report.mean_f1 - report.mean_f2) <=
        3.0 * report.pooled_se + 1e-9);

  CHECK_THROWS_AS(
      mlp_permutation_test(mc, task, tc, 96, alpha, {lo, u2, lo}, x2, 2),
      Error);
}

TEST_CASE("a transformer separates unseen same/different where the mlp cannot") {
  // Contrast run: same protocol as the permutation test, transformer vs MLP
  // gap on two unseen strings with different relational structure.
  TemplateTask task = make_builtin(Builtin::kSameDifferent);
  task.vocab_size = 600;
  const Token lo = task.first_free_token();
  const TokenRange alpha{lo, lo + 128};
  const Dataset train_set = sample_dataset(task, 256, alpha, 5);
  const Dataset val_set = make_disjoint_eval_split(task, 32, alpha, 6, 64);
  const Dataset test_set =
      make_disjoint_eval_split(task, 32, val_set.alphabet, 7, 64);

  ModelConfig mc;
  mc.k = 2;
  mc.m = task.vocab_size;
  mc.d_emb = 24;
  mc.d_head = 12;
  mc.d_mlp = 32;
  mc.heads = 4;
  mc.attn_identity = true;
  Transformer model(mc, InitScheme::kStandard, 23);
  TrainConfig tc;
  tc.epochs = 120;
  tc.batch_size = 64;
  tc.lr = 3e-3;
  tc.seed = 11;
  train(view_of(model), task, train_set, val_set, test_set, tc);

  const Token c = lo + 400, d = lo + 401;
  const double f_same = model.forward_scalar({c, c}, 1).value().at(0);
  const double f_diff = model.forward_scalar({c, d}, 1).value().at(0);
  CHECK(std::abs(f_same - f_diff) > 0.5);
}

TEST_CASE("training only the value-identity strengths solves symbolic copying") {
  TemplateTask task = make_builtin(Builtin::kCopy);
  task.vocab_size = 128;
  const Token lo = task.first_free_token();
  const TokenRange alpha{lo, lo + 48};
  const Dataset train_set = sample_dataset(task, 96, alpha, 31);
  const Dataset val_set = make_disjoint_eval_split(task, 16, alpha, 32, 24);
  const Dataset test_set =
      make_disjoint_eval_split(task, 16, val_set.alphabet, 33, 24);

  ModelConfig mc;
  mc.k = 1;
  mc.m = task.vocab_size;
  mc.d_emb = 48;
  mc.d_head = 16;
  mc.heads = 4;
  mc.gamma = 0.0;
  mc.use_mlp = false;
  mc.tie_embeddings = true;
  mc.output = OutputKind::kVocabLogits;
  mc.value_identity = true;
  Transformer model(mc, InitScheme::kMeanFieldCopy, 34);

  // Only the per-head identity strengths are trainable here.
  ModelView b_only;
  for (const auto& [name, vars] : model.groups())
    if (name == "b") b_only.groups.emplace_back(name, vars);
  b_only.forward = [&model](const std::vector<std::int32_t>& tokens,
                            std::size_t batch) {
    return model.forward_logits(tokens, batch);
  };

  TrainConfig tc;
  tc.epochs = 120;
  tc.batch_size = 32;
  tc.lr = 3e-2;
  tc.seed = 35;
  tc.loss = LossKind::kCrossEntropy;
  const TrainingLog log =
      train(b_only, task, train_set, val_set, test_set, tc);
  // Fresh-token cross entropy falls well below the log(m) chance level.
  CHECK(log.best_test_loss < 0.5 * std::log(static_cast<double>(task.vocab_size)));
  double max_b = 0.0;
  for (const auto& layer : model.layers())
    for (const auto& head : layer.heads)
      max_b = std::max(max_b, std::abs(head.b.value().at(0)));
  CHECK(max_b > 0.05);
}
