#include <doctest.h>

#include <cmath>
#include <numeric>

#include "reltask/kernel.hpp"
#include "reltask/task.hpp"

using namespace reltask;

TEST_CASE("uniform-softmax closed form values") {
  // beta = gamma = 0, X = Y with two distinct tokens: overlap 2 over k^2 = 4.
  Rng stream(1);
  const std::vector<Token> xy = {3, 4};
  const auto same = attn_kernel_value(xy, xy, 0.0, 0.0, 128, stream);
  CHECK(same.value == doctest::Approx(0.5));
  CHECK(same.std_error == 0.0);

  // beta = 0, gamma = 1, token-disjoint pair: gamma^2 k / k^2 = 1/2.
  const auto cross = attn_kernel_value({3, 4}, {5, 6}, 0.0, 1.0, 128, stream);
  CHECK(cross.value == doctest::Approx(0.5));
}

TEST_CASE("mc estimator is exact with zero variance at beta 0") {
  Rng s1(7), s2(8);
  const std::vector<Token> x = {1, 2, 2}, y = {2, 9, 1};
  const auto a = attn_kernel_value(x, y, 0.0, 0.7, 512, s1);
  const auto b = attn_kernel_value(x, y, 0.0, 0.7, 4096, s2);
  CHECK(a.value == b.value);
  CHECK(a.std_error == 0.0);
  CHECK(b.std_error == 0.0);
}

TEST_CASE("token relabeling with coupled seeds gives identical estimates") {
  Rng s1(5), s2(5);
  const auto a = attn_kernel_value({1, 2, 7}, {2, 2, 9}, 0.8, 0.5, 2048, s1);
  // Relabel 1->11, 2->12, 7->17, 9->19: same pattern, same stream.
  const auto b = attn_kernel_value({11, 12, 17}, {12, 12, 19}, 0.8, 0.5, 2048, s2);
  CHECK(a.value == b.value);
  CHECK(a.std_error == b.std_error);
}

TEST_CASE("mc estimate converges to the closed form at small beta") {
  // First-order consistency: at tiny beta the estimate sits near the beta=0
  // closed form, well within a few standard errors.
  Rng stream(11);
  const std::vector<Token> x = {1, 2, 3}, y = {1, 4, 5};
  const double closed = attn_kernel_beta0(x, y, 0.5);
  const auto est = attn_kernel_value(x, y, 0.01, 0.5, 20000, stream);
  CHECK(std::abs(est.value - closed) < std::max(5.0 * est.std_error, 1e-3));
}

TEST_CASE("cosine pair expectation closed form") {
  // b1 = 0 collapses to cos^2(b2) whatever the covariance.
  CHECK(cosine_pair_expectation(3.0, 0.5, 0.2, 0.0, 0.4) ==
        doctest::Approx(std::cos(0.4) * std::cos(0.4)));

  // X = Y (a = b = rho): 0.5 (exp(-2 b1^2 a) cos(2 b2) + 1).
  const double a = 0.8, b1 = 1.1, b2 = 0.3;
  CHECK(cosine_pair_expectation(a, a, a, b1, b2) ==
        doctest::Approx(0.5 * (std::exp(-2.0 * b1 * b1 * a) * std::cos(2 * b2) +
                               1.0)));
}

TEST_CASE("cosine lift matches a nested monte-carlo oracle") {
  Rng rng(13);
  for (int trial = 0; trial < 4; ++trial) {
    // Random admissible covariance.
    const double a = 0.3 + rng.uniform();
    const double b = 0.3 + rng.uniform();
    const double rho = (rng.uniform() * 2.0 - 1.0) * std::sqrt(a * b) * 0.9;
    const double b1 = 0.5 + rng.uniform();
    const double b2 = rng.uniform();
    const double closed = cosine_pair_expectation(a, b, rho, b1, b2);

    const std::size_t n = 200000;
    double sum = 0.0, sum_sq = 0.0;
    Rng mc = rng.split(trial);
    const double c = rho / std::sqrt(a);
    const double resid = std::sqrt(std::max(0.0, b - c * c));
    for (std::size_t i = 0; i < n; ++i) {
      const double g1 = mc.normal();
      const double g2 = mc.normal();
      const double u = std::sqrt(a) * g1;
      const double v = c * g1 + resid * g2;
      const double val = std::cos(b1 * u + b2) * std::cos(b1 * v + b2);
      sum += val;
      sum_sq += val * val;
    }
    const double mean = sum / n;
    const double se =
        std::sqrt(std::max(0.0, sum_sq / n - mean * mean) / n);
    CHECK(std::abs(mean - closed) <= 4.0 * se + 1e-12);
  }
}

TEST_CASE("krr trivial solutions") {
  GramMatrix gram;
  gram.values = Tensor::identity(4);
  gram.std_errors = Tensor(4, 4);
  gram.block_of = {0, 0, 1, 1};
  gram.blocks = 2;
  const std::vector<double> y = {1.0, -2.0, 0.5, 3.0};

  const KrrModel half = krr_fit(gram, y, 1.0);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<double> kvec(4, 0.0);
    kvec[i] = 1.0;
    CHECK(krr_predict(half, kvec) == doctest::Approx(y[i] / 2.0));
  }

  const KrrModel crushed = krr_fit(gram, y, 1e9);
  std::vector<double> kvec = {0.3, 0.1, 0.7, 0.2};
  double ynorm = 0.0;
  for (double v : y) ynorm += v * v;
  CHECK(std::abs(krr_predict(crushed, kvec)) <= 1e-6 * std::sqrt(ynorm));

  CHECK_THROWS_AS(krr_fit(gram, y, 0.0), Error);
  CHECK_THROWS_AS(krr_fit(gram, y, -1.0), Error);
}

TEST_CASE("inner-product kernel cannot separate fresh same/different strings") {
  TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
  task.vocab_size = 300;
  const Token lo = task.first_free_token();
  const Dataset ds = sample_dataset(task, 48, {lo, lo + 48}, 3);
  const MlpCosKernel kernel;
  const GramMatrix gram = build_gram(kernel, ds, 1);
  const KrrModel krr = krr_fit(gram, ds.real_labels(), 12.0);

  const Token c = lo + 100, d = lo + 101;
  auto kvec = [&](const std::vector<Token>& x) {
    const auto kes = kernel_row(kernel, ds, x, 9);
    std::vector<double> kv(kes.size());
    for (std::size_t i = 0; i < kes.size(); ++i) kv[i] = kes[i].value;
    return kv;
  };
  const double pcc = krr_predict(krr, kvec({c, c, kClsToken}));
  const double pcd = krr_predict(krr, kvec({c, d, kClsToken}));
  CHECK(pcc == pcd);  // exact collapse
}

TEST_CASE("gram symmetry and ridge positivity for a deterministic kernel") {
  TemplateTask task = with_cls(make_builtin(Builtin::kAbaVsAbb));
  task.vocab_size = 300;
  const Token lo = task.first_free_token();
  const Dataset ds = sample_dataset(task, 40, {lo, lo + 40}, 5);
  const AttnKernel kernel(0.0, 0.7);
  const GramMatrix gram = build_gram(kernel, ds, 2);
  for (std::size_t i = 0; i < gram.size(); ++i)
    for (std::size_t j = 0; j < gram.size(); ++j)
      CHECK(std::abs(gram.values.at(i, j) - gram.values.at(j, i)) <= 1e-9);
  // Eigenvalues of K + lambda I stay above lambda - 1e-9 for a true kernel.
  const double lambda = 1.0;
  Tensor shifted = gram.values;
  for (std::size_t i = 0; i < gram.size(); ++i) shifted.at(i, i) += lambda;
  const auto sv = singular_values(shifted);
  CHECK_NOTHROW(solve_spd(shifted, Tensor(std::vector<std::size_t>{gram.size()}, 1.0)));
  CHECK(sv.back() >= lambda - 1e-9);
}

TEST_CASE("n-matrix: inner-product kernel is singular on same/different") {
  const TemplateTask task = make_builtin(Builtin::kSameDifferent);
  const MlpCosKernel kernel;
  const NMatrix n = build_n_matrix(task, kernel, 7);
  // No CLS: every witness pair is token-disjoint, all entries equal.
  CHECK(n.values.at(0, 0) == n.values.at(0, 1));
  CHECK(n.values.at(0, 0) == n.values.at(1, 1));
  CHECK(std::abs(n.det) < 1e-10);
  CHECK(std::isinf(n.cond));
}

TEST_CASE("n-matrix: transformer kernel is well conditioned at a generic point") {
  TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
  const TransKernel kernel(0.5, 0.5, 1.0, 0.3, 4096);
  const NMatrix n = build_n_matrix(task, kernel, 3);
  CHECK(std::isfinite(n.cond));
  CHECK(n.cond < 1e6);
}

TEST_CASE("n-matrix witnesses are interchangeable up to mc error") {
  TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
  const TransKernel kernel(0.5, 0.5, 1.0, 0.3, 8192);
  const NMatrix first = build_n_matrix(task, kernel, 11);
  for (std::uint64_t seed = 12; seed < 16; ++seed) {
    const NMatrix other = build_n_matrix(task, kernel, seed);
    CHECK(first.witness_s != other.witness_s);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) {
        const double se =
            std::sqrt(std::pow(first.std_errors.at(i, j), 2) +
                      std::pow(other.std_errors.at(i, j), 2));
        CHECK(std::abs(first.values.at(i, j) - other.values.at(i, j)) <=
              3.0 * se + 1e-9);
      }
  }
}

TEST_CASE("token symmetry of every implemented kernel") {
  const std::vector<Token> x = {2, 3, 3, 0}, y = {3, 5, 2, 0};
  std::vector<Token> px = {12, 13, 13, 10}, py = {13, 15, 12, 10};
  for (const auto* name : {"attn", "trans", "mlp"}) {
    const auto kernel = make_kernel(name, 0.7, 0.4, 1.0, 0.3, 1024);
    Rng s1(3), s2(3);
    const auto a = kernel->eval(x, y, s1);
    const auto b = kernel->eval(px, py, s2);
    CHECK(a.value == b.value);
  }
}

TEST_CASE("idealized gram: exact blocks, bounds, and prediction") {
  TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
  task.vocab_size = 400;
  const Token lo = task.first_free_token();
  const Dataset ds = sample_dataset(task, 64, {lo, lo + 128}, 13);
  const TransKernel kernel(0.5, 0.5, 1.0, 0.3, 2048);
  const NMatrix n = build_n_matrix(task, kernel, 5);
  std::vector<std::size_t> block_of;
  for (const auto& s : ds.samples) block_of.push_back(s.template_index);
  const GramMatrix ideal = idealized_gram(n, block_of);

  SUBCASE("within-block deviation is zero and alignment is one") {
    const BlockStats stats = block_structure_stats(ideal, n);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        CHECK(stats.block_sd.at(i, j) <= 1e-12);
    CHECK(stats.within_tol_fraction == doctest::Approx(1.0));
    CHECK(stats.alignment_min_cos == doctest::Approx(1.0).epsilon(1e-6));
  }

  SUBCASE("perturbation bounds hold for admissible ridge values") {
    const auto counts = [&]() {
      std::vector<std::size_t> c(2, 0);
      for (const auto& s : ds.samples) c[s.template_index]++;
      return c;
    }();
    const auto sv = singular_values(n.values);
    const double tau =
        static_cast<double>(*std::min_element(counts.begin(), counts.end())) *
        sv.back();
    for (const double lambda : {tau / 8.0, tau / 2.0}) {
      for (std::size_t a = 0; a < 2; ++a) {
        const auto bounds = idealized_bound_check(n, ideal.block_of, lambda, a);
        CHECK(bounds.hold);
        CHECK(bounds.weight_norm <= bounds.weight_bound + 1e-9);
        CHECK(bounds.deviation_norm <= bounds.deviation_bound + 1e-9);
      }
    }
  }

  SUBCASE("idealized prediction approaches the template label at small ridge") {
    const auto y = ds.real_labels();
    const auto sv = singular_values(n.values);
    const double tau = 0.5 * 64.0 * sv.back();
    const double f_same = idealized_predict(n, ideal.block_of, y, tau / 16.0, 0);
    const double f_diff = idealized_predict(n, ideal.block_of, y, tau / 16.0, 1);
    CHECK(std::abs(f_same - 1.0) < 0.2);
    CHECK(std::abs(f_diff + 1.0) < 0.2);
  }
}

TEST_CASE("block structure sharpens with diversity and sample count") {
  TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
  task.vocab_size = 3000;
  const Token lo = task.first_free_token();
  const AttnKernel kernel(0.0, 0.7);  // deterministic, closed form
  const std::size_t n = 64;

  SUBCASE("off-pattern fraction decreases as rho grows") {
    const NMatrix nm = build_n_matrix(task, kernel, 2);
    std::vector<double> off_fraction;
    for (const std::size_t alpha : {n / 4, n / 2, n, 4 * n}) {
      const Dataset ds = sample_dataset(
          task, n, {lo, lo + static_cast<Token>(alpha)}, 21);
      const GramMatrix gram = build_gram(kernel, ds, 3);
      const BlockStats stats = block_structure_stats(gram, nm);
      off_fraction.push_back(1.0 - stats.within_tol_fraction);
    }
    CHECK(off_fraction.back() < off_fraction.front());
    for (std::size_t i = 1; i < off_fraction.size(); ++i)
      CHECK(off_fraction[i] <= off_fraction[i - 1] + 0.02);
  }

  SUBCASE("eigenspace alignment grows with n (median over seeds)") {
    // Templates with repeated regular tokens give the uniform-softmax kernel
    // a nonsingular N-matrix, so the trend is visible without MC noise.
    TemplateTask reg_task;
    reg_task.k = 4;
    reg_task.vocab_size = 3000;
    reg_task.n_wildcards = 2;
    Template z1, z2;
    z1.symbols = {TemplateSymbol::regular(1), TemplateSymbol::regular(1),
                  TemplateSymbol::wildcard(0), TemplateSymbol::regular(kClsToken)};
    z1.label = TemplateLabel::real_value(1.0);
    z2.symbols = {TemplateSymbol::regular(1), TemplateSymbol::wildcard(0),
                  TemplateSymbol::wildcard(1), TemplateSymbol::regular(kClsToken)};
    z2.label = TemplateLabel::real_value(-1.0);
    reg_task.templates = {z1, z2};
    reg_task.weights = {0.5, 0.5};
    reg_task.validate_disjoint();
    const Token rlo = reg_task.first_free_token();

    const NMatrix nm = build_n_matrix(reg_task, kernel, 2);
    CHECK(std::isfinite(nm.cond));
    std::vector<double> medians;
    for (const std::size_t nn : {16, 48, 128}) {
      std::vector<double> aligns;
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset ds = sample_dataset(
            reg_task, nn, {rlo, rlo + static_cast<Token>(8 * nn)}, 100 + seed);
        const GramMatrix gram = build_gram(kernel, ds, seed);
        aligns.push_back(block_structure_stats(gram, nm).alignment_min_cos);
      }
      std::sort(aligns.begin(), aligns.end());
      medians.push_back(aligns[2]);
    }
    CHECK(medians[0] <= medians[1] + 1e-6);
    CHECK(medians[1] <= medians[2] + 1e-6);
    CHECK(medians[2] > medians[0]);
  }
}

TEST_CASE("unseen symbol eval smoke") {
  TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
  const AttnKernel kernel(0.0, 0.7);
  const auto rows = unseen_symbol_eval(task, kernel, 32, 8.0, {1, 2}, 4);
  CHECK(rows.size() == 2 * 2 * 4);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.prediction));
    CHECK(r.abs_error == std::abs(r.prediction - r.truth));
  }
  CHECK(median_abs_error(rows) >= 0.0);
}
