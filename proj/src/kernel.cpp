#include "reltask/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

namespace reltask {

double cosine_pair_expectation(double a, double b, double rho, double b1,
                               double b2) {
  const double k2 = b1 * b1;
  return 0.5 * std::exp(-0.5 * k2 * (a + b)) *
         (std::exp(-k2 * rho) * std::cos(2.0 * b2) + std::exp(k2 * rho));
}

double attn_kernel_beta0(const std::vector<Token>& x,
                         const std::vector<Token>& y, double gamma) {
  // Uniform softmax rows: 1^T (XY^T + gamma^2 I) 1 / k^2.
  const double k = static_cast<double>(x.size());
  double overlap = 0.0;
  for (Token xi : x)
    for (Token yj : y) overlap += xi == yj ? 1.0 : 0.0;
  return (overlap + gamma * gamma * k) / (k * k);
}

namespace {

struct PairPattern {
  std::vector<std::size_t> x_slot, y_slot;  // shared token draw slots
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // x_i == y_j
  std::size_t slots = 0;
};

PairPattern make_pattern(const std::vector<Token>& x,
                         const std::vector<Token>& y) {
  PairPattern p;
  std::unordered_map<Token, std::size_t> slot;
  auto slot_of = [&](Token t) {
    return slot.emplace(t, slot.size()).first->second;
  };
  for (Token t : x) p.x_slot.push_back(slot_of(t));
  for (Token t : y) p.y_slot.push_back(slot_of(t));
  p.slots = slot.size();
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (x[i] == y[j]) p.matches.emplace_back(i, j);
  return p;
}

void softmax_inplace(std::vector<double>& v) {
  double m = v[0];
  for (double t : v) m = std::max(m, t);
  double denom = 0.0;
  for (double& t : v) {
    t = std::exp(t - m);
    denom += t;
  }
  for (double& t : v) t /= denom;
}

}  // namespace

KernelEstimate attn_kernel_value(const std::vector<Token>& x,
                                 const std::vector<Token>& y, double beta,
                                 double gamma, std::size_t mc_samples,
                                 Rng& stream) {
  if (x.size() != y.size())
    fail(ErrorKind::kDimension, "attn kernel: inputs must share length");
  if (beta == 0.0) return {attn_kernel_beta0(x, y, gamma), 0.0, 0};

  const std::size_t k = x.size();
  const PairPattern pat = make_pattern(x, y);
  const std::size_t pairs = std::max<std::size_t>(1, mc_samples / 2);
  const double g2 = gamma * gamma;

  std::vector<double> zeta(pat.slots), pos(k), mx(k), my(k);
  auto one_draw = [&](double sign) {
    for (std::size_t i = 0; i < k; ++i) {
      mx[i] = beta * (sign * zeta[pat.x_slot[i]] + gamma * sign * pos[i]);
      my[i] = beta * (sign * zeta[pat.y_slot[i]] + gamma * sign * pos[i]);
    }
    softmax_inplace(mx);
    softmax_inplace(my);
    double v = 0.0;
    for (const auto& [i, j] : pat.matches) v += mx[i] * my[j];
    if (g2 != 0.0)
      for (std::size_t i = 0; i < k; ++i) v += g2 * mx[i] * my[i];
    return v;
  };

  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < pairs; ++s) {
    for (double& z : zeta) z = stream.normal();
    for (double& p : pos) p = stream.normal();
    const double v = 0.5 * (one_draw(1.0) + one_draw(-1.0));
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(pairs);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  return {mean, std::sqrt(var / n), 2 * pairs};
}

KernelEstimate Kernel::base_eval(const std::vector<Token>&,
                                 const std::vector<Token>&, Rng&) const {
  fail(ErrorKind::kContract, "kernel has no base stage");
}

KernelEstimate Kernel::lift(const KernelEstimate&, const KernelEstimate&,
                            const KernelEstimate&) const {
  fail(ErrorKind::kContract, "kernel has no lift stage");
}

KernelEstimate AttnKernel::eval(const std::vector<Token>& x,
                                const std::vector<Token>& y,
                                Rng& stream) const {
  return attn_kernel_value(x, y, beta_, gamma_, mc_, stream);
}

KernelEstimate TransKernel::base_eval(const std::vector<Token>& x,
                                      const std::vector<Token>& y,
                                      Rng& stream) const {
  return attn_kernel_value(x, y, beta_, gamma_, mc_, stream);
}

KernelEstimate TransKernel::lift(const KernelEstimate& base_xx,
                                 const KernelEstimate& base_yy,
                                 const KernelEstimate& base_xy) const {
  const double a = base_xx.value;
  const double b = base_yy.value;
  const double rho = base_xy.value;
  const double k2 = b1_ * b1_;
  KernelEstimate out;
  out.value = cosine_pair_expectation(a, b, rho, b1_, b2_);
  // First-order propagation from the three attention estimates.
  const double dv_da = -0.5 * k2 * out.value;
  const double dv_db = dv_da;
  const double dv_drho = 0.5 * std::exp(-0.5 * k2 * (a + b)) * k2 *
                         (std::exp(k2 * rho) -
                          std::exp(-k2 * rho) * std::cos(2.0 * b2_));
  out.std_error = std::sqrt(std::pow(dv_da * base_xx.std_error, 2) +
                            std::pow(dv_db * base_yy.std_error, 2) +
                            std::pow(dv_drho * base_xy.std_error, 2));
  out.n_samples = base_xy.n_samples;
  return out;
}

KernelEstimate TransKernel::eval(const std::vector<Token>& x,
                                 const std::vector<Token>& y,
                                 Rng& stream) const {
  Rng sxx = stream.split("xx");
  Rng syy = stream.split("yy");
  Rng sxy = stream.split("xy");
  return lift(base_eval(x, x, sxx), base_eval(y, y, syy), base_eval(x, y, sxy));
}

KernelEstimate MlpCosKernel::eval(const std::vector<Token>& x,
                                  const std::vector<Token>& y, Rng&) const {
  if (x.size() != y.size())
    fail(ErrorKind::kDimension, "mlp kernel: inputs must share length");
  const double k = static_cast<double>(x.size());
  double overlap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] == y[i]) overlap += 1.0;
  return {cosine_pair_expectation(k, k, overlap, b1_, b2_), 0.0, 0};
}

std::unique_ptr<Kernel> make_kernel(const std::string& name, double beta,
                                    double gamma, double b1, double b2,
                                    std::size_t mc_samples) {
  if (name == "attn") return std::make_unique<AttnKernel>(beta, gamma, mc_samples);
  if (name == "trans")
    return std::make_unique<TransKernel>(beta, gamma, b1, b2, mc_samples);
  if (name == "mlp") return std::make_unique<MlpCosKernel>(b1, b2);
  fail(ErrorKind::kArgument, "unknown kernel: " + name);
}

GramMatrix build_gram(const Kernel& kernel, const Dataset& ds,
                      std::uint64_t seed) {
  const std::size_t n = ds.size();
  GramMatrix gram;
  gram.values = Tensor(n, n);
  gram.std_errors = Tensor(n, n);
  gram.block_of.reserve(n);
  std::size_t max_block = 0;
  for (const Sample& s : ds.samples) {
    gram.block_of.push_back(s.template_index);
    max_block = std::max(max_block, s.template_index);
  }
  gram.blocks = n == 0 ? 0 : max_block + 1;

  const Rng root = Rng(seed).split("gram");
  std::vector<KernelEstimate> diag(n);
  if (kernel.has_base()) {
    for (std::size_t i = 0; i < n; ++i) {
      Rng stream = root.split("diag").split(i);
      diag[i] =
          kernel.base_eval(ds.samples[i].tokens, ds.samples[i].tokens, stream);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      // Entries are independent jobs keyed by (i, j).
      Rng stream = root.split(i * n + j);
      KernelEstimate e;
      if (kernel.has_base()) {
        const KernelEstimate cross =
            i == j ? diag[i]
                   : kernel.base_eval(ds.samples[i].tokens,
                                      ds.samples[j].tokens, stream);
        e = kernel.lift(diag[i], diag[j], cross);
      } else {
        e = kernel.eval(ds.samples[i].tokens, ds.samples[j].tokens, stream);
      }
      gram.values.at(i, j) = gram.values.at(j, i) = e.value;
      gram.std_errors.at(i, j) = gram.std_errors.at(j, i) = e.std_error;
    }
  }
  return gram;
}

std::vector<KernelEstimate> kernel_row(const Kernel& kernel, const Dataset& ds,
                                       const std::vector<Token>& x,
                                       std::uint64_t seed) {
  const Rng root = Rng(seed).split("krow");
  const std::size_t n = ds.size();
  std::vector<KernelEstimate> out(n);
  KernelEstimate diag_x;
  std::vector<KernelEstimate> diag(n);
  if (kernel.has_base()) {
    Rng sx = root.split("diag_x");
    diag_x = kernel.base_eval(x, x, sx);
    for (std::size_t i = 0; i < n; ++i) {
      Rng si = root.split("diag").split(i);
      diag[i] = kernel.base_eval(ds.samples[i].tokens, ds.samples[i].tokens, si);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    Rng stream = root.split(i);
    if (kernel.has_base()) {
      const KernelEstimate cross =
          kernel.base_eval(ds.samples[i].tokens, x, stream);
      out[i] = kernel.lift(diag[i], diag_x, cross);
    } else {
      out[i] = kernel.eval(ds.samples[i].tokens, x, stream);
    }
  }
  return out;
}

KrrModel krr_fit(const GramMatrix& gram, const std::vector<double>& y,
                 double lambda) {
  if (lambda <= 0.0)
    fail(ErrorKind::kContract, "krr_fit: lambda must be positive");
  if (y.size() != gram.size())
    fail(ErrorKind::kDimension, "krr_fit: label count mismatch");
  Tensor shifted = gram.values;
  for (std::size_t i = 0; i < gram.size(); ++i)
    shifted.at(i, i) += lambda;
  KrrModel model;
  model.lambda = lambda;
  model.alpha = solve_spd(shifted, Tensor::vector(y));
  return model;
}

double krr_predict(const KrrModel& model, const std::vector<double>& kvec) {
  if (kvec.size() != model.alpha.size())
    fail(ErrorKind::kDimension, "krr_predict: kernel vector length mismatch");
  double out = 0.0;
  for (std::size_t i = 0; i < kvec.size(); ++i)
    out += model.alpha.at(i) * kvec[i];
  return out;
}

NMatrix build_n_matrix(const TemplateTask& task, const Kernel& kernel,
                       std::uint64_t seed) {
  task.validate();
  const std::size_t r = task.templates.size();
  const std::int32_t w = task.n_wildcards;
  const Token top_lo = task.vocab_size - static_cast<Token>(4 * w);
  if (top_lo <= task.first_free_token())
    fail(ErrorKind::kValidation,
         "build_n_matrix: vocabulary too small for fresh disjoint witnesses");

  // Fresh witness tokens from the top of the vocabulary; randomized so that
  // independent draws give genuinely different witnesses.
  Rng rng = Rng(seed).split("witness");
  const auto picks =
      rng.sample_distinct(static_cast<std::uint64_t>(4 * w), 2 * w);
  NMatrix n;
  for (std::int32_t i = 0; i < w; ++i) {
    n.witness_s[i] = top_lo + static_cast<Token>(picks[i]);
    n.witness_s_prime[i] = top_lo + static_cast<Token>(picks[w + i]);
  }

  std::vector<std::vector<Token>> xs(r), ys(r);
  for (std::size_t j = 0; j < r; ++j) {
    xs[j] = substitute(task.templates[j], n.witness_s).tokens;
    ys[j] = substitute(task.templates[j], n.witness_s_prime).tokens;
  }

  Tensor raw(r, r), raw_se(r, r);
  const Rng root = Rng(seed).split("n_entries");
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      Rng stream = root.split(i * r + j);
      const KernelEstimate e = kernel.eval(xs[i], ys[j], stream);
      raw.at(i, j) = e.value;
      raw_se.at(i, j) = e.std_error;
    }

  n.values = Tensor(r, r);
  n.std_errors = Tensor(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j) {
      n.values.at(i, j) = 0.5 * (raw.at(i, j) + raw.at(j, i));
      n.std_errors.at(i, j) = 0.5 * std::sqrt(raw_se.at(i, j) * raw_se.at(i, j) +
                                              raw_se.at(j, i) * raw_se.at(j, i));
    }
  n.cond = condition_number(n.values);
  n.det = determinant(n.values);
  return n;
}

std::optional<std::size_t> matching_template(const TemplateTask& task,
                                             const std::vector<Token>& x) {
  for (std::size_t j = 0; j < task.templates.size(); ++j)
    if (matches(x, task.templates[j])) return j;
  return std::nullopt;
}

GramMatrix idealized_gram(const NMatrix& n,
                          const std::vector<std::size_t>& block_of) {
  GramMatrix gram;
  const std::size_t size = block_of.size();
  gram.values = Tensor(size, size);
  gram.std_errors = Tensor(size, size);
  gram.block_of = block_of;
  gram.blocks = n.values.rows();
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      gram.values.at(i, j) = n.values.at(block_of[i], block_of[j]);
      gram.std_errors.at(i, j) = n.std_errors.at(block_of[i], block_of[j]);
    }
  return gram;
}

namespace {

// Block reduction of (K_ideal + lambda I) w = v for block-constant v: the
// weight vector is block-constant with coefficients solving
// (N diag(|I_j|) + lambda I) c = v_block.
std::vector<double> idealized_weights(const NMatrix& n,
                                      const std::vector<std::size_t>& counts,
                                      double lambda, std::size_t a) {
  const std::size_t r = n.values.rows();
  Tensor m(r, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < r; ++j)
      m.at(i, j) = n.values.at(i, j) * static_cast<double>(counts[j]) +
                   (i == j ? lambda : 0.0);
  Tensor vb({r});
  for (std::size_t i = 0; i < r; ++i) vb.at(i) = n.values.at(i, a);
  const Tensor c = solve_general(m, vb);
  std::vector<double> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = c.at(i);
  return out;
}

std::vector<std::size_t> block_counts(const std::vector<std::size_t>& block_of,
                                      std::size_t r) {
  std::vector<std::size_t> counts(r, 0);
  for (std::size_t b : block_of) counts[b]++;
  return counts;
}

}  // namespace

double idealized_predict(const NMatrix& n,
                         const std::vector<std::size_t>& block_of,
                         const std::vector<double>& y, double lambda,
                         std::size_t a) {
  const std::size_t r = n.values.rows();
  const auto counts = block_counts(block_of, r);
  const auto c = idealized_weights(n, counts, lambda, a);
  double out = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) out += c[block_of[i]] * y[i];
  return out;
}

IdealizedBounds idealized_bound_check(const NMatrix& n,
                                      const std::vector<std::size_t>& block_of,
                                      double lambda, std::size_t a) {
  const std::size_t r = n.values.rows();
  const auto counts = block_counts(block_of, r);
  const auto sv = singular_values(n.values);
  const double sigma_min = sv.back();
  const std::size_t min_count = *std::min_element(counts.begin(), counts.end());
  IdealizedBounds out;
  out.tau = static_cast<double>(min_count) * sigma_min;
  if (lambda <= 0.0 || lambda >= out.tau) {
    out.hold = false;
    return out;
  }
  const auto c = idealized_weights(n, counts, lambda, a);
  double wnorm2 = 0.0, dev2 = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    wnorm2 += static_cast<double>(counts[j]) * c[j] * c[j];
    const double target = j == a ? 1.0 / static_cast<double>(counts[a]) : 0.0;
    dev2 += static_cast<double>(counts[j]) * (c[j] - target) * (c[j] - target);
  }
  out.weight_norm = std::sqrt(wnorm2);
  out.deviation_norm = std::sqrt(dev2);
  const double root_ia = std::sqrt(1.0 / static_cast<double>(counts[a]));
  out.weight_bound = root_ia * out.tau / (out.tau - lambda);
  out.deviation_bound = root_ia * (out.tau / (out.tau - lambda) - 1.0);
  const double slack = 1e-9;
  out.hold = out.weight_norm <= out.weight_bound + slack &&
             out.deviation_norm <= out.deviation_bound + slack;
  return out;
}

BlockStats block_structure_stats(const GramMatrix& gram, const NMatrix& n) {
  const std::size_t r = n.values.rows();
  const std::size_t size = gram.size();
  BlockStats stats;
  stats.block_mean = Tensor(r, r);
  stats.block_sd = Tensor(r, r);
  Tensor count(r, r), sum(r, r);
  std::size_t considered = 0, within = 0;
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      if (i == j) continue;  // self-similarities are genuine exceptions
      const std::size_t bi = gram.block_of[i];
      const std::size_t bj = gram.block_of[j];
      const double v = gram.values.at(i, j);
      count.at(bi, bj) += 1.0;
      sum.at(bi, bj) += v;
      const double tol =
          3.0 * std::sqrt(std::pow(gram.std_errors.at(i, j), 2) +
                          std::pow(n.std_errors.at(bi, bj), 2)) +
          1e-9;
      ++considered;
      if (std::abs(v - n.values.at(bi, bj)) <= tol) ++within;
    }
  for (std::size_t bi = 0; bi < r; ++bi)
    for (std::size_t bj = 0; bj < r; ++bj)
      if (count.at(bi, bj) > 0.0)
        stats.block_mean.at(bi, bj) = sum.at(bi, bj) / count.at(bi, bj);
  Tensor dev_sq(r, r);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      if (i == j) continue;
      const std::size_t bi = gram.block_of[i];
      const std::size_t bj = gram.block_of[j];
      const double d = gram.values.at(i, j) - stats.block_mean.at(bi, bj);
      dev_sq.at(bi, bj) += d * d;
    }
  for (std::size_t bi = 0; bi < r; ++bi)
    for (std::size_t bj = 0; bj < r; ++bj)
      if (count.at(bi, bj) > 0.0)
        stats.block_sd.at(bi, bj) =
            std::sqrt(dev_sq.at(bi, bj) / count.at(bi, bj));
  stats.within_tol_fraction =
      considered == 0 ? 1.0
                      : static_cast<double>(within) /
                            static_cast<double>(considered);

  // Principal angles between the top-r eigenspace and the span of the
  // normalized block indicators.
  const auto counts = block_counts(gram.block_of, r);
  Tensor indicators(size, r);
  for (std::size_t i = 0; i < size; ++i)
    indicators.at(i, gram.block_of[i]) =
        1.0 / std::sqrt(static_cast<double>(counts[gram.block_of[i]]));
  const Tensor top = top_eigenvectors_sym(gram.values, r);
  const Tensor overlap = matmul(top, indicators, true, false);  // r x r
  const auto cosines = singular_values(overlap);
  stats.alignment_min_cos = cosines.back();
  double mean_sq = 0.0;
  for (double c : cosines) mean_sq += c * c;
  stats.alignment_mean_sq_cos = mean_sq / static_cast<double>(r);
  return stats;
}

std::vector<UnseenEvalRow> unseen_symbol_eval(
    const TemplateTask& task, const Kernel& kernel, std::size_t n,
    double lambda, const std::vector<std::uint64_t>& seeds,
    std::size_t tests_per_template) {
  TemplateTask local = task;
  const Token lo = local.first_free_token();
  const std::size_t test_alpha =
      std::max<std::size_t>(16, 2 * static_cast<std::size_t>(local.n_wildcards) *
                                    tests_per_template);
  const Token needed = lo + static_cast<Token>(n + test_alpha);
  local.vocab_size = std::max(local.vocab_size, needed);

  std::vector<UnseenEvalRow> rows;
  for (std::uint64_t seed : seeds) {
    const TokenRange train_alpha{lo, lo + static_cast<Token>(n)};
    const Dataset train_set =
        sample_dataset(local, n, train_alpha, Rng(seed).split("train").next_u64());
    const GramMatrix gram =
        build_gram(kernel, train_set, Rng(seed).split("gram").next_u64());
    const KrrModel krr = krr_fit(gram, train_set.real_labels(), lambda);

    TemplateTask noiseless = local;
    noiseless.sigma = 0.0;
    const std::size_t n_test = tests_per_template * local.templates.size();
    const Dataset test_set = make_disjoint_eval_split(
        noiseless, n_test, train_alpha, seed ^ 0x7e57u, test_alpha);
    for (std::size_t t = 0; t < test_set.size(); ++t) {
      const Sample& s = test_set.samples[t];
      const auto kes =
          kernel_row(kernel, train_set, s.tokens,
                     Rng(seed).split("test_row").split(t).next_u64());
      std::vector<double> kvec(kes.size());
      for (std::size_t i = 0; i < kes.size(); ++i) kvec[i] = kes[i].value;
      UnseenEvalRow row;
      row.seed = seed;
      row.template_index = s.template_index;
      row.prediction = krr_predict(krr, kvec);
      row.truth = s.real_label;
      row.abs_error = std::abs(row.prediction - row.truth);
      rows.push_back(row);
    }
  }
  return rows;
}

double median_abs_error(const std::vector<UnseenEvalRow>& rows) {
  std::vector<double> errs;
  errs.reserve(rows.size());
  for (const auto& r : rows) errs.push_back(r.abs_error);
  std::sort(errs.begin(), errs.end());
  if (errs.empty()) return 0.0;
  const std::size_t n = errs.size();
  return n % 2 == 1 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
}

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json tensor_to_json_rows(const Tensor& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < t.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string gram_to_csv(const GramMatrix& gram,
                        const std::string& manifest_hash) {
  std::ostringstream out;
  out << "# manifest=" << manifest_hash << "\n";
  out << "i,j,block_i,block_j,value,std_error\n";
  for (std::size_t i = 0; i < gram.size(); ++i)
    for (std::size_t j = 0; j < gram.size(); ++j)
      out << i << "," << j << "," << gram.block_of[i] << "," << gram.block_of[j]
          << "," << fmt_double(gram.values.at(i, j)) << ","
          << fmt_double(gram.std_errors.at(i, j)) << "\n";
  return out.str();
}

std::string nmatrix_to_json(const NMatrix& n) {
  nlohmann::json j;
  j["values"] = tensor_to_json_rows(n.values);
  j["std_errors"] = tensor_to_json_rows(n.std_errors);
  j["condition_number"] = std::isfinite(n.cond) ? nlohmann::json(n.cond)
                                                : nlohmann::json("inf");
  j["determinant"] = n.det;
  nlohmann::json ws, wsp;
  for (const auto& [w, t] : n.witness_s) ws[std::to_string(w)] = t;
  for (const auto& [w, t] : n.witness_s_prime) wsp[std::to_string(w)] = t;
  j["witness_s"] = ws;
  j["witness_s_prime"] = wsp;
  return j.dump(2);
}

std::string gram_report_to_json(const GramMatrix& gram, const NMatrix& n,
                                const BlockStats& stats) {
  nlohmann::json j;
  j["n"] = gram.size();
  j["blocks"] = gram.blocks;
  j["partition"] = gram.block_of;
  j["condition_number"] = std::isfinite(n.cond) ? nlohmann::json(n.cond)
                                                : nlohmann::json("inf");
  j["n_matrix"] = tensor_to_json_rows(n.values);
  j["block_stats"] = {
      {"block_mean", tensor_to_json_rows(stats.block_mean)},
      {"block_sd", tensor_to_json_rows(stats.block_sd)},
      {"within_tol_fraction", stats.within_tol_fraction},
      {"alignment_min_cos", stats.alignment_min_cos},
      {"alignment_mean_sq_cos", stats.alignment_mean_sq_cos},
  };
  return j.dump(2);
}

}  // namespace reltask
