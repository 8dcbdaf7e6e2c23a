#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reltask/task.hpp"
#include "reltask/tensor.hpp"

namespace reltask {

struct KernelEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for deterministic closed forms
  std::size_t n_samples = 0;
};

// E[cos(b1*u + b2) cos(b1*v + b2)] for (u,v) centered Gaussian with
// variances a, b and covariance rho.
double cosine_pair_expectation(double a, double b, double rho, double b1,
                               double b2);

// Attention random-features kernel value. Closed form at beta = 0; otherwise
// Monte-Carlo over the joint softmax features with shared token draws and
// shared positional draws, antithetic pairs for variance reduction.
KernelEstimate attn_kernel_value(const std::vector<Token>& x,
                                 const std::vector<Token>& y, double beta,
                                 double gamma, std::size_t mc_samples,
                                 Rng& stream);
double attn_kernel_beta0(const std::vector<Token>& x,
                         const std::vector<Token>& y, double gamma);

// Token-symmetric kernels on token strings. Kernels that are a closed-form
// lift of a base kernel expose the two-stage protocol so Gram assembly can
// cache base diagonal values.
class Kernel {
 public:
  virtual ~Kernel() = default;
  virtual std::string name() const = 0;
  virtual bool deterministic() const = 0;
  virtual KernelEstimate eval(const std::vector<Token>& x,
                              const std::vector<Token>& y, Rng& stream) const = 0;

  virtual bool has_base() const { return false; }
  virtual KernelEstimate base_eval(const std::vector<Token>& x,
                                   const std::vector<Token>& y,
                                   Rng& stream) const;
  virtual KernelEstimate lift(const KernelEstimate& base_xx,
                              const KernelEstimate& base_yy,
                              const KernelEstimate& base_xy) const;
};

class AttnKernel final : public Kernel {
 public:
  AttnKernel(double beta, double gamma, std::size_t mc_samples = 4096)
      : beta_(beta), gamma_(gamma), mc_(mc_samples) {}
  std::string name() const override { return "attn"; }
  bool deterministic() const override { return beta_ == 0.0; }
  KernelEstimate eval(const std::vector<Token>& x, const std::vector<Token>& y,
                      Rng& stream) const override;

 private:
  double beta_, gamma_;
  std::size_t mc_;
};

// Transformer random-features kernel: cosine lift of the attention kernel,
// with first-order error propagation from the base estimates.
class TransKernel final : public Kernel {
 public:
  TransKernel(double beta, double gamma, double b1, double b2,
              std::size_t mc_samples = 4096)
      : beta_(beta), gamma_(gamma), b1_(b1), b2_(b2), mc_(mc_samples) {}
  std::string name() const override { return "trans"; }
  bool deterministic() const override { return beta_ == 0.0; }
  KernelEstimate eval(const std::vector<Token>& x, const std::vector<Token>& y,
                      Rng& stream) const override;
  bool has_base() const override { return true; }
  KernelEstimate base_eval(const std::vector<Token>& x,
                           const std::vector<Token>& y,
                           Rng& stream) const override;
  KernelEstimate lift(const KernelEstimate& base_xx,
                      const KernelEstimate& base_yy,
                      const KernelEstimate& base_xy) const override;

 private:
  double beta_, gamma_, b1_, b2_;
  std::size_t mc_;
};

// Infinite-width MLP random-features kernel with cosine activation: an
// inner-product kernel, a function of the overlap count alone.
class MlpCosKernel final : public Kernel {
 public:
  MlpCosKernel(double b1 = 1.0, double b2 = 0.3) : b1_(b1), b2_(b2) {}
  std::string name() const override { return "mlp"; }
  bool deterministic() const override { return true; }
  KernelEstimate eval(const std::vector<Token>& x, const std::vector<Token>& y,
                      Rng& stream) const override;

 private:
  double b1_, b2_;
};

std::unique_ptr<Kernel> make_kernel(const std::string& name, double beta,
                                    double gamma, double b1, double b2,
                                    std::size_t mc_samples);

struct GramMatrix {
  Tensor values;      // n x n, symmetric by construction
  Tensor std_errors;  // n x n
  std::vector<std::size_t> block_of;  // source template per sample
  std::size_t blocks = 0;

  std::size_t size() const { return values.rows(); }
};

GramMatrix build_gram(const Kernel& kernel, const Dataset& ds,
                      std::uint64_t seed);

// Cross-kernel vector k(x) against a dataset.
std::vector<KernelEstimate> kernel_row(const Kernel& kernel, const Dataset& ds,
                                       const std::vector<Token>& x,
                                       std::uint64_t seed);

struct KrrModel {
  Tensor alpha;  // (K + lambda I)^{-1} y
  double lambda = 0.0;
};

KrrModel krr_fit(const GramMatrix& gram, const std::vector<double>& y,
                 double lambda);
double krr_predict(const KrrModel& model, const std::vector<double>& kvec);

// The r x r template-similarity matrix under fresh disjoint witnesses.
struct NMatrix {
  Tensor values;      // symmetrized
  Tensor std_errors;
  SubstitutionMap witness_s, witness_s_prime;
  double cond = 0.0;
  double det = 0.0;
};

NMatrix build_n_matrix(const TemplateTask& task, const Kernel& kernel,
                       std::uint64_t seed);

// Index of the template that x matches, if any.
std::optional<std::size_t> matching_template(const TemplateTask& task,
                                             const std::vector<Token>& x);

// Block-constant Gram implied by N over a sample partition.
GramMatrix idealized_gram(const NMatrix& n,
                          const std::vector<std::size_t>& block_of);

// Idealized ridge prediction for a test string matching template a. Solved
// exactly through the r x r block reduction.
double idealized_predict(const NMatrix& n,
                         const std::vector<std::size_t>& block_of,
                         const std::vector<double>& y, double lambda,
                         std::size_t a);

// The two displayed inequalities of the idealized-estimator perturbation
// claim, evaluated on a constructed idealized Gram.
struct IdealizedBounds {
  double tau = 0.0;
  double weight_norm = 0.0;       // ||(K_ideal + lambda I)^{-1} v_ideal||
  double weight_bound = 0.0;      // sqrt(1/|I_a|) tau/(tau-lambda)
  double deviation_norm = 0.0;    // ||1_{I_a}/|I_a| - w||
  double deviation_bound = 0.0;   // sqrt(1/|I_a|)(tau/(tau-lambda) - 1)
  bool hold = false;
};

IdealizedBounds idealized_bound_check(const NMatrix& n,
                                      const std::vector<std::size_t>& block_of,
                                      double lambda, std::size_t a);

struct BlockStats {
  Tensor block_mean;   // r x r
  Tensor block_sd;     // r x r
  double within_tol_fraction = 0.0;  // off-diagonal entries within 3 SE of N
  double alignment_min_cos = 0.0;    // top-r eigenspace vs block indicators
  double alignment_mean_sq_cos = 0.0;
};

BlockStats block_structure_stats(const GramMatrix& gram, const NMatrix& n);

struct UnseenEvalRow {
  std::uint64_t seed = 0;
  std::size_t template_index = 0;
  double prediction = 0.0;
  double truth = 0.0;
  double abs_error = 0.0;
};

// Thm-4.2-style protocol: train alphabet of size n, KRR fit, evaluation on
// fresh-token instantiations of every template.
std::vector<UnseenEvalRow> unseen_symbol_eval(const TemplateTask& task,
                                              const Kernel& kernel,
                                              std::size_t n, double lambda,
                                              const std::vector<std::uint64_t>& seeds,
                                              std::size_t tests_per_template = 8);

double median_abs_error(const std::vector<UnseenEvalRow>& rows);

std::string gram_to_csv(const GramMatrix& gram, const std::string& manifest_hash);
std::string nmatrix_to_json(const NMatrix& n);
std::string gram_report_to_json(const GramMatrix& gram, const NMatrix& n,
                                const BlockStats& stats);

}  // namespace reltask
