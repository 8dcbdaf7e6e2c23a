#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "reltask/tensor.hpp"

namespace reltask {

// Elementwise nonlinearity. Cosine carries its two shift/scale
// hyperparameters; they are fixed configuration, not trained.
struct Activation {
  enum class Kind { kCosine, kRelu, kTanh };
  Kind kind = Kind::kRelu;
  double b1 = 1.0;  // cosine only
  double b2 = 0.0;  // cosine only

  static Activation cosine(double b1, double b2) {
    return {Kind::kCosine, b1, b2};
  }
  static Activation relu() { return {Kind::kRelu, 0.0, 0.0}; }
  static Activation tanh() { return {Kind::kTanh, 0.0, 0.0}; }

  Tensor apply(const Tensor& t) const;
};

namespace detail {
struct Node;
}

// Handle into the dynamically built computation graph. Reverse-mode autodiff
// with define-by-run semantics: every op records a closure that scatters
// gradients to its parents. Graphs are rebuilt per step and freed with the
// last handle.
class Var {
 public:
  Var() = default;

  // Trainable leaf.
  static Var param(Tensor value);
  // Constant leaf.
  static Var input(Tensor value);

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const;
  const Tensor& grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  void zero_grad();
  // Replaces the value of a leaf in place (optimizer update path).
  void set_value(Tensor value);

  // Runs reverse-mode accumulation from a scalar root. Calling it twice on
  // the same root without rebuilding the graph is a contract error.
  void backward();

  std::shared_ptr<detail::Node> node() const { return node_; }
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// --- graph ops ------------------------------------------------------------

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul_elem(const Var& a, const Var& b);
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);
// a + s * b, with s a scalar Var (the per-head identity strengths).
Var add_scaled(const Var& a, const Var& s, const Var& b);
Var matmul(const Var& a, const Var& b, bool trans_a = false,
           bool trans_b = false);
Var softmax_rows(const Var& m);
Var activation(const Var& t, const Activation& act);
Var sum(const Var& t);
Var mean_all(const Var& t);
Var pick(const Var& t, std::size_t flat_index);

// Rows of the embedding table selected by token index; backward scatter-adds.
Var embed_rows(const Var& table, const std::vector<std::int32_t>& tokens);
// Z + gamma * P tiled over a batch of row-blocks of height k.
Var add_position(const Var& z, const Var& p, double gamma, std::size_t batch);
// Per-sample products on (batch*k) x p stacks.
Var block_matmul_nt(const Var& a, const Var& b, std::size_t k);
Var block_matmul_n(const Var& s, const Var& v, std::size_t k);
// Selects row k-1 of every block: (batch*k) x d -> batch x d.
Var take_final_rows(const Var& z, std::size_t k);
Var layer_norm_rows(const Var& z, double eps = 1e-5);
// out[s] = sum_i table[:, i*m + tokens[s*k+i]]; the MLP's first layer applied
// to concatenated one-hots without materializing them.
Var gather_cols_sum(const Var& table, const std::vector<std::int32_t>& tokens,
                    std::size_t k, std::size_t m);

Var mse_mean(const Var& pred, const Tensor& targets);
Var ce_mean(const Var& logits, const std::vector<std::int32_t>& labels);

}  // namespace reltask
