#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "reltask/autodiff.hpp"
#include "reltask/task.hpp"

namespace reltask {

enum class InitScheme { kStandard, kMeanFieldCopy };
enum class OutputKind { kScalar, kVocabLogits };
enum class BlockStyle { kTheory, kPractical };

struct ModelConfig {
  std::size_t k = 2;
  std::int32_t m = 64;  // vocabulary
  std::size_t d_emb = 32;
  std::size_t d_head = 16;
  std::size_t d_mlp = 64;
  std::size_t heads = 4;
  std::size_t depth = 1;
  double beta = 1.0;
  double gamma = 1.0;
  Activation act = Activation::relu();
  bool attn_identity = false;   // W_K^T W_Q + a_h I
  bool value_identity = false;  // W_V^T W_O + b_h I
  bool tie_embeddings = false;  // unembed through W_E
  bool use_mlp = true;          // attention-only when false
  OutputKind output = OutputKind::kScalar;
  BlockStyle block_style = BlockStyle::kTheory;
  bool use_residual = true;     // practical style only
  bool use_layernorm = true;    // practical style only

  void validate() const;
};

struct HeadParams {
  Var wk, wq, wv, wo;  // d_head x d_emb each
  Var a, b;            // identity strengths, zero at init
};

struct LayerParams {
  std::vector<HeadParams> heads;
  Var wa, wb;  // d_mlp x d_emb
};

// Width-dependent multipliers applied in the forward pass. The Standard
// scheme pairs unit-variance init with these; the mean-field scheme bakes
// the widths into the init variances and runs the raw layer equations.
struct ForwardScales {
  double score = 1.0;
  double value = 1.0;
  double heads = 1.0;
  double mlp_in = 1.0;
  double mlp_out = 1.0;
};

class Transformer {
 public:
  Transformer(ModelConfig config, InitScheme scheme, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  InitScheme scheme() const { return scheme_; }
  const ForwardScales& scales() const { return scales_; }

  // tokens is a batch-major flat list of length batch*k.
  Var forward_scalar(const std::vector<std::int32_t>& tokens,
                     std::size_t batch) const;
  Var forward_logits(const std::vector<std::int32_t>& tokens,
                     std::size_t batch) const;

  std::vector<LayerParams>& layers() { return layers_; }
  const std::vector<LayerParams>& layers() const { return layers_; }
  Var& embedding() { return we_; }
  Var& positional() { return p_; }
  Var& readout() { return wu_; }
  const Var& embedding() const { return we_; }
  const Var& positional() const { return p_; }
  const Var& readout() const { return wu_; }

  // Named parameter groups: K, Q, V, O, a, b, E, P, A, B, U.
  std::vector<std::pair<std::string, std::vector<Var>>> groups() const;
  std::vector<Var> parameters() const;
  // Tensors in checkpoint order (per layer, per head: K,Q,V,O,a,b; then the
  // layer's A,B; finally E, P, U).
  std::vector<Var> checkpoint_order() const;

  void save_checkpoint(const std::string& path) const;
  static Transformer load_checkpoint(const std::string& path);

 private:
  Var attention_stack(Var z) const;

  ModelConfig config_;
  InitScheme scheme_;
  ForwardScales scales_;
  std::vector<LayerParams> layers_;
  Var we_, p_, wu_;
};

std::string model_config_to_json(const ModelConfig& config, InitScheme scheme);
std::pair<ModelConfig, InitScheme> model_config_from_json(
    const std::string& json_text);

struct MlpConfig {
  std::size_t k = 3;
  std::int32_t m = 64;
  std::size_t width = 128;
  std::size_t hidden_layers = 2;
  Activation act = Activation::relu();

  void validate() const;
};

class Mlp {
 public:
  Mlp(MlpConfig config, std::uint64_t seed);

  const MlpConfig& config() const { return config_; }
  Var forward(const std::vector<std::int32_t>& tokens, std::size_t batch) const;

  Var& first_layer() { return w1_; }
  const Var& first_layer() const { return w1_; }
  std::vector<Var> parameters() const;
  std::vector<std::pair<std::string, std::vector<Var>>> groups() const;

  // Copy with the first layer's one-hot columns permuted position-wise: at
  // position i, the columns of the swapped token pair trade places. Other
  // weights are deep-copied unchanged.
  Mlp with_permuted_input_columns(
      const std::vector<std::pair<Token, Token>>& per_position_swaps) const;

 private:
  MlpConfig config_;
  Var w1_;                  // width x (k*m)
  std::vector<Var> hidden_; // width x width
  Var readout_;             // width
};

}  // namespace reltask
