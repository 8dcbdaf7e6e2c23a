#include "reltask/model.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace reltask {

void ModelConfig::validate() const {
  if (k < 1 || m < 1 || d_emb < 1 || d_head < 1 || d_mlp < 1 || heads < 1 ||
      depth < 1)
    fail(ErrorKind::kValidation, "model config: all extents must be >= 1");
  if (!std::isfinite(beta) || !std::isfinite(gamma) || beta < 0.0 || gamma < 0.0)
    fail(ErrorKind::kValidation, "model config: beta/gamma must be finite and >= 0");
  if (output == OutputKind::kVocabLogits && !tie_embeddings)
    fail(ErrorKind::kValidation,
         "model config: vocab logits require tied embeddings");
  // Theory style never has skips or normalization; the two flags only apply
  // to practical blocks.
}

namespace {

ForwardScales scales_for(const ModelConfig& c, InitScheme scheme) {
  ForwardScales s;
  if (c.block_style == BlockStyle::kPractical) {
    // Conventional attention scaling; layer norm keeps the rest in range.
    s.score = 1.0 / std::sqrt(static_cast<double>(c.d_head));
    return s;
  }
  if (scheme == InitScheme::kStandard) {
    s.score = 1.0 / (static_cast<double>(c.d_emb) *
                     std::sqrt(static_cast<double>(c.d_head)));
    s.value = 1.0 / std::sqrt(static_cast<double>(c.d_head) *
                              static_cast<double>(c.d_emb));
    s.heads = 1.0 / std::sqrt(static_cast<double>(c.heads));
    s.mlp_in = 1.0 / std::sqrt(static_cast<double>(c.d_emb));
    s.mlp_out = 1.0 / std::sqrt(static_cast<double>(c.d_mlp));
  }
  return s;
}

Var gaussian_param(std::vector<std::size_t> shape, double stddev, Rng& rng) {
  return Var::param(Tensor::gaussian(std::move(shape), stddev, rng));
}

}  // namespace

Transformer::Transformer(ModelConfig config, InitScheme scheme,
                         std::uint64_t seed)
    : config_(config), scheme_(scheme), scales_(scales_for(config, scheme)) {
  config_.validate();
  Rng rng = Rng(seed).split("transformer_init");
  const auto d = config_.d_emb;
  const auto dh = config_.d_head;
  const bool mf = scheme == InitScheme::kMeanFieldCopy;
  const double sd_emb = mf ? 1.0 / std::sqrt(static_cast<double>(d)) : 1.0;
  const double sd_v = mf ? 1.0 / std::sqrt(static_cast<double>(dh)) : 1.0;

  for (std::size_t l = 0; l < config_.depth; ++l) {
    LayerParams layer;
    for (std::size_t h = 0; h < config_.heads; ++h) {
      HeadParams head;
      head.wk = gaussian_param({dh, d}, sd_emb, rng);
      head.wq = gaussian_param({dh, d}, sd_emb, rng);
      head.wv = gaussian_param({dh, d}, sd_v, rng);
      head.wo = gaussian_param({dh, d}, sd_emb, rng);
      head.a = Var::param(Tensor({1}));
      head.b = Var::param(Tensor({1}));
      layer.heads.push_back(std::move(head));
    }
    layer.wa = gaussian_param({config_.d_mlp, d}, sd_emb, rng);
    layer.wb = gaussian_param({config_.d_mlp, d}, sd_emb, rng);
    layers_.push_back(std::move(layer));
  }
  we_ = gaussian_param({static_cast<std::size_t>(config_.m), d}, sd_emb, rng);
  p_ = gaussian_param({config_.k, d}, sd_emb, rng);
  // Readout starts at zero in both schemes; training moves it.
  wu_ = Var::param(Tensor({d}));
}

Var Transformer::attention_stack(Var z) const {
  const std::size_t k = config_.k;
  const bool practical = config_.block_style == BlockStyle::kPractical;
  const bool residual = practical && config_.use_residual;
  const bool lnorm = practical && config_.use_layernorm;

  for (const LayerParams& layer : layers_) {
    Var zin = lnorm ? layer_norm_rows(z) : z;
    Var attn;
    for (const HeadParams& head : layer.heads) {
      Var keys = matmul(zin, head.wk, false, true);
      Var queries = matmul(zin, head.wq, false, true);
      Var scores = block_matmul_nt(keys, queries, k);
      if (config_.attn_identity)
        scores = add_scaled(scores, head.a, block_matmul_nt(zin, zin, k));
      scores = scale(scores, config_.beta * scales_.score);
      Var weights = softmax_rows(scores);
      Var values = matmul(matmul(zin, head.wv, false, true), head.wo);
      if (config_.value_identity)
        values = add_scaled(values, head.b, zin);
      Var head_out = block_matmul_n(weights, values, k);
      attn = attn.defined() ? add(attn, head_out) : head_out;
    }
    if (scales_.heads != 1.0) attn = scale(attn, scales_.heads);
    z = residual ? add(z, attn) : attn;

    if (config_.use_mlp) {
      Var min = lnorm ? layer_norm_rows(z) : z;
      Var pre = matmul(min, layer.wa, false, true);
      if (scales_.mlp_in != 1.0) pre = scale(pre, scales_.mlp_in);
      Var post = matmul(activation(pre, config_.act), layer.wb);
      if (scales_.mlp_out != 1.0) post = scale(post, scales_.mlp_out);
      z = residual ? add(z, post) : post;
    }
  }
  return take_final_rows(z, k);
}

Var Transformer::forward_scalar(const std::vector<std::int32_t>& tokens,
                                std::size_t batch) const {
  if (tokens.size() != batch * config_.k)
    fail(ErrorKind::kDimension, "forward_scalar: token batch has wrong length");
  Var z = embed_rows(we_, tokens);
  z = add_position(z, p_, config_.gamma, batch);
  Var final_rows = attention_stack(z);
  return matmul(final_rows, wu_, false, true);  // batch x 1
}

Var Transformer::forward_logits(const std::vector<std::int32_t>& tokens,
                                std::size_t batch) const {
  if (config_.output != OutputKind::kVocabLogits || !config_.tie_embeddings)
    fail(ErrorKind::kContract,
         "forward_logits: model not configured for vocab logits");
  if (tokens.size() != batch * config_.k)
    fail(ErrorKind::kDimension, "forward_logits: token batch has wrong length");
  Var z = embed_rows(we_, tokens);
  z = add_position(z, p_, config_.gamma, batch);
  Var final_rows = attention_stack(z);
  return matmul(final_rows, we_, false, true);  // batch x m
}

std::vector<std::pair<std::string, std::vector<Var>>> Transformer::groups()
    const {
  std::vector<Var> k, q, v, o, a, b, wa, wb;
  for (const auto& layer : layers_) {
    for (const auto& head : layer.heads) {
      k.push_back(head.wk);
      q.push_back(head.wq);
      v.push_back(head.wv);
      o.push_back(head.wo);
      a.push_back(head.a);
      b.push_back(head.b);
    }
    wa.push_back(layer.wa);
    wb.push_back(layer.wb);
  }
  std::vector<std::pair<std::string, std::vector<Var>>> out;
  out.emplace_back("K", std::move(k));
  out.emplace_back("Q", std::move(q));
  out.emplace_back("V", std::move(v));
  out.emplace_back("O", std::move(o));
  if (config_.attn_identity) out.emplace_back("a", std::move(a));
  if (config_.value_identity) out.emplace_back("b", std::move(b));
  out.emplace_back("E", std::vector<Var>{we_});
  out.emplace_back("P", std::vector<Var>{p_});
  if (config_.use_mlp) {
    out.emplace_back("A", std::move(wa));
    out.emplace_back("B", std::move(wb));
  }
  out.emplace_back("U", std::vector<Var>{wu_});
  return out;
}

std::vector<Var> Transformer::parameters() const {
  std::vector<Var> all;
  for (const auto& [name, vars] : groups())
    for (const Var& v : vars) all.push_back(v);
  return all;
}

std::vector<Var> Transformer::checkpoint_order() const {
  std::vector<Var> order;
  for (const auto& layer : layers_) {
    for (const auto& head : layer.heads) {
      order.push_back(head.wk);
      order.push_back(head.wq);
      order.push_back(head.wv);
      order.push_back(head.wo);
      order.push_back(head.a);
      order.push_back(head.b);
    }
    order.push_back(layer.wa);
    order.push_back(layer.wb);
  }
  order.push_back(we_);
  order.push_back(p_);
  order.push_back(wu_);
  return order;
}

namespace {

constexpr char kCheckpointMagic[4] = {'R', 'T', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void Transformer::save_checkpoint(const std::string& path) const {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot open checkpoint for writing: " + path);
  const std::string header = model_config_to_json(config_, scheme_);
  out.write(kCheckpointMagic, 4);
  std::uint32_t version = kCheckpointVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const Var& v : checkpoint_order()) {
    const Tensor& t = v.value();
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) fail(ErrorKind::kIo, "short write on checkpoint: " + path);
}

Transformer Transformer::load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0 ||
      version != kCheckpointVersion)
    fail(ErrorKind::kIo, "not a reltask checkpoint: " + path);
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  auto [config, scheme] = model_config_from_json(header);
  Transformer model(config, scheme, 0);
  for (Var v : model.checkpoint_order()) {
    Tensor t(v.value().shape());
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) fail(ErrorKind::kIo, "truncated checkpoint: " + path);
    v.set_value(std::move(t));
  }
  return model;
}

namespace {

nlohmann::json activation_to_json(const Activation& a) {
  switch (a.kind) {
    case Activation::Kind::kCosine:
      return {{"kind", "cosine"}, {"b1", a.b1}, {"b2", a.b2}};
    case Activation::Kind::kTanh:
      return {{"kind", "tanh"}};
    case Activation::Kind::kRelu:
    default:
      return {{"kind", "relu"}};
  }
}

Activation activation_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind");
  if (kind == "cosine")
    return Activation::cosine(j.value("b1", 1.0), j.value("b2", 0.0));
  if (kind == "tanh") return Activation::tanh();
  if (kind == "relu") return Activation::relu();
  fail(ErrorKind::kValidation, "unknown activation kind: " + kind);
}

}  // namespace

std::string model_config_to_json(const ModelConfig& c, InitScheme scheme) {
  nlohmann::json j;
  j["k"] = c.k;
  j["m"] = c.m;
  j["d_emb"] = c.d_emb;
  j["d_head"] = c.d_head;
  j["d_mlp"] = c.d_mlp;
  j["heads"] = c.heads;
  j["depth"] = c.depth;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["activation"] = activation_to_json(c.act);
  j["attn_identity"] = c.attn_identity;
  j["value_identity"] = c.value_identity;
  j["tie_embeddings"] = c.tie_embeddings;
  j["use_mlp"] = c.use_mlp;
  j["output"] = c.output == OutputKind::kScalar ? "scalar" : "vocab_logits";
  j["block_style"] =
      c.block_style == BlockStyle::kTheory ? "theory" : "practical";
  j["use_residual"] = c.use_residual;
  j["use_layernorm"] = c.use_layernorm;
  j["init"] = scheme == InitScheme::kStandard ? "standard" : "mean_field_copy";
  return j.dump();
}

std::pair<ModelConfig, InitScheme> model_config_from_json(
    const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    fail(ErrorKind::kValidation,
         std::string("model config json: parse error: ") + e.what());
  }
  ModelConfig c;
  InitScheme scheme = InitScheme::kStandard;
  try {
    c.k = j.at("k");
    c.m = j.at("m");
    c.d_emb = j.at("d_emb");
    c.d_head = j.at("d_head");
    c.d_mlp = j.at("d_mlp");
    c.heads = j.at("heads");
    c.depth = j.at("depth");
    c.beta = j.at("beta");
    c.gamma = j.at("gamma");
    c.act = activation_from_json(j.at("activation"));
    c.attn_identity = j.at("attn_identity");
    c.value_identity = j.at("value_identity");
    c.tie_embeddings = j.at("tie_embeddings");
    c.use_mlp = j.at("use_mlp");
    c.output = j.at("output") == "scalar" ? OutputKind::kScalar
                                          : OutputKind::kVocabLogits;
    c.block_style = j.at("block_style") == "theory" ? BlockStyle::kTheory
                                                    : BlockStyle::kPractical;
    c.use_residual = j.at("use_residual");
    c.use_layernorm = j.at("use_layernorm");
    scheme = j.at("init") == "standard" ? InitScheme::kStandard
                                        : InitScheme::kMeanFieldCopy;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kValidation, std::string("model config json: ") + e.what());
  }
  return {c, scheme};
}

void MlpConfig::validate() const {
  if (k < 1 || m < 1 || width < 1 || hidden_layers < 1)
    fail(ErrorKind::kValidation, "mlp config: all extents must be >= 1");
}

Mlp::Mlp(MlpConfig config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng = Rng(seed).split("mlp_init");
  const std::size_t in = config_.k * static_cast<std::size_t>(config_.m);
  w1_ = gaussian_param({config_.width, in}, 1.0 / std::sqrt(static_cast<double>(in)),
                       rng);
  const double sd = 1.0 / std::sqrt(static_cast<double>(config_.width));
  for (std::size_t l = 1; l < config_.hidden_layers; ++l)
    hidden_.push_back(gaussian_param({config_.width, config_.width}, sd, rng));
  readout_ = gaussian_param({config_.width}, sd, rng);
}

Var Mlp::forward(const std::vector<std::int32_t>& tokens,
                 std::size_t batch) const {
  if (tokens.size() != batch * config_.k)
    fail(ErrorKind::kDimension, "mlp forward: token batch has wrong length");
  Var h = activation(gather_cols_sum(w1_, tokens, config_.k,
                                     static_cast<std::size_t>(config_.m)),
                     config_.act);
  for (const Var& w : hidden_)
    h = activation(matmul(h, w, false, true), config_.act);
  return matmul(h, readout_, false, true);  // batch x 1
}

std::vector<Var> Mlp::parameters() const {
  std::vector<Var> all{w1_};
  for (const Var& w : hidden_) all.push_back(w);
  all.push_back(readout_);
  return all;
}

std::vector<std::pair<std::string, std::vector<Var>>> Mlp::groups() const {
  std::vector<std::pair<std::string, std::vector<Var>>> out;
  out.emplace_back("W1", std::vector<Var>{w1_});
  if (!hidden_.empty()) out.emplace_back("W_hidden", hidden_);
  out.emplace_back("w", std::vector<Var>{readout_});
  return out;
}

Mlp Mlp::with_permuted_input_columns(
    const std::vector<std::pair<Token, Token>>& per_position_swaps) const {
  if (per_position_swaps.size() != config_.k)
    fail(ErrorKind::kArgument,
         "with_permuted_input_columns: one swap per position required");
  Mlp copy = *this;
  // Vars share nodes; rebuild leaves so the copy owns its tensors.
  Tensor w1 = w1_.value();
  const std::size_t m = static_cast<std::size_t>(config_.m);
  for (std::size_t pos = 0; pos < config_.k; ++pos) {
    const auto& [t1, t2] = per_position_swaps[pos];
    if (t1 == t2) continue;
    const std::size_t c1 = pos * m + static_cast<std::size_t>(t1);
    const std::size_t c2 = pos * m + static_cast<std::size_t>(t2);
    for (std::size_t r = 0; r < w1.rows(); ++r)
      std::swap(w1.at(r, c1), w1.at(r, c2));
  }
  copy.w1_ = Var::param(std::move(w1));
  copy.hidden_.clear();
  for (const Var& w : hidden_) copy.hidden_.push_back(Var::param(w.value()));
  copy.readout_ = Var::param(readout_.value());
  return copy;
}

}  // namespace reltask
