#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "reltask/error.hpp"
#include "reltask/rng.hpp"

namespace reltask {

// Token = index into a vocabulary of size m. Index 0 is reserved for the
// classification token appended by with_cls().
using Token = std::int32_t;
inline constexpr Token kClsToken = 0;

struct TokenRange {
  Token lo = 0;
  Token hi = 0;  // exclusive
  std::size_t size() const { return static_cast<std::size_t>(hi - lo); }
  bool contains(Token t) const { return t >= lo && t < hi; }
};

struct TemplateSymbol {
  bool wild = false;
  std::int32_t id = 0;  // token index when regular, wildcard id when wild

  static TemplateSymbol regular(Token t) { return {false, t}; }
  static TemplateSymbol wildcard(std::int32_t w) { return {true, w}; }
  bool operator==(const TemplateSymbol&) const = default;
};

struct TemplateLabel {
  bool symbolic = false;
  double real = 0.0;
  TemplateSymbol sym;

  static TemplateLabel real_value(double v) { return {false, v, {}}; }
  static TemplateLabel symbol(TemplateSymbol s) { return {true, 0.0, s}; }
};

struct Template {
  std::vector<TemplateSymbol> symbols;
  TemplateLabel label;

  std::size_t length() const { return symbols.size(); }
  // Distinct regular tokens, ascending.
  std::vector<Token> regular_tokens() const;
  // Distinct wildcard ids (including a wildcard label), ascending.
  std::vector<std::int32_t> wildcard_ids() const;
};

// Injective wildcard-id -> token assignment.
using SubstitutionMap = std::map<std::int32_t, Token>;

struct SubstitutionSpec {
  enum class Kind { kUniformAlphabet, kFixed };
  Kind kind = Kind::kUniformAlphabet;
  std::vector<SubstitutionMap> fixed;  // uniform over this list when kFixed

  static SubstitutionSpec uniform() { return {}; }
  static SubstitutionSpec fixed_maps(std::vector<SubstitutionMap> maps) {
    return {Kind::kFixed, std::move(maps)};
  }
};

struct TemplateTask {
  std::size_t k = 0;
  std::int32_t vocab_size = 0;
  std::int32_t n_wildcards = 0;
  std::vector<Template> templates;
  std::vector<double> weights;
  SubstitutionSpec substitution;
  // Per-template override of the substitution distribution; rarely used,
  // defaults to the shared spec.
  std::vector<std::optional<SubstitutionSpec>> per_template_substitution;
  double sigma = 0.0;
  bool symbolic = false;
  std::string name;

  void validate() const;
  // Pairwise disjointness check; throws kValidation with the offending pair.
  void validate_disjoint() const;
  // First token index above the reserved and regular tokens.
  Token first_free_token() const;
};

struct Sample {
  std::vector<Token> tokens;
  double real_label = 0.0;
  Token token_label = -1;
  std::size_t template_index = 0;
};

struct Dataset {
  std::vector<Sample> samples;
  TokenRange alphabet;
  std::uint64_t seed = 0;
  bool symbolic = false;
  std::size_t k = 0;

  std::size_t size() const { return samples.size(); }
  // Distinct tokens that were substituted for wildcards, ascending.
  std::vector<Token> substituted_tokens(const TemplateTask& task) const;
  // Sample indices grouped by source template.
  std::vector<std::vector<std::size_t>> partition(std::size_t r) const;
  std::vector<double> real_labels() const;
};

struct SubstitutionResult {
  std::vector<Token> tokens;
  TemplateLabel label;  // symbolic labels substituted through the same map
};

// sub(z, s): wildcards replaced through s. Preconditions are enforced:
// missing binding, injectivity violation, and overlap of the range with the
// template's own regular tokens each raise a distinct validation error.
SubstitutionResult substitute(const Template& z, const SubstitutionMap& s);

// Unique substitution map witnessing x = sub(z, s), if any. The map must be
// injective and its range disjoint from z's regular tokens.
std::optional<SubstitutionMap> matches(const std::vector<Token>& x,
                                       const Template& z);

// True iff no string over any alphabet matches both templates.
bool templates_disjoint(const Template& z1, const Template& z2);

// Data diversity rho: min over templates and tokens of 1 / P[t in s(W)].
double data_diversity(const TemplateTask& task, const TokenRange& alphabet);

Dataset sample_dataset(const TemplateTask& task, std::size_t n,
                       const TokenRange& alphabet, std::uint64_t seed);

// Evaluation split over a fresh alphabet directly above the training one, so
// substituted tokens never collide with training substitutions.
Dataset make_disjoint_eval_split(const TemplateTask& task, std::size_t n_eval,
                                 const TokenRange& train_alphabet,
                                 std::uint64_t seed,
                                 std::size_t eval_alphabet_size = 100);

// Appends the reserved classification token to every template.
TemplateTask with_cls(const TemplateTask& task);

enum class Builtin {
  kSameDifferent,
  kAbaVsAbb,
  kAbabVsAabb,
  kMajority,
  kRandomTask,
  kCopy,
  kPrintProgram,
  kStringAssignProgram,
  kDistributionOf3,
  kMatchToSample,
};

struct BuiltinParams {
  std::size_t k = 3;            // majority
  std::size_t r = 2;            // random_task: number of templates
  std::int32_t n_wildcards = 2; // random_task
  std::int32_t n_regular = 0;   // random_task
  std::uint64_t seed = 0;       // random_task
  bool disjoint = true;         // random_task: reject non-disjoint draws
  std::int32_t vocab_size = 0;  // 0 = builtin default
};

TemplateTask make_builtin(Builtin kind, const BuiltinParams& params = {});
std::optional<Builtin> builtin_from_name(const std::string& name);
std::string builtin_name(Builtin kind);

// JSON document round trip; schema:
// {"k":..., "vocab_size":..., "templates":[{"symbols":[{"reg":i}|{"wild":j}],
//  "label":{"real":v}|{"sym":...}}], "weights":[...], "sigma":...}
std::string task_to_json(const TemplateTask& task);
TemplateTask task_from_json(const std::string& json_text);

// CSV rows: idx,template_idx,tok_0..tok_{k-1},label
std::string dataset_to_csv(const Dataset& ds, const std::string& manifest_hash);

}  // namespace reltask
