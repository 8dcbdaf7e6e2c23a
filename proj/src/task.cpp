#include "reltask/task.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace reltask {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Token> Template::regular_tokens() const {
  std::set<Token> regs;
  for (const auto& s : symbols)
    if (!s.wild) regs.insert(s.id);
  if (label.symbolic && !label.sym.wild) regs.insert(label.sym.id);
  return {regs.begin(), regs.end()};
}

std::vector<std::int32_t> Template::wildcard_ids() const {
  std::set<std::int32_t> ids;
  for (const auto& s : symbols)
    if (s.wild) ids.insert(s.id);
  if (label.symbolic && label.sym.wild) ids.insert(label.sym.id);
  return {ids.begin(), ids.end()};
}

void TemplateTask::validate() const {
  if (templates.empty()) fail(ErrorKind::kValidation, "task has no templates");
  if (weights.size() != templates.size())
    fail(ErrorKind::kValidation, "weights/templates size mismatch");
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) fail(ErrorKind::kValidation, "negative template weight");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-9)
    fail(ErrorKind::kValidation, "template weights must sum to 1");
  if (sigma < 0.0) fail(ErrorKind::kValidation, "sigma must be nonnegative");
  for (const auto& z : templates) {
    if (z.length() != k)
      fail(ErrorKind::kValidation, "templates must share length k");
    if (z.label.symbolic != symbolic)
      fail(ErrorKind::kValidation, "label kind inconsistent with task");
    for (const auto& s : z.symbols) {
      if (s.wild && (s.id < 0 || s.id >= n_wildcards))
        fail(ErrorKind::kValidation, "wildcard id out of range");
      if (!s.wild && (s.id < 0 || s.id >= vocab_size))
        fail(ErrorKind::kValidation, "regular token out of vocabulary");
    }
    if (z.label.symbolic && z.label.sym.wild &&
        (z.label.sym.id < 0 || z.label.sym.id >= n_wildcards))
      fail(ErrorKind::kValidation, "label wildcard id out of range");
  }
  if (!per_template_substitution.empty() &&
      per_template_substitution.size() != templates.size())
    fail(ErrorKind::kValidation, "per-template substitution size mismatch");
}

void TemplateTask::validate_disjoint() const {
  for (std::size_t i = 0; i < templates.size(); ++i)
    for (std::size_t j = i + 1; j < templates.size(); ++j)
      if (!templates_disjoint(templates[i], templates[j]))
        fail(ErrorKind::kValidation,
             "templates " + std::to_string(i) + " and " + std::to_string(j) +
                 " are not disjoint");
}

Token TemplateTask::first_free_token() const {
  Token max_reg = kClsToken;
  for (const auto& z : templates)
    for (Token t : z.regular_tokens()) max_reg = std::max(max_reg, t);
  return max_reg + 1;
}

std::vector<Token> Dataset::substituted_tokens(const TemplateTask& task) const {
  std::set<Token> subs;
  for (const auto& s : samples) {
    const Template& z = task.templates[s.template_index];
    for (std::size_t i = 0; i < z.symbols.size(); ++i)
      if (z.symbols[i].wild) subs.insert(s.tokens[i]);
    if (symbolic && z.label.symbolic && z.label.sym.wild)
      subs.insert(s.token_label);
  }
  return {subs.begin(), subs.end()};
}

std::vector<std::vector<std::size_t>> Dataset::partition(std::size_t r) const {
  std::vector<std::vector<std::size_t>> part(r);
  for (std::size_t i = 0; i < samples.size(); ++i)
    part[samples[i].template_index].push_back(i);
  return part;
}

std::vector<double> Dataset::real_labels() const {
  std::vector<double> y;
  y.reserve(samples.size());
  for (const auto& s : samples) y.push_back(s.real_label);
  return y;
}

SubstitutionResult substitute(const Template& z, const SubstitutionMap& s) {
  const std::vector<Token> regs = z.regular_tokens();
  // Injectivity of s restricted to this template's wildcards, and range
  // disjointness from the template's own regular tokens.
  std::unordered_map<Token, std::int32_t> used;
  for (std::int32_t w : z.wildcard_ids()) {
    auto it = s.find(w);
    if (it == s.end())
      fail(ErrorKind::kValidation,
           "substitute: no binding for wildcard " + std::to_string(w));
    const Token t = it->second;
    auto [pos, fresh] = used.emplace(t, w);
    if (!fresh)
      fail(ErrorKind::kValidation,
           "substitute: map not injective, token " + std::to_string(t) +
               " bound twice");
    if (std::binary_search(regs.begin(), regs.end(), t))
      fail(ErrorKind::kValidation,
           "substitute: token " + std::to_string(t) +
               " collides with a regular template token");
  }

  SubstitutionResult out;
  out.tokens.reserve(z.length());
  for (const auto& sym : z.symbols)
    out.tokens.push_back(sym.wild ? s.at(sym.id) : sym.id);
  out.label = z.label;
  if (z.label.symbolic && z.label.sym.wild)
    out.label.sym = TemplateSymbol::regular(s.at(z.label.sym.id));
  return out;
}

std::optional<SubstitutionMap> matches(const std::vector<Token>& x,
                                       const Template& z) {
  if (x.size() != z.length())
    fail(ErrorKind::kContract, "matches: string/template length mismatch");
  const std::vector<Token> regs = z.regular_tokens();
  SubstitutionMap s;
  std::unordered_set<Token> bound;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const TemplateSymbol& sym = z.symbols[i];
    if (!sym.wild) {
      if (x[i] != sym.id) return std::nullopt;
      continue;
    }
    auto it = s.find(sym.id);
    if (it != s.end()) {
      if (it->second != x[i]) return std::nullopt;
      continue;
    }
    // Substituted tokens may not already appear among the template's regular
    // tokens, and the map must stay injective.
    if (std::binary_search(regs.begin(), regs.end(), x[i])) return std::nullopt;
    if (!bound.insert(x[i]).second) return std::nullopt;
    s.emplace(sym.id, x[i]);
  }
  return s;
}

namespace {

// Union-find over the symbols of two templates plus their regular token
// values. A common matching string exists iff the per-position unification
// closes without (a) merging two distinct regular tokens, (b) merging two
// distinct wildcards of the same template, or (c) forcing a wildcard onto a
// regular token of its own template. Any consistent assignment can then be
// completed with fresh tokens, one per class.
struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  std::size_t find(std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

bool templates_disjoint(const Template& z1, const Template& z2) {
  if (z1.length() != z2.length())
    fail(ErrorKind::kContract, "templates_disjoint: length mismatch");

  const std::vector<std::int32_t> w1 = z1.wildcard_ids();
  const std::vector<std::int32_t> w2 = z2.wildcard_ids();
  std::set<Token> reg_values;
  for (Token t : z1.regular_tokens()) reg_values.insert(t);
  for (Token t : z2.regular_tokens()) reg_values.insert(t);
  const std::vector<Token> regs(reg_values.begin(), reg_values.end());

  auto wild1_node = [&](std::int32_t id) {
    return static_cast<std::size_t>(
        std::lower_bound(w1.begin(), w1.end(), id) - w1.begin());
  };
  auto wild2_node = [&](std::int32_t id) {
    return w1.size() + static_cast<std::size_t>(std::lower_bound(w2.begin(),
                                                                 w2.end(), id) -
                                                w2.begin());
  };
  auto reg_node = [&](Token t) {
    return w1.size() + w2.size() +
           static_cast<std::size_t>(
               std::lower_bound(regs.begin(), regs.end(), t) - regs.begin());
  };
  auto node_of = [&](const TemplateSymbol& s, bool first) {
    if (s.wild) return first ? wild1_node(s.id) : wild2_node(s.id);
    return reg_node(s.id);
  };

  UnionFind uf(w1.size() + w2.size() + regs.size());
  for (std::size_t i = 0; i < z1.length(); ++i)
    uf.unite(node_of(z1.symbols[i], true), node_of(z2.symbols[i], false));

  struct ClassInfo {
    std::vector<Token> reg;
    std::size_t wild_z1 = 0;
    std::size_t wild_z2 = 0;
  };
  std::unordered_map<std::size_t, ClassInfo> classes;
  for (std::size_t i = 0; i < w1.size(); ++i)
    classes[uf.find(i)].wild_z1++;
  for (std::size_t i = 0; i < w2.size(); ++i)
    classes[uf.find(w1.size() + i)].wild_z2++;
  for (std::size_t i = 0; i < regs.size(); ++i)
    classes[uf.find(w1.size() + w2.size() + i)].reg.push_back(regs[i]);

  const std::vector<Token> regs1 = z1.regular_tokens();
  const std::vector<Token> regs2 = z2.regular_tokens();
  for (const auto& [root, info] : classes) {
    if (info.reg.size() > 1) return true;
    if (info.wild_z1 > 1 || info.wild_z2 > 1) return true;
    if (info.reg.size() == 1) {
      const Token r = info.reg.front();
      if (info.wild_z1 > 0 &&
          std::binary_search(regs1.begin(), regs1.end(), r))
        return true;
      if (info.wild_z2 > 0 &&
          std::binary_search(regs2.begin(), regs2.end(), r))
        return true;
    }
  }
  return false;
}

namespace {

const SubstitutionSpec& spec_for(const TemplateTask& task, std::size_t j) {
  if (j < task.per_template_substitution.size() &&
      task.per_template_substitution[j])
    return *task.per_template_substitution[j];
  return task.substitution;
}

std::vector<Token> allowed_tokens(const Template& z,
                                  const TokenRange& alphabet) {
  const std::vector<Token> regs = z.regular_tokens();
  std::vector<Token> out;
  out.reserve(alphabet.size());
  for (Token t = alphabet.lo; t < alphabet.hi; ++t)
    if (!std::binary_search(regs.begin(), regs.end(), t)) out.push_back(t);
  return out;
}

}  // namespace

double data_diversity(const TemplateTask& task, const TokenRange& alphabet) {
  double rho = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < task.templates.size(); ++j) {
    const Template& z = task.templates[j];
    const SubstitutionSpec& spec = spec_for(task, j);
    const std::size_t n_wild = z.wildcard_ids().size();
    if (n_wild == 0) continue;
    if (spec.kind == SubstitutionSpec::Kind::kUniformAlphabet) {
      const std::size_t allowed = allowed_tokens(z, alphabet).size();
      if (allowed < n_wild)
        fail(ErrorKind::kValidation, "diversity: alphabet too small");
      rho = std::min(rho, static_cast<double>(allowed) /
                              static_cast<double>(n_wild));
    } else {
      std::unordered_map<Token, std::size_t> counts;
      for (const auto& m : spec.fixed)
        for (std::int32_t w : z.wildcard_ids()) counts[m.at(w)]++;
      for (const auto& [t, c] : counts)
        rho = std::min(rho, static_cast<double>(spec.fixed.size()) /
                                static_cast<double>(c));
    }
  }
  return rho;
}

Dataset sample_dataset(const TemplateTask& task, std::size_t n,
                       const TokenRange& alphabet, std::uint64_t seed) {
  task.validate();
  if (alphabet.hi > task.vocab_size)
    fail(ErrorKind::kValidation, "sample_dataset: alphabet exceeds vocabulary");

  std::vector<std::vector<Token>> allowed(task.templates.size());
  for (std::size_t j = 0; j < task.templates.size(); ++j) {
    if (spec_for(task, j).kind != SubstitutionSpec::Kind::kUniformAlphabet)
      continue;
    allowed[j] = allowed_tokens(task.templates[j], alphabet);
    if (allowed[j].size() < task.templates[j].wildcard_ids().size())
      fail(ErrorKind::kValidation,
           "sample_dataset: alphabet too small for injective substitution on "
           "template " +
               std::to_string(j));
  }

  Rng rng = Rng(seed).split("dataset");
  Dataset ds;
  ds.alphabet = alphabet;
  ds.seed = seed;
  ds.symbolic = task.symbolic;
  ds.k = task.k;
  ds.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    std::size_t j = 0;
    double acc = 0.0;
    for (; j + 1 < task.weights.size(); ++j) {
      acc += task.weights[j];
      if (u < acc) break;
    }
    const Template& z = task.templates[j];
    const auto wilds = z.wildcard_ids();
    SubstitutionMap s;
    const SubstitutionSpec& spec = spec_for(task, j);
    if (spec.kind == SubstitutionSpec::Kind::kUniformAlphabet) {
      const auto picks = rng.sample_distinct(allowed[j].size(), wilds.size());
      for (std::size_t t = 0; t < wilds.size(); ++t)
        s.emplace(wilds[t], allowed[j][picks[t]]);
    } else {
      s = spec.fixed[rng.below(spec.fixed.size())];
    }
    SubstitutionResult r = substitute(z, s);
    Sample sample;
    sample.tokens = std::move(r.tokens);
    sample.template_index = j;
    if (task.symbolic) {
      sample.token_label = r.label.sym.id;
    } else {
      sample.real_label = r.label.real + task.sigma * rng.normal();
    }
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

Dataset make_disjoint_eval_split(const TemplateTask& task, std::size_t n_eval,
                                 const TokenRange& train_alphabet,
                                 std::uint64_t seed,
                                 std::size_t eval_alphabet_size) {
  const TokenRange eval_alphabet{
      train_alphabet.hi,
      train_alphabet.hi + static_cast<Token>(eval_alphabet_size)};
  if (eval_alphabet.hi > task.vocab_size)
    fail(ErrorKind::kValidation,
         "make_disjoint_eval_split: vocabulary exhausted (need tokens up to " +
             std::to_string(eval_alphabet.hi) + ", have " +
             std::to_string(task.vocab_size) + ")");
  return sample_dataset(task, n_eval, eval_alphabet,
                        Rng(seed).split("eval").next_u64());
}

TemplateTask with_cls(const TemplateTask& task) {
  TemplateTask out = task;
  out.k = task.k + 1;
  for (auto& z : out.templates)
    z.symbols.push_back(TemplateSymbol::regular(kClsToken));
  out.name = task.name.empty() ? "with_cls" : task.name + "+cls";
  return out;
}

namespace {

TemplateTask base_task(std::size_t k, std::int32_t n_wild,
                       std::int32_t vocab_size, std::string name) {
  TemplateTask t;
  t.k = k;
  t.n_wildcards = n_wild;
  t.vocab_size = vocab_size;
  t.name = std::move(name);
  return t;
}

Template real_template(std::vector<TemplateSymbol> symbols, double label) {
  Template z;
  z.symbols = std::move(symbols);
  z.label = TemplateLabel::real_value(label);
  return z;
}

TemplateSymbol W(std::int32_t id) { return TemplateSymbol::wildcard(id); }
TemplateSymbol R(Token t) { return TemplateSymbol::regular(t); }

void finish_uniform(TemplateTask& t) {
  t.weights.assign(t.templates.size(),
                   1.0 / static_cast<double>(t.templates.size()));
  t.validate();
}

TemplateTask make_majority(std::size_t k, std::int32_t vocab) {
  if (k < 2) fail(ErrorKind::kValidation, "majority: k must be at least 2");
  TemplateTask t = base_task(k, 2, vocab, "majority" + std::to_string(k));
  const std::size_t count = std::size_t{1} << (k - 1);
  for (std::size_t mask = 0; mask < count; ++mask) {
    std::vector<TemplateSymbol> syms{W(0)};
    std::size_t first_count = 1;
    for (std::size_t i = 0; i + 1 < k; ++i) {
      const bool same = (mask >> i) & 1;
      syms.push_back(same ? W(0) : W(1));
      if (same) ++first_count;
    }
    // First token in the strict majority of the whole string.
    const double label = 2.0 * first_count > static_cast<double>(k) ? 1.0 : -1.0;
    t.templates.push_back(real_template(std::move(syms), label));
  }
  finish_uniform(t);
  return t;
}

TemplateTask make_random_task(const BuiltinParams& p, std::int32_t vocab) {
  if (p.r < 2) fail(ErrorKind::kValidation, "random_task: need r >= 2");
  if (p.n_wildcards + p.n_regular <= 0)
    fail(ErrorKind::kValidation, "random_task: empty symbol pool");
  Rng rng = Rng(p.seed).split("random_task");
  const std::int32_t pool = p.n_wildcards + p.n_regular;
  constexpr int kMaxAttempts = 256;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    std::vector<Template> drawn;
    std::set<std::vector<std::pair<bool, std::int32_t>>> seen;
    bool distinct = true;
    for (std::size_t j = 0; j < p.r && distinct; ++j) {
      std::vector<TemplateSymbol> syms;
      std::vector<std::pair<bool, std::int32_t>> key;
      for (std::size_t i = 0; i < p.k; ++i) {
        const auto c = static_cast<std::int32_t>(rng.below(pool));
        const TemplateSymbol s =
            c < p.n_wildcards ? W(c) : R(1 + (c - p.n_wildcards));
        syms.push_back(s);
        key.emplace_back(s.wild, s.id);
      }
      if (!seen.insert(key).second) distinct = false;
      drawn.push_back(real_template(std::move(syms), 0.0));
    }
    if (!distinct) continue;
    if (p.disjoint) {
      bool ok = true;
      for (std::size_t a = 0; a < drawn.size() && ok; ++a)
        for (std::size_t b = a + 1; b < drawn.size() && ok; ++b)
          ok = templates_disjoint(drawn[a], drawn[b]);
      if (!ok) continue;
    }
    // Gaussian labels standardized under the uniform template distribution,
    // so the trivial MSE is exactly 1.
    std::vector<double> labels(p.r);
    for (double& v : labels) v = rng.normal();
    const double mean =
        std::accumulate(labels.begin(), labels.end(), 0.0) / p.r;
    double var = 0.0;
    for (double v : labels) var += (v - mean) * (v - mean);
    var /= static_cast<double>(p.r);
    if (var < 1e-12) continue;
    const double sd = std::sqrt(var);
    TemplateTask t = base_task(p.k, p.n_wildcards, vocab,
                               "random_task_r" + std::to_string(p.r));
    t.templates = std::move(drawn);
    for (std::size_t j = 0; j < p.r; ++j)
      t.templates[j].label = TemplateLabel::real_value((labels[j] - mean) / sd);
    finish_uniform(t);
    return t;
  }
  fail(ErrorKind::kValidation,
       "random_task: could not draw a disjoint template set");
}

TemplateTask make_print_program(std::int32_t vocab) {
  // Characters of "a=1;b=-1;print(a)"; each non-variable character is one
  // fixed token, each variable slot one wildcard.
  const Token eq = 1, one = 2, semi = 3, minus = 4, p = 5, r = 6, i = 7,
              n = 8, tt = 9, lpar = 10, rpar = 11;
  auto body = [&](std::int32_t printed) {
    return std::vector<TemplateSymbol>{
        W(0), R(eq), R(one), R(semi), W(1),    R(eq), R(minus), R(one), R(semi),
        R(p), R(r),  R(i),   R(n),    R(tt),   R(lpar), W(printed), R(rpar)};
  };
  TemplateTask t = base_task(17, 2, vocab, "print_program");
  t.templates.push_back(real_template(body(0), 1.0));
  t.templates.push_back(real_template(body(1), -1.0));
  finish_uniform(t);
  return t;
}

TemplateTask make_string_assign_program(std::int32_t vocab) {
  // Characters of 'a="d";b="q";print(a)'; the quoted values are wildcards
  // bound at their quote positions, and the label copies one of them.
  const Token eq = 1, quote = 2, semi = 3, p = 4, r = 5, i = 6, n = 7, tt = 8,
              lpar = 9, rpar = 10;
  auto body = [&](std::int32_t printed) {
    return std::vector<TemplateSymbol>{
        W(0),  R(eq),   R(quote), W(2), R(quote), R(semi),
        W(1),  R(eq),   R(quote), W(3), R(quote), R(semi),
        R(p),  R(r),    R(i),     R(n), R(tt),    R(lpar),
        W(printed), R(rpar)};
  };
  TemplateTask t = base_task(20, 4, vocab, "string_assign_program");
  t.symbolic = true;
  Template t1;
  t1.symbols = body(0);
  t1.label = TemplateLabel::symbol(W(2));
  Template t2;
  t2.symbols = body(1);
  t2.label = TemplateLabel::symbol(W(3));
  t.templates = {t1, t2};
  finish_uniform(t);
  return t;
}

TemplateTask make_copy(std::int32_t vocab) {
  TemplateTask t = base_task(1, 1, vocab, "copy");
  t.symbolic = true;
  Template z;
  z.symbols = {W(0)};
  z.label = TemplateLabel::symbol(W(0));
  t.templates = {z};
  finish_uniform(t);
  return t;
}

TemplateTask make_distribution_of_3(std::int32_t vocab) {
  // Row one fixes the three reference symbols; row two shows a permutation
  // of them with the final element hidden behind a blank token; the last
  // four slots are the answer options, a permutation of the three symbols
  // plus a distractor. The label is the 1-based option index that completes
  // row two.
  const Token blank = 1;
  TemplateTask t = base_task(10, 4, vocab, "distribution_of_3");
  std::array<std::int32_t, 3> row2{0, 1, 2};
  std::sort(row2.begin(), row2.end());
  do {
    std::array<std::int32_t, 4> opts{0, 1, 2, 3};
    std::sort(opts.begin(), opts.end());
    do {
      std::vector<TemplateSymbol> syms{W(0), W(1), W(2),
                                       W(row2[0]), W(row2[1]), R(blank)};
      double label = 0.0;
      for (std::size_t o = 0; o < 4; ++o) {
        syms.push_back(W(opts[o]));
        if (opts[o] == row2[2]) label = static_cast<double>(o + 1);
      }
      t.templates.push_back(real_template(std::move(syms), label));
    } while (std::next_permutation(opts.begin(), opts.end()));
  } while (std::next_permutation(row2.begin(), row2.end()));
  finish_uniform(t);
  return t;
}

TemplateTask make_match_to_sample(std::int32_t vocab) {
  // Equality patterns over three slots (the five set partitions of three
  // positions). The sample row uses one pattern; one option repeats it with
  // fresh symbols, the other shows a different pattern. Label = which option
  // matches.
  const std::vector<std::vector<std::int32_t>> patterns{
      {0, 0, 0}, {0, 0, 1}, {0, 1, 0}, {0, 1, 1}, {0, 1, 2}};
  TemplateTask t = base_task(9, 9, vocab, "match_to_sample");
  auto row = [](const std::vector<std::int32_t>& pat, std::int32_t base) {
    std::vector<TemplateSymbol> syms;
    for (std::int32_t v : pat) syms.push_back(W(base + v));
    return syms;
  };
  for (const auto& ps : patterns)
    for (int correct = 0; correct < 2; ++correct)
      for (const auto& pw : patterns) {
        if (pw == ps) continue;
        std::vector<TemplateSymbol> syms = row(ps, 0);
        const auto& first = (correct == 0) ? ps : pw;
        const auto& second = (correct == 0) ? pw : ps;
        for (const auto& s : row(first, 3)) syms.push_back(s);
        for (const auto& s : row(second, 6)) syms.push_back(s);
        t.templates.push_back(
            real_template(std::move(syms), static_cast<double>(correct + 1)));
      }
  finish_uniform(t);
  return t;
}

}  // namespace

TemplateTask make_builtin(Builtin kind, const BuiltinParams& params) {
  const std::int32_t vocab = params.vocab_size > 0 ? params.vocab_size : 256;
  TemplateTask t;
  switch (kind) {
    case Builtin::kSameDifferent:
      t = base_task(2, 2, vocab, "same_different");
      t.templates.push_back(real_template({W(0), W(0)}, 1.0));
      t.templates.push_back(real_template({W(0), W(1)}, -1.0));
      finish_uniform(t);
      break;
    case Builtin::kAbaVsAbb:
      t = base_task(3, 2, vocab, "aba_vs_abb");
      t.templates.push_back(real_template({W(0), W(1), W(0)}, 1.0));
      t.templates.push_back(real_template({W(0), W(1), W(1)}, -1.0));
      finish_uniform(t);
      break;
    case Builtin::kAbabVsAabb:
      t = base_task(4, 2, vocab, "abab_vs_aabb");
      t.templates.push_back(real_template({W(0), W(1), W(0), W(1)}, 1.0));
      t.templates.push_back(real_template({W(0), W(0), W(1), W(1)}, -1.0));
      finish_uniform(t);
      break;
    case Builtin::kMajority:
      t = make_majority(params.k, vocab);
      break;
    case Builtin::kRandomTask:
      t = make_random_task(params, vocab);
      break;
    case Builtin::kCopy:
      t = make_copy(vocab);
      break;
    case Builtin::kPrintProgram:
      t = make_print_program(vocab);
      break;
    case Builtin::kStringAssignProgram:
      t = make_string_assign_program(vocab);
      break;
    case Builtin::kDistributionOf3:
      t = make_distribution_of_3(vocab);
      break;
    case Builtin::kMatchToSample:
      t = make_match_to_sample(vocab);
      break;
  }
  t.validate_disjoint();
  return t;
}

std::optional<Builtin> builtin_from_name(const std::string& name) {
  if (name == "same_different") return Builtin::kSameDifferent;
  if (name == "aba_vs_abb") return Builtin::kAbaVsAbb;
  if (name == "abab_vs_aabb") return Builtin::kAbabVsAabb;
  if (name == "majority") return Builtin::kMajority;
  if (name == "random_task") return Builtin::kRandomTask;
  if (name == "copy") return Builtin::kCopy;
  if (name == "print_program") return Builtin::kPrintProgram;
  if (name == "string_assign_program") return Builtin::kStringAssignProgram;
  if (name == "distribution_of_3") return Builtin::kDistributionOf3;
  if (name == "match_to_sample") return Builtin::kMatchToSample;
  return std::nullopt;
}

std::string builtin_name(Builtin kind) {
  switch (kind) {
    case Builtin::kSameDifferent: return "same_different";
    case Builtin::kAbaVsAbb: return "aba_vs_abb";
    case Builtin::kAbabVsAabb: return "abab_vs_aabb";
    case Builtin::kMajority: return "majority";
    case Builtin::kRandomTask: return "random_task";
    case Builtin::kCopy: return "copy";
    case Builtin::kPrintProgram: return "print_program";
    case Builtin::kStringAssignProgram: return "string_assign_program";
    case Builtin::kDistributionOf3: return "distribution_of_3";
    case Builtin::kMatchToSample: return "match_to_sample";
  }
  return "unknown";
}

namespace {

nlohmann::json symbol_to_json(const TemplateSymbol& s) {
  nlohmann::json j;
  if (s.wild)
    j["wild"] = s.id;
  else
    j["reg"] = s.id;
  return j;
}

TemplateSymbol symbol_from_json(const nlohmann::json& j) {
  if (j.contains("wild")) return TemplateSymbol::wildcard(j.at("wild"));
  if (j.contains("reg")) return TemplateSymbol::regular(j.at("reg"));
  fail(ErrorKind::kValidation, "task json: symbol needs 'reg' or 'wild'");
}

}  // namespace

std::string task_to_json(const TemplateTask& task) {
  nlohmann::json j;
  j["k"] = task.k;
  j["vocab_size"] = task.vocab_size;
  j["weights"] = task.weights;
  j["sigma"] = task.sigma;
  if (!task.name.empty()) j["name"] = task.name;
  j["templates"] = nlohmann::json::array();
  for (const auto& z : task.templates) {
    nlohmann::json zt;
    zt["symbols"] = nlohmann::json::array();
    for (const auto& s : z.symbols) zt["symbols"].push_back(symbol_to_json(s));
    if (z.label.symbolic)
      zt["label"] = {{"sym", symbol_to_json(z.label.sym)}};
    else
      zt["label"] = {{"real", z.label.real}};
    j["templates"].push_back(std::move(zt));
  }
  return j.dump(2);
}

TemplateTask task_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const std::exception& e) {
    fail(ErrorKind::kValidation, std::string("task json: parse error: ") + e.what());
  }
  TemplateTask t;
  try {
    t.k = j.at("k");
    t.vocab_size = j.at("vocab_size");
    t.sigma = j.value("sigma", 0.0);
    t.name = j.value("name", "");
    t.weights = j.at("weights").get<std::vector<double>>();
    std::int32_t max_wild = -1;
    for (const auto& zt : j.at("templates")) {
      Template z;
      for (const auto& sj : zt.at("symbols"))
        z.symbols.push_back(symbol_from_json(sj));
      const auto& lj = zt.at("label");
      if (lj.contains("sym"))
        z.label = TemplateLabel::symbol(symbol_from_json(lj.at("sym")));
      else
        z.label = TemplateLabel::real_value(lj.at("real"));
      for (const auto& s : z.symbols)
        if (s.wild) max_wild = std::max(max_wild, s.id);
      if (z.label.symbolic && z.label.sym.wild)
        max_wild = std::max(max_wild, z.label.sym.id);
      t.templates.push_back(std::move(z));
    }
    t.n_wildcards = max_wild + 1;
    t.symbolic = !t.templates.empty() && t.templates.front().label.symbolic;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kValidation, std::string("task json: ") + e.what());
  }
  t.validate();
  return t;
}

std::string dataset_to_csv(const Dataset& ds, const std::string& manifest_hash) {
  std::ostringstream out;
  out << "# manifest=" << manifest_hash << "\n";
  out << "idx,template_idx";
  for (std::size_t i = 0; i < ds.k; ++i) out << ",tok_" << i;
  out << ",label\n";
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const Sample& s = ds.samples[i];
    out << i << "," << s.template_index;
    for (Token t : s.tokens) out << "," << t;
    if (ds.symbolic)
      out << "," << s.token_label;
    else
      out << "," << fmt_double(s.real_label);
    out << "\n";
  }
  return out.str();
}

}  // namespace reltask
