#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "reltask/task.hpp"

#include "oracles.hpp"

using namespace reltask;

namespace {

Template tmpl(std::vector<TemplateSymbol> syms, double label = 0.0) {
  Template z;
  z.symbols = std::move(syms);
  z.label = TemplateLabel::real_value(label);
  return z;
}

TemplateSymbol W(std::int32_t id) { return TemplateSymbol::wildcard(id); }
TemplateSymbol R(Token t) { return TemplateSymbol::regular(t); }

}  // namespace

TEST_CASE("substitute: program task propagates the quoted symbol to the label") {
  const TemplateTask task = make_builtin(Builtin::kStringAssignProgram);
  const Template& print_first = task.templates[0];
  SubstitutionMap s{{0, 100}, {1, 101}, {2, 102}, {3, 103}};
  const auto result = substitute(print_first, s);
  CHECK(result.label.symbolic);
  CHECK(result.label.sym.id == 102);  // the first quoted value
  // The quoted values sit inside the string as well.
  CHECK(std::count(result.tokens.begin(), result.tokens.end(), 102) == 1);
}

TEST_CASE("substitute: copy template yields (token, token)") {
  const TemplateTask task = make_builtin(Builtin::kCopy);
  SubstitutionMap s{{0, 42}};
  const auto result = substitute(task.templates[0], s);
  CHECK(result.tokens == std::vector<Token>{42});
  CHECK(result.label.sym.id == 42);
}

TEST_CASE("substitute: no wildcards returns the template verbatim") {
  const Template z = tmpl({R(3), R(4), R(3)});
  const auto result = substitute(z, {});
  CHECK(result.tokens == std::vector<Token>{3, 4, 3});
}

TEST_CASE("substitute: the three validation errors are distinct") {
  const Template z = tmpl({W(0), W(1), R(9)});
  CHECK_THROWS_WITH_AS(substitute(z, {{0, 5}}),
                       doctest::Contains("no binding"), Error);
  CHECK_THROWS_WITH_AS(substitute(z, {{0, 5}, {1, 5}}),
                       doctest::Contains("not injective"), Error);
  CHECK_THROWS_WITH_AS(substitute(z, {{0, 5}, {1, 9}}),
                       doctest::Contains("regular"), Error);
}

TEST_CASE("matches: worked example with two wildcards and two regulars") {
  // Template (w0 w0 w1 S T) against QQRST-style strings.
  const Token S = 30, T = 31, Q = 1, Rr = 2;
  const Template z = tmpl({W(0), W(0), W(1), R(S), R(T)});

  const auto hit = matches({Q, Q, Rr, S, T}, z);
  REQUIRE(hit.has_value());
  CHECK(hit->at(0) == Q);
  CHECK(hit->at(1) == Rr);

  CHECK(!matches({Q, Q, Q, S, T}, z));  // substitution not injective
  CHECK(!matches({Q, Q, S, S, T}, z));  // S already a template token

  CHECK_THROWS_AS(matches({Q, Q}, z), Error);
}

TEST_CASE("matches round trip recovers the substitution map") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 1 + rng.below(5);
    std::vector<TemplateSymbol> syms;
    for (std::size_t i = 0; i < k; ++i) {
      if (rng.below(2))
        syms.push_back(W(static_cast<std::int32_t>(rng.below(3))));
      else
        syms.push_back(R(static_cast<Token>(1 + rng.below(3))));
    }
    const Template z = tmpl(std::move(syms));
    const auto wilds = z.wildcard_ids();
    // Bind wildcards injectively to tokens outside the regular range.
    SubstitutionMap s;
    const auto picks = rng.sample_distinct(50, wilds.size());
    for (std::size_t i = 0; i < wilds.size(); ++i)
      s.emplace(wilds[i], static_cast<Token>(10 + picks[i]));
    const auto x = substitute(z, s).tokens;
    const auto recovered = matches(x, z);
    REQUIRE(recovered.has_value());
    CHECK(*recovered == s);
  }
}

TEST_CASE("matches agrees with exhaustive search on small instances") {
  const std::vector<TemplateSymbol> pool = {R(1), R(2), W(0), W(1), W(2)};
  const std::vector<Token> alphabet = {1, 2, 3, 4, 5};
  std::size_t checked = 0;
  for (std::size_t a = 0; a < pool.size(); ++a)
    for (std::size_t b = 0; b < pool.size(); ++b)
      for (std::size_t c = 0; c < pool.size(); ++c) {
        const Template z = tmpl({pool[a], pool[b], pool[c]});
        for (Token t1 : alphabet)
          for (Token t2 : alphabet)
            for (Token t3 : alphabet) {
              const std::vector<Token> x = {t1, t2, t3};
              const auto fast = matches(x, z);
              const auto slow = oracles::brute_force_match(x, z);
              REQUIRE(fast.has_value() == slow.has_value());
              if (fast) CHECK(*fast == *slow);
              ++checked;
            }
      }
  CHECK(checked == 125 * 125);
}

TEST_CASE("templates_disjoint basics") {
  const Template same = tmpl({W(0), W(0)});
  const Template diff = tmpl({W(0), W(1)});
  CHECK(templates_disjoint(same, diff));  // injectivity forbids w0 == w1
  CHECK(!templates_disjoint(diff, diff)); // any substitution matches both

  const Template aba = tmpl({W(0), W(1), W(0)});
  const Template abb = tmpl({W(0), W(1), W(1)});
  CHECK(templates_disjoint(aba, abb));
  CHECK(oracles::brute_force_disjoint(aba, abb, {1, 2, 3, 4}));

  CHECK_THROWS_AS(templates_disjoint(same, aba), Error);
}

TEST_CASE("templates_disjoint equals brute force over the canonical family") {
  // One regular token plus up to three wildcards; a five-token alphabet then
  // suffices for any witness.
  const std::vector<TemplateSymbol> pool = {R(1), W(0), W(1), W(2)};
  std::vector<Template> family;
  for (std::size_t a = 0; a < pool.size(); ++a)
    for (std::size_t b = 0; b < pool.size(); ++b)
      for (std::size_t c = 0; c < pool.size(); ++c)
        family.push_back(tmpl({pool[a], pool[b], pool[c]}));
  const std::vector<Token> alphabet = {1, 2, 3, 4, 5};
  for (std::size_t i = 0; i < family.size(); ++i)
    for (std::size_t j = i; j < family.size(); ++j)
      CHECK(templates_disjoint(family[i], family[j]) ==
            oracles::brute_force_disjoint(family[i], family[j], alphabet));
}

TEST_CASE("data diversity") {
  TemplateTask task = make_builtin(Builtin::kSameDifferent);
  task.vocab_size = 512;
  const Token lo = task.first_free_token();
  CHECK(data_diversity(task, {lo, lo + 100}) == doctest::Approx(50.0));

  TemplateTask copy_task = make_builtin(Builtin::kCopy);
  CHECK(data_diversity(copy_task, {1, 11}) == doctest::Approx(10.0));

  // Brute-force enumeration of the uniform injective maps for one template:
  // P[token in range] should equal |W| / |alphabet|.
  {
    const std::size_t n_alpha = 20;
    std::size_t hits = 0, total = 0;
    for (Token a = 0; a < static_cast<Token>(n_alpha); ++a)
      for (Token b = 0; b < static_cast<Token>(n_alpha); ++b) {
        if (a == b) continue;
        ++total;
        if (a == 7 || b == 7) ++hits;
      }
    const double p = static_cast<double>(hits) / static_cast<double>(total);
    TemplateTask t2 = make_builtin(Builtin::kSameDifferent);
    t2.vocab_size = 64;
    CHECK(data_diversity(t2, {1, 1 + n_alpha}) == doctest::Approx(1.0 / p));
  }

  // A single fixed map makes some token certain.
  TemplateTask fixed = make_builtin(Builtin::kSameDifferent);
  fixed.substitution =
      SubstitutionSpec::fixed_maps({SubstitutionMap{{0, 5}, {1, 6}}});
  CHECK(data_diversity(fixed, {1, 100}) == doctest::Approx(1.0));
}

TEST_CASE("sample_dataset: labels, frequencies, determinism, errors") {
  TemplateTask task = make_builtin(Builtin::kSameDifferent);
  task.vocab_size = 64;
  const Token lo = task.first_free_token();

  SUBCASE("noiseless labels equal template labels") {
    const Dataset ds = sample_dataset(task, 64, {lo, lo + 8}, 5);
    for (const Sample& s : ds.samples) {
      const double expected = s.template_index == 0 ? 1.0 : -1.0;
      CHECK(s.real_label == expected);
      CHECK((s.tokens[0] == s.tokens[1]) == (s.template_index == 0));
    }
  }

  SUBCASE("empirical template frequencies approach the weights") {
    const std::size_t n = 10000;
    const Dataset ds = sample_dataset(task, n, {lo, lo + 32}, 9);
    std::size_t first = 0;
    for (const Sample& s : ds.samples)
      if (s.template_index == 0) ++first;
    const double se = std::sqrt(0.25 * static_cast<double>(n));
    CHECK(std::abs(static_cast<double>(first) - 0.5 * n) <= 3.0 * se);
  }

  SUBCASE("alphabet too small raises a validation error") {
    CHECK_THROWS_AS(sample_dataset(task, 4, {lo, lo + 1}, 1), Error);
  }

  SUBCASE("same seed is byte-identical") {
    const Dataset a = sample_dataset(task, 32, {lo, lo + 16}, 13);
    const Dataset b = sample_dataset(task, 32, {lo, lo + 16}, 13);
    CHECK(dataset_to_csv(a, "h") == dataset_to_csv(b, "h"));
  }

  SUBCASE("gaussian label noise has the configured scale") {
    TemplateTask noisy = task;
    noisy.sigma = 0.5;
    const Dataset ds = sample_dataset(noisy, 4000, {lo, lo + 32}, 3);
    double sq = 0.0;
    for (const Sample& s : ds.samples) {
      const double mean = s.template_index == 0 ? 1.0 : -1.0;
      sq += (s.real_label - mean) * (s.real_label - mean);
    }
    const double sd = std::sqrt(sq / 4000.0);
    CHECK(sd == doctest::Approx(0.5).epsilon(0.1));
  }
}

TEST_CASE("disjoint eval split never shares substituted tokens") {
  TemplateTask task = make_builtin(Builtin::kAbaVsAbb);
  task.vocab_size = 512;
  const Token lo = task.first_free_token();
  const TokenRange train_alpha{lo, lo + 100};
  const Dataset train_set = sample_dataset(task, 200, train_alpha, 1);
  const Dataset eval_set = make_disjoint_eval_split(task, 100, train_alpha, 2);

  const auto train_tokens = train_set.substituted_tokens(task);
  const auto eval_tokens = eval_set.substituted_tokens(task);
  std::vector<Token> inter;
  std::set_intersection(train_tokens.begin(), train_tokens.end(),
                        eval_tokens.begin(), eval_tokens.end(),
                        std::back_inserter(inter));
  CHECK(inter.empty());

  TemplateTask small = task;
  small.vocab_size = lo + 120;  // not enough room for the eval alphabet
  CHECK_THROWS_WITH_AS(make_disjoint_eval_split(small, 10, train_alpha, 3),
                       doctest::Contains("exhausted"), Error);
}

TEST_CASE("copy-task eval split emits fresh (t, t) pairs") {
  TemplateTask task = make_builtin(Builtin::kCopy);
  task.vocab_size = 512;
  const Token lo = task.first_free_token();
  const TokenRange train_alpha{lo, lo + 50};
  const Dataset eval_set = make_disjoint_eval_split(task, 40, train_alpha, 7);
  for (const Sample& s : eval_set.samples) {
    CHECK(s.tokens[0] == s.token_label);
    CHECK(s.tokens[0] >= train_alpha.hi);
  }
}

TEST_CASE("builtin template counts") {
  CHECK(make_builtin(Builtin::kSameDifferent).templates.size() == 2);
  CHECK(make_builtin(Builtin::kMajority, {.k = 3}).templates.size() == 4);
  CHECK(make_builtin(Builtin::kMajority, {.k = 6}).templates.size() == 32);
  CHECK(make_builtin(Builtin::kDistributionOf3).templates.size() == 144);
  CHECK(make_builtin(Builtin::kMatchToSample).templates.size() == 40);
  CHECK(make_builtin(Builtin::kPrintProgram).templates.size() == 2);
  CHECK(make_builtin(Builtin::kPrintProgram).k == 17);
}

TEST_CASE("majority labels follow the strict-majority rule") {
  const TemplateTask task = make_builtin(Builtin::kMajority, {.k = 3});
  for (const Template& z : task.templates) {
    std::size_t first_count = 0;
    for (const auto& s : z.symbols)
      if (s.wild && s.id == z.symbols[0].id) ++first_count;
    const double expected = 2 * first_count > 3 ? 1.0 : -1.0;
    CHECK(z.label.real == expected);
  }
}

TEST_CASE("random task draws standardized labels and disjoint templates") {
  const TemplateTask task = make_builtin(
      Builtin::kRandomTask,
      {.r = 6, .n_wildcards = 2, .n_regular = 1, .seed = 3, .disjoint = true});
  REQUIRE(task.templates.size() == 6);
  double mean = 0.0, var = 0.0;
  for (const Template& z : task.templates) mean += z.label.real / 6.0;
  for (const Template& z : task.templates)
    var += (z.label.real - mean) * (z.label.real - mean) / 6.0;
  CHECK(std::abs(mean) < 1e-12);
  CHECK(var == doctest::Approx(1.0));
  task.validate_disjoint();
}

TEST_CASE("builtin tasks validated for kernel use are pairwise disjoint") {
  for (const Builtin kind :
       {Builtin::kSameDifferent, Builtin::kAbaVsAbb, Builtin::kAbabVsAabb,
        Builtin::kCopy, Builtin::kPrintProgram, Builtin::kStringAssignProgram,
        Builtin::kDistributionOf3, Builtin::kMatchToSample}) {
    const TemplateTask task = make_builtin(kind);
    CHECK_NOTHROW(task.validate_disjoint());
  }
}

TEST_CASE("with_cls appends the reserved token") {
  const TemplateTask task = with_cls(make_builtin(Builtin::kSameDifferent));
  CHECK(task.k == 3);
  for (const Template& z : task.templates) {
    CHECK(!z.symbols.back().wild);
    CHECK(z.symbols.back().id == kClsToken);
  }
}

TEST_CASE("task json round trip") {
  const TemplateTask task = make_builtin(Builtin::kStringAssignProgram);
  const std::string doc = task_to_json(task);
  const TemplateTask back = task_from_json(doc);
  CHECK(back.k == task.k);
  CHECK(back.vocab_size == task.vocab_size);
  CHECK(back.symbolic == task.symbolic);
  REQUIRE(back.templates.size() == task.templates.size());
  for (std::size_t j = 0; j < task.templates.size(); ++j) {
    CHECK(back.templates[j].symbols == task.templates[j].symbols);
    CHECK(back.templates[j].label.sym == task.templates[j].label.sym);
  }
  CHECK(task_from_json(task_to_json(back)).weights == task.weights);
  CHECK_THROWS_AS(task_from_json("{\"k\": 2}"), Error);
}

TEST_CASE("dataset csv carries the manifest hash and header") {
  TemplateTask task = make_builtin(Builtin::kSameDifferent);
  const Token lo = task.first_free_token();
  const Dataset ds = sample_dataset(task, 3, {lo, lo + 8}, 1);
  const std::string csv = dataset_to_csv(ds, "deadbeef");
  CHECK(csv.rfind("# manifest=deadbeef\n", 0) == 0);
  CHECK(csv.find("idx,template_idx,tok_0,tok_1,label") != std::string::npos);
}
