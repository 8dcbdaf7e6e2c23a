#pragma once

// Test-only oracles: central finite differences for gradients, and brute
// force enumeration for template matching/disjointness. These stay
// independent of the library code paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "reltask/autodiff.hpp"
#include "reltask/task.hpp"
#include "reltask/tensor.hpp"

namespace oracles {

// Central finite differences of a scalar-valued function with respect to one
// tensor argument, edited in place between evaluations.
inline reltask::Tensor numeric_gradient(const std::function<double()>& f,
                                        const std::function<void(const reltask::Tensor&)>& set_theta,
                                        reltask::Tensor theta,
                                        double step = 1e-4) {
  reltask::Tensor g(theta.shape());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta.at(i);
    theta.at(i) = saved + step;
    set_theta(theta);
    const double fp = f();
    theta.at(i) = saved - step;
    set_theta(theta);
    const double fm = f();
    theta.at(i) = saved;
    set_theta(theta);
    g.at(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline double rel_error(const reltask::Tensor& approx,
                        const reltask::Tensor& reference) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    const double d = approx.at(i) - reference.at(i);
    num += d * d;
    den += reference.at(i) * reference.at(i);
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

// Finite-difference check of every parameter of a model against the
// gradients accumulated by one backward pass of `loss_graph`.
inline double max_group_rel_error(
    const std::vector<reltask::Var>& params,
    const std::function<double()>& loss_value) {
  double worst = 0.0;
  for (reltask::Var v : params) {
    if (!v.has_grad()) continue;
    reltask::Tensor fd = numeric_gradient(
        loss_value, [&](const reltask::Tensor& t) { v.set_value(t); },
        v.value());
    worst = std::max(worst, rel_error(v.grad(), fd));
  }
  return worst;
}

// Exhaustive matcher: enumerates every injective assignment of z's wildcards
// to tokens of x and substitutes by hand.
inline std::optional<reltask::SubstitutionMap> brute_force_match(
    const std::vector<reltask::Token>& x, const reltask::Template& z) {
  using reltask::Token;
  if (x.size() != z.length()) return std::nullopt;
  std::vector<std::int32_t> wilds;
  for (const auto& s : z.symbols)
    if (s.wild) wilds.push_back(s.id);
  std::sort(wilds.begin(), wilds.end());
  wilds.erase(std::unique(wilds.begin(), wilds.end()), wilds.end());
  std::vector<Token> candidates = x;
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()),
                   candidates.end());
  const auto regs = z.regular_tokens();

  std::vector<Token> assignment(wilds.size(), -1);
  std::vector<bool> used(candidates.size(), false);
  std::optional<reltask::SubstitutionMap> found;

  std::function<void(std::size_t)> rec = [&](std::size_t depth) {
    if (found) return;
    if (depth == wilds.size()) {
      // Hand substitution, independent of the library path.
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto& sym = z.symbols[i];
        Token expected;
        if (sym.wild) {
          const std::size_t w = static_cast<std::size_t>(
              std::lower_bound(wilds.begin(), wilds.end(), sym.id) -
              wilds.begin());
          expected = assignment[w];
        } else {
          expected = sym.id;
        }
        if (expected != x[i]) return;
      }
      reltask::SubstitutionMap s;
      for (std::size_t w = 0; w < wilds.size(); ++w)
        s.emplace(wilds[w], assignment[w]);
      found = s;
      return;
    }
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      if (used[c]) continue;
      if (std::binary_search(regs.begin(), regs.end(), candidates[c])) continue;
      used[c] = true;
      assignment[depth] = candidates[c];
      rec(depth + 1);
      used[c] = false;
      if (found) return;
    }
  };
  rec(0);
  return found;
}

// Exhaustive disjointness over an explicit alphabet: true iff no string in
// alphabet^k matches both templates.
inline bool brute_force_disjoint(const reltask::Template& z1,
                                 const reltask::Template& z2,
                                 const std::vector<reltask::Token>& alphabet) {
  const std::size_t k = z1.length();
  std::vector<std::size_t> digits(k, 0);
  std::vector<reltask::Token> x(k);
  for (;;) {
    for (std::size_t i = 0; i < k; ++i) x[i] = alphabet[digits[i]];
    if (brute_force_match(x, z1) && brute_force_match(x, z2)) return false;
    std::size_t pos = 0;
    while (pos < k && ++digits[pos] == alphabet.size()) digits[pos++] = 0;
    if (pos == k) break;
  }
  return true;
}

}  // namespace oracles
