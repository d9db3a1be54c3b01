// Exhaustive separability over all k <= 2 pDNF matrices for tiny literal
// universes. Independent of the SAT encoding.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "qinv/separation.hpp"

namespace qinv::testgen {

/// Literal-truth masks (bit l set when literal l holds) for every assignment
/// of the prefix, in nested order.
inline std::vector<std::uint32_t> literal_masks(const Structure& m, const QPrefix& prefix,
                                                const std::vector<Literal>& lits) {
  std::vector<std::uint32_t> out;
  Env env;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == prefix.quants.size()) {
      std::uint32_t mask = 0;
      for (std::size_t l = 0; l < lits.size(); ++l)
        if (eval(m, env, *lits[l].formula())) mask |= 1u << l;
      out.push_back(mask);
      return;
    }
    for (int e = 0; e < m.size(prefix.quants[i].sort); ++e) {
      env.emplace_back(prefix.quants[i].name, e);
      rec(i + 1);
      env.pop_back();
    }
  };
  rec(0);
  return out;
}

struct BruteSide {
  std::vector<std::uint32_t> masks;
  std::vector<int> sizes;
};

/// Truth of the prefix over a matrix given as a predicate on literal masks.
inline bool brute_truth(const QPrefix& prefix, const BruteSide& side,
                        const std::function<bool(std::uint32_t)>& matrix) {
  std::size_t pos = 0;
  std::function<bool(std::size_t)> rec = [&](std::size_t i) -> bool {
    if (i == prefix.quants.size()) return matrix(side.masks[pos++]);
    bool universal = prefix.quants[i].universal;
    bool acc = universal;
    int n = side.sizes[static_cast<std::size_t>(prefix.quants[i].sort)];
    for (int e = 0; e < n; ++e) {
      bool v = rec(i + 1);  // always descend to keep pos aligned
      acc = universal ? (acc && v) : (acc || v);
    }
    return acc;
  };
  return rec(0);
}

/// True if some (clause ∨ optional cube) matrix with at most k terms satisfies
/// every constraint.
inline bool brute_separable(const QPrefix& prefix, const std::vector<Literal>& lits,
                            const std::vector<SepConstraint>& cs, int k) {
  struct Prepared {
    SepConstraint::Kind kind;
    BruteSide a, b;
  };
  std::vector<Prepared> prep;
  for (const auto& c : cs) {
    Prepared p{c.kind, {literal_masks(*c.first, prefix, lits), c.first->sizes()}, {}};
    if (c.second) p.b = {literal_masks(*c.second, prefix, lits), c.second->sizes()};
    prep.push_back(std::move(p));
  }
  const std::uint32_t n = 1u << lits.size();
  // cube == n encodes "no cube"
  for (std::uint32_t clause = 0; clause < n; ++clause)
    for (std::uint32_t cube = 0; cube <= n; ++cube) {
      if (k < 2 && cube != n) continue;
      auto matrix = [&](std::uint32_t m) {
        // the clause lists the negated first-cube literals
        if ((clause & ~m) != 0) return true;
        return cube != n && (m & cube) == cube;
      };
      bool good = true;
      for (const auto& p : prep) {
        bool ta = brute_truth(prefix, p.a, matrix);
        switch (p.kind) {
          case SepConstraint::Kind::Positive: good = ta; break;
          case SepConstraint::Kind::Negative: good = !ta; break;
          case SepConstraint::Kind::Implication: good = !ta || brute_truth(prefix, p.b, matrix); break;
        }
        if (!good) break;
      }
      if (good) return true;
    }
  return false;
}

}  // namespace qinv::testgen
