#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "polytask/ast.hpp"
#include "polytask/error.hpp"
#include "polytask/scop.hpp"

namespace polytask {

// Per-level parallel marks plus the transformation knobs that travel with a
// scop through the pipeline.
struct LoopAnnotations {
  std::vector<bool> parallel;  // index = level-1
  std::vector<int> tileSizes;
  int taskifyLevel = 0;

  bool is_parallel(int level) const {
    return level >= 1 && level <= static_cast<int>(parallel.size()) &&
           parallel[static_cast<std::size_t>(level - 1)];
  }
};

namespace scan_detail {

// One lower or upper bound candidate for a loop level: coeff * x + rest >= 0
// rearranged around x. The normal form (coefficients over outer iterators and
// parameters) lets shared loops intersect candidate sets across statements.
struct BoundCandidate {
  BigInt coeff;     // coefficient of the scanned variable (sign decides side)
  AffineExpr rest;  // remaining terms, over outer iterators + parameters
  std::vector<BigInt> normalForm;
};

struct LevelCandidates {
  std::vector<BoundCandidate> lower;
  std::vector<BoundCandidate> upper;
};

// Extracts candidates for `level` of one statement by projecting away deeper
// iterators, then collecting every constraint that mentions the level's
// variable. Equalities contribute to both sides.
inline LevelCandidates level_candidates(const ScopStatement& stmt, int level, int numParams) {
  Polyhedron proj = stmt.domain;
  for (int v = stmt.depth() - 1; v > level; --v) proj = fm_eliminate(proj, v);

  LevelCandidates out;
  // After projection, iterators 0..level keep their ids and the parameters
  // follow at level+1..level+np; rest expressions are remapped back into the
  // full statement space (params at depth..depth+np).
  int dim = proj.dim();
  auto matrix = proj.constraint_matrix();
  auto fullId = [&](int v) { return v <= level ? v : stmt.depth() + (v - level - 1); };
  for (int r = 0; r < static_cast<int>(matrix.size()); ++r) {
    const auto& row = matrix[static_cast<std::size_t>(r)];
    const BigInt& a = row[static_cast<std::size_t>(level)];
    if (a == 0) continue;
    BoundCandidate cand;
    cand.coeff = a;
    for (int v = 0; v < dim; ++v) {
      if (v == level) continue;
      if (row[static_cast<std::size_t>(v)] != 0)
        cand.rest.set_coeff(fullId(v), Rational(row[static_cast<std::size_t>(v)]));
    }
    cand.rest.add_constant(Rational(row[static_cast<std::size_t>(dim)]));
    // Normal form: level coeff, outer coeffs, params, constant, so statements
    // of different depth compare equal row-wise.
    cand.normalForm.push_back(a);
    for (int v = 0; v < level; ++v) cand.normalForm.push_back(row[static_cast<std::size_t>(v)]);
    for (int p = 0; p < numParams; ++p)
      cand.normalForm.push_back(row[static_cast<std::size_t>(level + 1 + p)]);
    cand.normalForm.push_back(row[static_cast<std::size_t>(dim)]);

    if (proj.row_relation(r) == ConstraintRel::EQ) {
      BoundCandidate mirrored = cand;
      mirrored.coeff = -cand.coeff;
      mirrored.rest = cand.rest.scaled(Rational(-1));
      mirrored.normalForm.clear();
      mirrored.normalForm.push_back(mirrored.coeff);
      for (std::size_t i = 1; i < cand.normalForm.size(); ++i)
        mirrored.normalForm.push_back(-cand.normalForm[i]);
      (cand.coeff > 0 ? out.lower : out.upper).push_back(cand);
      (mirrored.coeff > 0 ? out.lower : out.upper).push_back(mirrored);
    } else {
      (a > 0 ? out.lower : out.upper).push_back(cand);
    }
  }
  return out;
}

// a*x + rest >= 0 with a > 0:  x >= ceil(-rest / a).
inline ExprPtr lower_bound_expr(const BoundCandidate& cand,
                                const std::vector<std::string>& names) {
  AffineExpr neg = cand.rest.scaled(Rational(-1));
  if (cand.coeff == 1) return affine_to_expr(neg, names);
  if (neg.is_constant()) {
    BigInt v = ceil_div(numerator(neg.constant_term()), cand.coeff);
    return make_int(static_cast<std::int64_t>(v));
  }
  AffineExpr shifted = neg;
  shifted.add_constant(Rational(cand.coeff - 1));
  return make_call("floordiv", {affine_to_expr(shifted, names),
                                make_int(static_cast<std::int64_t>(cand.coeff))});
}

// a*x + rest >= 0 with a < 0:  x <= floor(rest / -a); half-open bound adds 1.
inline ExprPtr upper_bound_expr(const BoundCandidate& cand,
                                const std::vector<std::string>& names) {
  BigInt b = -cand.coeff;
  if (b == 1) {
    AffineExpr hi = cand.rest;
    hi.add_constant(Rational(1));
    return affine_to_expr(hi, names);
  }
  if (cand.rest.is_constant()) {
    BigInt v = floor_div(numerator(cand.rest.constant_term()), b) + 1;
    return make_int(static_cast<std::int64_t>(v));
  }
  ExprPtr fd = make_call("floordiv", {affine_to_expr(cand.rest, names),
                                      make_int(static_cast<std::int64_t>(b))});
  return make_binop(BinOpKind::Add, std::move(fd), make_int(1));
}

inline ExprPtr combine(std::vector<ExprPtr> exprs, const std::string& fn) {
  if (exprs.size() == 1) return exprs[0];
  return make_call(fn, std::move(exprs));
}

struct LoopBounds {
  ExprPtr lo, hi;
};

// Bounds of a shared loop: candidates are intersected across the group (the
// original source bounds are present in every member's domain, so they always
// survive; statement-specific derived rows drop out and the deeper levels of
// the statements that produced them guard themselves).
inline LoopBounds group_bounds(const std::vector<const ScopStatement*>& group, int level,
                               int numParams, const std::vector<std::string>& names) {
  std::vector<LevelCandidates> all;
  all.reserve(group.size());
  for (const auto* s : group) all.push_back(level_candidates(*s, level, numParams));

  auto intersect = [&](auto member) {
    std::vector<BoundCandidate> kept;
    for (const BoundCandidate& cand : all[0].*member) {
      bool everywhere = true;
      for (std::size_t g = 1; g < all.size() && everywhere; ++g) {
        bool found = false;
        for (const BoundCandidate& other : all[g].*member)
          if (other.normalForm == cand.normalForm) {
            found = true;
            break;
          }
        everywhere = found;
      }
      if (everywhere) kept.push_back(cand);
    }
    return kept;
  };
  std::vector<BoundCandidate> lower = intersect(&LevelCandidates::lower);
  std::vector<BoundCandidate> upper = intersect(&LevelCandidates::upper);
  if (lower.empty())
    throw UnscannableDomain("no lower bound for loop level " + std::to_string(level + 1),
                            level + 1);
  if (upper.empty())
    throw UnscannableDomain("no upper bound for loop level " + std::to_string(level + 1),
                            level + 1);

  std::vector<ExprPtr> lowerExprs, upperExprs;
  for (const auto& c : lower) lowerExprs.push_back(lower_bound_expr(c, names));
  for (const auto& c : upper) upperExprs.push_back(upper_bound_expr(c, names));
  return {combine(std::move(lowerExprs), "max"), combine(std::move(upperExprs), "min")};
}

}  // namespace scan_detail

using LeafBuilder = std::function<std::vector<StmtPtr>(const ScopStatement&)>;

namespace scan_detail {

inline std::vector<StmtPtr> scan_group(const Scop& scop,
                                       const std::vector<const ScopStatement*>& group,
                                       std::size_t pos, const LoopAnnotations* ann,
                                       const LeafBuilder& leaf);

// Recursion over the beta tree: at an even schedule position, statements split
// by beta value; a statement whose schedule ends here is a leaf, the rest
// descend into the loop at the next iterator position.
inline std::vector<StmtPtr> scan_children(const Scop& scop,
                                          const std::vector<const ScopStatement*>& group,
                                          std::size_t pos, const LoopAnnotations* ann,
                                          const LeafBuilder& leaf) {
  std::map<long, std::vector<const ScopStatement*>> byBeta;
  for (const auto* s : group) {
    const ScatterDim& dim = s->schedule.at(pos);
    if (!dim.isBeta) throw Error("schedule does not alternate beta/iterator dims");
    byBeta[dim.beta].push_back(s);
  }
  std::vector<StmtPtr> out;
  for (auto& [beta, sub] : byBeta) {
    for (const auto& stmtNode : scan_group(scop, sub, pos, ann, leaf)) out.push_back(stmtNode);
  }
  return out;
}

inline std::vector<StmtPtr> scan_group(const Scop& scop,
                                       const std::vector<const ScopStatement*>& group,
                                       std::size_t pos, const LoopAnnotations* ann,
                                       const LeafBuilder& leaf) {
  // Leaves end exactly at this beta position.
  std::vector<StmtPtr> out;
  std::vector<const ScopStatement*> deeper;
  for (const auto* s : group) {
    if (s->schedule.size() == pos + 1) {
      for (const auto& node : leaf(*s)) out.push_back(node);
    } else {
      deeper.push_back(s);
    }
  }
  if (deeper.empty()) return out;

  int level = static_cast<int>(pos / 2);  // 0-based iterator level
  int numParams = static_cast<int>(scop.parameterNames.size());
  const ScopStatement* rep = deeper.front();
  // Candidate expressions live in the representative's statement space:
  // its iterators first, then the scop parameters.
  std::vector<std::string> names;
  for (int v = 0; v < rep->depth(); ++v)
    names.push_back(rep->iterators[static_cast<std::size_t>(v)]);
  for (const auto& p : scop.parameterNames) names.push_back(p);

  LoopBounds bounds = group_bounds(deeper, level, numParams, names);

  std::vector<StmtPtr> body = scan_children(scop, deeper, pos + 2, ann, leaf);
  bool parallel = ann && ann->is_parallel(level + 1);
  out.push_back(make_for(rep->iterators[static_cast<std::size_t>(level)], bounds.lo, bounds.hi,
                         std::move(body), parallel));
  return out;
}

}  // namespace scan_detail

// Scans the scop's statement domains back into a loop AST. Executing the
// result visits exactly the integer points of every statement domain in
// schedule order. `leaf` supplies each statement's code (defaults to the
// original body); `ann` marks parallel loops for the printer.
inline std::vector<StmtPtr> generate_loops(const Scop& scop, const LoopAnnotations* ann = nullptr,
                                           const LeafBuilder& leafIn = {}) {
  LeafBuilder leaf = leafIn;
  if (!leaf) {
    leaf = [](const ScopStatement& s) { return std::vector<StmtPtr>{s.body}; };
  }
  std::vector<const ScopStatement*> all;
  for (const auto& s : scop.statements) all.push_back(&s);
  return scan_detail::scan_children(scop, all, 0, ann, leaf);
}

}  // namespace polytask
