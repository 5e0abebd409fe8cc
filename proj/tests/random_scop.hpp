// Seeded random SCoP generator shared by the dependence, tiling, and codegen
// suites. Scops are built directly as polyhedral objects, bypassing the DSL,
// so the analysis core is exercised on its own terms.
#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "polytask/scop.hpp"

namespace polytask::testing {

struct RandomScopOptions {
  int maxDepth = 3;
  int maxStatements = 3;
  int maxParamValue = 6;
  // When true every statement sits at the same full depth in one shared nest
  // (tiling needs a common band); otherwise statements scatter across levels.
  bool fullDepthStatements = false;
};

struct RandomScop {
  Scop scop;
  std::map<std::string, std::int64_t> paramValues;
};

// Statements share one nest laid out as: at each level, first the statements
// of that depth in index order, then the loop descending one level deeper.
// Betas encode exactly that textual layout.
inline RandomScop random_scop(std::mt19937& rng, const RandomScopOptions& opt = {}) {
  auto pick = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  RandomScop out;
  Scop& scop = out.scop;
  bool useParam = pick(0, 1) == 1;
  if (useParam) {
    scop.parameterNames.push_back("n");
    out.paramValues["n"] = pick(2, opt.maxParamValue);
  }
  int np = static_cast<int>(scop.parameterNames.size());
  VarSpace ctxSpace;
  ctxSpace.numIterators = 0;
  ctxSpace.names = scop.parameterNames;
  scop.context = Polyhedron::universe(ctxSpace);
  if (useParam) {
    // Parameters are pinned in the context, making the analysis questions the
    // oracle answers at these values decidable exactly.
    AffineExpr fixed = AffineExpr::variable(0);
    fixed.add_constant(Rational(-out.paramValues["n"]));
    scop.context.add_eq(fixed);
  }

  int depth = pick(1, opt.maxDepth);
  int nStatements = pick(1, opt.maxStatements);

  std::vector<std::string> iterNames;
  for (int d = 0; d < depth; ++d) iterNames.push_back("i" + std::to_string(d));

  struct BoundPair {
    AffineExpr lo, hi;  // half-open
  };
  std::vector<BoundPair> bounds;
  for (int d = 0; d < depth; ++d) {
    BoundPair b;
    int loKind = d > 0 ? pick(0, 1) : 0;
    if (loKind == 0) {
      b.lo = AffineExpr::constant(Rational(0));
    } else {
      b.lo = AffineExpr::variable(pick(0, d - 1));
    }
    int hiKind = useParam ? pick(0, 2) : pick(0, 1);
    if (hiKind == 0) {
      b.hi = AffineExpr::constant(Rational(pick(2, 5)));
    } else if (hiKind == 1 && d > 0) {
      b.hi = AffineExpr::variable(pick(0, d - 1));
      b.hi.add_constant(Rational(pick(1, 3)));
    } else if (useParam) {
      b.hi = AffineExpr::variable(depth + pick(0, np - 1));
      b.hi.add_constant(Rational(pick(-1, 1)));
    } else {
      b.hi = AffineExpr::constant(Rational(pick(2, 5)));
    }
    bounds.push_back(std::move(b));
  }

  struct ArrayInfo {
    std::string name;
    int rank;
  };
  std::vector<ArrayInfo> arrays = {{"A", pick(1, 2)}, {"B", pick(1, 2)}};

  auto randomSubscript = [&](int stmtDepth) {
    AffineExpr e;
    int terms = pick(0, 2);
    for (int t = 0; t < terms; ++t) {
      int var = pick(0, stmtDepth - 1);
      e.add_term(var, Rational(pick(-2, 2)));
    }
    e.add_constant(Rational(pick(-2, 2)));
    return e;
  };

  // Pass 1: depths, so betas can encode the layout.
  std::vector<int> depths;
  for (int sIdx = 0; sIdx < nStatements; ++sIdx)
    depths.push_back(opt.fullDepthStatements ? depth : pick(1, depth));
  std::vector<int> stmtsAtLevel(static_cast<std::size_t>(depth) + 1, 0);
  for (int d : depths) ++stmtsAtLevel[static_cast<std::size_t>(d)];

  for (int sIdx = 0; sIdx < nStatements; ++sIdx) {
    ScopStatement stmt;
    stmt.id = sIdx;
    int sDepth = depths[static_cast<std::size_t>(sIdx)];
    VarSpace space;
    space.numIterators = sDepth;
    for (int d = 0; d < sDepth; ++d) space.names.push_back(iterNames[static_cast<std::size_t>(d)]);
    for (const auto& p : scop.parameterNames) space.names.push_back(p);
    Polyhedron domain(space);
    for (int d = 0; d < sDepth; ++d) {
      std::map<int, int> remap;
      for (int pp = 0; pp < np; ++pp) remap[depth + pp] = sDepth + pp;
      domain.add_half_open_bounds(d, bounds[static_cast<std::size_t>(d)].lo.remapped(remap),
                                  bounds[static_cast<std::size_t>(d)].hi.remapped(remap));
    }
    stmt.domain = std::move(domain);
    for (int d = 0; d < sDepth; ++d) stmt.iterators.push_back(iterNames[static_cast<std::size_t>(d)]);

    int ownPosition = 0;  // among statements of the same depth, in index order
    for (int t = 0; t < sIdx; ++t)
      if (depths[static_cast<std::size_t>(t)] == sDepth) ++ownPosition;
    stmt.schedule.push_back(ScatterDim::betaDim(0));
    for (int d = 0; d < sDepth; ++d) {
      stmt.schedule.push_back(ScatterDim::iterDim(d));
      long beta = d == sDepth - 1
                      ? ownPosition
                      : stmtsAtLevel[static_cast<std::size_t>(d) + 1];  // the sub-loop slot
      stmt.schedule.push_back(ScatterDim::betaDim(beta));
    }

    const ArrayInfo& wArr = arrays[static_cast<std::size_t>(pick(0, 1))];
    AccessRelation write;
    write.array = wArr.name;
    write.kind = AccessKind::WRITE;
    for (int r = 0; r < wArr.rank; ++r) write.subscripts.push_back(randomSubscript(sDepth));
    stmt.writes.push_back(write);

    int nReads = pick(0, 2);
    for (int r = 0; r < nReads; ++r) {
      const ArrayInfo& arr = arrays[static_cast<std::size_t>(pick(0, 1))];
      AccessRelation read;
      read.array = arr.name;
      read.kind = AccessKind::READ;
      for (int d = 0; d < arr.rank; ++d) read.subscripts.push_back(randomSubscript(sDepth));
      stmt.reads.push_back(read);
    }

    // A body statement consistent with the accesses (used only for printing).
    std::vector<std::string> names = stmt.iterators;
    for (const auto& p : scop.parameterNames) names.push_back(p);
    std::vector<ExprPtr> targetSubs;
    for (const auto& sub : stmt.writes[0].subscripts)
      targetSubs.push_back(affine_to_expr(sub, names));
    ExprPtr rhs = make_int(0);
    for (const auto& read : stmt.reads) {
      std::vector<ExprPtr> subs;
      for (const auto& sub : read.subscripts) subs.push_back(affine_to_expr(sub, names));
      rhs = make_binop(BinOpKind::Add, rhs, make_array_ref(read.array, std::move(subs)));
    }
    stmt.body = make_assign(make_array_ref(stmt.writes[0].array, std::move(targetSubs)), rhs);
    scop.statements.push_back(std::move(stmt));
  }
  return out;
}

}  // namespace polytask::testing
