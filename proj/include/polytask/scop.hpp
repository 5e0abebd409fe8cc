#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polytask/ast.hpp"
#include "polytask/error.hpp"
#include "polytask/polyhedron.hpp"

namespace polytask {

enum class AccessKind { READ, WRITE };

// One affine array access of a statement. Subscript expressions range over the
// statement's (iterators..., parameters...) variable ids.
struct AccessRelation {
  std::string array;
  std::vector<AffineExpr> subscripts;
  AccessKind kind = AccessKind::READ;

  friend bool operator==(const AccessRelation&, const AccessRelation&) = default;
};

// One dimension of a CLooG-style scattering vector: either a constant (beta,
// the textual interleaving) or one of the statement's iterators.
struct ScatterDim {
  bool isBeta = true;
  long beta = 0;
  int iter = 0;

  static ScatterDim betaDim(long b) { return {true, b, 0}; }
  static ScatterDim iterDim(int level) { return {false, 0, level}; }

  friend bool operator==(const ScatterDim&, const ScatterDim&) = default;
};

struct ScopStatement {
  int id = 0;                          // global statement number (source order)
  std::vector<std::string> iterators;  // outermost first
  Polyhedron domain;                   // space: iterators then parameters
  std::vector<ScatterDim> schedule;    // 2*depth+1 dims, beta/iter alternating
  std::vector<AccessRelation> reads;
  std::vector<AccessRelation> writes;
  StmtPtr body;                        // the Assign or Call node
  int tileDepth = 0;                   // leading schedule levels that scan tiles

  int depth() const { return static_cast<int>(iterators.size()); }

  std::vector<AccessRelation> accesses() const {
    std::vector<AccessRelation> all = reads;
    all.insert(all.end(), writes.begin(), writes.end());
    return all;
  }

  friend bool operator==(const ScopStatement& a, const ScopStatement& b) {
    return a.id == b.id && a.iterators == b.iterators && a.domain == b.domain &&
           a.schedule == b.schedule && a.reads == b.reads && a.writes == b.writes &&
           a.tileDepth == b.tileDepth && struct_equal(a.body, b.body);
  }
};

struct Scop {
  Polyhedron context;  // over parameters only
  std::vector<std::string> parameterNames;
  std::vector<ScopStatement> statements;

  int max_depth() const {
    int d = 0;
    for (const auto& s : statements) d = std::max(d, s.depth());
    return d;
  }

  friend bool operator==(const Scop&, const Scop&) = default;
};

struct ExtractedScop {
  Scop scop;
  StmtPtr sourceLoop;  // the loop nest this scop was lifted from
};

struct ExtractionResult {
  std::vector<ExtractedScop> scops;
  std::vector<StmtPtr> residual;  // top-level regions left intact
};

// ---------------------------------------------------------------------------
// Affine recognition
// ---------------------------------------------------------------------------

// Converts an expression to an affine form over `varIds` (iterator and
// parameter names). Integer literals and +,-,* with a constant side qualify;
// floats, kernel calls, min/max/floordiv and array references do not.
inline std::optional<AffineExpr> to_affine(const ExprPtr& e,
                                           const std::map<std::string, int>& varIds) {
  switch (e->kind) {
    case Expr::Kind::IntLit:
      return AffineExpr::constant(Rational(e->intValue));
    case Expr::Kind::VarRef: {
      auto it = varIds.find(e->name);
      if (it == varIds.end()) return std::nullopt;
      return AffineExpr::variable(it->second);
    }
    case Expr::Kind::Neg: {
      auto inner = to_affine(e->args[0], varIds);
      if (!inner) return std::nullopt;
      return inner->scaled(Rational(-1));
    }
    case Expr::Kind::BinOp: {
      auto lhs = to_affine(e->args[0], varIds);
      auto rhs = to_affine(e->args[1], varIds);
      if (!lhs || !rhs) return std::nullopt;
      switch (e->op) {
        case BinOpKind::Add:
          return *lhs + *rhs;
        case BinOpKind::Sub:
          return *lhs - *rhs;
        case BinOpKind::Mul:
          if (lhs->is_constant()) return rhs->scaled(lhs->constant_term());
          if (rhs->is_constant()) return lhs->scaled(rhs->constant_term());
          return std::nullopt;
      }
      return std::nullopt;
    }
    default:
      return std::nullopt;
  }
}

namespace detail {

// Collects the array accesses of one statement body. Kernel call statements
// conservatively treat every array argument as read and written; an assignment
// reads the refs on its right-hand side (including call arguments) and writes
// its target.
inline void collect_refs(const ExprPtr& e, std::vector<ExprPtr>& out) {
  if (e->kind == Expr::Kind::ArrayRef) {
    out.push_back(e);
    return;  // subscripts of an access are values, not further accesses
  }
  for (const auto& a : e->args) collect_refs(a, out);
}

struct NestFrame {
  std::string iter;
  ExprPtr lo, hi;
};

class ScopBuilder {
 public:
  ScopBuilder(const Program& program, int* nextStmtId)
      : program_(program), nextStmtId_(nextStmtId) {
    for (const auto& p : program.params) paramNames_.push_back(p.name);
  }

  // Returns the scop for `loop` when its whole subtree is affine.
  std::optional<Scop> build(const StmtPtr& loop) {
    Scop scop;
    scop.parameterNames = paramNames_;
    VarSpace paramSpace;
    paramSpace.numIterators = 0;
    paramSpace.names = paramNames_;
    scop.context = Polyhedron::universe(paramSpace);
    int savedId = *nextStmtId_;
    if (!walk_loop(loop, scop)) {
      *nextStmtId_ = savedId;
      return std::nullopt;
    }
    return scop;
  }

 private:
  bool walk_loop(const StmtPtr& loop, Scop& scop) {
    std::map<std::string, int> ids = current_ids();
    auto lo = to_affine(loop->lo, ids);
    auto hi = to_affine(loop->hi, ids);
    if (!lo || !hi) return false;
    nest_.push_back({loop->iter, loop->lo, loop->hi});
    bool ok = walk_body(loop->body, scop);
    nest_.pop_back();
    return ok;
  }

  bool walk_body(const std::vector<StmtPtr>& body, Scop& scop) {
    long beta = 0;
    for (const auto& s : body) {
      betas_.push_back(beta++);
      bool ok = false;
      switch (s->kind) {
        case Stmt::Kind::For:
          ok = walk_loop(s, scop);
          break;
        case Stmt::Kind::Assign:
        case Stmt::Kind::Call:
          ok = !s->isTaskCall && add_statement(s, scop);
          break;
        default:
          ok = false;  // chunk ops, barriers and task calls are never affine
      }
      betas_.pop_back();
      if (!ok) return false;
    }
    return true;
  }

  bool add_statement(const StmtPtr& s, Scop& scop) {
    std::map<std::string, int> ids = current_ids();
    ScopStatement stmt;
    stmt.body = s;
    for (const auto& f : nest_) stmt.iterators.push_back(f.iter);

    VarSpace space;
    space.numIterators = static_cast<int>(nest_.size());
    for (const auto& f : nest_) space.names.push_back(f.iter);
    for (const auto& p : paramNames_) space.names.push_back(p);
    Polyhedron domain(space);
    for (std::size_t level = 0; level < nest_.size(); ++level) {
      auto lo = to_affine(nest_[level].lo, ids);
      auto hi = to_affine(nest_[level].hi, ids);
      domain.add_half_open_bounds(static_cast<int>(level), *lo, *hi);
    }
    stmt.domain = std::move(domain);

    // Scattering: the root loop contributes beta 0, then each level its
    // iterator followed by the statement's position within that body.
    stmt.schedule.push_back(ScatterDim::betaDim(0));
    for (std::size_t level = 0; level < nest_.size(); ++level) {
      stmt.schedule.push_back(ScatterDim::iterDim(static_cast<int>(level)));
      stmt.schedule.push_back(ScatterDim::betaDim(betas_[level]));
    }

    if (!collect_accesses(s, ids, stmt)) return false;
    stmt.id = (*nextStmtId_)++;
    scop.statements.push_back(std::move(stmt));
    return true;
  }

  bool collect_accesses(const StmtPtr& s, const std::map<std::string, int>& ids,
                        ScopStatement& stmt) {
    auto convert = [&](const ExprPtr& ref, AccessKind kind,
                       std::vector<AccessRelation>& out) -> bool {
      AccessRelation rel;
      rel.array = ref->name;
      rel.kind = kind;
      for (const auto& sub : ref->args) {
        auto aff = to_affine(sub, ids);
        if (!aff) return false;
        rel.subscripts.push_back(std::move(*aff));
      }
      out.push_back(std::move(rel));
      return true;
    };

    if (s->kind == Stmt::Kind::Assign) {
      std::vector<ExprPtr> reads;
      collect_refs(s->value, reads);
      for (const auto& r : reads)
        if (!convert(r, AccessKind::READ, stmt.reads)) return false;
      if (s->target->kind != Expr::Kind::ArrayRef) return false;
      return convert(s->target, AccessKind::WRITE, stmt.writes);
    }
    // Kernel call statement: array arguments are read and written.
    for (const auto& arg : s->args) {
      std::vector<ExprPtr> refs;
      collect_refs(arg, refs);
      for (const auto& r : refs) {
        if (!convert(r, AccessKind::READ, stmt.reads)) return false;
        if (!convert(r, AccessKind::WRITE, stmt.writes)) return false;
      }
      if (arg->kind != Expr::Kind::ArrayRef) {
        // Scalar arguments must still be affine values to keep the statement
        // instance a pure function of its iteration vector.
        if (arg->kind != Expr::Kind::FloatLit && !to_affine(arg, ids)) return false;
      }
    }
    return true;
  }

  std::map<std::string, int> current_ids() const {
    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < nest_.size(); ++i) ids[nest_[i].iter] = static_cast<int>(i);
    for (std::size_t p = 0; p < paramNames_.size(); ++p)
      ids[paramNames_[p]] = static_cast<int>(nest_.size() + p);
    return ids;
  }

  const Program& program_;
  int* nextStmtId_;
  std::vector<std::string> paramNames_;
  std::vector<NestFrame> nest_;
  std::vector<long> betas_;
};

}  // namespace detail

// Lifts every top-level loop nest whose entire subtree is affine into a Scop;
// everything else lands in `residual` untouched. Non-affine code is not an
// error, it simply stays sequential.
inline ExtractionResult extract_scops(const Program& p) {
  ExtractionResult result;
  int nextStmtId = 0;
  for (const auto& s : p.body) {
    if (s->kind == Stmt::Kind::For) {
      detail::ScopBuilder builder(p, &nextStmtId);
      if (auto scop = builder.build(s)) {
        result.scops.push_back({std::move(*scop), s});
        continue;
      }
    }
    result.residual.push_back(s);
  }
  return result;
}

// Rebuilds a source expression from an affine form; inverse of to_affine up to
// term ordering. `names` maps variable ids to identifiers (iterators then
// parameters).
inline ExprPtr affine_to_expr(const AffineExpr& e, const std::vector<std::string>& names) {
  ExprPtr acc;
  auto addTerm = [&](ExprPtr term, bool negative) {
    if (!acc) {
      acc = negative ? make_neg(std::move(term)) : std::move(term);
    } else {
      acc = make_binop(negative ? BinOpKind::Sub : BinOpKind::Add, acc, std::move(term));
    }
  };
  for (const auto& [id, coeff] : e.coeffs()) {
    if (!is_integer(coeff)) throw Error("cannot print a non-integer coefficient");
    BigInt c = numerator(coeff);
    bool neg = c < 0;
    BigInt mag = neg ? BigInt(-c) : c;
    ExprPtr var = make_var(names.at(static_cast<std::size_t>(id)));
    ExprPtr term = mag == 1 ? var
                            : make_binop(BinOpKind::Mul,
                                         make_int(static_cast<std::int64_t>(mag)), var);
    addTerm(std::move(term), neg);
  }
  const Rational& k = e.constant_term();
  if (!is_integer(k)) throw Error("cannot print a non-integer constant");
  BigInt kc = numerator(k);
  if (kc != 0 || !acc) {
    bool neg = kc < 0;
    BigInt mag = neg ? BigInt(-kc) : kc;
    addTerm(make_int(static_cast<std::int64_t>(mag)), neg);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Schedule vectors
// ---------------------------------------------------------------------------

// Scattering timestamp of one statement instance. Comparing these vectors
// lexicographically reproduces source execution order; distinct statements
// always diverge at a beta position within the shared prefix.
inline std::vector<std::int64_t> schedule_vector(const ScopStatement& s, const Point& instance) {
  std::vector<std::int64_t> v;
  v.reserve(s.schedule.size());
  for (const auto& dim : s.schedule) {
    if (dim.isBeta) {
      v.push_back(dim.beta);
    } else {
      v.push_back(instance.assignment.at(static_cast<std::size_t>(dim.iter)));
    }
  }
  return v;
}

inline bool schedule_less(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;  // equal prefixes only happen for one and the same instance
}

}  // namespace polytask
