#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "polytask/ast.hpp"
#include "polytask/dependence.hpp"
#include "polytask/error.hpp"
#include "polytask/scan.hpp"
#include "polytask/scop.hpp"

namespace polytask {

// ---------------------------------------------------------------------------
// Parallel-loop detection
// ---------------------------------------------------------------------------

// A level is parallel iff no dependence is carried there. Loop-independent
// dependences never forbid parallelism; they are honored by statement order
// inside the loop body.
inline LoopAnnotations detect_parallel_loops(const Scop& scop,
                                             const std::vector<Dependence>& deps) {
  LoopAnnotations ann;
  ann.parallel.assign(static_cast<std::size_t>(scop.max_depth()), true);
  for (const auto& d : deps) {
    if (d.carriedLevel && *d.carriedLevel >= 1 &&
        *d.carriedLevel <= static_cast<int>(ann.parallel.size()))
      ann.parallel[static_cast<std::size_t>(*d.carriedLevel - 1)] = false;
  }
  return ann;
}

// ---------------------------------------------------------------------------
// Tiling
// ---------------------------------------------------------------------------

namespace transform_detail {

// Deepest loop level shared by every statement pair: betas must agree through
// the prefix and every statement must reach that depth. Only shared levels can
// be tiled jointly; statement-local deeper loops stay untouched.
inline int common_band_depth(const Scop& scop) {
  if (scop.statements.empty()) return 0;
  int depth = scop.statements.front().depth();
  for (const auto& s : scop.statements) depth = std::min(depth, s.depth());
  for (int level = 0; level < depth; ++level) {
    for (const auto& s : scop.statements) {
      const auto& ref = scop.statements.front().schedule;
      // Positions 0, 2, ..., 2*level are betas; compare against the first.
      for (std::size_t pos = 0; pos <= static_cast<std::size_t>(2 * level); pos += 2) {
        if (s.schedule[pos].beta != ref[pos].beta) return level;
      }
    }
  }
  return depth;
}

inline std::string unique_tile_name(const std::string& base, const std::set<std::string>& taken) {
  std::string name = base + "t";
  while (taken.count(name)) name += "t";
  return name;
}

}  // namespace transform_detail

// Strip-mines the leading fully permutable band into tile and point loops.
// Each tiled level L with size T gains a tile iterator with constraints
// T*tile <= point <= T*tile + T - 1; the min-with-original-upper-bound form of
// the paper's tiles falls out of conjunction with the original domain. The
// legality precondition is the classic one: every dependence carried inside
// the band must have non-negative components at all band levels.
inline Scop tile(const Scop& scop, const std::vector<int>& sizes) {
  for (int t : sizes)
    if (t < 1) throw Error("tile sizes must be >= 1");
  if (scop.statements.empty()) return scop;

  int band = std::min(static_cast<int>(sizes.size()), transform_detail::common_band_depth(scop));
  if (band == 0) return scop;

  // Legality: a dependence instance pair with dst_L < src_L at any band level
  // would run backwards under some tile interleaving. The probe is decided on
  // integer points when the relation is bounded (the context pins small
  // parameters there); unbounded relations fall back to the rational test.
  std::vector<Dependence> deps = compute_dependences(scop);
  int np = static_cast<int>(scop.parameterNames.size());
  for (const auto& d : deps) {
    const ScopStatement& S = detail::statement_by_id(scop, d.src);
    const ScopStatement& T = detail::statement_by_id(scop, d.dst);
    int shared = std::min({band, S.depth(), T.depth()});
    for (int level = 0; level < shared; ++level) {
      Polyhedron probe = d.relation;
      AffineExpr negComponent = AffineExpr::variable(level) -
                                AffineExpr::variable(S.depth() + level);
      negComponent.add_constant(Rational(-1));  // src_L - dst_L - 1 >= 0
      probe.add_ge(negComponent);
      if (has_integer_point(probe)) {
        throw IllegalTiling("tiling illegal: " + std::string(to_string(d.kind)) +
                                " dependence on '" + d.array + "' from S" +
                                std::to_string(d.src) + " to S" + std::to_string(d.dst) +
                                " has a negative component at band level " +
                                std::to_string(level + 1),
                            d.src, d.dst, d.array, level + 1);
      }
    }
  }
  (void)np;

  // Tile iterator names are shared across statements, derived from the first
  // statement's iterator at each band level.
  std::set<std::string> taken;
  for (const auto& s : scop.statements) {
    for (const auto& it : s.iterators) taken.insert(it);
  }
  for (const auto& p : scop.parameterNames) taken.insert(p);
  std::vector<std::string> tileNames;
  for (int level = 0; level < band; ++level) {
    std::string name = transform_detail::unique_tile_name(
        scop.statements.front().iterators[static_cast<std::size_t>(level)], taken);
    taken.insert(name);
    tileNames.push_back(name);
  }

  Scop out;
  out.context = scop.context;
  out.parameterNames = scop.parameterNames;
  int numParams = static_cast<int>(scop.parameterNames.size());

  for (const auto& s : scop.statements) {
    ScopStatement ns;
    ns.id = s.id;
    ns.body = s.body;
    int d = s.depth();
    int b = std::min(band, d);

    ns.iterators = tileNames;
    ns.iterators.resize(static_cast<std::size_t>(b));
    for (const auto& it : s.iterators) ns.iterators.push_back(it);
    ns.tileDepth = b;

    VarSpace space;
    space.numIterators = b + d;
    space.names = ns.iterators;
    for (const auto& p : scop.parameterNames) space.names.push_back(p);
    Polyhedron domain(space);

    // Original constraints: iterators shift by b, parameters by b as well.
    std::map<int, int> shift;
    for (int v = 0; v < d + numParams; ++v) shift[v] = v + b;
    for (const auto& c : s.domain.constraints())
      domain.add_constraint(c.expr.remapped(shift), c.rel);
    // Tile containment: T*t <= i <= T*t + T - 1.
    for (int level = 0; level < b; ++level) {
      Rational T(sizes[static_cast<std::size_t>(level)]);
      AffineExpr tileIter = AffineExpr::variable(level);
      AffineExpr pointIter = AffineExpr::variable(b + level);
      domain.add_ge(pointIter - tileIter.scaled(T));
      AffineExpr upper = tileIter.scaled(T) - pointIter;
      upper.add_constant(T - 1);
      domain.add_ge(upper);
    }
    ns.domain = std::move(domain);

    // Schedule: tile loops outermost (shared betas 0), then the original
    // schedule over the shifted iterators.
    for (int level = 0; level < b; ++level) {
      ns.schedule.push_back(ScatterDim::betaDim(0));
      ns.schedule.push_back(ScatterDim::iterDim(level));
    }
    for (const auto& dim : s.schedule) {
      ns.schedule.push_back(dim.isBeta ? dim : ScatterDim::iterDim(dim.iter + b));
    }

    for (const auto& acc : s.reads) {
      AccessRelation na = acc;
      for (auto& sub : na.subscripts) sub = sub.remapped(shift);
      ns.reads.push_back(std::move(na));
    }
    for (const auto& acc : s.writes) {
      AccessRelation na = acc;
      for (auto& sub : na.subscripts) sub = sub.remapped(shift);
      ns.writes.push_back(std::move(na));
    }
    out.statements.push_back(std::move(ns));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Direction inference
// ---------------------------------------------------------------------------

// Per accessed array, in first-appearance order: read-only IN, write-only OUT,
// otherwise INOUT.
inline std::vector<std::pair<std::string, Direction>> infer_directions(
    const std::vector<AccessRelation>& accesses) {
  std::vector<std::string> order;
  std::map<std::string, std::pair<bool, bool>> readWrite;  // array -> (read, written)
  for (const auto& acc : accesses) {
    if (!readWrite.count(acc.array)) order.push_back(acc.array);
    auto& rw = readWrite[acc.array];
    (acc.kind == AccessKind::READ ? rw.first : rw.second) = true;
  }
  std::vector<std::pair<std::string, Direction>> out;
  for (const auto& name : order) {
    auto [r, w] = readWrite[name];
    Direction dir = r && w ? Direction::INOUT : (w ? Direction::OUT : Direction::IN);
    out.emplace_back(name, dir);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Taskification
// ---------------------------------------------------------------------------

struct TaskDef {
  std::string name;
  std::vector<TaskParamDecl> params;
  std::vector<StmtPtr> body;
  bool called = true;  // tiled scops keep statement-level defs as fallbacks
};

struct TaskProgram {
  std::vector<TaskDef> taskDefs;
  std::vector<StmtPtr> mainBody;  // ends with a Barrier
  std::vector<std::string> warnings;
};

namespace transform_detail {

// Bound or subscript values that stay affine as long as possible and fall back
// to opaque min/max expressions otherwise.
struct MaybeAffine {
  std::optional<AffineExpr> aff;
  ExprPtr opaque;

  static MaybeAffine affine(AffineExpr e) { return {std::move(e), nullptr}; }
  static MaybeAffine expr(ExprPtr e) { return {std::nullopt, std::move(e)}; }

  ExprPtr to_expr(const std::vector<std::string>& names) const {
    return aff ? affine_to_expr(*aff, names) : opaque;
  }

  MaybeAffine plus(const MaybeAffine& o, const std::vector<std::string>& names) const {
    if (aff && o.aff) return affine(*aff + *o.aff);
    return expr(make_binop(BinOpKind::Add, to_expr(names), o.to_expr(names)));
  }

  MaybeAffine plus_const(const Rational& c, const std::vector<std::string>& names) const {
    if (aff) {
      AffineExpr e = *aff;
      e.add_constant(c);
      return affine(std::move(e));
    }
    BigInt n = numerator(c);
    if (n == 0) return *this;
    BinOpKind op = n > 0 ? BinOpKind::Add : BinOpKind::Sub;
    BigInt mag = n > 0 ? n : BigInt(-n);
    return expr(make_binop(op, opaque, make_int(static_cast<std::int64_t>(mag))));
  }

  MaybeAffine scaled(const Rational& c, const std::vector<std::string>& names) const {
    if (aff) return affine(aff->scaled(c));
    if (c == 1) return *this;
    return expr(make_binop(BinOpKind::Mul,
                           make_int(static_cast<std::int64_t>(numerator(c))), opaque));
  }
};

inline MaybeAffine combine_min_max(const std::vector<MaybeAffine>& parts, const char* fn,
                                   const std::vector<std::string>& names) {
  if (parts.size() == 1) return parts[0];
  std::vector<ExprPtr> exprs;
  for (const auto& p : parts) exprs.push_back(p.to_expr(names));
  return MaybeAffine::expr(make_call(fn, std::move(exprs)));
}

// Per-level bounds as MaybeAffine (exclusive upper).
struct PointRange {
  MaybeAffine lo;
  MaybeAffine hiExcl;
};

inline PointRange point_range(const ScopStatement& stmt, int level, int numParams,
                              const std::vector<std::string>& names) {
  scan_detail::LevelCandidates cands = scan_detail::level_candidates(stmt, level, numParams);
  if (cands.lower.empty() || cands.upper.empty())
    throw UnscannableDomain("cannot bound loop level " + std::to_string(level + 1), level + 1);
  std::vector<MaybeAffine> lows, highs;
  for (const auto& c : cands.lower) {
    if (c.coeff == 1) {
      lows.push_back(MaybeAffine::affine(c.rest.scaled(Rational(-1))));
    } else {
      lows.push_back(MaybeAffine::expr(scan_detail::lower_bound_expr(c, names)));
    }
  }
  for (const auto& c : cands.upper) {
    if (c.coeff == -1) {
      AffineExpr hi = c.rest;
      hi.add_constant(Rational(1));
      highs.push_back(MaybeAffine::affine(std::move(hi)));
    } else {
      highs.push_back(MaybeAffine::expr(scan_detail::upper_bound_expr(c, names)));
    }
  }
  return {combine_min_max(lows, "max", names), combine_min_max(highs, "min", names)};
}

// Intervals of an affine subscript over the point-loop box, as expressions in
// kept iterators and parameters.
struct SubscriptInterval {
  MaybeAffine lo;
  MaybeAffine hiExcl;
};

inline SubscriptInterval subscript_interval(const AffineExpr& sub, int keptLevels, int depth,
                                            const std::vector<PointRange>& pointRanges,
                                            const std::vector<std::string>& names) {
  AffineExpr base;  // terms over kept iterators and parameters
  base.add_constant(sub.constant_term());
  MaybeAffine lo = MaybeAffine::affine(AffineExpr());
  MaybeAffine hi = MaybeAffine::affine(AffineExpr());
  for (const auto& [id, coeff] : sub.coeffs()) {
    if (id < keptLevels || id >= depth) {
      base.add_term(id, coeff);
      continue;
    }
    const PointRange& range = pointRanges[static_cast<std::size_t>(id - keptLevels)];
    MaybeAffine hiIncl = range.hiExcl.plus_const(Rational(-1), names);
    if (coeff > 0) {
      lo = lo.plus(range.lo.scaled(coeff, names), names);
      hi = hi.plus(hiIncl.scaled(coeff, names), names);
    } else {
      lo = lo.plus(hiIncl.scaled(coeff, names), names);
      hi = hi.plus(range.lo.scaled(coeff, names), names);
    }
  }
  MaybeAffine baseMA = MaybeAffine::affine(base);
  return {lo.plus(baseMA, names), hi.plus(baseMA, names).plus_const(Rational(1), names)};
}

// Rewrites a statement body over cell parameters (statement-level tasks).
struct CellGroup {
  std::string array;
  std::vector<AffineExpr> subscripts;
  std::string paramName;
  bool read = false, written = false;
  ExprPtr representative;  // original subscript expressions for the call site
};

inline ExprPtr rewrite_with_cells(const ExprPtr& e, const std::map<std::string, int>& varIds,
                                  std::vector<CellGroup>& groups) {
  if (e->kind == Expr::Kind::ArrayRef) {
    std::vector<AffineExpr> subs;
    for (const auto& s : e->args) {
      auto a = to_affine(s, varIds);
      if (!a) throw Error("non-affine subscript in taskified statement");
      subs.push_back(std::move(*a));
    }
    for (auto& g : groups) {
      if (g.array == e->name && g.subscripts == subs) return make_var(g.paramName);
    }
    throw Error("access not registered for cell rewrite");
  }
  auto copy = std::make_shared<Expr>(*e);
  for (auto& arg : copy->args) arg = rewrite_with_cells(arg, varIds, groups);
  return copy;
}

inline StmtPtr rewrite_stmt_with_cells(const StmtPtr& s, const std::map<std::string, int>& varIds,
                                       std::vector<CellGroup>& groups) {
  auto copy = std::make_shared<Stmt>(*s);
  if (s->kind == Stmt::Kind::Assign) {
    copy->target = rewrite_with_cells(s->target, varIds, groups);
    copy->value = rewrite_with_cells(s->value, varIds, groups);
  } else if (s->kind == Stmt::Kind::Call) {
    for (auto& arg : copy->args) arg = rewrite_with_cells(arg, varIds, groups);
  }
  return copy;
}

// Rewrites subscripts into chunk-relative coordinates (loop tasks).
struct ChunkInfo {
  std::string array;
  int rank = 0;
  std::string paramName;  // inside the task
  std::string chunkVar;   // in the main body
  Direction dir = Direction::IN;
  std::vector<SubscriptInterval> region;  // per array dimension
};

inline ExprPtr rewrite_with_chunks(const ExprPtr& e, const std::map<std::string, int>& varIds,
                                   const std::map<std::string, ChunkInfo*>& chunks,
                                   const std::vector<std::string>& names) {
  if (e->kind == Expr::Kind::ArrayRef) {
    auto it = chunks.find(e->name);
    if (it == chunks.end()) throw Error("array without chunk in loop task");
    ChunkInfo* info = it->second;
    std::vector<ExprPtr> newSubs;
    for (std::size_t d = 0; d < e->args.size(); ++d) {
      auto a = to_affine(e->args[d], varIds);
      if (!a) throw Error("non-affine subscript in taskified statement");
      const MaybeAffine& lo = info->region[d].lo;
      if (lo.aff) {
        AffineExpr rel = *a - *lo.aff;
        newSubs.push_back(affine_to_expr(rel, names));
      } else {
        newSubs.push_back(make_binop(BinOpKind::Sub, e->args[d], lo.opaque));
      }
    }
    return make_array_ref(info->paramName, std::move(newSubs));
  }
  auto copy = std::make_shared<Expr>(*e);
  for (auto& arg : copy->args) arg = rewrite_with_chunks(arg, varIds, chunks, names);
  return copy;
}

inline StmtPtr rewrite_stmt_with_chunks(const StmtPtr& s, const std::map<std::string, int>& varIds,
                                        const std::map<std::string, ChunkInfo*>& chunks,
                                        const std::vector<std::string>& names) {
  auto copy = std::make_shared<Stmt>(*s);
  if (s->kind == Stmt::Kind::Assign) {
    copy->target = rewrite_with_chunks(s->target, varIds, chunks, names);
    copy->value = rewrite_with_chunks(s->value, varIds, chunks, names);
  } else if (s->kind == Stmt::Kind::Call) {
    for (auto& arg : copy->args) arg = rewrite_with_chunks(arg, varIds, chunks, names);
  }
  return copy;
}

inline void collect_free_vars(const ExprPtr& e, std::set<std::string>& out) {
  if (e->kind == Expr::Kind::VarRef) {
    out.insert(e->name);
    return;
  }
  for (const auto& a : e->args) collect_free_vars(a, out);
}

inline void collect_free_vars(const StmtPtr& s, std::set<std::string>& out,
                              std::set<std::string>& bound) {
  switch (s->kind) {
    case Stmt::Kind::For: {
      collect_free_vars(s->lo, out);
      collect_free_vars(s->hi, out);
      bool wasBound = bound.count(s->iter) > 0;
      bound.insert(s->iter);
      for (const auto& inner : s->body) collect_free_vars(inner, out, bound);
      if (!wasBound) bound.erase(s->iter);
      break;
    }
    case Stmt::Kind::Assign:
      collect_free_vars(s->target, out);
      collect_free_vars(s->value, out);
      break;
    case Stmt::Kind::Call:
      for (const auto& a : s->args) collect_free_vars(a, out);
      break;
    default:
      break;
  }
}

}  // namespace transform_detail

// Converts a scop into task definitions plus a taskified main body. With
// taskifyLevel 0 every statement instance becomes one task call; with level
// N >= 1, loops strictly deeper than N (clamped to the tile band on tiled
// scops) move into `_lt` task bodies and the main body gains the chunk
// build / flatten / call / rebuild / write-back sequence around each call.
inline TaskProgram taskify(const Scop& scop, const LoopAnnotations& ann) {
  using namespace transform_detail;
  TaskProgram out;
  int tll = ann.taskifyLevel;
  if (tll < 0) throw Error("taskify level must be >= 0");
  if (tll > scop.max_depth())
    throw TaskifyTooDeep("taskify level " + std::to_string(tll) + " exceeds nest depth " +
                         std::to_string(scop.max_depth()));
  int numParams = static_cast<int>(scop.parameterNames.size());

  auto kept_levels = [&](const ScopStatement& s) {
    if (tll == 0) return s.depth();
    int cap = s.tileDepth > 0 ? s.tileDepth : s.depth();
    return std::min(tll, cap);
  };

  struct PerStatement {
    std::vector<CellGroup> cells;          // statement-level task interface
    std::vector<ChunkInfo> chunks;         // loop-task interface
    std::vector<PointRange> pointRanges;
    std::vector<std::string> scalarParams;  // shared tail of both task forms
    std::string plainName, loopName;
    bool hasLoopTask = false;
  };
  std::map<int, PerStatement> info;

  // --- Pass 1: build task definitions per statement.
  for (const ScopStatement& s : scop.statements) {
    PerStatement ps;
    ps.plainName = "S" + std::to_string(s.id) + "_task";
    ps.loopName = ps.plainName + "_lt";
    int kept = kept_levels(s);
    ps.hasLoopTask = tll > 0 && kept < s.depth();

    std::map<std::string, int> varIds;
    for (int v = 0; v < s.depth(); ++v) varIds[s.iterators[static_cast<std::size_t>(v)]] = v;
    for (int p = 0; p < numParams; ++p)
      varIds[scop.parameterNames[static_cast<std::size_t>(p)]] = s.depth() + p;
    std::vector<std::string> names;
    for (const auto& it : s.iterators) names.push_back(it);
    for (const auto& p : scop.parameterNames) names.push_back(p);

    // Cell groups for the statement-level form.
    std::map<std::string, int> cellsPerArray;
    for (const auto& acc : s.accesses()) {
      bool found = false;
      for (auto& g : ps.cells) {
        if (g.array == acc.array && g.subscripts == acc.subscripts) {
          (acc.kind == AccessKind::READ ? g.read : g.written) = true;
          found = true;
          break;
        }
      }
      if (found) continue;
      CellGroup g;
      g.array = acc.array;
      g.subscripts = acc.subscripts;
      int n = ++cellsPerArray[acc.array];
      g.paramName = acc.array + "_c" + (n > 1 ? std::to_string(n) : "");
      (acc.kind == AccessKind::READ ? g.read : g.written) = true;
      std::vector<ExprPtr> subs;
      for (const auto& sub : acc.subscripts) subs.push_back(affine_to_expr(sub, names));
      g.representative = make_array_ref(acc.array, std::move(subs));
      ps.cells.push_back(std::move(g));
    }

    // Plain statement task definition.
    {
      TaskDef def;
      def.name = ps.plainName;
      def.called = !ps.hasLoopTask;
      StmtPtr body = rewrite_stmt_with_cells(s.body, varIds, ps.cells);
      std::set<std::string> free;
      {
        std::set<std::string> bound;
        collect_free_vars(body, free, bound);
      }
      for (const auto& g : ps.cells) {
        Direction dir = g.read && g.written ? Direction::INOUT
                        : g.written        ? Direction::OUT
                                           : Direction::IN;
        def.params.push_back({g.paramName, dir, 0, {}});
        free.erase(g.paramName);
      }
      for (const auto& it : s.iterators)
        if (free.count(it)) {
          def.params.push_back({it, Direction::IN, 0, {}});
          ps.scalarParams.push_back(it);
        }
      for (const auto& p : scop.parameterNames)
        if (free.count(p)) {
          def.params.push_back({p, Direction::IN, 0, {}});
          ps.scalarParams.push_back(p);
        }
      def.body.push_back(std::move(body));
      // Register the plain form when it is the one called, or as the kept
      // original alongside a loop task on tiled scops.
      if (!ps.hasLoopTask || s.tileDepth > 0) out.taskDefs.push_back(std::move(def));
    }

    // Loop task definition.
    if (ps.hasLoopTask) {
      for (int level = kept; level < s.depth(); ++level)
        ps.pointRanges.push_back(point_range(s, level, numParams, names));

      // One chunk per accessed array: region = union bounding box over all
      // accesses, per dimension.
      std::vector<AccessRelation> allAccesses = s.accesses();
      std::vector<std::string> arrayOrder;
      std::map<std::string, std::vector<const AccessRelation*>> byArray;
      for (const auto& acc : allAccesses) {
        if (!byArray.count(acc.array)) arrayOrder.push_back(acc.array);
        byArray[acc.array].push_back(&acc);
      }
      auto dirs = infer_directions(allAccesses);
      std::map<std::string, Direction> dirByArray(dirs.begin(), dirs.end());

      for (const auto& arrayName : arrayOrder) {
        const auto& accs = byArray[arrayName];
        ChunkInfo chunk;
        chunk.array = arrayName;
        chunk.rank = static_cast<int>(accs.front()->subscripts.size());
        chunk.paramName = arrayName + "_chunk";
        chunk.chunkVar = "s" + std::to_string(s.id) + "_" + arrayName;
        chunk.dir = dirByArray[arrayName];
        for (int dim = 0; dim < chunk.rank; ++dim) {
          std::vector<MaybeAffine> lows, highs;
          for (const auto* acc : accs) {
            SubscriptInterval iv = subscript_interval(acc->subscripts[static_cast<std::size_t>(dim)],
                                                      kept, s.depth(), ps.pointRanges, names);
            lows.push_back(iv.lo);
            highs.push_back(iv.hiExcl);
          }
          chunk.region.push_back({combine_min_max(lows, "min", names),
                                  combine_min_max(highs, "max", names)});
        }
        // OUT is only safe when the writes cover the whole region: one write
        // access, unit point-iterator coefficients. Otherwise transfer the old
        // cells too.
        if (chunk.dir == Direction::OUT) {
          int writeCount = 0;
          bool unit = true;
          for (const auto* acc : accs) {
            if (acc->kind != AccessKind::WRITE) continue;
            ++writeCount;
            for (const auto& sub : acc->subscripts) {
              int pointTerms = 0;
              for (const auto& [id, coeff] : sub.coeffs()) {
                if (id >= kept && id < s.depth()) {
                  ++pointTerms;
                  if (coeff != 1 && coeff != -1) unit = false;
                }
              }
              if (pointTerms > 1) unit = false;
            }
          }
          if (writeCount != 1 || !unit) chunk.dir = Direction::INOUT;
        }
        ps.chunks.push_back(std::move(chunk));
      }

      std::map<std::string, ChunkInfo*> chunkByArray;
      for (auto& c : ps.chunks) chunkByArray[c.array] = &c;

      // Task body: point loops around the chunk-relative statement.
      StmtPtr inner = rewrite_stmt_with_chunks(s.body, varIds, chunkByArray, names);
      std::vector<StmtPtr> bodyStmts{inner};
      for (int level = s.depth() - 1; level >= kept; --level) {
        const PointRange& range = ps.pointRanges[static_cast<std::size_t>(level - kept)];
        bodyStmts = {make_for(s.iterators[static_cast<std::size_t>(level)],
                              range.lo.to_expr(names), range.hiExcl.to_expr(names),
                              std::move(bodyStmts))};
      }

      TaskDef def;
      def.name = ps.loopName;
      for (const auto& c : ps.chunks) def.params.push_back({c.paramName, c.dir, c.rank, {}});
      std::set<std::string> free;
      {
        std::set<std::string> bound;
        for (const auto& b : bodyStmts) collect_free_vars(b, free, bound);
      }
      for (const auto& c : ps.chunks) free.erase(c.paramName);
      ps.scalarParams.clear();
      for (int v = 0; v < kept; ++v) {
        const std::string& it = s.iterators[static_cast<std::size_t>(v)];
        if (free.count(it)) ps.scalarParams.push_back(it);
      }
      for (const auto& p : scop.parameterNames)
        if (free.count(p)) ps.scalarParams.push_back(p);
      for (const auto& sp : ps.scalarParams) def.params.push_back({sp, Direction::IN, 0, {}});
      def.body = std::move(bodyStmts);
      out.taskDefs.push_back(std::move(def));
    }

    info.emplace(s.id, std::move(ps));
  }

  // --- Pass 2: main body via the scanner, cutting at each statement's kept
  // depth.
  LeafBuilder leaf = [&](const ScopStatement& s) -> std::vector<StmtPtr> {
    PerStatement& ps = info.at(s.id);
    std::vector<std::string> names;
    for (const auto& it : s.iterators) names.push_back(it);
    for (const auto& p : scop.parameterNames) names.push_back(p);

    if (!ps.hasLoopTask) {
      std::vector<ExprPtr> args;
      for (const auto& g : ps.cells) args.push_back(g.representative);
      for (const auto& sp : ps.scalarParams) args.push_back(make_var(sp));
      return {make_call_stmt(ps.plainName, std::move(args), /*isTask=*/true)};
    }

    std::vector<StmtPtr> block;
    for (const auto& c : ps.chunks) {
      std::vector<std::pair<ExprPtr, ExprPtr>> region;
      for (const auto& iv : c.region)
        region.emplace_back(iv.lo.to_expr(names), iv.hiExcl.to_expr(names));
      block.push_back(make_chunk_build(c.chunkVar, c.array, std::move(region)));
    }
    for (const auto& c : ps.chunks) block.push_back(make_chunk_flatten(c.chunkVar));
    std::vector<ExprPtr> args;
    for (const auto& c : ps.chunks) args.push_back(make_var(c.chunkVar));
    for (const auto& sp : ps.scalarParams) args.push_back(make_var(sp));
    block.push_back(make_call_stmt(ps.loopName, std::move(args), /*isTask=*/true));
    for (const auto& c : ps.chunks) {
      if (c.dir == Direction::IN) continue;
      block.push_back(make_chunk_rebuild(c.chunkVar));
      std::vector<std::pair<ExprPtr, ExprPtr>> region;
      for (const auto& iv : c.region)
        region.emplace_back(iv.lo.to_expr(names), iv.hiExcl.to_expr(names));
      block.push_back(make_write_back(c.array, std::move(region), c.chunkVar));
    }
    return block;
  };

  // Cut-aware scan: reuse the generic scanner by trimming schedules.
  Scop trimmed = scop;
  for (auto& s : trimmed.statements) {
    int kept = kept_levels(s);
    if (kept < s.depth())
      s.schedule.resize(static_cast<std::size_t>(2 * kept + 1));
  }
  out.mainBody = generate_loops(trimmed, &ann, leaf);
  out.mainBody.push_back(make_barrier());

  // Serialization warning: loop taskification with no parallel kept level.
  if (tll > 0) {
    bool anyParallel = false;
    for (const ScopStatement& s : scop.statements) {
      for (int level = 1; level <= kept_levels(s); ++level)
        if (ann.is_parallel(level)) anyParallel = true;
    }
    if (!anyParallel)
      out.warnings.push_back(
          "NoParallelismWarning: taskified loops carry all parallelism; "
          "consider tiling first");
  }
  return out;
}

}  // namespace polytask
