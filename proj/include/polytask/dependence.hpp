#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "polytask/polyhedron.hpp"
#include "polytask/scop.hpp"

namespace polytask {

enum class DepKind { RAW, WAR, WAW };

inline const char* to_string(DepKind k) {
  switch (k) {
    case DepKind::RAW: return "RAW";
    case DepKind::WAR: return "WAR";
    case DepKind::WAW: return "WAW";
  }
  return "?";
}

// A dependence between statement instances. `relation` ranges over
// (source iterators..., target iterators..., parameters...); its integer
// points are exactly the dependent instance pairs. A dependence carried at
// level L relates instances that first differ at the L-th shared loop;
// carriedLevel is empty for loop-independent dependences (same iteration of
// every shared loop, ordered by textual position).
struct Dependence {
  int src = 0;
  int dst = 0;
  DepKind kind = DepKind::RAW;
  std::string array;
  Polyhedron relation;
  std::optional<int> carriedLevel;

  friend bool operator==(const Dependence&, const Dependence&) = default;
};

namespace detail {

inline const ScopStatement& statement_by_id(const Scop& scop, int id) {
  for (const auto& s : scop.statements)
    if (s.id == id) return s;
  throw Error("no statement with id " + std::to_string(id));
}

// Embedding of a statement's local (iterators..., params...) ids into the
// pair space (src iters, dst iters, params).
inline std::map<int, int> pair_space_map(int depth, int iterOffset, int paramOffset,
                                         int numParams) {
  std::map<int, int> m;
  for (int i = 0; i < depth; ++i) m[i] = iterOffset + i;
  for (int p = 0; p < numParams; ++p) m[depth + p] = paramOffset + p;
  return m;
}

inline VarSpace pair_space(const ScopStatement& src, const ScopStatement& dst,
                           const std::vector<std::string>& params) {
  VarSpace space;
  space.numIterators = src.depth() + dst.depth();
  for (const auto& it : src.iterators) space.names.push_back("s_" + it);
  for (const auto& it : dst.iterators) space.names.push_back("t_" + it);
  for (const auto& p : params) space.names.push_back(p);
  return space;
}

// Adds both statement domains and the parameter context to the pair
// polyhedron.
inline void add_pair_domains(Polyhedron& poly, const Scop& scop, const ScopStatement& src,
                             const ScopStatement& dst, int numParams) {
  int dS = src.depth();
  int dT = dst.depth();
  auto srcMap = pair_space_map(dS, 0, dS + dT, numParams);
  auto dstMap = pair_space_map(dT, dS, dS + dT, numParams);
  for (const auto& c : src.domain.constraints())
    poly.add_constraint(c.expr.remapped(srcMap), c.rel);
  for (const auto& c : dst.domain.constraints())
    poly.add_constraint(c.expr.remapped(dstMap), c.rel);
  std::map<int, int> ctxMap;
  for (int p = 0; p < numParams; ++p) ctxMap[p] = dS + dT + p;
  for (const auto& c : scop.context.constraints())
    poly.add_constraint(c.expr.remapped(ctxMap), c.rel);
}

// One precedence disjunct: schedules equal before `strictPos`, strictly
// ordered at `strictPos`. Iterator positions contribute constraints; beta
// positions are constants that either hold or make the disjunct infeasible.
struct PrecedenceDisjunct {
  bool feasible = false;
  std::optional<int> carriedLevel;  // level when strict at an iterator position
  std::vector<AffineExpr> equalities;
  std::optional<AffineExpr> strict;  // dst - src - 1 >= 0
};

inline std::vector<PrecedenceDisjunct> precedence_disjuncts(const ScopStatement& src,
                                                            const ScopStatement& dst,
                                                            int numParams) {
  int dS = src.depth();
  int dT = dst.depth();
  auto srcMap = pair_space_map(dS, 0, dS + dT, numParams);
  auto dstMap = pair_space_map(dT, dS, dS + dT, numParams);

  std::vector<PrecedenceDisjunct> out;
  std::vector<AffineExpr> prefixEq;
  std::size_t common = std::min(src.schedule.size(), dst.schedule.size());
  int loopLevel = 0;
  for (std::size_t pos = 0; pos < common; ++pos) {
    const ScatterDim& a = src.schedule[pos];
    const ScatterDim& b = dst.schedule[pos];
    if (a.isBeta != b.isBeta)
      throw Error("malformed scattering: beta/iterator shape mismatch");
    if (a.isBeta) {
      if (a.beta < b.beta) {
        PrecedenceDisjunct d;
        d.feasible = true;
        d.equalities = prefixEq;
        d.carriedLevel = std::nullopt;  // ordered by text, not by a loop
        out.push_back(std::move(d));
      }
      if (a.beta != b.beta) break;  // equality prefix cannot extend further
    } else {
      ++loopLevel;
      AffineExpr srcIter = AffineExpr::variable(a.iter).remapped(srcMap);
      AffineExpr dstIter = AffineExpr::variable(b.iter).remapped(dstMap);
      PrecedenceDisjunct d;
      d.feasible = true;
      d.carriedLevel = loopLevel;
      d.equalities = prefixEq;
      AffineExpr strict = dstIter - srcIter;
      strict.add_constant(Rational(-1));
      d.strict = std::move(strict);
      out.push_back(std::move(d));
      prefixEq.push_back(dstIter - srcIter);  // continue with equal iterators
    }
  }
  return out;
}

}  // namespace detail

// Memory-based dependence analysis. For every ordered pair of accesses to the
// same array with at least one write, the dependence polyhedron conjoins both
// iteration domains, subscript equality, and strict schedule precedence; one
// Dependence is emitted per rationally nonempty precedence disjunct, duplicate
// entries merged.
inline std::vector<Dependence> compute_dependences(const Scop& scop) {
  int np = static_cast<int>(scop.parameterNames.size());
  std::vector<Dependence> result;

  for (const auto& S : scop.statements) {
    for (const auto& T : scop.statements) {
      int dS = S.depth();
      int dT = T.depth();
      auto srcMap = detail::pair_space_map(dS, 0, dS + dT, np);
      auto dstMap = detail::pair_space_map(dT, dS, dS + dT, np);
      auto disjuncts = detail::precedence_disjuncts(S, T, np);
      if (disjuncts.empty()) continue;

      for (const auto& a : S.accesses()) {
        for (const auto& b : T.accesses()) {
          if (a.array != b.array) continue;
          if (a.kind == AccessKind::READ && b.kind == AccessKind::READ) continue;
          if (a.subscripts.size() != b.subscripts.size())
            throw DimensionMismatch("accesses to '" + a.array + "' disagree on rank");
          DepKind kind = a.kind == AccessKind::WRITE
                             ? (b.kind == AccessKind::READ ? DepKind::RAW : DepKind::WAW)
                             : DepKind::WAR;

          for (const auto& disjunct : disjuncts) {
            Polyhedron rel(detail::pair_space(S, T, scop.parameterNames));
            detail::add_pair_domains(rel, scop, S, T, np);
            for (std::size_t k = 0; k < a.subscripts.size(); ++k) {
              rel.add_eq(a.subscripts[k].remapped(srcMap) - b.subscripts[k].remapped(dstMap));
            }
            for (const auto& eq : disjunct.equalities) rel.add_eq(eq);
            if (disjunct.strict) rel.add_ge(*disjunct.strict);
            if (is_empty_rational(rel)) continue;

            Dependence dep;
            dep.src = S.id;
            dep.dst = T.id;
            dep.kind = kind;
            dep.array = a.array;
            dep.relation = std::move(rel);
            dep.carriedLevel = disjunct.carriedLevel;
            bool duplicate = false;
            for (const auto& existing : result) {
              if (existing == dep) {
                duplicate = true;
                break;
              }
            }
            if (!duplicate) result.push_back(std::move(dep));
          }
        }
      }
    }
  }
  return result;
}

// Smallest shared loop level whose strict intersection with the relation is
// rationally nonempty; empty optional when instances coincide on all shared
// loops (loop-independent).
inline std::optional<int> carried_level(const Scop& scop, const Dependence& d) {
  const ScopStatement& S = detail::statement_by_id(scop, d.src);
  const ScopStatement& T = detail::statement_by_id(scop, d.dst);
  int np = static_cast<int>(scop.parameterNames.size());
  int dS = S.depth();
  int dT = T.depth();
  auto srcMap = detail::pair_space_map(dS, 0, dS + dT, np);
  auto dstMap = detail::pair_space_map(dT, dS, dS + dT, np);

  std::vector<AffineExpr> prefixEq;
  std::size_t common = std::min(S.schedule.size(), T.schedule.size());
  int level = 0;
  for (std::size_t pos = 0; pos < common; ++pos) {
    const ScatterDim& a = S.schedule[pos];
    const ScatterDim& b = T.schedule[pos];
    if (a.isBeta) {
      if (a.beta != b.beta) break;  // statements diverge textually here
      continue;
    }
    ++level;
    AffineExpr srcIter = AffineExpr::variable(a.iter).remapped(srcMap);
    AffineExpr dstIter = AffineExpr::variable(b.iter).remapped(dstMap);
    Polyhedron probe = d.relation;
    for (const auto& eq : prefixEq) probe.add_eq(eq);
    AffineExpr strict = dstIter - srcIter;
    strict.add_constant(Rational(-1));
    probe.add_ge(strict);
    if (!is_empty_rational(probe)) return level;
    prefixEq.push_back(dstIter - srcIter);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

struct InstanceDependence {
  int srcStmt = 0;
  Point srcInstance;
  int dstStmt = 0;
  Point dstInstance;
  std::string array;
  DepKind kind = DepKind::RAW;

  friend auto operator<=>(const InstanceDependence&, const InstanceDependence&) = default;
};

// Enumerates every statement instance at fixed parameter values in schedule
// order and reports all conflicting access pairs. Ground truth for
// compute_dependences.
inline std::vector<InstanceDependence> dependence_oracle(
    const Scop& scop, const std::map<std::string, std::int64_t>& paramValues,
    std::int64_t cap = detail::kDefaultPointCap) {
  struct Event {
    int stmtIdx;
    Point instance;
    std::vector<std::int64_t> time;
  };
  std::vector<Event> events;
  for (std::size_t idx = 0; idx < scop.statements.size(); ++idx) {
    const ScopStatement& s = scop.statements[idx];
    Polyhedron fixed = s.domain;
    for (int p = static_cast<int>(scop.parameterNames.size()) - 1; p >= 0; --p) {
      auto it = paramValues.find(scop.parameterNames[static_cast<std::size_t>(p)]);
      if (it == paramValues.end())
        throw Error("missing value for parameter '" + scop.parameterNames[static_cast<std::size_t>(p)] + "'");
      fixed = fixed.fix_var(s.depth() + p, it->second);
    }
    for (Point& pt : enumerate_points(fixed, cap))
      events.push_back({static_cast<int>(idx), std::move(pt), {}});
  }
  for (Event& e : events)
    e.time = schedule_vector(scop.statements[static_cast<std::size_t>(e.stmtIdx)], e.instance);
  std::stable_sort(events.begin(), events.end(),
                   [](const Event& a, const Event& b) { return schedule_less(a.time, b.time); });

  // Cell -> ordered access history (event index, access kind).
  std::map<std::pair<std::string, std::vector<std::int64_t>>,
           std::vector<std::pair<std::size_t, AccessKind>>>
      history;
  for (std::size_t e = 0; e < events.size(); ++e) {
    const ScopStatement& s = scop.statements[static_cast<std::size_t>(events[e].stmtIdx)];
    std::vector<std::int64_t> full = events[e].instance.assignment;
    for (const auto& pn : scop.parameterNames) full.push_back(paramValues.at(pn));
    for (const auto& acc : s.accesses()) {
      std::vector<std::int64_t> cell;
      for (const auto& sub : acc.subscripts) {
        Rational v = sub.evaluate(full);
        cell.push_back(static_cast<std::int64_t>(numerator(v)));
      }
      history[{acc.array, cell}].emplace_back(e, acc.kind);
    }
  }

  std::set<InstanceDependence> out;
  for (const auto& [cell, hist] : history) {
    for (std::size_t i = 0; i < hist.size(); ++i) {
      for (std::size_t j = i + 1; j < hist.size(); ++j) {
        auto [e1, k1] = hist[i];
        auto [e2, k2] = hist[j];
        if (e1 == e2) continue;  // same instance: not a dependence
        if (k1 == AccessKind::READ && k2 == AccessKind::READ) continue;
        DepKind kind = k1 == AccessKind::WRITE
                           ? (k2 == AccessKind::READ ? DepKind::RAW : DepKind::WAW)
                           : DepKind::WAR;
        out.insert({scop.statements[static_cast<std::size_t>(events[e1].stmtIdx)].id,
                    events[e1].instance,
                    scop.statements[static_cast<std::size_t>(events[e2].stmtIdx)].id,
                    events[e2].instance, cell.first, kind});
      }
    }
  }
  return {out.begin(), out.end()};
}

// Projects computed dependences to instance pairs at fixed parameter values;
// comparing this set with the oracle is the exactness check.
inline std::set<InstanceDependence> instantiate_dependences(
    const Scop& scop, const std::vector<Dependence>& deps,
    const std::map<std::string, std::int64_t>& paramValues,
    std::int64_t cap = detail::kDefaultPointCap) {
  std::set<InstanceDependence> out;
  for (const auto& d : deps) {
    const ScopStatement& S = detail::statement_by_id(scop, d.src);
    const ScopStatement& T = detail::statement_by_id(scop, d.dst);
    int dS = S.depth();
    int dT = T.depth();
    Polyhedron fixed = d.relation;
    for (int p = static_cast<int>(scop.parameterNames.size()) - 1; p >= 0; --p) {
      fixed = fixed.fix_var(dS + dT + p,
                            paramValues.at(scop.parameterNames[static_cast<std::size_t>(p)]));
    }
    for (const Point& pt : enumerate_points(fixed, cap)) {
      Point src, dst;
      src.assignment.assign(pt.assignment.begin(), pt.assignment.begin() + dS);
      dst.assignment.assign(pt.assignment.begin() + dS, pt.assignment.begin() + dS + dT);
      out.insert({d.src, std::move(src), d.dst, std::move(dst), d.array, d.kind});
    }
  }
  return out;
}

}  // namespace polytask
