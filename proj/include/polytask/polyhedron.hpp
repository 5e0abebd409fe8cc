#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "polytask/error.hpp"
#include "polytask/rational.hpp"

namespace polytask {

// Affine form over a variable space: sum of coeff*var plus a constant. Variable
// ids index into the owning space; what they mean (iterator, parameter, source
// or target copy) is the owner's business. No zero coefficients are stored.
class AffineExpr {
 public:
  AffineExpr() = default;
  explicit AffineExpr(Rational constant) : constant_(std::move(constant)) {}

  static AffineExpr variable(int id, Rational coeff = Rational(1)) {
    AffineExpr e;
    e.set_coeff(id, std::move(coeff));
    return e;
  }
  static AffineExpr constant(Rational c) { return AffineExpr(std::move(c)); }

  const std::map<int, Rational>& coeffs() const { return coeffs_; }
  const Rational& constant_term() const { return constant_; }

  Rational coeff(int id) const {
    auto it = coeffs_.find(id);
    return it == coeffs_.end() ? Rational(0) : it->second;
  }

  void set_coeff(int id, Rational value) {
    if (value == 0) {
      coeffs_.erase(id);
    } else {
      coeffs_[id] = std::move(value);
    }
  }

  void add_term(int id, const Rational& value) { set_coeff(id, coeff(id) + value); }
  void add_constant(const Rational& value) { constant_ += value; }

  bool is_constant() const { return coeffs_.empty(); }

  AffineExpr& operator+=(const AffineExpr& o) {
    for (const auto& [id, c] : o.coeffs_) add_term(id, c);
    constant_ += o.constant_;
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& o) {
    for (const auto& [id, c] : o.coeffs_) add_term(id, -c);
    constant_ -= o.constant_;
    return *this;
  }
  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }

  AffineExpr scaled(const Rational& f) const {
    AffineExpr r;
    if (f == 0) return r;
    for (const auto& [id, c] : coeffs_) r.coeffs_[id] = c * f;
    r.constant_ = constant_ * f;
    return r;
  }

  // Rewrites every variable id through `mapping`; ids absent from the map keep
  // their value. Used to embed statement-local expressions into product spaces.
  AffineExpr remapped(const std::map<int, int>& mapping) const {
    AffineExpr r;
    r.constant_ = constant_;
    for (const auto& [id, c] : coeffs_) {
      auto it = mapping.find(id);
      r.add_term(it == mapping.end() ? id : it->second, c);
    }
    return r;
  }

  AffineExpr shifted(int offset) const {
    AffineExpr r;
    r.constant_ = constant_;
    for (const auto& [id, c] : coeffs_) r.coeffs_[id + offset] = c;
    return r;
  }

  Rational evaluate(const std::vector<std::int64_t>& point) const {
    Rational v = constant_;
    for (const auto& [id, c] : coeffs_) v += c * point.at(static_cast<std::size_t>(id));
    return v;
  }

  friend bool operator==(const AffineExpr&, const AffineExpr&) = default;

 private:
  std::map<int, Rational> coeffs_;
  Rational constant_{0};
};

enum class ConstraintRel { GE, EQ };  // expr >= 0 | expr == 0

struct Constraint {
  AffineExpr expr;
  ConstraintRel rel;

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

// Ordered variable list: iterators first, then parameters.
struct VarSpace {
  std::vector<std::string> names;
  int numIterators = 0;

  int size() const { return static_cast<int>(names.size()); }
  int numParameters() const { return size() - numIterators; }

  friend bool operator==(const VarSpace&, const VarSpace&) = default;
};

struct Point {
  std::vector<std::int64_t> assignment;

  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) {
    return a.assignment <=> b.assignment;
  }
};

using Box = std::vector<std::pair<std::int64_t, std::int64_t>>;  // inclusive per variable

namespace detail {
inline constexpr std::int64_t kDefaultPointCap = 10'000'000;
}

// Conjunction of affine constraints over a space; integer points are the
// object of interest, projection and emptiness are decided rationally.
// Constraints are normalized to coprime integer rows on entry, which keeps the
// represented rational set unchanged and Fourier-Motzkin growth in check.
class Polyhedron {
 public:
  Polyhedron() = default;
  explicit Polyhedron(VarSpace space) : space_(std::move(space)) {}

  static Polyhedron universe(VarSpace space) { return Polyhedron(std::move(space)); }

  const VarSpace& space() const { return space_; }
  int dim() const { return space_.size(); }

  void add_constraint(const AffineExpr& expr, ConstraintRel rel) {
    Row row;
    row.c.assign(static_cast<std::size_t>(dim()), BigInt(0));
    row.rel = rel;
    BigInt mult(1);
    for (const auto& [id, c] : expr.coeffs()) {
      if (id < 0 || id >= dim()) throw DimensionMismatch("constraint variable outside space");
      mult = big_lcm(mult, denominator(c));
    }
    mult = big_lcm(mult, denominator(expr.constant_term()));
    for (const auto& [id, c] : expr.coeffs()) {
      Rational scaled = c * mult;
      row.c[static_cast<std::size_t>(id)] = numerator(scaled);
    }
    row.k = numerator(expr.constant_term() * mult);
    push_row(std::move(row));
  }

  void add_eq(const AffineExpr& e) { add_constraint(e, ConstraintRel::EQ); }
  void add_ge(const AffineExpr& e) { add_constraint(e, ConstraintRel::GE); }

  // lo <= var < hi for convenience when building iteration domains.
  void add_half_open_bounds(int var, const AffineExpr& lo, const AffineExpr& hi) {
    add_ge(AffineExpr::variable(var) - lo);
    AffineExpr upper = hi - AffineExpr::variable(var);
    upper.add_constant(Rational(-1));
    add_ge(upper);
  }

  int num_constraints() const { return static_cast<int>(rows_.size()); }

  Constraint constraint(int i) const {
    const Row& r = rows_.at(static_cast<std::size_t>(i));
    Constraint c;
    c.rel = r.rel;
    for (int v = 0; v < dim(); ++v) {
      if (r.c[static_cast<std::size_t>(v)] != 0)
        c.expr.set_coeff(v, Rational(r.c[static_cast<std::size_t>(v)]));
    }
    c.expr.add_constant(Rational(r.k));
    return c;
  }

  std::vector<Constraint> constraints() const {
    std::vector<Constraint> out;
    out.reserve(rows_.size());
    for (int i = 0; i < num_constraints(); ++i) out.push_back(constraint(i));
    return out;
  }

  // Integer-matrix view used by the OpenScop writer: per row, coefficients in
  // space order followed by the constant.
  std::vector<std::vector<BigInt>> constraint_matrix() const {
    std::vector<std::vector<BigInt>> m;
    m.reserve(rows_.size());
    for (const Row& r : rows_) {
      std::vector<BigInt> v = r.c;
      v.push_back(r.k);
      m.push_back(std::move(v));
    }
    return m;
  }
  ConstraintRel row_relation(int i) const { return rows_.at(static_cast<std::size_t>(i)).rel; }

  bool contains(const Point& p) const {
    if (static_cast<int>(p.assignment.size()) != dim())
      throw DimensionMismatch("point dimension does not match space");
    for (const Row& r : rows_) {
      BigInt v = r.k;
      for (int i = 0; i < dim(); ++i)
        v += r.c[static_cast<std::size_t>(i)] * p.assignment[static_cast<std::size_t>(i)];
      if (r.rel == ConstraintRel::GE ? v < 0 : v != 0) return false;
    }
    return true;
  }

  // Substitutes an integer value for one variable and drops it from the space.
  Polyhedron fix_var(int var, std::int64_t value) const {
    VarSpace ns = space_;
    ns.names.erase(ns.names.begin() + var);
    if (var < ns.numIterators) --ns.numIterators;
    Polyhedron out(ns);
    for (const Row& r : rows_) {
      Row nr;
      nr.rel = r.rel;
      nr.k = r.k + r.c[static_cast<std::size_t>(var)] * value;
      for (int i = 0; i < dim(); ++i)
        if (i != var) nr.c.push_back(r.c[static_cast<std::size_t>(i)]);
      out.push_row(std::move(nr));
    }
    return out;
  }

  friend bool operator==(const Polyhedron& a, const Polyhedron& b) {
    return a.space_ == b.space_ && a.rows_ == b.rows_;
  }

  friend Polyhedron fm_eliminate(const Polyhedron& p, int var);
  friend bool is_empty_rational(const Polyhedron& p);

 private:
  struct Row {
    std::vector<BigInt> c;
    BigInt k{0};
    ConstraintRel rel = ConstraintRel::GE;

    friend bool operator==(const Row&, const Row&) = default;
    friend auto operator<=>(const Row&, const Row&) = default;
  };

  bool row_trivially_true(const Row& r) const {
    for (const BigInt& c : r.c)
      if (c != 0) return false;
    return r.rel == ConstraintRel::GE ? r.k >= 0 : r.k == 0;
  }

  void push_row(Row row) {
    // Normalize: divide through by the gcd (keeps the rational half-space),
    // canonicalize equality sign, drop tautology and duplicate rows.
    BigInt g(0);
    for (const BigInt& c : row.c) g = big_gcd(g, c);
    g = big_gcd(g, row.k);
    if (g > 1) {
      for (BigInt& c : row.c) c /= g;
      row.k /= g;
    }
    if (row.rel == ConstraintRel::EQ) {
      const BigInt* lead = &row.k;
      for (const BigInt& c : row.c)
        if (c != 0) {
          lead = &c;
          break;
        }
      if (*lead < 0) {
        for (BigInt& c : row.c) c = -c;
        row.k = -row.k;
      }
    }
    if (row_trivially_true(row)) return;
    for (const Row& existing : rows_)
      if (existing == row) return;
    rows_.push_back(std::move(row));
  }

  VarSpace space_;
  std::vector<Row> rows_;

  friend class PointEnumerator;
};

// Recursive lexicographic scan. Each constraint is applied at its deepest
// variable, where it induces a lower or upper bound from the already-fixed
// prefix. Rows of every suffix projection are folded in as well, so variables
// bounded only through deeper ones (tile iterators) still get scan bounds.
class PointEnumerator {
 public:
  PointEnumerator(const Polyhedron& p, const Box* box, std::int64_t cap)
      : p_(p), box_(box), cap_(cap) {
    if (box_ && static_cast<int>(box_->size()) != p.dim())
      throw DimensionMismatch("box dimension does not match space");
    if (box_) {
      // The cap bounds the scanned volume, not the answer size.
      BigInt volume(1);
      for (const auto& [lo, hi] : *box_) {
        if (hi < lo) {
          volume = 0;
          break;
        }
        volume *= BigInt(hi) - BigInt(lo) + 1;
      }
      if (volume > cap_)
        throw BoxTooLarge("box volume " + volume.str() + " exceeds cap " +
                          std::to_string(cap_));
    }
    auto addRows = [&](const Polyhedron& q) {
      for (const auto& row : q.rows_) {
        Polyhedron::Row padded = row;
        padded.c.resize(static_cast<std::size_t>(p.dim()), BigInt(0));
        bool seen = false;
        for (const auto& existing : rows_)
          if (existing == padded) {
            seen = true;
            break;
          }
        if (!seen) rows_.push_back(std::move(padded));
      }
    };
    addRows(p);
    if (!box_) {
      Polyhedron proj = p;
      for (int v = p.dim() - 1; v >= 1; --v) {
        proj = fm_eliminate(proj, v);
        addRows(proj);
      }
    }
    byLevel_.resize(static_cast<std::size_t>(p.dim()) + 1);
    for (const auto& row : rows_) {
      int deepest = -1;
      for (int v = 0; v < p.dim(); ++v)
        if (row.c[static_cast<std::size_t>(v)] != 0) deepest = v;
      byLevel_[static_cast<std::size_t>(deepest + 1)].push_back(&row);
    }
  }

  std::vector<Point> run() {
    out_.clear();
    for (const auto* row : byLevel_[0]) {
      bool ok = row->rel == ConstraintRel::GE ? row->k >= 0 : row->k == 0;
      if (!ok) return {};
    }
    current_.assign(static_cast<std::size_t>(p_.dim()), 0);
    descend(0);
    return std::move(out_);
  }

  bool find_one() {
    firstOnly_ = true;
    out_.clear();
    for (const auto* row : byLevel_[0]) {
      bool ok = row->rel == ConstraintRel::GE ? row->k >= 0 : row->k == 0;
      if (!ok) return false;
    }
    current_.assign(static_cast<std::size_t>(p_.dim()), 0);
    descend(0);
    return !out_.empty();
  }

 private:
  void descend(int level) {
    if (firstOnly_ && !out_.empty()) return;
    if (level == p_.dim()) {
      if (!box_ && !firstOnly_ && static_cast<std::int64_t>(out_.size()) >= cap_)
        throw BoxTooLarge("enumeration exceeded point cap " + std::to_string(cap_));
      out_.push_back(Point{current_});
      return;
    }
    std::optional<BigInt> lo, hi;
    if (box_) {
      lo = BigInt((*box_)[static_cast<std::size_t>(level)].first);
      hi = BigInt((*box_)[static_cast<std::size_t>(level)].second);
    }
    // Equality rows pin the value; inequality rows tighten lo/hi.
    for (const auto* row : byLevel_[static_cast<std::size_t>(level) + 1]) {
      BigInt partial = row->k;
      for (int v = 0; v < level; ++v)
        partial += row->c[static_cast<std::size_t>(v)] * current_[static_cast<std::size_t>(v)];
      const BigInt& a = row->c[static_cast<std::size_t>(level)];
      if (row->rel == ConstraintRel::EQ) {
        if (partial % a != 0) return;  // no integer solution on this branch
        BigInt v = -partial / a;
        if (!lo || v > *lo) lo = v;
        if (!hi || v < *hi) hi = v;
      } else if (a > 0) {
        BigInt bound = ceil_div(-partial, a);
        if (!lo || bound > *lo) lo = bound;
      } else {
        BigInt bound = floor_div(partial, -a);
        if (!hi || bound < *hi) hi = bound;
      }
    }
    if (!lo || !hi)
      throw BoxTooLarge("variable '" + p_.space().names[static_cast<std::size_t>(level)] +
                        "' is unbounded and no box was given");
    for (BigInt v = *lo; v <= *hi; ++v) {
      current_[static_cast<std::size_t>(level)] = static_cast<std::int64_t>(v);
      descend(level + 1);
    }
  }

  const Polyhedron& p_;
  const Box* box_;
  std::int64_t cap_;
  bool firstOnly_ = false;
  std::vector<Polyhedron::Row> rows_;
  std::vector<std::vector<const Polyhedron::Row*>> byLevel_;
  std::vector<std::int64_t> current_;
  std::vector<Point> out_;
};

// Rational projection of `p` onto space \ {var}. Every integer point of `p`
// maps into the result; the converse may fail (no dark-shadow refinement).
inline Polyhedron fm_eliminate(const Polyhedron& p, int var) {
  if (var < 0 || var >= p.dim()) throw DimensionMismatch("eliminated variable outside space");
  VarSpace ns = p.space_;
  ns.names.erase(ns.names.begin() + var);
  if (var < ns.numIterators) --ns.numIterators;
  Polyhedron out(ns);

  auto strip = [&](const Polyhedron::Row& r) {
    Polyhedron::Row nr;
    nr.rel = r.rel;
    nr.k = r.k;
    for (int i = 0; i < p.dim(); ++i)
      if (i != var) nr.c.push_back(r.c[static_cast<std::size_t>(i)]);
    return nr;
  };

  // Prefer substitution through an equality that mentions the variable.
  const Polyhedron::Row* eq = nullptr;
  for (const auto& r : p.rows_)
    if (r.rel == ConstraintRel::EQ && r.c[static_cast<std::size_t>(var)] != 0) {
      eq = &r;
      break;
    }
  if (eq) {
    const BigInt& b = eq->c[static_cast<std::size_t>(var)];
    BigInt absB = b < 0 ? BigInt(-b) : b;
    BigInt sgnB = b < 0 ? BigInt(-1) : BigInt(1);
    for (const auto& r : p.rows_) {
      if (&r == eq) continue;
      const BigInt& a = r.c[static_cast<std::size_t>(var)];
      if (a == 0) {
        out.push_row(strip(r));
        continue;
      }
      Polyhedron::Row nr;
      nr.rel = r.rel;
      nr.k = r.k * absB - eq->k * (a * sgnB);
      for (int i = 0; i < p.dim(); ++i) {
        if (i == var) continue;
        nr.c.push_back(r.c[static_cast<std::size_t>(i)] * absB -
                       eq->c[static_cast<std::size_t>(i)] * (a * sgnB));
      }
      out.push_row(std::move(nr));
    }
    return out;
  }

  std::vector<const Polyhedron::Row*> lower, upper;
  for (const auto& r : p.rows_) {
    const BigInt& a = r.c[static_cast<std::size_t>(var)];
    if (a == 0) {
      out.push_row(strip(r));
    } else if (a > 0) {
      lower.push_back(&r);
    } else {
      upper.push_back(&r);
    }
  }
  for (const auto* l : lower) {
    const BigInt a = l->c[static_cast<std::size_t>(var)];
    for (const auto* u : upper) {
      const BigInt b = u->c[static_cast<std::size_t>(var)];  // b < 0
      Polyhedron::Row nr;
      nr.rel = ConstraintRel::GE;
      nr.k = l->k * (-b) + u->k * a;
      for (int i = 0; i < p.dim(); ++i) {
        if (i == var) continue;
        nr.c.push_back(l->c[static_cast<std::size_t>(i)] * (-b) +
                       u->c[static_cast<std::size_t>(i)] * a);
      }
      out.push_row(std::move(nr));
    }
  }
  return out;
}

// True iff `p` has no rational point: eliminate every variable and look for a
// contradictory constant row. Used as the conservative dependence test;
// rational-nonempty never misses an integer point.
inline bool is_empty_rational(const Polyhedron& p) {
  auto contradiction = [](const Polyhedron& q) {
    for (const auto& r : q.rows_) {
      bool allZero = true;
      for (const BigInt& c : r.c)
        if (c != 0) {
          allZero = false;
          break;
        }
      if (!allZero) continue;
      if (r.rel == ConstraintRel::GE ? r.k < 0 : r.k != 0) return true;
    }
    return false;
  };
  Polyhedron cur = p;
  if (contradiction(cur)) return true;
  while (cur.dim() > 0) {
    cur = fm_eliminate(cur, cur.dim() - 1);
    if (contradiction(cur)) return true;
  }
  return false;
}

inline std::vector<Point> enumerate_points(const Polyhedron& p, const Box& box,
                                           std::int64_t cap = detail::kDefaultPointCap) {
  return PointEnumerator(p, &box, cap).run();
}

// Box-free variant for domains whose constraints bound every variable; used by
// the oracles on instantiated iteration domains.
inline std::vector<Point> enumerate_points(const Polyhedron& p,
                                           std::int64_t cap = detail::kDefaultPointCap) {
  return PointEnumerator(p, nullptr, cap).run();
}

// Integer feasibility, exact when the set is bounded; unbounded sets fall back
// to the conservative rational answer.
inline bool has_integer_point(const Polyhedron& p) {
  if (is_empty_rational(p)) return false;
  try {
    return PointEnumerator(p, nullptr, detail::kDefaultPointCap).find_one();
  } catch (const BoxTooLarge&) {
    return true;  // undecided: err on the side of reporting a point
  }
}

}  // namespace polytask
