#pragma once

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polytask/error.hpp"

namespace polytask {

// ---------------------------------------------------------------------------
// Expressions
// ---------------------------------------------------------------------------

enum class BinOpKind { Add, Sub, Mul };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// One tagged node type covers the whole expression language: integer and float
// literals, scalar references, array references, arithmetic, and opaque calls
// (kernels plus min/max/floordiv intrinsics).
struct Expr {
  enum class Kind { IntLit, FloatLit, VarRef, ArrayRef, BinOp, Neg, Call };

  Kind kind;
  SourceLocation loc;
  std::int64_t intValue = 0;
  double floatValue = 0.0;
  std::string name;            // VarRef / ArrayRef / Call
  std::vector<ExprPtr> args;   // subscripts, call args, or operands
  BinOpKind op = BinOpKind::Add;
};

inline ExprPtr make_int(std::int64_t v, SourceLocation loc = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::IntLit;
  e->intValue = v;
  e->loc = loc;
  return e;
}

inline ExprPtr make_float(double v, SourceLocation loc = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::FloatLit;
  e->floatValue = v;
  e->loc = loc;
  return e;
}

inline ExprPtr make_var(std::string name, SourceLocation loc = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::VarRef;
  e->name = std::move(name);
  e->loc = loc;
  return e;
}

inline ExprPtr make_array_ref(std::string name, std::vector<ExprPtr> subscripts,
                              SourceLocation loc = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::ArrayRef;
  e->name = std::move(name);
  e->args = std::move(subscripts);
  e->loc = loc;
  return e;
}

inline ExprPtr make_binop(BinOpKind op, ExprPtr lhs, ExprPtr rhs, SourceLocation loc = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::BinOp;
  e->op = op;
  e->args = {std::move(lhs), std::move(rhs)};
  e->loc = loc;
  return e;
}

inline ExprPtr make_neg(ExprPtr inner, SourceLocation loc = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Neg;
  e->args = {std::move(inner)};
  e->loc = loc;
  return e;
}

inline ExprPtr make_call(std::string name, std::vector<ExprPtr> args, SourceLocation loc = {}) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Call;
  e->name = std::move(name);
  e->args = std::move(args);
  e->loc = loc;
  return e;
}

// ---------------------------------------------------------------------------
// Statements
// ---------------------------------------------------------------------------

struct Stmt;
using StmtPtr = std::shared_ptr<const Stmt>;

struct Stmt {
  enum class Kind {
    For,           // for i in lo..hi { body }
    Assign,        // ref = expr;
    Call,          // f(args);  (opaque kernel call or bound task call)
    Barrier,       // barrier;
    ChunkBuild,    // chunk c = a[lo..hi]...;
    ChunkFlatten,  // flatten c;
    ChunkRebuild,  // rebuild c;
    WriteBack,     // a[lo..hi]... = c;
  };

  Kind kind;
  SourceLocation loc;

  // For
  std::string iter;
  ExprPtr lo, hi;
  std::vector<StmtPtr> body;
  bool parallel = false;  // carries the `# pragma omp parallel for` annotation

  // Assign
  ExprPtr target;  // ArrayRef or VarRef
  ExprPtr value;

  // Call
  std::string callee;
  std::vector<ExprPtr> args;
  bool isTaskCall = false;  // resolved against task definitions after parsing

  // Chunk machinery
  std::string chunkName;
  std::string arrayName;
  std::vector<std::pair<ExprPtr, ExprPtr>> region;  // half-open per dimension
};

inline StmtPtr make_for(std::string iter, ExprPtr lo, ExprPtr hi, std::vector<StmtPtr> body,
                        bool parallel = false, SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::For;
  s->iter = std::move(iter);
  s->lo = std::move(lo);
  s->hi = std::move(hi);
  s->body = std::move(body);
  s->parallel = parallel;
  s->loc = loc;
  return s;
}

inline StmtPtr make_assign(ExprPtr target, ExprPtr value, SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Assign;
  s->target = std::move(target);
  s->value = std::move(value);
  s->loc = loc;
  return s;
}

inline StmtPtr make_call_stmt(std::string callee, std::vector<ExprPtr> args, bool isTask = false,
                              SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Call;
  s->callee = std::move(callee);
  s->args = std::move(args);
  s->isTaskCall = isTask;
  s->loc = loc;
  return s;
}

inline StmtPtr make_barrier(SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::Barrier;
  s->loc = loc;
  return s;
}

inline StmtPtr make_chunk_build(std::string chunkName, std::string arrayName,
                                std::vector<std::pair<ExprPtr, ExprPtr>> region,
                                SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::ChunkBuild;
  s->chunkName = std::move(chunkName);
  s->arrayName = std::move(arrayName);
  s->region = std::move(region);
  s->loc = loc;
  return s;
}

inline StmtPtr make_chunk_flatten(std::string chunkName, SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::ChunkFlatten;
  s->chunkName = std::move(chunkName);
  s->loc = loc;
  return s;
}

inline StmtPtr make_chunk_rebuild(std::string chunkName, SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::ChunkRebuild;
  s->chunkName = std::move(chunkName);
  s->loc = loc;
  return s;
}

inline StmtPtr make_write_back(std::string arrayName,
                               std::vector<std::pair<ExprPtr, ExprPtr>> region,
                               std::string chunkName, SourceLocation loc = {}) {
  auto s = std::make_shared<Stmt>();
  s->kind = Stmt::Kind::WriteBack;
  s->arrayName = std::move(arrayName);
  s->region = std::move(region);
  s->chunkName = std::move(chunkName);
  s->loc = loc;
  return s;
}

// ---------------------------------------------------------------------------
// Program
// ---------------------------------------------------------------------------

enum class Direction { IN, OUT, INOUT };

inline const char* to_string(Direction d) {
  switch (d) {
    case Direction::IN: return "in";
    case Direction::OUT: return "out";
    case Direction::INOUT: return "inout";
  }
  return "?";
}

struct ParamDecl {
  std::string name;
  SourceLocation loc;
};

struct ArrayDecl {
  std::string name;
  std::vector<ExprPtr> extents;  // size() == rank; rank 0 is a scalar cell
  SourceLocation loc;
};

struct TaskParamDecl {
  std::string name;
  Direction dir = Direction::IN;
  int rank = 0;  // 0 = scalar, >0 = chunk with that many dimensions
  SourceLocation loc;
};

struct TaskDefDecl {
  std::string name;
  std::vector<TaskParamDecl> params;
  std::vector<StmtPtr> body;
  SourceLocation loc;
};

struct Program {
  std::vector<ParamDecl> params;
  std::vector<ArrayDecl> arrays;
  std::vector<TaskDefDecl> tasks;
  std::vector<StmtPtr> body;

  const ArrayDecl* find_array(const std::string& name) const {
    for (const auto& a : arrays)
      if (a.name == name) return &a;
    return nullptr;
  }
  const TaskDefDecl* find_task(const std::string& name) const {
    for (const auto& t : tasks)
      if (t.name == name) return &t;
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Structural equality (source locations ignored)
// ---------------------------------------------------------------------------

inline bool struct_equal(const ExprPtr& a, const ExprPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Expr::Kind::IntLit:
      return a->intValue == b->intValue;
    case Expr::Kind::FloatLit:
      return a->floatValue == b->floatValue;
    case Expr::Kind::VarRef:
      return a->name == b->name;
    case Expr::Kind::BinOp:
      if (a->op != b->op) return false;
      [[fallthrough]];
    case Expr::Kind::ArrayRef:
    case Expr::Kind::Neg:
    case Expr::Kind::Call:
      if (a->name != b->name || a->args.size() != b->args.size()) return false;
      for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!struct_equal(a->args[i], b->args[i])) return false;
      return true;
  }
  return false;
}

inline bool struct_equal(const StmtPtr& a, const StmtPtr& b);

inline bool struct_equal(const std::vector<StmtPtr>& a, const std::vector<StmtPtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!struct_equal(a[i], b[i])) return false;
  return true;
}

inline bool struct_equal(const StmtPtr& a, const StmtPtr& b) {
  if (!a || !b) return a == b;
  if (a->kind != b->kind) return false;
  auto regionEqual = [](const Stmt& x, const Stmt& y) {
    if (x.region.size() != y.region.size()) return false;
    for (std::size_t i = 0; i < x.region.size(); ++i) {
      if (!struct_equal(x.region[i].first, y.region[i].first)) return false;
      if (!struct_equal(x.region[i].second, y.region[i].second)) return false;
    }
    return true;
  };
  switch (a->kind) {
    case Stmt::Kind::For:
      return a->iter == b->iter && a->parallel == b->parallel && struct_equal(a->lo, b->lo) &&
             struct_equal(a->hi, b->hi) && struct_equal(a->body, b->body);
    case Stmt::Kind::Assign:
      return struct_equal(a->target, b->target) && struct_equal(a->value, b->value);
    case Stmt::Kind::Call: {
      if (a->callee != b->callee || a->isTaskCall != b->isTaskCall ||
          a->args.size() != b->args.size())
        return false;
      for (std::size_t i = 0; i < a->args.size(); ++i)
        if (!struct_equal(a->args[i], b->args[i])) return false;
      return true;
    }
    case Stmt::Kind::Barrier:
      return true;
    case Stmt::Kind::ChunkBuild:
      return a->chunkName == b->chunkName && a->arrayName == b->arrayName && regionEqual(*a, *b);
    case Stmt::Kind::ChunkFlatten:
    case Stmt::Kind::ChunkRebuild:
      return a->chunkName == b->chunkName;
    case Stmt::Kind::WriteBack:
      return a->chunkName == b->chunkName && a->arrayName == b->arrayName && regionEqual(*a, *b);
  }
  return false;
}

inline bool struct_equal(const Program& a, const Program& b) {
  if (a.params.size() != b.params.size() || a.arrays.size() != b.arrays.size() ||
      a.tasks.size() != b.tasks.size())
    return false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (a.params[i].name != b.params[i].name) return false;
  for (std::size_t i = 0; i < a.arrays.size(); ++i) {
    if (a.arrays[i].name != b.arrays[i].name ||
        a.arrays[i].extents.size() != b.arrays[i].extents.size())
      return false;
    for (std::size_t j = 0; j < a.arrays[i].extents.size(); ++j)
      if (!struct_equal(a.arrays[i].extents[j], b.arrays[i].extents[j])) return false;
  }
  for (std::size_t i = 0; i < a.tasks.size(); ++i) {
    const auto& ta = a.tasks[i];
    const auto& tb = b.tasks[i];
    if (ta.name != tb.name || ta.params.size() != tb.params.size()) return false;
    for (std::size_t j = 0; j < ta.params.size(); ++j) {
      if (ta.params[j].name != tb.params[j].name || ta.params[j].dir != tb.params[j].dir ||
          ta.params[j].rank != tb.params[j].rank)
        return false;
    }
    if (!struct_equal(ta.body, tb.body)) return false;
  }
  return struct_equal(a.body, b.body);
}

// ---------------------------------------------------------------------------
// Printer. The canonical form is what `parse` inverts: two-space indentation,
// one statement per line, `#` pragma comments ahead of parallel loops.
// ---------------------------------------------------------------------------

namespace detail {

inline int precedence(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::BinOp:
      return e.op == BinOpKind::Mul ? 2 : 1;
    case Expr::Kind::Neg:
      return 3;
    default:
      return 4;
  }
}

inline void print_expr(std::ostream& os, const ExprPtr& e);

inline void print_operand(std::ostream& os, const ExprPtr& e, int parentPrec, bool rightSide) {
  int prec = precedence(*e);
  bool parens = prec < parentPrec || (prec == parentPrec && rightSide);
  if (parens) os << '(';
  print_expr(os, e);
  if (parens) os << ')';
}

inline void print_float(std::ostream& os, double v) {
  std::ostringstream tmp;
  tmp.precision(17);
  tmp << v;
  std::string s = tmp.str();
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  os << s;
}

inline void print_expr(std::ostream& os, const ExprPtr& e) {
  switch (e->kind) {
    case Expr::Kind::IntLit:
      os << e->intValue;
      break;
    case Expr::Kind::FloatLit:
      print_float(os, e->floatValue);
      break;
    case Expr::Kind::VarRef:
      os << e->name;
      break;
    case Expr::Kind::ArrayRef:
      os << e->name;
      for (const auto& s : e->args) {
        os << '[';
        print_expr(os, s);
        os << ']';
      }
      break;
    case Expr::Kind::BinOp: {
      int prec = precedence(*e);
      const char* sym = e->op == BinOpKind::Add ? " + " : e->op == BinOpKind::Sub ? " - " : " * ";
      print_operand(os, e->args[0], prec, false);
      os << sym;
      // Add is associative enough for our integer/float grammar, so right
      // operands of `+` print without parentheses.
      print_operand(os, e->args[1], prec, e->op != BinOpKind::Add);
      break;
    }
    case Expr::Kind::Neg:
      os << '-';
      print_operand(os, e->args[0], precedence(*e), true);
      break;
    case Expr::Kind::Call:
      os << e->name << '(';
      for (std::size_t i = 0; i < e->args.size(); ++i) {
        if (i) os << ", ";
        print_expr(os, e->args[i]);
      }
      os << ')';
      break;
  }
}

inline void print_region(std::ostream& os, const std::vector<std::pair<ExprPtr, ExprPtr>>& region) {
  for (const auto& [lo, hi] : region) {
    os << '[';
    print_expr(os, lo);
    os << "..";
    print_expr(os, hi);
    os << ']';
  }
}

inline void print_stmt(std::ostream& os, const StmtPtr& s, int indent) {
  std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  switch (s->kind) {
    case Stmt::Kind::For:
      if (s->parallel) os << pad << "# pragma omp parallel for\n";
      os << pad << "for " << s->iter << " in ";
      print_expr(os, s->lo);
      os << "..";
      print_expr(os, s->hi);
      os << " {\n";
      for (const auto& inner : s->body) print_stmt(os, inner, indent + 1);
      os << pad << "}\n";
      break;
    case Stmt::Kind::Assign:
      os << pad;
      print_expr(os, s->target);
      os << " = ";
      print_expr(os, s->value);
      os << ";\n";
      break;
    case Stmt::Kind::Call:
      os << pad << s->callee << '(';
      for (std::size_t i = 0; i < s->args.size(); ++i) {
        if (i) os << ", ";
        print_expr(os, s->args[i]);
      }
      os << ");\n";
      break;
    case Stmt::Kind::Barrier:
      os << pad << "barrier;\n";
      break;
    case Stmt::Kind::ChunkBuild:
      os << pad << "chunk " << s->chunkName << " = " << s->arrayName;
      print_region(os, s->region);
      os << ";\n";
      break;
    case Stmt::Kind::ChunkFlatten:
      os << pad << "flatten " << s->chunkName << ";\n";
      break;
    case Stmt::Kind::ChunkRebuild:
      os << pad << "rebuild " << s->chunkName << ";\n";
      break;
    case Stmt::Kind::WriteBack:
      os << pad << s->arrayName;
      print_region(os, s->region);
      os << " = " << s->chunkName << ";\n";
      break;
  }
}

}  // namespace detail

inline std::string to_source(const ExprPtr& e) {
  std::ostringstream os;
  detail::print_expr(os, e);
  return os.str();
}

inline std::string to_source(const StmtPtr& s, int indent = 0) {
  std::ostringstream os;
  detail::print_stmt(os, s, indent);
  return os.str();
}

inline std::string pretty_print(const Program& p) {
  std::ostringstream os;
  for (const auto& d : p.params) os << "param " << d.name << ";\n";
  for (const auto& a : p.arrays) {
    os << "array " << a.name;
    for (const auto& ext : a.extents) {
      os << '[';
      detail::print_expr(os, ext);
      os << ']';
    }
    os << ";\n";
  }
  for (const auto& t : p.tasks) {
    os << "\ntask " << t.name << '(';
    for (std::size_t i = 0; i < t.params.size(); ++i) {
      if (i) os << ", ";
      os << to_string(t.params[i].dir) << ' ' << t.params[i].name;
      for (int r = 0; r < t.params[i].rank; ++r) os << "[]";
    }
    os << ") {\n";
    for (const auto& s : t.body) detail::print_stmt(os, s, 1);
    os << "}\n";
  }
  if (!p.body.empty()) os << '\n';
  for (const auto& s : p.body) detail::print_stmt(os, s, 0);
  return os.str();
}

}  // namespace polytask
