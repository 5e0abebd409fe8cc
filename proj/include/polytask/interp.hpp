#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polytask/ast.hpp"
#include "polytask/error.hpp"
#include "polytask/rational.hpp"
#include "polytask/value.hpp"

namespace polytask {

struct ArrayStore {
  std::vector<std::int64_t> extents;
  std::vector<Payload> cells;

  std::int64_t linear(const std::vector<std::int64_t>& subs) const {
    if (subs.size() != extents.size()) throw DimensionMismatch("subscript rank mismatch");
    std::int64_t idx = 0;
    for (std::size_t d = 0; d < extents.size(); ++d) {
      if (subs[d] < 0 || subs[d] >= extents[d])
        throw Error("subscript " + std::to_string(subs[d]) + " out of range [0," +
                    std::to_string(extents[d]) + ") in dimension " + std::to_string(d));
      idx = idx * extents[d] + subs[d];
    }
    return idx;
  }

  Payload& cell(const std::vector<std::int64_t>& subs) {
    return cells[static_cast<std::size_t>(linear(subs))];
  }
  const Payload& cell(const std::vector<std::int64_t>& subs) const {
    return cells[static_cast<std::size_t>(linear(subs))];
  }
};

// A materialized rectangular region copy, the sequential-execution analogue of
// the runtime's flattened argument list.
struct ChunkValue {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> dims;
  std::vector<Payload> cells;
  bool flattened = false;

  std::int64_t count() const {
    std::int64_t n = 1;
    for (std::int64_t d : dims) n *= d;
    return n;
  }
};

struct InterpHooks {
  // Fired for every executed Assign/Call statement instance with the active
  // iterator bindings, outermost first. Chunk and barrier nodes do not fire.
  std::function<void(const Stmt&, const std::vector<std::pair<std::string, std::int64_t>>&)>
      onStatement;
};

// Direct sequential interpreter for DSL programs, including the generated
// extensions (task definitions run inline, chunk ops copy data, barriers are
// no-ops). This is the semantic oracle for every transformation.
class Interp {
 public:
  Interp(const Program& program, std::map<std::string, std::int64_t> paramValues,
         const KernelRegistry& kernels, InterpHooks hooks = {})
      : program_(program), params_(std::move(paramValues)), kernels_(kernels),
        hooks_(std::move(hooks)) {
    frames_.emplace_back();
    for (const auto& p : program_.params)
      if (!params_.count(p.name)) throw Error("missing value for parameter '" + p.name + "'");
    for (const auto& a : program_.arrays) {
      ArrayStore store;
      std::int64_t total = 1;
      for (const auto& ext : a.extents) {
        std::int64_t e = eval_int(ext);
        if (e < 0) throw Error("array '" + a.name + "' has negative extent");
        store.extents.push_back(e);
        total *= e;
      }
      store.cells.assign(static_cast<std::size_t>(total), Payload(0.0));
      arrays_.emplace(a.name, std::move(store));
    }
  }

  void run() { run_block(program_.body); }

  ArrayStore& array(const std::string& name) {
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw Error("no array named '" + name + "'");
    return it->second;
  }
  const ArrayStore& array(const std::string& name) const {
    return const_cast<Interp*>(this)->array(name);
  }

 private:
  struct Frame {
    bool isTaskFrame = false;
    std::map<std::string, std::int64_t> scalars;           // iterators + integer task params
    std::map<std::string, Payload> payloads;               // rank-0 cell / float task params
    std::map<std::string, ChunkValue*> chunkParams;        // task chunk params
    std::map<std::string, std::unique_ptr<ChunkValue>> chunks;  // local chunk variables
  };

  void run_block(const std::vector<StmtPtr>& stmts) {
    for (const auto& s : stmts) exec(*s);
  }

  void exec(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::For: {
        std::int64_t lo = eval_int(s.lo);
        std::int64_t hi = eval_int(s.hi);
        for (std::int64_t v = lo; v < hi; ++v) {
          frames_.back().scalars[s.iter] = v;
          iterStack_.emplace_back(s.iter, v);
          run_block(s.body);
          iterStack_.pop_back();
        }
        frames_.back().scalars.erase(s.iter);
        break;
      }
      case Stmt::Kind::Assign: {
        fire_hook(s);
        Payload value = eval(s.value);
        store_to(s.target, std::move(value));
        break;
      }
      case Stmt::Kind::Call: {
        if (s.isTaskCall) {
          exec_task_call(s);
        } else {
          fire_hook(s);
          exec_kernel_call(s);
        }
        break;
      }
      case Stmt::Kind::Barrier:
        break;  // sequential execution is always synchronized
      case Stmt::Kind::ChunkBuild: {
        auto chunk = std::make_unique<ChunkValue>();
        for_region_cells(s, [&](ArrayStore& store, const std::vector<std::int64_t>& subs) {
          chunk->cells.push_back(store.cell(subs));
        }, &chunk->lo, &chunk->dims);
        frames_.back().chunks[s.chunkName] = std::move(chunk);
        break;
      }
      case Stmt::Kind::ChunkFlatten:
        find_chunk(s.chunkName).flattened = true;
        break;
      case Stmt::Kind::ChunkRebuild:
        find_chunk(s.chunkName).flattened = false;
        break;
      case Stmt::Kind::WriteBack: {
        ChunkValue& chunk = find_chunk(s.chunkName);
        std::size_t idx = 0;
        for_region_cells(s, [&](ArrayStore& store, const std::vector<std::int64_t>& subs) {
          store.cell(subs) = chunk.cells.at(idx++);
        });
        if (idx != chunk.cells.size())
          throw DimensionMismatch("write-back region does not match chunk size");
        break;
      }
    }
  }

  void exec_kernel_call(const Stmt& s) {
    std::vector<Payload> argValues;
    std::vector<ExprPtr> writableRefs;
    for (const auto& arg : s.args) {
      argValues.push_back(eval(arg));
      // Array cells are writable; so are cell parameters inside task bodies.
      if (arg->kind == Expr::Kind::ArrayRef ||
          (arg->kind == Expr::Kind::VarRef && find_payload(arg->name)))
        writableRefs.push_back(arg);
    }
    std::vector<Payload> results = kernels_.call(s.callee, argValues);
    if (results.size() != writableRefs.size())
      throw Error("kernel '" + s.callee + "' returned " + std::to_string(results.size()) +
                  " results for " + std::to_string(writableRefs.size()) + " array arguments");
    for (std::size_t i = 0; i < writableRefs.size(); ++i)
      store_to(writableRefs[i], std::move(results[i]));
  }

  void exec_task_call(const Stmt& s) {
    const TaskDefDecl* def = program_.find_task(s.callee);
    if (!def) throw UnknownTask(s.callee);
    if (def->params.size() != s.args.size())
      throw Error("task '" + s.callee + "' expects " + std::to_string(def->params.size()) +
                  " arguments");
    Frame frame;
    frame.isTaskFrame = true;
    std::vector<std::pair<ExprPtr, std::string>> cellOuts;  // cell ref -> param name
    for (std::size_t i = 0; i < s.args.size(); ++i) {
      const TaskParamDecl& p = def->params[i];
      const ExprPtr& arg = s.args[i];
      if (p.rank > 0) {
        if (arg->kind != Expr::Kind::VarRef)
          throw Error("argument " + std::to_string(i) + " of '" + s.callee +
                      "' must be a chunk variable");
        ChunkValue& chunk = find_chunk(arg->name);
        if (static_cast<int>(chunk.dims.size()) != p.rank)
          throw DimensionMismatch("chunk rank does not match parameter '" + p.name + "'");
        frame.chunkParams[p.name] = &chunk;
      } else if (arg->kind == Expr::Kind::ArrayRef) {
        frame.payloads[p.name] = eval(arg);
        if (p.dir != Direction::IN) cellOuts.emplace_back(arg, p.name);
      } else if (is_integer_expr(arg)) {
        frame.scalars[p.name] = eval_int(arg);
      } else {
        frame.payloads[p.name] = eval(arg);
      }
    }
    frames_.push_back(std::move(frame));
    auto savedIters = std::move(iterStack_);
    iterStack_.clear();
    run_block(def->body);
    iterStack_ = std::move(savedIters);
    Frame done = std::move(frames_.back());
    frames_.pop_back();
    // Propagate rank-0 INOUT/OUT cells back to their home arrays.
    for (auto& [ref, pname] : cellOuts) store_to(ref, std::move(done.payloads.at(pname)));
  }

  bool is_integer_expr(const ExprPtr& e) const {
    switch (e->kind) {
      case Expr::Kind::IntLit:
        return true;
      case Expr::Kind::FloatLit:
        return false;
      case Expr::Kind::VarRef:
        return find_scalar(e->name).has_value();
      case Expr::Kind::Neg:
        return is_integer_expr(e->args[0]);
      case Expr::Kind::BinOp:
        return is_integer_expr(e->args[0]) && is_integer_expr(e->args[1]);
      case Expr::Kind::Call:
        if (e->name != "min" && e->name != "max" && e->name != "floordiv") return false;
        for (const auto& a : e->args)
          if (!is_integer_expr(a)) return false;
        return true;
      default:
        return false;
    }
  }

  void fire_hook(const Stmt& s) {
    if (hooks_.onStatement) hooks_.onStatement(s, iterStack_);
  }

  // --- values ---

  Payload eval(const ExprPtr& e) {
    switch (e->kind) {
      case Expr::Kind::IntLit:
        return Payload(static_cast<double>(e->intValue));
      case Expr::Kind::FloatLit:
        return Payload(e->floatValue);
      case Expr::Kind::VarRef: {
        if (const Payload* p = find_payload(e->name)) return *p;
        if (auto scalar = find_scalar(e->name)) return Payload(static_cast<double>(*scalar));
        throw Error("variable '" + e->name + "' has no scalar value here");
      }
      case Expr::Kind::ArrayRef: {
        std::vector<std::int64_t> subs;
        subs.reserve(e->args.size());
        for (const auto& s : e->args) subs.push_back(eval_int(s));
        if (ChunkValue* chunk = find_chunk_param(e->name)) {
          std::int64_t idx = chunk_linear(*chunk, subs);
          return chunk->cells.at(static_cast<std::size_t>(idx));
        }
        return array(e->name).cell(subs);
      }
      case Expr::Kind::Neg:
        return Payload(-as_scalar(eval(e->args[0]), "operand"));
      case Expr::Kind::BinOp: {
        double a = as_scalar(eval(e->args[0]), "operand");
        double b = as_scalar(eval(e->args[1]), "operand");
        switch (e->op) {
          case BinOpKind::Add: return Payload(a + b);
          case BinOpKind::Sub: return Payload(a - b);
          case BinOpKind::Mul: return Payload(a * b);
        }
        return Payload(0.0);
      }
      case Expr::Kind::Call: {
        if (e->name == "min" || e->name == "max" || e->name == "floordiv")
          return Payload(static_cast<double>(eval_intrinsic(e)));
        std::vector<Payload> args;
        args.reserve(e->args.size());
        for (const auto& a : e->args) args.push_back(eval(a));
        std::vector<Payload> results = kernels_.call(e->name, args);
        if (results.size() != 1)
          throw Error("kernel '" + e->name + "' must return one value in expression position");
        return std::move(results[0]);
      }
    }
    throw Error("unreachable expression kind");
  }

  std::int64_t eval_int(const ExprPtr& e) {
    switch (e->kind) {
      case Expr::Kind::IntLit:
        return e->intValue;
      case Expr::Kind::VarRef:
        if (auto scalar = find_scalar(e->name)) return *scalar;
        throw Error("variable '" + e->name + "' is not an integer here");
      case Expr::Kind::Neg:
        return -eval_int(e->args[0]);
      case Expr::Kind::BinOp: {
        std::int64_t a = eval_int(e->args[0]);
        std::int64_t b = eval_int(e->args[1]);
        switch (e->op) {
          case BinOpKind::Add: return a + b;
          case BinOpKind::Sub: return a - b;
          case BinOpKind::Mul: return a * b;
        }
        return 0;
      }
      case Expr::Kind::Call:
        return eval_intrinsic(e);
      default:
        throw Error("expected an integer expression");
    }
  }

  std::int64_t eval_intrinsic(const ExprPtr& e) {
    if (e->name == "min" || e->name == "max") {
      if (e->args.size() < 2) throw Error(e->name + " needs at least two arguments");
      std::int64_t acc = eval_int(e->args[0]);
      for (std::size_t i = 1; i < e->args.size(); ++i) {
        std::int64_t v = eval_int(e->args[i]);
        acc = e->name == "min" ? std::min(acc, v) : std::max(acc, v);
      }
      return acc;
    }
    if (e->name == "floordiv") {
      if (e->args.size() != 2) throw Error("floordiv needs two arguments");
      std::int64_t num = eval_int(e->args[0]);
      std::int64_t den = eval_int(e->args[1]);
      if (den == 0) throw Error("floordiv by zero");
      return floor_div_i64(num, den);
    }
    throw Error("expected an integer expression, found call to '" + e->name + "'");
  }

  void store_to(const ExprPtr& target, Payload value) {
    if (target->kind != Expr::Kind::ArrayRef && target->kind != Expr::Kind::VarRef)
      throw Error("invalid assignment target");
    if (target->kind == Expr::Kind::VarRef) {
      if (Payload* p = find_payload_mutable(target->name)) {
        *p = std::move(value);
        return;
      }
      throw Error("cannot assign to '" + target->name + "'");
    }
    std::vector<std::int64_t> subs;
    for (const auto& s : target->args) subs.push_back(eval_int(s));
    if (ChunkValue* chunk = find_chunk_param(target->name)) {
      chunk->cells.at(static_cast<std::size_t>(chunk_linear(*chunk, subs))) = std::move(value);
      return;
    }
    array(target->name).cell(subs) = std::move(value);
  }

  static std::int64_t chunk_linear(const ChunkValue& chunk, const std::vector<std::int64_t>& subs) {
    if (subs.size() != chunk.dims.size()) throw DimensionMismatch("chunk subscript rank mismatch");
    std::int64_t idx = 0;
    for (std::size_t d = 0; d < subs.size(); ++d) {
      if (subs[d] < 0 || subs[d] >= chunk.dims[d])
        throw Error("chunk subscript out of range in dimension " + std::to_string(d));
      idx = idx * chunk.dims[d] + subs[d];
    }
    return idx;
  }

  std::optional<std::int64_t> find_scalar(const std::string& name) const {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      auto found = it->scalars.find(name);
      if (found != it->scalars.end()) return found->second;
      if (it->isTaskFrame) break;  // task bodies only see their own scalars + params
    }
    auto p = params_.find(name);
    if (p != params_.end()) return p->second;
    return std::nullopt;
  }

  const Payload* find_payload(const std::string& name) const {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      auto found = it->payloads.find(name);
      if (found != it->payloads.end()) return &found->second;
      if (it->isTaskFrame) break;
    }
    return nullptr;
  }
  Payload* find_payload_mutable(const std::string& name) {
    return const_cast<Payload*>(find_payload(name));
  }

  ChunkValue* find_chunk_param(const std::string& name) {
    for (auto it = frames_.rbegin(); it != frames_.rend(); ++it) {
      auto found = it->chunkParams.find(name);
      if (found != it->chunkParams.end()) return found->second;
      auto local = it->chunks.find(name);
      if (local != it->chunks.end()) return local->second.get();
      if (it->isTaskFrame) break;
    }
    return nullptr;
  }

  ChunkValue& find_chunk(const std::string& name) {
    if (ChunkValue* c = find_chunk_param(name)) return *c;
    throw Error("no chunk named '" + name + "'");
  }

  template <typename Fn>
  void for_region_cells(const Stmt& s, Fn&& fn, std::vector<std::int64_t>* loOut = nullptr,
                        std::vector<std::int64_t>* dimsOut = nullptr) {
    ArrayStore& store = array(s.arrayName);
    std::vector<std::int64_t> lo, hi;
    for (const auto& [l, h] : s.region) {
      lo.push_back(eval_int(l));
      hi.push_back(eval_int(h));
    }
    if (lo.size() != store.extents.size())
      throw DimensionMismatch("region rank does not match array '" + s.arrayName + "'");
    if (loOut) *loOut = lo;
    if (dimsOut) {
      dimsOut->clear();
      for (std::size_t d = 0; d < lo.size(); ++d) dimsOut->push_back(std::max<std::int64_t>(0, hi[d] - lo[d]));
    }
    std::vector<std::int64_t> subs(lo);
    std::function<void(std::size_t)> recurse = [&](std::size_t d) {
      if (d == lo.size()) {
        fn(store, subs);
        return;
      }
      for (subs[d] = lo[d]; subs[d] < hi[d]; ++subs[d]) recurse(d + 1);
      subs[d] = lo[d];
    };
    if (lo.empty()) {
      fn(store, subs);
    } else {
      recurse(0);
    }
  }

  const Program& program_;
  std::map<std::string, std::int64_t> params_;
  const KernelRegistry& kernels_;
  InterpHooks hooks_;
  std::map<std::string, ArrayStore> arrays_;

  std::vector<Frame> frames_;
  std::vector<std::pair<std::string, std::int64_t>> iterStack_;
};

}  // namespace polytask
