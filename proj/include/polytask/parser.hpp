#pragma once

#include <cctype>
#include <cstdlib>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "polytask/ast.hpp"
#include "polytask/error.hpp"

namespace polytask {

namespace detail {

enum class TokKind { Ident, Int, Float, Punct, Pragma, End };

struct Token {
  TokKind kind = TokKind::End;
  std::string text;
  std::int64_t intValue = 0;
  double floatValue = 0.0;
  SourceLocation loc;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) { advance(); }

  const Token& peek() const { return tok_; }

  Token next() {
    Token t = tok_;
    advance();
    return t;
  }

 private:
  void advance() {
    if (skip_space_and_comments()) return;  // pragma token already produced
    tok_ = Token{};
    tok_.loc = loc();
    if (pos_ >= src_.size()) {
      tok_.kind = TokKind::End;
      tok_.text = "<end of input>";
      return;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        bump();
      tok_.kind = TokKind::Ident;
      tok_.text = src_.substr(start, pos_ - start);
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = pos_;
      bool isFloat = false;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      // A '.' begins a fraction only when not the '..' range operator.
      if (pos_ + 1 < src_.size() && src_[pos_] == '.' && src_[pos_ + 1] != '.') {
        isFloat = true;
        bump();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      }
      if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
        isFloat = true;
        bump();
        if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) bump();
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      }
      std::string text = src_.substr(start, pos_ - start);
      tok_.text = text;
      if (isFloat) {
        tok_.kind = TokKind::Float;
        tok_.floatValue = std::strtod(text.c_str(), nullptr);
      } else {
        tok_.kind = TokKind::Int;
        tok_.intValue = std::strtoll(text.c_str(), nullptr, 10);
      }
      return;
    }
    // Multi-char operators first.
    static const char* multi[] = {"..", "+=", "-=", "*="};
    for (const char* m : multi) {
      if (src_.compare(pos_, 2, m) == 0) {
        tok_.kind = TokKind::Punct;
        tok_.text = m;
        bump();
        bump();
        return;
      }
    }
    tok_.kind = TokKind::Punct;
    tok_.text = std::string(1, c);
    bump();
  }

  bool skip_space_and_comments() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else if (c == '#') {
        SourceLocation commentLoc = loc();
        std::size_t start = pos_ + 1;
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
        if (is_parallel_pragma(src_.substr(start, pos_ - start))) {
          tok_ = Token{};
          tok_.kind = TokKind::Pragma;
          tok_.text = "# pragma omp parallel for";
          tok_.loc = commentLoc;
          return true;
        }
      } else {
        return false;
      }
    }
    return false;
  }

  static bool is_parallel_pragma(const std::string& comment) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : comment) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!cur.empty()) words.push_back(std::exchange(cur, ""));
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) words.push_back(cur);
    return words == std::vector<std::string>{"pragma", "omp", "parallel", "for"};
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  SourceLocation loc() const { return SourceLocation{line_, col_}; }

  std::string src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
  Token tok_;
};

// Symbol table entry kinds visible while parsing.
enum class SymKind { Param, Array, Task, Iterator, Chunk, TaskScalar, TaskChunk };

struct Symbol {
  SymKind kind;
  int rank = 0;  // arrays and chunk params
};

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) {}

  Program parse_program() {
    Program p;
    while (lex_.peek().kind != TokKind::End) {
      const Token& t = lex_.peek();
      if (t.kind == TokKind::Ident && t.text == "param") {
        parse_param_decl(p);
      } else if (t.kind == TokKind::Ident && t.text == "array") {
        parse_array_decl(p);
      } else if (t.kind == TokKind::Ident && t.text == "task") {
        parse_task_def(p);
      } else {
        p.body.push_back(parse_stmt());
      }
    }
    return p;
  }

  StmtPtr parse_single_statement(const std::map<std::string, int>& arrays,
                                 const std::vector<std::string>& params,
                                 const std::vector<std::string>& iterators) {
    for (const auto& [name, rank] : arrays) declare(name, {SymKind::Array, rank});
    for (const auto& name : params) declare(name, {SymKind::Param, 0});
    for (const auto& name : iterators) declare(name, {SymKind::Iterator, 0});
    StmtPtr s = parse_stmt();
    if (lex_.peek().kind != TokKind::End)
      throw SyntaxError("expected end of statement text", lex_.peek().loc);
    return s;
  }

 private:
  // --- token helpers ---
  Token expect_punct(const std::string& text) {
    Token t = lex_.next();
    if (t.kind != TokKind::Punct || t.text != text)
      throw SyntaxError("expected '" + text + "', found '" + t.text + "'", t.loc);
    return t;
  }

  Token expect_ident() {
    Token t = lex_.next();
    if (t.kind != TokKind::Ident)
      throw SyntaxError("expected identifier, found '" + t.text + "'", t.loc);
    return t;
  }

  bool peek_punct(const std::string& text) const {
    return lex_.peek().kind == TokKind::Punct && lex_.peek().text == text;
  }
  bool peek_ident(const std::string& text) const {
    return lex_.peek().kind == TokKind::Ident && lex_.peek().text == text;
  }

  // --- scopes ---
  void declare(const std::string& name, Symbol sym, SourceLocation loc = {}) {
    if (lookup(name)) throw DuplicateDeclaration(name, loc);
    scopes_.back().emplace(name, sym);
  }

  // Task parameters form a closed scope and may reuse global names (generated
  // tasks pass parameters like n_size through by name).
  void declare_task_param(const std::string& name, Symbol sym, SourceLocation loc) {
    if (scopes_.back().count(name)) throw DuplicateDeclaration(name, loc);
    scopes_.back().emplace(name, sym);
  }

  const Symbol* lookup(const std::string& name) const {
    for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
      auto found = it->find(name);
      if (found != it->end()) return &found->second;
    }
    return nullptr;
  }

  struct ScopeGuard {
    explicit ScopeGuard(Parser& p) : parser(p) { parser.scopes_.emplace_back(); }
    ~ScopeGuard() { parser.scopes_.pop_back(); }
    Parser& parser;
  };

  // --- declarations ---
  void parse_param_decl(Program& p) {
    lex_.next();
    Token name = expect_ident();
    declare(name.text, {SymKind::Param, 0}, name.loc);
    expect_punct(";");
    p.params.push_back({name.text, name.loc});
  }

  void parse_array_decl(Program& p) {
    lex_.next();
    Token name = expect_ident();
    std::vector<ExprPtr> extents;
    while (peek_punct("[")) {
      lex_.next();
      extents.push_back(parse_expr());
      expect_punct("]");
    }
    if (static_cast<int>(extents.size()) > 3)
      throw SyntaxError("arrays are limited to rank 3", name.loc);
    declare(name.text, {SymKind::Array, static_cast<int>(extents.size())}, name.loc);
    expect_punct(";");
    p.arrays.push_back({name.text, std::move(extents), name.loc});
  }

  void parse_task_def(Program& p) {
    lex_.next();
    Token name = expect_ident();
    declare(name.text, {SymKind::Task, 0}, name.loc);
    TaskDefDecl def;
    def.name = name.text;
    def.loc = name.loc;
    expect_punct("(");
    ScopeGuard scope(*this);
    if (!peek_punct(")")) {
      while (true) {
        Token dirTok = expect_ident();
        Direction dir;
        if (dirTok.text == "in") {
          dir = Direction::IN;
        } else if (dirTok.text == "out") {
          dir = Direction::OUT;
        } else if (dirTok.text == "inout") {
          dir = Direction::INOUT;
        } else {
          throw SyntaxError("expected parameter direction (in/out/inout), found '" +
                                dirTok.text + "'",
                            dirTok.loc);
        }
        Token pname = expect_ident();
        int rank = 0;
        while (peek_punct("[")) {
          lex_.next();
          expect_punct("]");
          ++rank;
        }
        declare_task_param(pname.text, {rank == 0 ? SymKind::TaskScalar : SymKind::TaskChunk, rank},
                           pname.loc);
        def.params.push_back({pname.text, dir, rank, pname.loc});
        if (peek_punct(",")) {
          lex_.next();
          continue;
        }
        break;
      }
    }
    expect_punct(")");
    expect_punct("{");
    while (!peek_punct("}")) def.body.push_back(parse_stmt());
    expect_punct("}");
    p.tasks.push_back(std::move(def));
  }

  // --- statements ---
  StmtPtr parse_stmt() {
    const Token& t = lex_.peek();
    if (t.kind == TokKind::Pragma) {
      Token pragma = lex_.next();
      if (!peek_ident("for"))
        throw SyntaxError("parallel pragma must precede a for loop", pragma.loc);
      StmtPtr loop = parse_for();
      auto copy = std::make_shared<Stmt>(*loop);
      copy->parallel = true;
      return copy;
    }
    if (t.kind == TokKind::Ident) {
      if (t.text == "for") return parse_for();
      if (t.text == "barrier") {
        Token tok = lex_.next();
        expect_punct(";");
        return make_barrier(tok.loc);
      }
      if (t.text == "chunk") return parse_chunk_build();
      if (t.text == "flatten" || t.text == "rebuild") {
        Token kw = lex_.next();
        Token name = expect_ident();
        require_kind(name, SymKind::Chunk, "chunk variable");
        expect_punct(";");
        return kw.text == "flatten" ? make_chunk_flatten(name.text, kw.loc)
                                    : make_chunk_rebuild(name.text, kw.loc);
      }
      return parse_assign_or_call();
    }
    throw SyntaxError("expected statement, found '" + t.text + "'", t.loc);
  }

  StmtPtr parse_for() {
    Token kw = lex_.next();
    Token iter = expect_ident();
    Token inTok = expect_ident();
    if (inTok.text != "in") throw SyntaxError("expected 'in', found '" + inTok.text + "'", inTok.loc);
    ExprPtr lo = parse_expr();
    expect_punct("..");
    ExprPtr hi = parse_expr();
    expect_punct("{");
    ScopeGuard scope(*this);
    declare(iter.text, {SymKind::Iterator, 0}, iter.loc);
    std::vector<StmtPtr> body;
    while (!peek_punct("}")) body.push_back(parse_stmt());
    expect_punct("}");
    return make_for(iter.text, std::move(lo), std::move(hi), std::move(body), false, kw.loc);
  }

  StmtPtr parse_chunk_build() {
    Token kw = lex_.next();
    Token name = expect_ident();
    expect_punct("=");
    Token array = expect_ident();
    const Symbol* sym = require_lookup(array);
    if (sym->kind != SymKind::Array && sym->kind != SymKind::TaskChunk)
      throw SyntaxError("'" + array.text + "' is not an array", array.loc);
    auto region = parse_region(sym->rank, array.loc);
    expect_punct(";");
    // Visible from here to the end of the enclosing block.
    declare(name.text, {SymKind::Chunk, static_cast<int>(region.size())}, name.loc);
    return make_chunk_build(name.text, array.text, std::move(region), kw.loc);
  }

  std::vector<std::pair<ExprPtr, ExprPtr>> parse_region(int rank, SourceLocation loc) {
    std::vector<std::pair<ExprPtr, ExprPtr>> region;
    while (peek_punct("[")) {
      lex_.next();
      ExprPtr lo = parse_expr();
      expect_punct("..");
      ExprPtr hi = parse_expr();
      expect_punct("]");
      region.emplace_back(std::move(lo), std::move(hi));
    }
    if (rank > 0 && static_cast<int>(region.size()) != rank)
      throw SyntaxError("region rank mismatch: expected " + std::to_string(rank) + " ranges",
                        loc);
    return region;
  }

  StmtPtr parse_assign_or_call() {
    Token name = expect_ident();
    if (peek_punct("(")) {
      // Procedure-style call statement.
      lex_.next();
      std::vector<ExprPtr> args;
      if (!peek_punct(")")) {
        while (true) {
          args.push_back(parse_expr());
          if (peek_punct(",")) {
            lex_.next();
            continue;
          }
          break;
        }
      }
      expect_punct(")");
      expect_punct(";");
      const Symbol* sym = lookup(name.text);
      bool isTask = sym && sym->kind == SymKind::Task;
      return make_call_stmt(name.text, std::move(args), isTask, name.loc);
    }

    const Symbol* sym = require_lookup(name);
    // Subscripted target, region write-back, or scalar assignment.
    std::vector<ExprPtr> subscripts;
    if (peek_punct("[")) {
      lex_.next();
      ExprPtr first = parse_expr();
      if (peek_punct("..")) {
        lex_.next();
        ExprPtr hi = parse_expr();
        expect_punct("]");
        std::vector<std::pair<ExprPtr, ExprPtr>> region;
        region.emplace_back(std::move(first), std::move(hi));
        while (peek_punct("[")) {
          lex_.next();
          ExprPtr lo = parse_expr();
          expect_punct("..");
          ExprPtr h = parse_expr();
          expect_punct("]");
          region.emplace_back(std::move(lo), std::move(h));
        }
        if (sym->kind != SymKind::Array && sym->kind != SymKind::TaskChunk)
          throw SyntaxError("'" + name.text + "' is not an array", name.loc);
        if (static_cast<int>(region.size()) != sym->rank)
          throw SyntaxError("region rank mismatch on '" + name.text + "'", name.loc);
        expect_punct("=");
        Token chunkTok = expect_ident();
        require_kind(chunkTok, SymKind::Chunk, "chunk variable");
        expect_punct(";");
        return make_write_back(name.text, std::move(region), chunkTok.text, name.loc);
      }
      expect_punct("]");
      subscripts.push_back(std::move(first));
      while (peek_punct("[")) {
        lex_.next();
        subscripts.push_back(parse_expr());
        expect_punct("]");
      }
    }

    ExprPtr target = finish_ref(name, std::move(subscripts), /*assignTarget=*/true);
    Token op = lex_.next();
    if (op.kind != TokKind::Punct ||
        (op.text != "=" && op.text != "+=" && op.text != "-=" && op.text != "*="))
      throw SyntaxError("expected assignment operator, found '" + op.text + "'", op.loc);
    ExprPtr value = parse_expr();
    expect_punct(";");
    if (op.text != "=") {
      BinOpKind kind = op.text == "+=" ? BinOpKind::Add
                       : op.text == "-=" ? BinOpKind::Sub
                                         : BinOpKind::Mul;
      value = make_binop(kind, target, std::move(value), op.loc);
    }
    return make_assign(std::move(target), std::move(value), name.loc);
  }

  // --- expressions ---
  ExprPtr parse_expr() {
    ExprPtr lhs = parse_term();
    while (peek_punct("+") || peek_punct("-")) {
      Token op = lex_.next();
      ExprPtr rhs = parse_term();
      lhs = make_binop(op.text == "+" ? BinOpKind::Add : BinOpKind::Sub, std::move(lhs),
                       std::move(rhs), op.loc);
    }
    return lhs;
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_factor();
    while (peek_punct("*")) {
      Token op = lex_.next();
      ExprPtr rhs = parse_factor();
      lhs = make_binop(BinOpKind::Mul, std::move(lhs), std::move(rhs), op.loc);
    }
    return lhs;
  }

  ExprPtr parse_factor() {
    const Token& t = lex_.peek();
    if (t.kind == TokKind::Int) {
      Token tok = lex_.next();
      return make_int(tok.intValue, tok.loc);
    }
    if (t.kind == TokKind::Float) {
      Token tok = lex_.next();
      return make_float(tok.floatValue, tok.loc);
    }
    if (t.kind == TokKind::Punct && t.text == "(") {
      lex_.next();
      ExprPtr inner = parse_expr();
      expect_punct(")");
      return inner;
    }
    if (t.kind == TokKind::Punct && t.text == "-") {
      Token tok = lex_.next();
      return make_neg(parse_factor(), tok.loc);
    }
    if (t.kind == TokKind::Ident) {
      Token name = lex_.next();
      if (peek_punct("(")) {
        lex_.next();
        std::vector<ExprPtr> args;
        if (!peek_punct(")")) {
          while (true) {
            args.push_back(parse_expr());
            if (peek_punct(",")) {
              lex_.next();
              continue;
            }
            break;
          }
        }
        expect_punct(")");
        return make_call(name.text, std::move(args), name.loc);
      }
      std::vector<ExprPtr> subscripts;
      while (peek_punct("[")) {
        lex_.next();
        subscripts.push_back(parse_expr());
        expect_punct("]");
      }
      return finish_ref(name, std::move(subscripts), /*assignTarget=*/false);
    }
    throw SyntaxError("expected expression, found '" + t.text + "'", t.loc);
  }

  ExprPtr finish_ref(const Token& name, std::vector<ExprPtr> subscripts, bool assignTarget) {
    const Symbol* sym = require_lookup(name);
    switch (sym->kind) {
      case SymKind::Chunk:
        // A bare chunk name denotes the whole chunk (task argument position).
        if (subscripts.empty() && !assignTarget) return make_var(name.text, name.loc);
        [[fallthrough]];
      case SymKind::Array:
      case SymKind::TaskChunk:
        if (static_cast<int>(subscripts.size()) != sym->rank)
          throw SyntaxError("'" + name.text + "' has rank " + std::to_string(sym->rank) +
                                " but " + std::to_string(subscripts.size()) +
                                " subscripts were given",
                            name.loc);
        return make_array_ref(name.text, std::move(subscripts), name.loc);
      case SymKind::Param:
      case SymKind::Iterator:
        if (!subscripts.empty())
          throw SyntaxError("'" + name.text + "' is scalar and cannot be subscripted", name.loc);
        if (assignTarget)
          throw SyntaxError("cannot assign to '" + name.text + "'", name.loc);
        return make_var(name.text, name.loc);
      case SymKind::TaskScalar:
        if (!subscripts.empty())
          throw SyntaxError("'" + name.text + "' is scalar and cannot be subscripted", name.loc);
        return make_var(name.text, name.loc);
      case SymKind::Task:
        throw SyntaxError("task '" + name.text + "' used as a value", name.loc);
    }
    throw SyntaxError("unresolved reference", name.loc);
  }

  const Symbol* require_lookup(const Token& name) {
    const Symbol* sym = lookup(name.text);
    if (!sym) throw UndeclaredIdentifier(name.text, name.loc);
    return sym;
  }

  void require_kind(const Token& name, SymKind kind, const std::string& what) {
    const Symbol* sym = require_lookup(name);
    if (sym->kind != kind)
      throw SyntaxError("'" + name.text + "' is not a " + what, name.loc);
  }

  Lexer lex_;
  std::vector<std::map<std::string, Symbol>> scopes_{1};
};

}  // namespace detail

// Parses a whole DSL compilation unit. The returned Program pretty-prints to a
// canonical form that parses back to a structurally identical Program.
inline Program parse(const std::string& source) {
  return detail::Parser(source).parse_program();
}

// Re-parses a single statement with the given symbols in scope. Used by the
// OpenScop reader to restore statement bodies.
inline StmtPtr parse_statement(const std::string& text, const std::map<std::string, int>& arrays,
                               const std::vector<std::string>& params,
                               const std::vector<std::string>& iterators) {
  detail::Parser parser(text);
  return parser.parse_single_statement(arrays, params, iterators);
}

}  // namespace polytask
