#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace polytask {

// One source position, 1-based. Attached to every AST node and to all
// diagnostics raised while parsing.
struct SourceLocation {
  int line = 1;
  int column = 1;

  friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

class Error : public std::runtime_error {
 public:
  explicit Error(std::string message) : std::runtime_error(std::move(message)) {}
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::string message, SourceLocation loc)
      : Error(std::move(message) + " at line " + std::to_string(loc.line) +
              ", column " + std::to_string(loc.column)),
        loc_(loc) {}

  SourceLocation location() const { return loc_; }

 private:
  SourceLocation loc_;
};

class UndeclaredIdentifier : public SyntaxError {
 public:
  UndeclaredIdentifier(const std::string& name, SourceLocation loc)
      : SyntaxError("undeclared identifier '" + name + "'", loc), name_(name) {}

  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DuplicateDeclaration : public SyntaxError {
 public:
  DuplicateDeclaration(const std::string& name, SourceLocation loc)
      : SyntaxError("duplicate declaration of '" + name + "'", loc) {}
};

class BoxTooLarge : public Error {
 public:
  explicit BoxTooLarge(const std::string& message) : Error(message) {}
};

// OpenScop reader diagnostics carry the 1-based line of the offending token.
class FormatError : public Error {
 public:
  FormatError(std::string message, int line)
      : Error(std::move(message) + " (line " + std::to_string(line) + ")"), line_(line) {}

  int line() const { return line_; }

 private:
  int line_ = 0;
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(std::string message) : Error(std::move(message)) {}
};

class IllegalTiling : public Error {
 public:
  IllegalTiling(std::string message, int srcStmt, int dstStmt, std::string array, int level)
      : Error(std::move(message)), src_(srcStmt), dst_(dstStmt),
        array_(std::move(array)), level_(level) {}

  int srcStatement() const { return src_; }
  int dstStatement() const { return dst_; }
  const std::string& array() const { return array_; }
  int level() const { return level_; }

 private:
  int src_ = 0;
  int dst_ = 0;
  std::string array_;
  int level_ = 0;
};

class TaskifyTooDeep : public Error {
 public:
  explicit TaskifyTooDeep(std::string message) : Error(std::move(message)) {}
};

class UnscannableDomain : public Error {
 public:
  UnscannableDomain(std::string message, int level)
      : Error(std::move(message)), level_(level) {}

  int level() const { return level_; }

 private:
  int level_ = 0;
};

class DuplicateTask : public Error {
 public:
  explicit DuplicateTask(const std::string& name)
      : Error("task '" + name + "' is already registered") {}
};

class UnknownTask : public Error {
 public:
  explicit UnknownTask(const std::string& name) : Error("unknown task '" + name + "'") {}
};

class UnknownDataItem : public Error {
 public:
  explicit UnknownDataItem(const std::string& message) : Error(message) {}
};

class NotHermitianPositiveDefinite : public Error {
 public:
  explicit NotHermitianPositiveDefinite(std::string message) : Error(std::move(message)) {}
};

}  // namespace polytask
