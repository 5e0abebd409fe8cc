#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "polytask/error.hpp"

namespace polytask {

// Dense row-major block of doubles. Benchmark kernels treat one DSL array cell
// as one block; pure arithmetic treats cells as scalars.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using Payload = std::variant<double, Matrix>;

inline std::size_t payload_bytes(const Payload& p) {
  if (std::holds_alternative<double>(p)) return sizeof(double);
  const Matrix& m = std::get<Matrix>(p);
  return m.data.size() * sizeof(double);
}

inline bool payload_equal(const Payload& a, const Payload& b) {
  if (a.index() != b.index()) return false;
  if (std::holds_alternative<double>(a)) return std::get<double>(a) == std::get<double>(b);
  return std::get<Matrix>(a) == std::get<Matrix>(b);
}

inline double as_scalar(const Payload& p, const char* context = "value") {
  if (!std::holds_alternative<double>(p))
    throw Error(std::string("expected a scalar ") + context + ", found a block");
  return std::get<double>(p);
}

inline const Matrix& as_matrix(const Payload& p, const char* context = "value") {
  if (!std::holds_alternative<Matrix>(p))
    throw Error(std::string("expected a block ") + context + ", found a scalar");
  return std::get<Matrix>(p);
}

// Opaque kernels: called with evaluated argument payloads, they return one
// result per writable slot. A kernel used in expression position must return
// exactly one payload; a procedure-style call statement gets one result per
// array-reference argument, written back in argument order.
using KernelFn = std::function<std::vector<Payload>(const std::vector<Payload>&)>;

// Estimates a task's compute cost in flops from its argument byte sizes,
// without executing it (the simulator prices tasks before they run).
using FlopEstimator = std::function<double(const std::vector<std::size_t>& argBytes)>;

class KernelRegistry {
 public:
  void add(const std::string& name, KernelFn fn, FlopEstimator flops = nullptr) {
    fns_[name] = std::move(fn);
    if (flops) flops_[name] = std::move(flops);
  }

  bool has(const std::string& name) const { return fns_.count(name) > 0; }

  std::vector<Payload> call(const std::string& name, const std::vector<Payload>& args) const {
    auto it = fns_.find(name);
    if (it == fns_.end()) throw Error("unknown kernel '" + name + "'");
    return it->second(args);
  }

  double estimate_flops(const std::string& name, const std::vector<std::size_t>& argBytes) const {
    auto it = flops_.find(name);
    if (it != flops_.end()) return it->second(argBytes);
    // Fallback: a couple of flops per transported scalar.
    double cells = 0;
    for (std::size_t b : argBytes) cells += static_cast<double>(b) / sizeof(double);
    return 2.0 * cells;
  }

 private:
  std::map<std::string, KernelFn> fns_;
  std::map<std::string, FlopEstimator> flops_;
};

}  // namespace polytask
