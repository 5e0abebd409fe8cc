#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "polytask/ast.hpp"
#include "polytask/parser.hpp"
#include "polytask/scan.hpp"
#include "polytask/scop.hpp"
#include "polytask/transform.hpp"

namespace polytask {

struct GeneratedProgram {
  std::string source;
  Program program;                        // source parses back to this
  std::vector<TaskDefDecl> taskRegistry;  // signatures of all emitted tasks
  // Original loop nest location -> first line of its generated replacement.
  std::vector<std::pair<SourceLocation, int>> provenance;
};

namespace codegen_detail {

inline TaskDefDecl to_decl(const TaskDef& def) {
  TaskDefDecl decl;
  decl.name = def.name;
  decl.params = def.params;
  decl.body = def.body;
  return decl;
}

inline int count_lines(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

}  // namespace codegen_detail

// Emits the taskified program as DSL text: original declarations, all task
// definitions, and the top-level body with each extracted loop nest replaced
// by its taskified main body (residual statements stay verbatim). Emission is
// deterministic and the text parses back to the same structure.
inline GeneratedProgram emit_program(const Program& original, const ExtractionResult& extraction,
                                     const std::vector<TaskProgram>& taskPrograms) {
  if (extraction.scops.size() != taskPrograms.size())
    throw Error("one TaskProgram per extracted scop is required");

  GeneratedProgram out;
  Program& gen = out.program;
  gen.params = original.params;
  gen.arrays = original.arrays;
  gen.tasks = original.tasks;
  for (const auto& tp : taskPrograms) {
    for (const auto& def : tp.taskDefs) {
      gen.tasks.push_back(codegen_detail::to_decl(def));
      out.taskRegistry.push_back(gen.tasks.back());
    }
  }

  // Header text (declarations + task definitions) printed first so the
  // provenance map can record absolute line numbers for the body pieces.
  Program headerOnly;
  headerOnly.params = gen.params;
  headerOnly.arrays = gen.arrays;
  headerOnly.tasks = gen.tasks;
  std::string text = pretty_print(headerOnly);
  if (!text.empty()) text += "\n";
  int line = codegen_detail::count_lines(text) + 1;

  std::map<const Stmt*, std::size_t> scopByLoop;
  for (std::size_t i = 0; i < extraction.scops.size(); ++i)
    scopByLoop[extraction.scops[i].sourceLoop.get()] = i;

  for (const auto& stmt : original.body) {
    auto it = scopByLoop.find(stmt.get());
    if (it == scopByLoop.end()) {
      std::string piece = to_source(stmt);
      text += piece;
      line += codegen_detail::count_lines(piece);
      gen.body.push_back(stmt);
      continue;
    }
    out.provenance.emplace_back(stmt->loc, line);
    for (const auto& genStmt : taskPrograms[it->second].mainBody) {
      std::string piece = to_source(genStmt);
      text += piece;
      line += codegen_detail::count_lines(piece);
      gen.body.push_back(genStmt);
    }
  }
  out.source = std::move(text);
  return out;
}

}  // namespace polytask
