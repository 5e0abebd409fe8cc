#pragma once

#include <string>
#include <vector>

#include "polytask/codegen.hpp"
#include "polytask/dependence.hpp"
#include "polytask/openscop.hpp"
#include "polytask/parser.hpp"
#include "polytask/scop.hpp"
#include "polytask/transform.hpp"

namespace polytask {

struct PipelineOptions {
  std::vector<int> tileSizes;  // empty = no tiling
  int taskifyLevel = 0;
};

// Everything the pipeline produced, kept around for reporting and the CLI's
// .scop / dependence-JSON outputs.
struct PipelineResult {
  ExtractionResult extraction;
  std::vector<Scop> scops;                     // after tiling, one per nest
  std::vector<std::vector<Dependence>> deps;   // per transformed scop
  std::vector<LoopAnnotations> annotations;
  std::vector<TaskProgram> taskPrograms;
  GeneratedProgram generated;
  std::vector<std::string> warnings;
};

// parse -> extract -> (tile) -> dependences -> parallel marks -> taskify ->
// emit. The paper's tool chain in one call.
inline PipelineResult parallelize(const Program& program, const PipelineOptions& opt = {}) {
  PipelineResult result;
  result.extraction = extract_scops(program);

  for (const auto& entry : result.extraction.scops) {
    Scop scop = entry.scop;
    if (!opt.tileSizes.empty()) scop = tile(scop, opt.tileSizes);
    std::vector<Dependence> deps = compute_dependences(scop);
    LoopAnnotations ann = detect_parallel_loops(scop, deps);
    ann.tileSizes = opt.tileSizes;
    ann.taskifyLevel = opt.taskifyLevel;
    TaskProgram tp = taskify(scop, ann);
    for (const auto& w : tp.warnings) result.warnings.push_back(w);
    result.scops.push_back(std::move(scop));
    result.deps.push_back(std::move(deps));
    result.annotations.push_back(std::move(ann));
    result.taskPrograms.push_back(std::move(tp));
  }
  result.generated = emit_program(program, result.extraction, result.taskPrograms);
  return result;
}

}  // namespace polytask
