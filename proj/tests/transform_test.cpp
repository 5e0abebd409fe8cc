#include "polytask/transform.hpp"

#include <gtest/gtest.h>

#include <map>
#include <set>

#include "polytask/parser.hpp"
#include "random_scop.hpp"

namespace polytask {
namespace {

Scop extract_single(const std::string& src) {
  Program p = parse(src);
  ExtractionResult r = extract_scops(p);
  EXPECT_EQ(r.scops.size(), 1u);
  return r.scops.at(0).scop;
}

const char* kEpSource = R"(
  param n_size;
  array x[n_size][n_size];
  for i in 0..n_size {
    for j in 0..n_size {
      compute(x[i][j]);
    }
  }
)";

const char* kGemmSource = R"(
  param n;
  array a[n][n];
  array b[n][n];
  array c[n][n];
  for i in 0..n { for j in 0..n { for k in 0..n {
    c[i][j] = c[i][j] + a[i][k] * b[k][j];
  } } }
)";

TEST(DetectParallelLoops, EpBothLevelsParallel) {
  Scop s = extract_single(kEpSource);
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  EXPECT_TRUE(ann.is_parallel(1));
  EXPECT_TRUE(ann.is_parallel(2));
}

TEST(DetectParallelLoops, RecurrenceSequential) {
  Scop s = extract_single("param n; array a[n]; for i in 1..n { a[i] = a[i - 1]; }");
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  EXPECT_FALSE(ann.is_parallel(1));
}

TEST(DetectParallelLoops, GemmOuterTwoParallel) {
  Scop s = extract_single(kGemmSource);
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  EXPECT_TRUE(ann.is_parallel(1));
  EXPECT_TRUE(ann.is_parallel(2));
  EXPECT_FALSE(ann.is_parallel(3));
}

TEST(Tile, NonDividingExtent) {
  Scop s = extract_single("array a[10]; for i in 0..10 { a[i] = 0; }");
  Scop tiled = tile(s, {3});
  ASSERT_EQ(tiled.statements.size(), 1u);
  const ScopStatement& st = tiled.statements[0];
  EXPECT_EQ(st.tileDepth, 1);
  ASSERT_EQ(st.iterators.size(), 2u);

  // Tiles 0..3 with point counts 3+3+3+1.
  std::map<std::int64_t, int> perTile;
  for (const Point& pt : enumerate_points(st.domain)) ++perTile[pt.assignment[0]];
  std::map<std::int64_t, int> expected = {{0, 3}, {1, 3}, {2, 3}, {3, 1}};
  EXPECT_EQ(perTile, expected);
}

TEST(Tile, DividingExtentGivesFullTiles) {
  Scop s = extract_single("array a[12]; for i in 0..12 { a[i] = 0; }");
  Scop tiled = tile(s, {4});
  std::map<std::int64_t, int> perTile;
  for (const Point& pt : enumerate_points(tiled.statements[0].domain)) ++perTile[pt.assignment[0]];
  ASSERT_EQ(perTile.size(), 3u);  // 12/4 repeatable parts of size 4
  for (const auto& [tileIdx, count] : perTile) EXPECT_EQ(count, 4);
}

TEST(Tile, GemmTiledIterationMultisetUnchanged) {
  Scop s = extract_single(kGemmSource);
  Scop tiled = tile(s, {8, 8, 8});
  const ScopStatement& orig = s.statements[0];
  const ScopStatement& st = tiled.statements[0];
  ASSERT_EQ(st.tileDepth, 3);

  Polyhedron origFixed = orig.domain.fix_var(orig.depth(), 16);
  Polyhedron tiledFixed = st.domain.fix_var(st.depth(), 16);
  std::multiset<std::vector<std::int64_t>> origPts, tiledProjected;
  for (const Point& pt : enumerate_points(origFixed)) origPts.insert(pt.assignment);
  for (const Point& pt : enumerate_points(tiledFixed)) {
    std::vector<std::int64_t> body(pt.assignment.begin() + st.tileDepth, pt.assignment.end());
    tiledProjected.insert(body);
  }
  EXPECT_EQ(origPts, tiledProjected);
}

TEST(Tile, PreservesSchedulesAndAccessShift) {
  Scop s = extract_single(kGemmSource);
  Scop tiled = tile(s, {4, 4});
  const ScopStatement& st = tiled.statements[0];
  EXPECT_EQ(st.tileDepth, 2);
  EXPECT_EQ(st.schedule.size(), 2u * 2 + 7);  // 2 tile dims + original 2*3+1
  // Access c[i][j]: iterator ids shifted past the tile dims.
  EXPECT_EQ(st.writes[0].subscripts[0].coeff(2), Rational(1));
  EXPECT_EQ(st.writes[0].subscripts[1].coeff(3), Rational(1));
}

TEST(Tile, IllegalWhenComponentNegative) {
  Scop s = extract_single(R"(
    param n; array a[n][n];
    for i in 1..n { for j in 0..n - 1 {
      a[i][j] = a[i - 1][j + 1];
    } }
  )");
  try {
    tile(s, {2, 2});
    FAIL() << "expected IllegalTiling";
  } catch (const IllegalTiling& e) {
    EXPECT_EQ(e.level(), 2);
    EXPECT_EQ(e.array(), "a");
  }
  // Tiling only the first level is legal: that component is non-negative.
  EXPECT_NO_THROW(tile(s, {2}));
}

TEST(Tile, SizeValidation) {
  Scop s = extract_single("array a[10]; for i in 0..10 { a[i] = 0; }");
  EXPECT_THROW(tile(s, {0}), Error);
}

TEST(InferDirections, SpecExamples) {
  auto dirsOf = [](const std::string& src) {
    Scop s = extract_single(src);
    return infer_directions(s.statements[0].accesses());
  };
  {
    auto dirs = dirsOf("param n; array a[n]; array b[n]; array c[n];"
                       "for i in 0..n { c[i] += a[i] * b[i]; }");
    ASSERT_EQ(dirs.size(), 3u);
    EXPECT_EQ(dirs[0], (std::pair<std::string, Direction>{"c", Direction::INOUT}));
    EXPECT_EQ(dirs[1], (std::pair<std::string, Direction>{"a", Direction::IN}));
    EXPECT_EQ(dirs[2], (std::pair<std::string, Direction>{"b", Direction::IN}));
  }
  {
    auto dirs = dirsOf("param n; array a[n]; for i in 0..n { a[i] = 0; }");
    ASSERT_EQ(dirs.size(), 1u);
    EXPECT_EQ(dirs[0].second, Direction::OUT);
  }
}

TEST(Taskify, EpStatementLevel) {
  Scop s = extract_single(kEpSource);
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  ann.taskifyLevel = 0;
  TaskProgram tp = taskify(s, ann);

  ASSERT_EQ(tp.taskDefs.size(), 1u);
  EXPECT_EQ(tp.taskDefs[0].name, "S0_task");
  ASSERT_EQ(tp.taskDefs[0].params.size(), 1u);
  EXPECT_EQ(tp.taskDefs[0].params[0].dir, Direction::INOUT);
  EXPECT_EQ(tp.taskDefs[0].params[0].rank, 0);

  // Doubly parallel nest with the task call inside, then a barrier.
  ASSERT_EQ(tp.mainBody.size(), 2u);
  const StmtPtr& outer = tp.mainBody[0];
  ASSERT_EQ(outer->kind, Stmt::Kind::For);
  EXPECT_TRUE(outer->parallel);
  const StmtPtr& inner = outer->body[0];
  ASSERT_EQ(inner->kind, Stmt::Kind::For);
  EXPECT_TRUE(inner->parallel);
  ASSERT_EQ(inner->body.size(), 1u);
  EXPECT_EQ(inner->body[0]->kind, Stmt::Kind::Call);
  EXPECT_TRUE(inner->body[0]->isTaskCall);
  EXPECT_EQ(inner->body[0]->callee, "S0_task");
  EXPECT_EQ(tp.mainBody[1]->kind, Stmt::Kind::Barrier);
  EXPECT_TRUE(tp.warnings.empty());
}

TEST(Taskify, EpLoopTaskification) {
  Scop s = extract_single(kEpSource);
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  ann.taskifyLevel = 1;
  TaskProgram tp = taskify(s, ann);

  // Untiled: only the loop-tasked definition exists.
  ASSERT_EQ(tp.taskDefs.size(), 1u);
  EXPECT_EQ(tp.taskDefs[0].name, "S0_task_lt");
  ASSERT_GE(tp.taskDefs[0].params.size(), 1u);
  EXPECT_EQ(tp.taskDefs[0].params[0].rank, 2);  // x chunk keeps array rank
  EXPECT_EQ(tp.taskDefs[0].params[0].dir, Direction::INOUT);
  ASSERT_EQ(tp.taskDefs[0].body.size(), 1u);
  EXPECT_EQ(tp.taskDefs[0].body[0]->kind, Stmt::Kind::For);  // inner j loop

  // Main: parallel i loop containing build/flatten/call/rebuild/write-back.
  ASSERT_EQ(tp.mainBody.size(), 2u);
  const StmtPtr& loop = tp.mainBody[0];
  ASSERT_EQ(loop->kind, Stmt::Kind::For);
  std::vector<Stmt::Kind> kinds;
  for (const auto& st : loop->body) kinds.push_back(st->kind);
  EXPECT_EQ(kinds, (std::vector<Stmt::Kind>{
                       Stmt::Kind::ChunkBuild, Stmt::Kind::ChunkFlatten, Stmt::Kind::Call,
                       Stmt::Kind::ChunkRebuild, Stmt::Kind::WriteBack}));
  EXPECT_EQ(tp.mainBody[1]->kind, Stmt::Kind::Barrier);
}

TEST(Taskify, GemmTiledKeepsOriginalTasks) {
  // Scale and multiply in separate nests, tiled, then taskified on tiles.
  Program p = parse(R"(
    param n;
    array a[n][n];
    array b[n][n];
    array c[n][n];
    for i in 0..n { for j in 0..n {
      c[i][j] = 0.5 * c[i][j];
    } }
    for i in 0..n { for j in 0..n { for k in 0..n {
      c[i][j] = c[i][j] + a[i][k] * b[k][j];
    } } }
  )");
  ExtractionResult r = extract_scops(p);
  ASSERT_EQ(r.scops.size(), 2u);

  std::vector<std::string> names;
  for (const auto& e : r.scops) {
    Scop tiled = tile(e.scop, {8, 8, 8});
    LoopAnnotations ann = detect_parallel_loops(tiled, compute_dependences(tiled));
    ann.taskifyLevel = 3;
    TaskProgram tp = taskify(tiled, ann);
    for (const auto& def : tp.taskDefs) names.push_back(def.name);
  }
  EXPECT_EQ(names, (std::vector<std::string>{"S0_task", "S0_task_lt", "S1_task", "S1_task_lt"}));
}

TEST(Taskify, LoopTaskDirectionsForGemm) {
  Scop s = extract_single(kGemmSource);
  Scop tiled = tile(s, {4, 4, 4});
  LoopAnnotations ann = detect_parallel_loops(tiled, compute_dependences(tiled));
  ann.taskifyLevel = 3;
  TaskProgram tp = taskify(tiled, ann);

  const TaskDef* lt = nullptr;
  for (const auto& def : tp.taskDefs)
    if (def.name == "S0_task_lt") lt = &def;
  ASSERT_NE(lt, nullptr);
  std::map<std::string, Direction> dirs;
  for (const auto& p : lt->params)
    if (p.rank > 0) dirs[p.name] = p.dir;
  EXPECT_EQ(dirs.at("c_chunk"), Direction::INOUT);
  EXPECT_EQ(dirs.at("a_chunk"), Direction::IN);
  EXPECT_EQ(dirs.at("b_chunk"), Direction::IN);
}

TEST(Taskify, TooDeepThrows) {
  Scop s = extract_single(kEpSource);
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  ann.taskifyLevel = 3;
  EXPECT_THROW(taskify(s, ann), TaskifyTooDeep);
}

TEST(Taskify, WarnsWhenEverythingSerializes) {
  Scop s = extract_single("param n; array a[n]; for i in 1..n { a[i] = a[i - 1]; }");
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  ann.taskifyLevel = 1;
  TaskProgram tp = taskify(s, ann);
  ASSERT_EQ(tp.warnings.size(), 1u);
  EXPECT_NE(tp.warnings[0].find("NoParallelismWarning"), std::string::npos);
}

TEST(Taskify, InitTaskGetsScalarParams) {
  Scop s = extract_single("param n; array a[n][n]; for i in 0..n { for j in 0..n { "
                          "a[i][j] = init(i, j); } }");
  LoopAnnotations ann = detect_parallel_loops(s, compute_dependences(s));
  TaskProgram tp = taskify(s, ann);
  ASSERT_EQ(tp.taskDefs.size(), 1u);
  const TaskDef& def = tp.taskDefs[0];
  ASSERT_EQ(def.params.size(), 3u);
  EXPECT_EQ(def.params[0].dir, Direction::OUT);
  EXPECT_EQ(def.params[1].name, "i");
  EXPECT_EQ(def.params[2].name, "j");
}

// Randomized legality: IllegalTiling is raised exactly when the enumeration
// oracle finds a pair with a negative band component. The acceptance suite
// runs the full version.
TEST(Tile, LegalityMatchesOracleSubset) {
  std::mt19937 rng(9100);
  int checked = 0;
  for (int iter = 0; iter < 30; ++iter) {
    testing::RandomScopOptions opt;
    opt.fullDepthStatements = true;
    testing::RandomScop rs = testing::random_scop(rng, opt);
    int depth = rs.scop.max_depth();
    std::vector<int> sizes;
    for (int d = 0; d < depth; ++d)
      sizes.push_back(std::uniform_int_distribution<int>(1, 7)(rng));

    // Oracle: any instance pair with a negative distance at a band level?
    bool oracleIllegal = false;
    for (const auto& inst : dependence_oracle(rs.scop, rs.paramValues)) {
      std::size_t common = std::min(inst.srcInstance.assignment.size(),
                                    inst.dstInstance.assignment.size());
      for (std::size_t l = 0; l < std::min(common, sizes.size()); ++l) {
        if (inst.dstInstance.assignment[l] < inst.srcInstance.assignment[l])
          oracleIllegal = true;
      }
    }

    bool raised = false;
    try {
      tile(rs.scop, sizes);
    } catch (const IllegalTiling&) {
      raised = true;
    }
    EXPECT_EQ(raised, oracleIllegal) << "iteration " << iter;
    ++checked;
  }
  EXPECT_EQ(checked, 30);
}

}  // namespace
}  // namespace polytask
