#include "polytask/codegen.hpp"

#include <gtest/gtest.h>

#include <set>

#include "polytask/interp.hpp"
#include "polytask/pipeline.hpp"
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

TEST(GenerateLoops, EpRegeneratesPlainBounds) {
  Scop s = extract_single(kEpSource);
  std::vector<StmtPtr> loops = generate_loops(s);
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_EQ(to_source(loops[0]),
            "for i in 0..n_size {\n"
            "  for j in 0..n_size {\n"
            "    compute(x[i][j]);\n"
            "  }\n"
            "}\n");
}

TEST(GenerateLoops, TiledBoundsUseFloorMinMax) {
  Scop s = extract_single("array a[10]; for i in 0..10 { a[i] = 0; }");
  Scop tiled = tile(s, {3});
  std::vector<StmtPtr> loops = generate_loops(tiled);
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_EQ(to_source(loops[0]),
            "for it in 0..4 {\n"
            "  for i in max(0, 3 * it)..min(10, 3 * it + 3) {\n"
            "    a[i] = 0;\n"
            "  }\n"
            "}\n");
}

TEST(GenerateLoops, UnscannableDomainReportsLevel) {
  // One iterator with a lower bound only.
  Scop s;
  s.parameterNames = {};
  VarSpace ctx;
  s.context = Polyhedron::universe(ctx);
  ScopStatement stmt;
  stmt.id = 0;
  stmt.iterators = {"i"};
  VarSpace space{{"i"}, 1};
  Polyhedron domain(space);
  domain.add_ge(AffineExpr::variable(0));
  stmt.domain = domain;
  stmt.schedule = {ScatterDim::betaDim(0), ScatterDim::iterDim(0), ScatterDim::betaDim(0)};
  stmt.body = make_assign(make_array_ref("a", {make_var("i")}), make_int(0));
  s.statements.push_back(stmt);
  try {
    generate_loops(s);
    FAIL() << "expected UnscannableDomain";
  } catch (const UnscannableDomain& e) {
    EXPECT_EQ(e.level(), 1);
  }
}

// Visit order of the generated loops equals lexicographic schedule order of
// the enumerated domains, on random scops.
TEST(GenerateLoops, VisitOrderMatchesEnumeration) {
  std::mt19937 rng(31007);
  for (int iter = 0; iter < 30; ++iter) {
    testing::RandomScop rs = testing::random_scop(rng);

    // Replace every statement body with an argument-only probe call.
    LeafBuilder leaf = [](const ScopStatement& s) -> std::vector<StmtPtr> {
      std::vector<ExprPtr> args{make_int(s.id)};
      for (const auto& it : s.iterators) args.push_back(make_var(it));
      return {make_call_stmt("visit", std::move(args))};
    };
    Program host;
    for (const auto& pn : rs.scop.parameterNames) host.params.push_back({pn, {}});
    host.body = generate_loops(rs.scop, nullptr, leaf);

    std::vector<std::pair<int, std::vector<std::int64_t>>> visited;
    KernelRegistry kernels;
    kernels.add("visit", [&](const std::vector<Payload>& args) {
      std::vector<std::int64_t> inst;
      for (std::size_t i = 1; i < args.size(); ++i)
        inst.push_back(static_cast<std::int64_t>(as_scalar(args[i])));
      visited.emplace_back(static_cast<int>(as_scalar(args[0])), inst);
      return std::vector<Payload>{};
    });
    Interp interp(host, rs.paramValues, kernels);
    interp.run();

    struct Inst {
      int id;
      Point pt;
      std::vector<std::int64_t> time;
    };
    std::vector<Inst> expected;
    for (const auto& st : rs.scop.statements) {
      Polyhedron fixed = st.domain;
      for (int p = static_cast<int>(rs.scop.parameterNames.size()) - 1; p >= 0; --p)
        fixed = fixed.fix_var(st.depth() + p,
                              rs.paramValues.at(rs.scop.parameterNames[static_cast<std::size_t>(p)]));
      for (const Point& pt : enumerate_points(fixed))
        expected.push_back({st.id, pt, schedule_vector(st, pt)});
    }
    std::stable_sort(expected.begin(), expected.end(),
                     [](const Inst& a, const Inst& b) { return schedule_less(a.time, b.time); });

    ASSERT_EQ(visited.size(), expected.size()) << "iteration " << iter;
    for (std::size_t i = 0; i < expected.size(); ++i) {
      EXPECT_EQ(visited[i].first, expected[i].id) << "iteration " << iter << " position " << i;
      EXPECT_EQ(visited[i].second, expected[i].pt.assignment)
          << "iteration " << iter << " position " << i;
    }
  }
}

TEST(EmitProgram, EpStatementLevelStructure) {
  Program p = parse(kEpSource);
  PipelineResult r = parallelize(p, {.tileSizes = {}, .taskifyLevel = 0});
  const std::string& src = r.generated.source;

  EXPECT_NE(src.find("task S0_task(inout x_c) {"), std::string::npos);
  // Both generated loops carry the parallel comment.
  std::size_t first = src.find("# pragma omp parallel for");
  ASSERT_NE(first, std::string::npos);
  EXPECT_NE(src.find("# pragma omp parallel for", first + 1), std::string::npos);
  EXPECT_NE(src.find("S0_task(x[i][j]);"), std::string::npos);
  EXPECT_NE(src.find("barrier;"), std::string::npos);

  // Round-trips through parse.
  Program back = parse(src);
  EXPECT_TRUE(struct_equal(back, r.generated.program));
}

TEST(EmitProgram, EpLoopTaskifiedStructure) {
  Program p = parse(kEpSource);
  PipelineResult r = parallelize(p, {.tileSizes = {}, .taskifyLevel = 1});
  const std::string& src = r.generated.source;

  EXPECT_NE(src.find("task S0_task_lt("), std::string::npos);
  EXPECT_NE(src.find("chunk s0_x = x["), std::string::npos);
  EXPECT_NE(src.find("flatten s0_x;"), std::string::npos);
  EXPECT_NE(src.find("S0_task_lt(s0_x"), std::string::npos);
  EXPECT_NE(src.find("rebuild s0_x;"), std::string::npos);
  EXPECT_NE(src.find("barrier;"), std::string::npos);
  EXPECT_TRUE(struct_equal(parse(src), r.generated.program));
}

TEST(EmitProgram, DeterministicBytes) {
  Program p = parse(kEpSource);
  for (int tll = 0; tll <= 2; ++tll) {
    PipelineOptions opt;
    opt.taskifyLevel = tll;
    std::string a = parallelize(p, opt).generated.source;
    std::string b = parallelize(p, opt).generated.source;
    EXPECT_EQ(a, b);
  }
}

TEST(EmitProgram, ResidualStaysVerbatim) {
  Program p = parse(R"(
    param n;
    array a[n];
    for i in 0..n { a[i] = 0; }
    for i in 0..n { a[i * i] = 1; }
  )");
  PipelineResult r = parallelize(p, {});
  ASSERT_EQ(r.extraction.scops.size(), 1u);
  ASSERT_EQ(r.extraction.residual.size(), 1u);
  EXPECT_NE(r.generated.source.find("a[i * i] = 1;"), std::string::npos);
  EXPECT_TRUE(struct_equal(parse(r.generated.source), r.generated.program));
}

TEST(EmitProgram, ProvenanceMapsScopsToLines) {
  Program p = parse(kEpSource);
  PipelineResult r = parallelize(p, {});
  ASSERT_EQ(r.generated.provenance.size(), 1u);
  int genLine = r.generated.provenance[0].second;
  // The recorded line is the pragma of the first generated loop.
  std::istringstream in(r.generated.source);
  std::string line;
  for (int i = 0; i < genLine && std::getline(in, line); ++i) {
  }
  EXPECT_EQ(line, "# pragma omp parallel for");
}

// Sequential interpretation of the generated program matches the original,
// bit for bit, across taskify levels and tiling.
TEST(EmitProgram, SemanticsPreserved) {
  struct Case {
    const char* src;
    PipelineOptions opt;
  };
  const char* gemm = R"(
    param n;
    array a[n][n];
    array b[n][n];
    array c[n][n];
    for i in 0..n { for j in 0..n {
      a[i][j] = i + 2 * j + 1;
      b[i][j] = i - j;
    } }
    for i in 0..n { for j in 0..n { for k in 0..n {
      c[i][j] = c[i][j] + a[i][k] * b[k][j];
    } } }
  )";
  std::vector<Case> cases = {
      {kEpSource, {}},
      {kEpSource, {.tileSizes = {}, .taskifyLevel = 1}},
      {gemm, {}},
      {gemm, {.tileSizes = {}, .taskifyLevel = 1}},
      {gemm, {.tileSizes = {3, 3, 3}, .taskifyLevel = 3}},
      {gemm, {.tileSizes = {4, 4, 4}, .taskifyLevel = 2}},
  };
  KernelRegistry kernels;
  kernels.add("compute", [](const std::vector<Payload>& args) {
    return std::vector<Payload>{Payload(as_scalar(args.at(0)) * 3.0 + 1.0)};
  });
  for (const auto& c : cases) {
    Program original = parse(c.src);
    PipelineResult r = parallelize(original, c.opt);
    Program generated = parse(r.generated.source);

    std::map<std::string, std::int64_t> params;
    for (const auto& pd : original.params) params[pd.name] = 7;
    Interp a(original, params, kernels);
    a.run();
    Interp b(generated, params, kernels);
    b.run();
    for (const auto& arr : original.arrays) {
      const ArrayStore& sa = a.array(arr.name);
      const ArrayStore& sb = b.array(arr.name);
      ASSERT_EQ(sa.cells.size(), sb.cells.size());
      for (std::size_t i = 0; i < sa.cells.size(); ++i) {
        EXPECT_TRUE(payload_equal(sa.cells[i], sb.cells[i]))
            << arr.name << "[" << i << "] differs (taskify level "
            << c.opt.taskifyLevel << ")";
      }
    }
  }
}

}  // namespace
}  // namespace polytask
