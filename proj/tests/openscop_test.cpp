#include "polytask/openscop.hpp"

#include <gtest/gtest.h>

#include "polytask/parser.hpp"

namespace polytask {
namespace {

Scop extract_single(const std::string& src) {
  Program p = parse(src);
  ExtractionResult r = extract_scops(p);
  EXPECT_EQ(r.scops.size(), 1u);
  return r.scops.at(0).scop;
}

TEST(OpenScop, SingleStatementCounts) {
  Scop s = extract_single("param n; array a[n]; for i in 0..n { a[i] = 0; }");
  std::string text = write_openscop(s);
  EXPECT_NE(text.find("# Number of statements\n1\n"), std::string::npos);
  // DOMAIN relation of a 1-loop statement: two rows (lower+upper bound).
  EXPECT_NE(text.find("DOMAIN\n2 4 1 0 0 1\n"), std::string::npos);
}

TEST(OpenScop, EpDomainHasFourRows) {
  Scop s = extract_single(R"(
    param n_size;
    array x[n_size][n_size];
    for i in 0..n_size { for j in 0..n_size { compute(x[i][j]); } }
  )");
  std::string text = write_openscop(s);
  // Two iterators, two bounds each.
  EXPECT_NE(text.find("DOMAIN\n4 5 2 0 0 1\n"), std::string::npos);
}

TEST(OpenScop, RoundTripIdentity) {
  const char* sources[] = {
      "param n; array a[n]; for i in 0..n { a[i] = 0; }",
      R"(param n; array x[n][n];
         for i in 0..n { for j in 0..n { compute(x[i][j]); } })",
      R"(param n; array a[n][n]; array b[n][n]; array c[n][n];
         for i in 0..n { for j in 0..n { for k in 0..n {
           c[i][j] = c[i][j] + a[i][k] * b[k][j];
         } } })",
      R"(param n; array a[n][n];
         for k in 0..n {
           a[k][k] = potrf(a[k][k]);
           for i in k + 1..n { a[i][k] = solve(a[k][k], a[i][k]); }
           for i in k + 1..n { for j in k + 1..i + 1 {
             a[i][j] = gemm(a[i][k], a[j][k], a[i][j]);
           } }
         })",
  };
  for (const char* src : sources) {
    Scop s = extract_single(src);
    std::string text = write_openscop(s);
    Scop back = read_openscop(text);
    EXPECT_EQ(back, s) << src;
    // Byte-exact second generation.
    EXPECT_EQ(write_openscop(back), text) << src;
  }
}

TEST(OpenScop, GlobalStatementIdsSurvive) {
  Program p = parse(R"(
    param n;
    array a[n];
    for i in 0..n { a[i] = 0; }
    for i in 0..n { a[i] = a[i] + 1; }
  )");
  ExtractionResult r = extract_scops(p);
  ASSERT_EQ(r.scops.size(), 2u);
  Scop second = read_openscop(write_openscop(r.scops[1].scop));
  EXPECT_EQ(second.statements.at(0).id, 1);
}

TEST(OpenScop, FormatErrorCarriesLine) {
  try {
    read_openscop("<OpenScop>\nnone\nBADHEADER\n");
    FAIL() << "expected FormatError";
  } catch (const FormatError& e) {
    EXPECT_GE(e.line(), 1);
  }
}

TEST(OpenScop, DimensionMismatchDetected) {
  Scop s = extract_single("param n; array a[n]; for i in 0..n { a[i] = 0; }");
  std::string text = write_openscop(s);
  // Corrupt the DOMAIN header: claim 3 output dims.
  auto pos = text.find("DOMAIN\n2 4 1 0 0 1");
  ASSERT_NE(pos, std::string::npos);
  std::string bad = text;
  bad.replace(pos, 18, "DOMAIN\n2 4 3 0 0 1");
  EXPECT_THROW(read_openscop(bad), DimensionMismatch);
}

TEST(OpenScop, TruncatedInputReportsEof) {
  Scop s = extract_single("param n; array a[n]; for i in 0..n { a[i] = 0; }");
  std::string text = write_openscop(s);
  EXPECT_THROW(read_openscop(text.substr(0, text.size() / 2)), FormatError);
}

}  // namespace
}  // namespace polytask
