#include "polytask/polyhedron.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

namespace polytask {
namespace {

VarSpace space1(const std::string& a) { return VarSpace{{a}, 1}; }
VarSpace space2(const std::string& a, const std::string& b) { return VarSpace{{a, b}, 2}; }

AffineExpr var(int id) { return AffineExpr::variable(id); }
AffineExpr cst(long v) { return AffineExpr::constant(Rational(v)); }

TEST(AffineExpr, DropsZeroCoefficients) {
  AffineExpr e = var(0) - var(0);
  EXPECT_TRUE(e.coeffs().empty());
  e = var(1).scaled(Rational(3)) + var(1).scaled(Rational(-3));
  EXPECT_TRUE(e.coeffs().empty());
  EXPECT_TRUE(e.is_constant());
}

TEST(AffineExpr, EvaluateAndRemap) {
  AffineExpr e = var(0).scaled(Rational(2)) + var(1).scaled(Rational(-1)) + cst(5);
  EXPECT_EQ(e.evaluate({3, 4}), Rational(7));
  AffineExpr r = e.remapped({{0, 1}, {1, 0}});
  EXPECT_EQ(r.evaluate({4, 3}), Rational(7));
}

TEST(FmEliminate, TriangleProjectsToInterval) {
  // {0 <= i <= j <= 3}: eliminating j leaves {0 <= i <= 3}.
  Polyhedron p(space2("i", "j"));
  p.add_ge(var(0));
  p.add_ge(var(1) - var(0));
  p.add_ge(cst(3) - var(1));
  Polyhedron q = fm_eliminate(p, 1);
  EXPECT_EQ(q.dim(), 1);
  auto pts = enumerate_points(q, Box{{-10, 10}});
  ASSERT_EQ(pts.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(pts[static_cast<std::size_t>(i)].assignment[0], i);
}

TEST(FmEliminate, ContradictionSurvivesProjection) {
  Polyhedron p(space1("i"));
  p.add_ge(var(0));
  p.add_ge(cst(-1) - var(0));  // i <= -1
  Polyhedron q = fm_eliminate(p, 0);
  EXPECT_TRUE(is_empty_rational(q));
}

TEST(IsEmptyRational, Examples) {
  Polyhedron p(space1("i"));
  p.add_ge(var(0));
  p.add_ge(cst(5) - var(0));
  p.add_ge(var(0) - cst(7));
  EXPECT_TRUE(is_empty_rational(p));

  Polyhedron universe(space2("i", "j"));
  EXPECT_FALSE(is_empty_rational(universe));
}

TEST(EnumeratePoints, IntervalInsideBox) {
  Polyhedron p(space1("i"));
  p.add_ge(var(0));
  p.add_ge(cst(2) - var(0));
  auto pts = enumerate_points(p, Box{{-5, 5}});
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].assignment[0], 0);
  EXPECT_EQ(pts[2].assignment[0], 2);
}

TEST(EnumeratePoints, EmptyPolyhedron) {
  Polyhedron p(space1("i"));
  p.add_ge(var(0) - cst(7));
  p.add_ge(cst(5) - var(0));
  EXPECT_TRUE(enumerate_points(p, Box{{-5, 20}}).empty());
}

TEST(EnumeratePoints, TriangleCount) {
  // {0 <= i <= j <= 2} has 6 integer points.
  Polyhedron p(space2("i", "j"));
  p.add_ge(var(0));
  p.add_ge(var(1) - var(0));
  p.add_ge(cst(2) - var(1));
  auto pts = enumerate_points(p, Box{{-3, 3}, {-3, 3}});
  std::vector<std::vector<std::int64_t>> expected = {{0, 0}, {0, 1}, {0, 2},
                                                     {1, 1}, {1, 2}, {2, 2}};
  ASSERT_EQ(pts.size(), expected.size());
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(pts[i].assignment, expected[i]);
}

TEST(EnumeratePoints, BoxTooLargeThrows) {
  Polyhedron p(space2("i", "j"));
  EXPECT_THROW(enumerate_points(p, Box{{0, 99999}, {0, 99999}}, 1000), BoxTooLarge);
}

TEST(EnumeratePoints, UnboundedWithoutBoxThrows) {
  Polyhedron p(space1("i"));
  p.add_ge(var(0));
  EXPECT_THROW(enumerate_points(p), BoxTooLarge);
}

TEST(EnumeratePoints, EqualityRowsPinValues) {
  Polyhedron p(space2("i", "j"));
  p.add_eq(var(1) - var(0).scaled(Rational(2)));  // j = 2i
  p.add_ge(var(0));
  p.add_ge(cst(3) - var(0));
  auto pts = enumerate_points(p, Box{{-9, 9}, {-9, 9}});
  ASSERT_EQ(pts.size(), 4u);
  for (const auto& q : pts) EXPECT_EQ(q.assignment[1], 2 * q.assignment[0]);
}

TEST(Polyhedron, FixVarSubstitutes) {
  Polyhedron p(VarSpace{{"i", "n"}, 1});
  p.add_ge(var(0));
  p.add_ge(var(1) - var(0) - cst(1));  // i <= n-1
  Polyhedron q = p.fix_var(1, 4);
  auto pts = enumerate_points(q, Box{{-9, 9}});
  EXPECT_EQ(pts.size(), 4u);
}

// --- Randomized suite -------------------------------------------------------
//
// 100 random polyhedra with <=4 vars, coefficients in [-3,3], bounding box
// [0,8] per variable. Projection soundness and one-sided emptiness are checked
// against brute-force enumeration.

struct RandomInstance {
  Polyhedron poly;
  Box box;
};

RandomInstance random_polyhedron(std::mt19937& rng) {
  std::uniform_int_distribution<int> varCount(1, 4);
  std::uniform_int_distribution<int> rowCount(1, 5);
  std::uniform_int_distribution<int> coeff(-3, 3);
  std::uniform_int_distribution<int> bound(0, 8);
  std::uniform_int_distribution<int> relPick(0, 9);

  int n = varCount(rng);
  VarSpace s;
  s.numIterators = n;
  for (int i = 0; i < n; ++i) s.names.push_back("v" + std::to_string(i));
  Polyhedron p(s);
  int rows = rowCount(rng);
  for (int r = 0; r < rows; ++r) {
    AffineExpr e;
    for (int v = 0; v < n; ++v) e.set_coeff(v, Rational(coeff(rng)));
    e.add_constant(Rational(bound(rng) - 4));
    p.add_constraint(e, relPick(rng) == 0 ? ConstraintRel::EQ : ConstraintRel::GE);
  }
  Box box;
  for (int v = 0; v < n; ++v) box.push_back({0, 8});
  return {p, box};
}

TEST(RandomSuite, ProjectionSoundness) {
  std::mt19937 rng(20240701);
  for (int iter = 0; iter < 100; ++iter) {
    RandomInstance inst = random_polyhedron(rng);
    if (inst.poly.dim() < 2) continue;
    int victim = static_cast<int>(rng() % static_cast<unsigned>(inst.poly.dim()));
    Polyhedron proj = fm_eliminate(inst.poly, victim);

    Box projBox = inst.box;
    projBox.erase(projBox.begin() + victim);
    std::set<std::vector<std::int64_t>> projected;
    for (const Point& pt : enumerate_points(proj, projBox)) projected.insert(pt.assignment);

    for (const Point& pt : enumerate_points(inst.poly, inst.box)) {
      std::vector<std::int64_t> dropped = pt.assignment;
      dropped.erase(dropped.begin() + victim);
      EXPECT_TRUE(projected.count(dropped))
          << "integer point escaped the projection at iteration " << iter;
    }
  }
}

TEST(RandomSuite, EmptinessNeverFalselyReported) {
  std::mt19937 rng(20240702);
  for (int iter = 0; iter < 100; ++iter) {
    RandomInstance inst = random_polyhedron(rng);
    bool emptyRational = is_empty_rational(inst.poly);
    bool hasIntegerPoints = !enumerate_points(inst.poly, inst.box).empty();
    if (hasIntegerPoints) {
      EXPECT_FALSE(emptyRational) << "false emptiness at iteration " << iter;
    }
  }
}

TEST(RandomSuite, EnumerationSortedAndUnique) {
  std::mt19937 rng(20240703);
  for (int iter = 0; iter < 50; ++iter) {
    RandomInstance inst = random_polyhedron(rng);
    auto pts = enumerate_points(inst.poly, inst.box);
    for (std::size_t i = 1; i < pts.size(); ++i) {
      EXPECT_LT(pts[i - 1].assignment, pts[i].assignment);
    }
    for (const Point& pt : pts) EXPECT_TRUE(inst.poly.contains(pt));
  }
}

}  // namespace
}  // namespace polytask
