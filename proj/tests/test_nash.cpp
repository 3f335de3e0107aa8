#include <gtest/gtest.h>

#include <sstream>

#include "robustree/nash.hpp"
#include "support/fixtures.hpp"

using namespace robustree;

namespace {

void expect_equilibrium(const PayoffMatrix& a, const Equilibrium& e) {
  ASSERT_EQ(e.row.size(), a.rows());
  ASSERT_EQ(e.col.size(), a.cols());
  double sx = 0.0;
  double sy = 0.0;
  for (double v : e.row) {
    EXPECT_GE(v, 0.0);
    sx += v;
  }
  for (double v : e.col) {
    EXPECT_GE(v, 0.0);
    sy += v;
  }
  EXPECT_NEAR(sx, 1.0, 1e-12);
  EXPECT_NEAR(sy, 1.0, 1e-12);
  EXPECT_LE(best_response_gap(a, e.row, e.col), detail::kNashTolerance);
  EXPECT_NEAR(game_value(a, e.row, e.col), e.value, 1e-12);
}

PayoffMatrix random_matrix(Rng& rng, std::size_t m, std::size_t n) {
  PayoffMatrix a(m, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) a.at(i, j) = uniform_real(rng, -1.0, 1.0);
  return a;
}

}  // namespace

TEST(Nash, MatchingPennies) {
  const PayoffMatrix a{{1, -1}, {-1, 1}};
  const auto e = lemke_howson(a);
  expect_equilibrium(a, e);
  EXPECT_NEAR(e.row[0], 0.5, 1e-12);
  EXPECT_NEAR(e.col[0], 0.5, 1e-12);
  EXPECT_NEAR(e.value, 0.0, 1e-12);
}

TEST(Nash, MixedTwoByTwo) {
  const PayoffMatrix a{{3, 1}, {0, 2}};
  const auto e = lemke_howson(a);
  expect_equilibrium(a, e);
  EXPECT_NEAR(e.row[0], 0.5, 1e-12);
  EXPECT_NEAR(e.col[0], 0.25, 1e-12);
  EXPECT_NEAR(e.value, 1.5, 1e-12);
}

TEST(Nash, PureSaddlePoint) {
  const PayoffMatrix a{{1, 0}, {2, 3}};
  const auto e = lemke_howson(a);
  expect_equilibrium(a, e);
  EXPECT_NEAR(e.row[1], 1.0, 1e-12);
  EXPECT_NEAR(e.col[0], 1.0, 1e-12);
  EXPECT_NEAR(e.value, 2.0, 1e-12);
}

TEST(Nash, DominatedStrategiesGetNoWeight) {
  const PayoffMatrix a{{1, 2, 3}, {0, 1, 0}, {4, -1, 2}};
  const auto e = lemke_howson(a);
  expect_equilibrium(a, e);
  EXPECT_NEAR(e.row[1], 0.0, 1e-12);
  // Column 2 is dominated for the minimizer by column 0.
  const PayoffMatrix b{{1, 0, 2}, {0, 1, 3}};
  const auto f = lemke_howson(b);
  expect_equilibrium(b, f);
  EXPECT_NEAR(f.col[2], 0.0, 1e-12);
  EXPECT_NEAR(f.value, 0.5, 1e-12);
}

TEST(Nash, RowAndColumnVectors) {
  const PayoffMatrix row{{0.2, 0.7, 0.4}};
  const auto e = lemke_howson(row);
  expect_equilibrium(row, e);
  EXPECT_NEAR(e.value, 0.2, 1e-12);
  const PayoffMatrix col{{0.2}, {0.7}, {0.4}};
  const auto f = lemke_howson(col);
  expect_equilibrium(col, f);
  EXPECT_NEAR(f.value, 0.7, 1e-12);
}

TEST(Nash, DegenerateConstantGame) {
  const PayoffMatrix a(4, 3, 0.5);
  const auto e = lemke_howson(a);
  expect_equilibrium(a, e);
  EXPECT_NEAR(e.value, 0.5, 1e-12);
}

TEST(Nash, OffsetAndScaleInvariance) {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_matrix(rng, 4, 5);
    PayoffMatrix b = a;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) b.at(i, j) = 3.0 * a.at(i, j) + 7.0;
    const auto ea = lemke_howson(a);
    const auto eb = lemke_howson(b);
    expect_equilibrium(b, eb);
    EXPECT_NEAR(eb.value, 3.0 * ea.value + 7.0, 1e-9);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(ea.row[i], eb.row[i], 1e-9);
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(ea.col[j], eb.col[j], 1e-9);
  }
}

TEST(Nash, AgreesWithSupportEnumeration) {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const auto m = static_cast<std::size_t>(uniform_int(rng, 2, 6));
    const auto n = static_cast<std::size_t>(uniform_int(rng, 2, 6));
    const auto a = random_matrix(rng, m, n);
    const auto lh = lemke_howson(a, static_cast<int>(uniform_index(rng, m + n)));
    const auto se = support_enumeration(a);
    ASSERT_FALSE(se.empty());
    expect_equilibrium(a, lh);
    for (const auto& e : se) {
      expect_equilibrium(a, e);
      EXPECT_NEAR(e.value, lh.value, 1e-9);
    }
  }
}

TEST(Nash, LargerGamesStayWithinTolerance) {
  Rng rng(3);
  NashDiagnostics diag;
  for (int k = 0; k < 20; ++k) {
    const auto a = random_matrix(rng, 30, 40);
    expect_equilibrium(a, lemke_howson(a, 0, &diag));
  }
  EXPECT_EQ(diag.solves, 20u);
}

TEST(Nash, ZeroOneGamesWithTies) {
  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const auto m = static_cast<std::size_t>(uniform_int(rng, 1, 7));
    const auto n = static_cast<std::size_t>(uniform_int(rng, 1, 7));
    PayoffMatrix a(m, n);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) a.at(i, j) = static_cast<double>(uniform_index(rng, 4)) / 3.0;
    const auto e = lemke_howson(a);
    expect_equilibrium(a, e);
  }
}

TEST(Nash, SupportEnumerationGuard) {
  EXPECT_THROW(support_enumeration(PayoffMatrix(9, 9, 1.0)), ConfigError);
  EXPECT_NO_THROW(support_enumeration(PayoffMatrix(9, 8, 1.0), true));
  EXPECT_THROW(lemke_howson(PayoffMatrix{{1, 0}, {0, 1}}, 4), ConfigError);
  EXPECT_THROW(lemke_howson(PayoffMatrix{{1, 0}, {0, 1}}, -1), ConfigError);
}

TEST(Nash, ParseMatrixText) {
  std::istringstream in("# game\n1 -1\n\n-1 1  # second row\n");
  const auto a = PayoffMatrix::parse(in);
  EXPECT_EQ(a.rows(), 2u);
  EXPECT_EQ(a.cols(), 2u);
  EXPECT_EQ(a.at(1, 0), -1.0);
  std::istringstream ragged("1 2\n3\n");
  EXPECT_THROW(PayoffMatrix::parse(ragged), DataError);
  std::istringstream junk("1 x\n");
  EXPECT_THROW(PayoffMatrix::parse(junk), DataError);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(PayoffMatrix::parse(empty), DataError);
}

TEST(Nash, LoanGame) {
  const auto data = fixtures::loan_t1();
  std::vector<std::shared_ptr<const TreeGenotype>> trees{
      std::make_shared<const TreeGenotype>(fixtures::loan_dt1()),
      std::make_shared<const TreeGenotype>(fixtures::loan_dt2()),
      std::make_shared<const TreeGenotype>(fixtures::loan_dt3())};
  std::vector<std::shared_ptr<const PerturbationGenotype>> perts{
      std::make_shared<const PerturbationGenotype>(identity_perturbation(data)),
      std::make_shared<const PerturbationGenotype>(fixtures::loan_t2()),
      std::make_shared<const PerturbationGenotype>(fixtures::loan_t3())};
  const double t = 2.0 / 3.0;

  Evaluator acc(data, ObjectiveMode::AdversarialAccuracy);
  const auto a = build_payoff_matrix(trees, perts, acc);
  const double expected_acc[3][3] = {{1, t, t}, {1, 1, t}, {t, t, t}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(a.at(i, j), expected_acc[i][j], 1e-15);
      EXPECT_DOUBLE_EQ(a.at(i, j), pair_payoff(*trees[i], *perts[j], data, ObjectiveMode::AdversarialAccuracy));
    }
  const auto ea = lemke_howson(a);
  expect_equilibrium(a, ea);
  EXPECT_NEAR(ea.value, t, 1e-12);

  Evaluator reg(data, ObjectiveMode::MaxRegret);
  const auto r = build_payoff_matrix(trees, perts, reg);
  const double expected_reg[3][3] = {{1, t, 1}, {1, 1, 1}, {t, t, 1}};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(r.at(i, j), expected_reg[i][j], 1e-15);
  const auto er = lemke_howson(r);
  expect_equilibrium(r, er);
  EXPECT_NEAR(er.row[1], 1.0, 1e-12);
  EXPECT_NEAR(er.value, 1.0, 1e-12);
}
