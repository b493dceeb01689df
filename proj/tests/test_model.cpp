#include <gtest/gtest.h>

#include "test_util.hpp"

using namespace epinet;
using epinet::testing::random_instance;

namespace {

EpidemicParams fixture_params() {
  EpidemicParams p;
  p.beta_s = 0.6;
  p.beta_a = 0.6 * 0.6754;
  p.epsilon = 0.32;
  p.r_a = p.r_s = p.r_q = 0.2;
  return p;
}

NetworkSpec single_node() {
  return make_network(Vector::Constant(1, 1000.0), Matrix::Constant(1, 1, 1.0 / 3.0));
}

bool has(const ValidationReport& r, const std::string& needle) {
  for (const auto& v : r.violations) {
    if (v.find(needle) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(ValidateParams, AcceptsReferenceFixture) {
  const auto report = validate_params(fixture_params(), single_node());
  EXPECT_TRUE(report.ok()) << report.summary();
}

TEST(ValidateParams, FlagsNegativeEpsilon) {
  auto p = fixture_params();
  p.epsilon = -0.1;
  const auto report = validate_params(p, single_node());
  EXPECT_TRUE(has(report, "epsilon nonnegativity violated"));
}

TEST(ValidateParams, FlagsRowSumAboveOne) {
  Matrix tau(2, 2);
  tau << 0.6, 0.6, 0.1, 0.2;
  const auto net = make_network(Vector::Constant(2, 100.0), tau);
  const auto report = validate_params(fixture_params(), net);
  EXPECT_TRUE(has(report, "row-sum bound violated at row 0"));
  EXPECT_FALSE(has(report, "row 1"));
}

TEST(ValidateParams, ReportsEveryViolation) {
  auto p = fixture_params();
  p.r_a = -1.0;
  p.alpha = -0.5;
  p.beta_a = 2.0;
  auto net = single_node();
  net.populations(0) = -3.0;
  net.flow(0, 0) = 0.5;
  const auto report = validate_params(p, net);
  EXPECT_TRUE(has(report, "r_a"));
  EXPECT_TRUE(has(report, "alpha"));
  EXPECT_TRUE(has(report, "beta_a <= beta_s"));
  EXPECT_TRUE(has(report, "population positivity"));
}

TEST(ValidateParams, FlagsInconsistentFlow) {
  auto net = single_node();
  net.flow(0, 0) *= 1.0 + 1e-9;
  EXPECT_TRUE(has(validate_params(fixture_params(), net), "inconsistent"));
}

TEST(ValidateParams, FlagsShapeMismatch) {
  auto net = single_node();
  net.tau = Matrix::Zero(2, 2);
  EXPECT_TRUE(has(validate_params(fixture_params(), net), "tau shape"));
}

TEST(AssembleTravelMatrix, SingleNodeHandValues) {
  const Matrix M = assemble_travel_matrix(Vector::Ones(1), Vector::Constant(1, 1.0 / 3.0),
                                          Vector::Constant(1, 500.0), fixture_params());
  ASSERT_EQ(M.rows(), 2);
  EXPECT_NEAR(M(0, 0), -0.38492, 1e-12);
  EXPECT_NEAR(M(0, 1), 0.2, 1e-12);
  EXPECT_NEAR(M(1, 0), 0.32, 1e-12);
  EXPECT_NEAR(M(1, 1), -0.2, 1e-12);
}

TEST(AssembleTravelMatrix, ZeroTransmissionIsBlockTriangular) {
  std::mt19937_64 rng(3);
  auto in = random_instance(rng, 4);
  in.p.beta_a = in.p.beta_s = 0.0;
  const Matrix M = assemble_travel_matrix(in.s0, vec(in.tau), in.populations, in.p);
  EXPECT_EQ(M.topRightCorner(4, 4).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_TRUE(M.topLeftCorner(4, 4).isApprox(-(in.p.epsilon + in.p.r_a) * Matrix::Identity(4, 4)));
  EXPECT_TRUE(M.bottomRightCorner(4, 4).isApprox(-in.p.r_s * Matrix::Identity(4, 4)));
}

TEST(AssembleTravelMatrix, OffDiagonalsNonnegative) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_instance(rng, 3);
    Matrix M = assemble_travel_matrix(in.s0, vec(in.tau), in.populations, in.p);
    M.diagonal().setZero();
    EXPECT_GE(M.minCoeff(), 0.0);
  }
}

TEST(AssembleTravelMatrix, DimensionMismatchThrows) {
  EXPECT_THROW(assemble_travel_matrix(Vector::Ones(2), Vector::Ones(3), Vector::Ones(2), fixture_params()),
               DimensionError);
  EXPECT_THROW(assemble_travel_matrix(Vector::Ones(2), Vector::Ones(4), Vector::Ones(3), fixture_params()),
               DimensionError);
}

TEST(AssembleQuarantineMatrix, ZeroPolicyMatchesTravelMatrix) {
  std::mt19937_64 rng(5);
  const auto in = random_instance(rng, 3);
  const Matrix Mt = assemble_travel_matrix(in.s0, vec(in.tau), in.populations, in.p);
  const Matrix Mq = assemble_quarantine_matrix(in.s0, in.net.flow, in.p, PolicyVector::zeros(3));
  EXPECT_EQ((Mt - Mq).cwiseAbs().maxCoeff(), 0.0);
}

TEST(AssembleQuarantineMatrix, FullQuarantineShiftsDiagonal) {
  std::mt19937_64 rng(6);
  const auto in = random_instance(rng, 3);
  const Matrix M0 = assemble_quarantine_matrix(in.s0, in.net.flow, in.p, PolicyVector::zeros(3));
  const Matrix M1 = assemble_quarantine_matrix(in.s0, in.net.flow, in.p, Vector::Ones(6));
  EXPECT_TRUE((M0 - M1).isApprox(Matrix::Identity(6, 6)));
}

TEST(AssembleQuarantineMatrix, SingleNodeHandValues) {
  const auto net = single_node();
  const Matrix M = assemble_quarantine_matrix(Vector::Ones(1), net.flow, fixture_params(), Vector::Constant(2, 0.1));
  EXPECT_NEAR(M(0, 0), -0.48492, 1e-12);
  EXPECT_NEAR(M(0, 1), 0.2, 1e-12);
  EXPECT_NEAR(M(1, 0), 0.32, 1e-12);
  EXPECT_NEAR(M(1, 1), -0.3, 1e-12);
}

TEST(AssembleQuarantineMatrix, DecompositionIsExact) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto in = random_instance(rng, 4);
    Vector q(8);
    for (auto& x : q) x = U(rng);
    const Matrix M0 = assemble_quarantine_matrix(in.s0, in.net.flow, in.p, PolicyVector::zeros(4));
    Matrix expect = M0;
    expect.diagonal() -= q;
    EXPECT_EQ((assemble_quarantine_matrix(in.s0, in.net.flow, in.p, q) - expect).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(AssembleQuarantineMatrix, WrongPolicyLengthThrows) {
  const auto net = single_node();
  EXPECT_THROW(assemble_quarantine_matrix(Vector::Ones(1), net.flow, fixture_params(), Vector::Ones(4)),
               DimensionError);
  EXPECT_THROW(PolicyVector::from_stacked(Vector::Ones(3)), DimensionError);
}

TEST(NetworkSpec, FlowReassemblesFromTau) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto in = random_instance(rng, 5);
    const Matrix A = build_infection_flow(in.net.tau, in.net.populations);
    EXPECT_LE((A - in.net.flow).cwiseAbs().maxCoeff(), 1e-12 * in.net.flow.cwiseAbs().maxCoeff());
  }
}

TEST(Vectorization, ColumnMajorIndexing) {
  Matrix T(2, 2);
  T << 1, 2, 3, 4;
  const Vector v = vec(T);
  EXPECT_EQ(v(0 + 1 * 2), 2.0);
  EXPECT_EQ(v(1 + 0 * 2), 3.0);
  EXPECT_TRUE(unvec(v, 2).isApprox(T));
  EXPECT_THROW(unvec(v, 3), DimensionError);
}
