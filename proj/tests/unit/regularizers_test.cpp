#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dcsc/dcsc.hpp"
#include "oracles.hpp"

namespace {

using dcsc::CoeffMapSet;
using dcsc::ImageGrid;

dcsc::DualGraphPrior random_prior(oracle::Rng& rng, std::size_t rows, std::size_t cols,
                                  double alpha, double beta) {
  return dcsc::DualGraphPrior(oracle::graph_from_weights(oracle::random_weights(rng, cols)),
                              oracle::graph_from_weights(oracle::random_weights(rng, rows)),
                              alpha, beta);
}

Eigen::VectorXd as_vector(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

TEST(SoftThreshold, Examples) {
  EXPECT_EQ(dcsc::soft_threshold(0.5, 1.0), 0.0);
  EXPECT_EQ(dcsc::soft_threshold(3.0, 1.0), 2.0);
  EXPECT_EQ(dcsc::soft_threshold(-3.0, 1.0), -2.0);
  EXPECT_THROW(dcsc::soft_threshold(1.0, -0.1), dcsc::ParameterError);
}

TEST(SoftThreshold, IsTheProximalOperator) {
  oracle::Rng rng(40);
  std::uniform_real_distribution<double> value(-5.0, 5.0), thr(0.0, 3.0);
  for (int t = 0; t < 1000; ++t) {
    const double v = value(rng), th = thr(rng);
    const double w = dcsc::soft_threshold(v, th);
    EXPECT_LE(std::abs(w), std::max(std::abs(v) - th, 0.0) + 1e-15);
    const auto f = [&](double x) { return 0.5 * (x - v) * (x - v) + th * std::abs(x); };
    double grid_min = std::numeric_limits<double>::infinity();
    for (int i = -800; i <= 800; ++i) grid_min = std::min(grid_min, f(i * 0.01));
    EXPECT_LE(f(w), grid_min + 1e-12);
  }
}

TEST(YUpdate, LambdaZeroIsWeightedAverage) {
  oracle::Rng rng(41);
  const auto x = oracle::random_maps(rng, 2, 3, 3), u = oracle::random_maps(rng, 2, 3, 3);
  const auto z = oracle::random_maps(rng, 2, 3, 3), v = oracle::random_maps(rng, 2, 3, 3);
  const CoeffMapSet y = dcsc::y_update(x, u, z, v, 0.0, 2.0, 0.5);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double expected = (2.0 * (x.values()[i] + u.values()[i]) +
                             0.5 * (z.values()[i] - v.values()[i])) / 2.5;
    EXPECT_NEAR(y.values()[i], expected, 1e-15);
  }
}

TEST(YUpdate, TinyEtaIsPlainProx) {
  oracle::Rng rng(42);
  const auto x = oracle::random_maps(rng, 2, 4, 4), u = oracle::random_maps(rng, 2, 4, 4);
  const auto z = oracle::random_maps(rng, 2, 4, 4), v = oracle::random_maps(rng, 2, 4, 4);
  const CoeffMapSet y = dcsc::y_update(x, u, z, v, 0.28, 2.0, 1e-12);
  const CoeffMapSet p = dcsc::l1_prox(x, u, 0.28, 2.0);
  EXPECT_LE(oracle::max_abs_diff(y.values(), p.values()), 1e-10);
}

TEST(YUpdate, MatchesGoldenSectionPerElement) {
  oracle::Rng rng(43);
  const auto x = oracle::random_maps(rng, 1, 4, 4), u = oracle::random_maps(rng, 1, 4, 4);
  const auto z = oracle::random_maps(rng, 1, 4, 4), v = oracle::random_maps(rng, 1, 4, 4);
  const double lambda = 0.28, rho = 2.0, eta = 1.0;
  const CoeffMapSet y = dcsc::y_update(x, u, z, v, lambda, rho, eta);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double a = x.values()[i] + u.values()[i];
    const double b = z.values()[i] - v.values()[i];
    const auto f = [&](double w) {
      return lambda * std::abs(w) + 0.5 * rho * (w - a) * (w - a) + 0.5 * eta * (w - b) * (w - b);
    };
    EXPECT_NEAR(y.values()[i], oracle::golden_section(f, -10.0, 10.0), 1e-6);
  }
}

TEST(YUpdate, SubgradientOptimality) {
  oracle::Rng rng(44);
  std::uniform_real_distribution<double> pos(0.01, 5.0);
  for (int t = 0; t < 200; ++t) {
    const auto x = oracle::random_maps(rng, 2, 3, 4, 3.0), u = oracle::random_maps(rng, 2, 3, 4);
    const auto z = oracle::random_maps(rng, 2, 3, 4, 3.0), v = oracle::random_maps(rng, 2, 3, 4);
    const double lambda = pos(rng), rho = pos(rng), eta = pos(rng);
    const CoeffMapSet y = dcsc::y_update(x, u, z, v, lambda, rho, eta);
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double smooth = rho * (y.values()[i] - x.values()[i] - u.values()[i]) +
                            eta * (y.values()[i] - z.values()[i] + v.values()[i]);
      if (y.values()[i] != 0.0) {
        EXPECT_NEAR(smooth + lambda * std::copysign(1.0, y.values()[i]), 0.0, 1e-8);
      } else {
        EXPECT_LE(std::abs(smooth), lambda + 1e-8);
      }
    }
  }
}

TEST(YUpdate, Validation) {
  const CoeffMapSet a(1, 2, 2), b(1, 2, 3);
  EXPECT_THROW(dcsc::y_update(a, a, a, b, 0.1, 1.0, 1.0), dcsc::DimensionError);
  EXPECT_THROW(dcsc::y_update(a, a, a, a, -0.1, 1.0, 1.0), dcsc::ParameterError);
  EXPECT_THROW(dcsc::y_update(a, a, a, a, 0.1, 0.0, 1.0), dcsc::ParameterError);
  EXPECT_THROW(dcsc::y_update(a, a, a, a, 0.1, 1.0, 0.0), dcsc::ParameterError);
}

TEST(KronOperator, ZeroWeightsScaleByEta) {
  oracle::Rng rng(45);
  const auto prior = random_prior(rng, 4, 5, 0.0, 0.0);
  const auto z = oracle::random_vector(rng, 20);
  const auto out = dcsc::kron_operator_apply(z, prior, 1.7);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_NEAR(out[i], 1.7 * z[i], 1e-15);
}

TEST(KronOperator, ConstantMapOnlyScales) {
  oracle::Rng rng(46);
  const ImageGrid img = oracle::random_image(rng, 5, 6);
  dcsc::GraphConfig cfg;
  cfg.neighbor_radius = 2;
  const dcsc::DualGraphPrior prior(dcsc::build_line_graph(img, dcsc::Axis::columns, cfg),
                                   dcsc::build_line_graph(img, dcsc::Axis::rows, cfg), 0.2, 0.2);
  const auto out = dcsc::kron_operator_apply(std::vector<double>(30, 2.0), prior, 1.0);
  for (double v : out) EXPECT_NEAR(v, 2.0, 1e-12);
}

TEST(KronOperator, MatchesMaterializedKroneckerSum) {
  oracle::Rng rng(47);
  for (auto [m, n] : {std::pair<std::size_t, std::size_t>{3, 3}, {4, 6}, {7, 2}}) {
    const auto prior = random_prior(rng, m, n, 0.2, 0.35);
    const auto z = oracle::random_vector(rng, m * n);
    const auto out = dcsc::kron_operator_apply(z, prior, 0.9);
    const Eigen::MatrixXd a = oracle::kron_system(prior.column().laplacian_dense(),
                                                  prior.row().laplacian_dense(), 0.2, 0.35, 0.9);
    const Eigen::VectorXd ref = a * as_vector(z);
    EXPECT_LE(oracle::relative_error(out, std::span<const double>(ref.data(), m * n)), 1e-10);
  }
}

TEST(KronOperator, DimensionMismatch) {
  oracle::Rng rng(48);
  const auto prior = random_prior(rng, 3, 3, 0.2, 0.2);
  EXPECT_THROW(dcsc::kron_operator_apply(std::vector<double>(8), prior, 1.0),
               dcsc::DimensionError);
}

TEST(ConjugateGradient, ZeroRightHandSideSkipsIterations) {
  const auto op = [](std::span<const double> in, std::span<double> out) {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = 2.0 * in[i];
  };
  std::vector<double> b(5, 0.0), x(5, 3.0);
  const auto report = dcsc::conjugate_gradient(op, b, x, dcsc::CGConfig{});
  EXPECT_EQ(report.iterations, 0u);
  for (double v : x) EXPECT_EQ(v, 0.0);
}

TEST(ConjugateGradient, ErrorANormDecreases) {
  oracle::Rng rng(49);
  const auto prior = random_prior(rng, 6, 5, 0.8, 0.6);
  const Eigen::MatrixXd a = oracle::kron_system(prior.column().laplacian_dense(),
                                                prior.row().laplacian_dense(), 0.8, 0.6, 0.05);
  const auto b = oracle::random_vector(rng, 30);
  const Eigen::VectorXd exact = a.ldlt().solve(as_vector(b));
  std::vector<double> x(30, 0.0);
  std::vector<double> errors;
  const auto observer = [&](std::size_t, std::span<const double> it) {
    const Eigen::VectorXd e = as_vector(it) - exact;
    errors.push_back(std::sqrt(e.dot(a * e)));
  };
  const auto op = [&](std::span<const double> in, std::span<double> out) {
    dcsc::kron_operator_apply(in, prior, 0.05, out);
  };
  dcsc::CGConfig cfg;
  cfg.tolerance = 1e-12;
  dcsc::conjugate_gradient(op, b, x, cfg, {}, observer);
  ASSERT_GT(errors.size(), 2u);
  for (std::size_t i = 1; i < errors.size(); ++i) {
    EXPECT_LE(errors[i], errors[i - 1] * (1.0 + 1e-12) + 1e-14);
  }
}

TEST(ConjugateGradient, NonConvergenceCarriesResidual) {
  oracle::Rng rng(50);
  const auto prior = random_prior(rng, 6, 6, 5.0, 5.0);
  const auto op = [&](std::span<const double> in, std::span<double> out) {
    dcsc::kron_operator_apply(in, prior, 1e-3, out);
  };
  const auto b = oracle::random_vector(rng, 36);
  std::vector<double> x(36, 0.0);
  dcsc::CGConfig cfg;
  cfg.tolerance = 1e-14;
  cfg.max_iterations = 2;
  try {
    dcsc::conjugate_gradient(op, b, x, cfg);
    FAIL() << "expected a solver error";
  } catch (const dcsc::SolverError& e) {
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(ZUpdate, ZeroWeightsReturnYPlusV) {
  oracle::Rng rng(51);
  const auto prior = random_prior(rng, 4, 4, 0.0, 0.0);
  const auto y = oracle::random_maps(rng, 2, 4, 4), v = oracle::random_maps(rng, 2, 4, 4);
  const auto zu = dcsc::z_update(y, v, prior, 1.0, dcsc::CGConfig{});
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_NEAR(zu.z.values()[i], y.values()[i] + v.values()[i], 1e-12);
  }
}

TEST(ZUpdate, HomogeneousSystemGivesZero) {
  oracle::Rng rng(52);
  const auto prior = random_prior(rng, 4, 4, 0.2, 0.2);
  const auto y = oracle::random_maps(rng, 2, 4, 4);
  CoeffMapSet v = y;
  for (double& x : v.values()) x = -x;
  const auto zu = dcsc::z_update(y, v, prior, 1.0, dcsc::CGConfig{});
  for (double x : zu.z.values()) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(zu.cg_iterations, 0u);
}

TEST(ZUpdate, MatchesDenseDirectSolve) {
  oracle::Rng rng(53);
  const auto prior = random_prior(rng, 4, 4, 0.2, 0.2);
  const auto y = oracle::random_maps(rng, 1, 4, 4), v = oracle::random_maps(rng, 1, 4, 4);
  dcsc::CGConfig cg;
  cg.tolerance = 1e-8;
  const auto zu = dcsc::z_update(y, v, prior, 1.0, cg);
  const Eigen::MatrixXd a = oracle::kron_system(prior.column().laplacian_dense(),
                                                prior.row().laplacian_dense(), 0.2, 0.2, 1.0);
  const Eigen::VectorXd rhs = as_vector(y.values()) + as_vector(v.values());
  const Eigen::VectorXd ref = a.ldlt().solve(rhs);
  EXPECT_LE(oracle::relative_error(zu.z.values(), std::span<const double>(ref.data(), 16)), 1e-5);
}

TEST(ZUpdate, NormalEquationResidualWithinTolerance) {
  oracle::Rng rng(54);
  const auto prior = random_prior(rng, 7, 9, 0.5, 0.3);
  const auto y = oracle::random_maps(rng, 3, 7, 9), v = oracle::random_maps(rng, 3, 7, 9);
  for (bool jacobi : {false, true}) {
    dcsc::CGConfig cg;
    cg.jacobi = jacobi;
    const double eta = 0.8;
    const auto zu = dcsc::z_update(y, v, prior, eta, cg);
    for (std::size_t k = 0; k < 3; ++k) {
      const auto az = dcsc::kron_operator_apply(zu.z.map(k), prior, eta);
      std::vector<double> b(63);
      for (std::size_t i = 0; i < 63; ++i) b[i] = eta * (y.map(k)[i] + v.map(k)[i]);
      EXPECT_LE(oracle::relative_error(az, b), cg.tolerance);
    }
  }
}

TEST(ZUpdate, PatchPriorMatchesDense) {
  oracle::Rng rng(55);
  const ImageGrid img = oracle::random_image(rng, 6, 6);
  dcsc::GraphConfig cfg;
  cfg.patch_size = 2;
  cfg.knn = 3;
  const dcsc::PatchGraphPrior prior(dcsc::build_patch_graph(img, cfg), 0.7);
  // Materialize the operator column by column.
  Eigen::MatrixXd a(36, 36);
  for (std::size_t j = 0; j < 36; ++j) {
    std::vector<double> e(36, 0.0);
    e[j] = 1.0;
    const auto col = dcsc::kron_operator_apply(e, prior, 1.0);
    for (std::size_t i = 0; i < 36; ++i) a(i, j) = col[i];
  }
  EXPECT_LE((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  const auto y = oracle::random_maps(rng, 1, 6, 6), v = oracle::random_maps(rng, 1, 6, 6);
  dcsc::CGConfig cg;
  cg.tolerance = 1e-10;
  const auto zu = dcsc::z_update(y, v, prior, 1.0, cg);
  const Eigen::VectorXd ref = a.ldlt().solve(as_vector(y.values()) + as_vector(v.values()));
  EXPECT_LE(oracle::relative_error(zu.z.values(), std::span<const double>(ref.data(), 36)), 1e-8);
}

TEST(InnerAdmm, SingleSweepComposesTheThreeSteps) {
  oracle::Rng rng(56);
  const auto prior = random_prior(rng, 5, 5, 0.0, 0.0);
  const auto x = oracle::random_maps(rng, 2, 5, 5), u = oracle::random_maps(rng, 2, 5, 5);
  dcsc::InnerState state(2, 5, 5, 1.0);
  const auto step = dcsc::inner_admm_step(x, u, state, prior, 0.28, 3.0, dcsc::CGConfig{});
  const CoeffMapSet zero(2, 5, 5);
  const CoeffMapSet y = dcsc::y_update(x, u, zero, zero, 0.28, 3.0, 1.0);
  EXPECT_EQ(step.y, y);
  EXPECT_LE(oracle::max_abs_diff(state.z.values(), y.values()), 1e-12);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_EQ(state.v.values()[i], 0.0 + step.y.values()[i] - state.z.values()[i]);
  }
  EXPECT_EQ(state.iterations, 1u);
}

TEST(InnerAdmm, FixedPointIsPreserved) {
  oracle::Rng rng(57);
  const auto prior = random_prior(rng, 4, 5, 0.2, 0.2);
  const auto x = oracle::random_maps(rng, 1, 4, 5), u = oracle::random_maps(rng, 1, 4, 5);
  dcsc::CGConfig cg;
  cg.tolerance = 1e-13;
  cg.max_iterations = 2000;
  dcsc::InnerState state(1, 4, 5, 1.0);
  for (int i = 0; i < 3000; ++i) dcsc::inner_admm_step(x, u, state, prior, 0.28, 2.0, cg);
  const CoeffMapSet z = state.z, v = state.v;
  const auto step = dcsc::inner_admm_step(x, u, state, prior, 0.28, 2.0, cg);
  EXPECT_LE(oracle::max_abs_diff(step.y.values(), z.values()), 1e-10);
  EXPECT_LE(oracle::max_abs_diff(state.z.values(), z.values()), 1e-10);
  EXPECT_LE(oracle::max_abs_diff(state.v.values(), v.values()), 1e-10);
}

// lambda |y|_1 + rho/2 |x - y + u|^2 + 1/2 q(y) at the consensus point y = z.
double inner_objective(const CoeffMapSet& y, const CoeffMapSet& x, const CoeffMapSet& u,
                       const dcsc::DualGraphPrior& prior, double lambda, double rho) {
  double fit = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = x.values()[i] - y.values()[i] + u.values()[i];
    fit += r * r;
  }
  double graph = 0.0;
  for (std::size_t k = 0; k < y.count(); ++k) graph += prior.quadratic(y.map(k));
  return lambda * y.l1_norm() + 0.5 * rho * fit + 0.5 * graph;
}

TEST(InnerAdmm, MoreSweepsReduceTheObjective) {
  oracle::Rng rng(58);
  const auto prior = random_prior(rng, 8, 8, 0.2, 0.2);
  const auto x = oracle::random_maps(rng, 2, 8, 8), u = oracle::random_maps(rng, 2, 8, 8, 0.1);
  dcsc::InnerState one(2, 8, 8, 1.0), two(2, 8, 8, 1.0);
  dcsc::inner_admm_step(x, u, one, prior, 0.28, 2.0, dcsc::CGConfig{}, 1);
  dcsc::inner_admm_step(x, u, two, prior, 0.28, 2.0, dcsc::CGConfig{}, 2);
  EXPECT_LE(inner_objective(two.z, x, u, prior, 0.28, 2.0),
            inner_objective(one.z, x, u, prior, 0.28, 2.0) + 1e-12);
  dcsc::InnerState many(2, 8, 8, 1.0);
  dcsc::inner_admm_step(x, u, many, prior, 0.28, 2.0, dcsc::CGConfig{}, 30);
  EXPECT_LE(inner_objective(many.z, x, u, prior, 0.28, 2.0),
            inner_objective(one.z, x, u, prior, 0.28, 2.0));
}

TEST(InnerState, RejectsNonPositiveEta) {
  EXPECT_THROW(dcsc::InnerState(1, 2, 2, 0.0), dcsc::ParameterError);
}

}  // namespace
