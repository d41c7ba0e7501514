#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dcsc/dcsc.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace {

using dcsc::CoeffMapSet;
using dcsc::ImageGrid;
using dcsc::SolverConfig;
using dcsc::Variant;

ImageGrid test_image(const char* name) {
  return dcsc::read_image(fs::path(DCSC_TEST_DATA_DIR) / name);
}

SolverConfig config(Variant v, std::size_t iterations) {
  SolverConfig cfg;
  cfg.variant = v;
  cfg.max_outer_iterations = iterations;
  cfg.primal_tolerance = 0.0;
  cfg.dual_tolerance = 0.0;
  return cfg;
}

TEST(SolverConfig, DefaultsAndValidation) {
  SolverConfig cfg;
  EXPECT_EQ(cfg.variant, Variant::dcsc);
  EXPECT_DOUBLE_EQ(cfg.lambda, 0.28);
  EXPECT_DOUBLE_EQ(cfg.mu, 0.1);
  EXPECT_DOUBLE_EQ(cfg.alpha, 0.2);
  EXPECT_DOUBLE_EQ(cfg.beta, 0.2);
  EXPECT_DOUBLE_EQ(cfg.effective_rho(), 15.0);
  EXPECT_EQ(cfg.max_outer_iterations, 50u);
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha = -1.0;
  EXPECT_THROW(cfg.validate(), dcsc::ParameterError);
  cfg = SolverConfig{};
  cfg.rho = 0.0;
  EXPECT_THROW(cfg.validate(), dcsc::ParameterError);
  cfg = SolverConfig{};
  cfg.max_outer_iterations = 0;
  EXPECT_THROW(cfg.validate(), dcsc::ParameterError);
}

TEST(Variant, ParseAndPrint) {
  EXPECT_EQ(dcsc::parse_variant("DCSC"), Variant::dcsc);
  EXPECT_EQ(dcsc::parse_variant("scsc"), Variant::scsc);
  EXPECT_EQ(dcsc::to_string(Variant::csc), "csc");
  EXPECT_THROW(dcsc::parse_variant("bm3d"), dcsc::ParameterError);
}

TEST(Residuals, ZeroCases) {
  oracle::Rng rng(60);
  const auto x = oracle::random_maps(rng, 2, 3, 3), u = oracle::random_maps(rng, 2, 3, 3);
  EXPECT_EQ(dcsc::residuals(x, x, oracle::random_maps(rng, 2, 3, 3), u, 2.0).primal, 0.0);
  const auto y = oracle::random_maps(rng, 2, 3, 3);
  EXPECT_EQ(dcsc::residuals(x, y, y, u, 2.0).dual, 0.0);
}

TEST(Residuals, HandComputedNorms) {
  const CoeffMapSet x(1, 1, 2, std::vector<double>{3, 4});
  const CoeffMapSet y(1, 1, 2, std::vector<double>{0, 4});
  const CoeffMapSet y_prev(1, 1, 2, std::vector<double>{0, 2});
  const CoeffMapSet u(1, 1, 2, std::vector<double>{1, 0});
  const auto r = dcsc::residuals(x, y, y_prev, u, 2.0);
  EXPECT_DOUBLE_EQ(r.primal, 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(r.dual, 2.0 * 2.0 / (2.0 * 1.0));
}

TEST(Objective, ZeroMapsGiveHalfSignalEnergy) {
  oracle::Rng rng(61);
  const ImageGrid s = oracle::random_image(rng, 8, 8, -5.0, 5.0);
  const dcsc::Dictionary d = dcsc::fallback_dictionary(3, 3, 0);
  double energy = 0.0;
  for (double v : s.values()) energy += v * v;
  for (Variant v : {Variant::csc, Variant::scsc, Variant::dcsc}) {
    SolverConfig cfg;
    cfg.variant = v;
    cfg.graph.neighbor_radius = 3;
    cfg.graph.patch_size = 4;
    const auto prior = dcsc::build_prior(s, cfg);
    EXPECT_NEAR(dcsc::objective_value(CoeffMapSet(3, 8, 8), s, d, prior, cfg), 0.5 * energy,
                1e-9 * energy);
  }
}

TEST(Objective, CscIgnoresGraphs) {
  oracle::Rng rng(62);
  const ImageGrid s = oracle::random_image(rng, 8, 8);
  const dcsc::Dictionary d = dcsc::fallback_dictionary(2, 3, 0);
  const auto x = oracle::random_maps(rng, 2, 8, 8);
  SolverConfig cfg;
  cfg.graph.neighbor_radius = 3;
  const auto with_graph = dcsc::build_prior(s, cfg);
  cfg.variant = Variant::csc;
  const auto without = dcsc::build_prior(s, cfg);
  EXPECT_EQ(dcsc::objective_value(x, s, d, with_graph, cfg),
            dcsc::objective_value(x, s, d, without, cfg));
}

TEST(Objective, DcscMatchesTermWiseOracle) {
  oracle::Rng rng(63);
  const ImageGrid s = oracle::random_image(rng, 8, 8);
  const dcsc::Dictionary d = oracle::random_dictionary(rng, 3, 3);
  const auto x = oracle::random_maps(rng, 3, 8, 8);
  SolverConfig cfg;
  cfg.graph.neighbor_radius = 3;
  const auto prior = dcsc::build_prior(s, cfg);
  const auto& dual = std::get<dcsc::DualGraphPrior>(prior);
  const double got = dcsc::objective_value(x, s, d, prior, cfg);
  const double want = oracle::dcsc_objective(x, s, d, dual.column().weights_dense(),
                                             dual.row().weights_dense(), cfg.lambda, cfg.alpha,
                                             cfg.beta);
  EXPECT_NEAR(got, want, 1e-9 * std::abs(want));
}

TEST(Objective, VariantMismatchIsRejected) {
  const ImageGrid s(8, 8, 1.0);
  const dcsc::Dictionary d = dcsc::fallback_dictionary(2, 3, 0);
  SolverConfig cfg;
  cfg.variant = Variant::csc;
  const auto none = dcsc::build_prior(s, cfg);
  cfg.variant = Variant::dcsc;
  EXPECT_THROW(dcsc::objective_value(CoeffMapSet(2, 8, 8), s, d, none, cfg),
               dcsc::ParameterError);
  const auto dual = dcsc::build_prior(s, cfg);
  EXPECT_THROW(dcsc::objective_value(CoeffMapSet(2, 8, 7), s, d, dual, cfg),
               dcsc::DimensionError);
}

TEST(Solve, ZeroImageStaysAtZero) {
  const ImageGrid s(16, 16, 0.0);
  const auto result = dcsc::solve(s, dcsc::fallback_dictionary(4, 4, 0), config(Variant::dcsc, 5));
  for (double v : result.x.values()) EXPECT_EQ(v, 0.0);
  for (double v : result.reconstruction.values()) EXPECT_EQ(v, 0.0);
  for (const auto& rec : result.trace) EXPECT_EQ(rec.objective, 0.0);
}

TEST(Solve, HugeLambdaReturnsLowpass) {
  const ImageGrid s = dcsc::center_crop(test_image("camera_128.pgm"), 32, 32);
  SolverConfig cfg = config(Variant::dcsc, 10);
  cfg.lambda = 1e3 * 255.0;
  const auto result = dcsc::solve(s, dcsc::fallback_dictionary(8, 8, 0), cfg);
  EXPECT_LE(result.x.l1_norm(), 1e-12);
  const auto split = dcsc::lowpass_split(s, cfg.lowpass_strength);
  EXPECT_LE(oracle::max_abs_diff(result.reconstruction.values(), split.low.values()), 1e-9);
}

TEST(Solve, TraceShapeAndMultiplierExactness) {
  const ImageGrid s = test_image("astronaut_64.pgm");
  const auto noisy = dcsc::add_gaussian_noise(s, {20.0, 1});
  for (Variant v : {Variant::csc, Variant::scsc, Variant::dcsc}) {
    std::size_t calls = 0;
    const auto check = [&](const dcsc::IterationView& view) {
      ++calls;
      for (std::size_t i = 0; i < view.u.size(); ++i) {
        ASSERT_EQ(view.u.values()[i] - (view.u_prev.values()[i] + view.x.values()[i] -
                                        view.y.values()[i]),
                  0.0);
      }
    };
    const auto result =
        dcsc::solve(noisy, dcsc::fallback_dictionary(8, 8, 0), config(v, 8), check);
    EXPECT_EQ(result.iterations, 8u);
    EXPECT_EQ(result.trace.size(), result.iterations);
    EXPECT_EQ(calls, result.iterations);
    EXPECT_TRUE(result.reconstruction.same_shape(s));
  }
}

TEST(Solve, ResidualsMatchIndependentRecomputation) {
  const ImageGrid s = dcsc::add_gaussian_noise(test_image("astronaut_64.pgm"), {20.0, 2});
  SolverConfig cfg = config(Variant::dcsc, 50);
  const double rho = cfg.effective_rho();
  std::vector<std::pair<double, double>> recomputed;
  const auto record = [&](const dcsc::IterationView& v) {
    double dxy = 0.0, dyy = 0.0;
    for (std::size_t i = 0; i < v.x.size(); ++i) {
      dxy += std::pow(v.x.values()[i] - v.y.values()[i], 2);
      dyy += std::pow(v.y.values()[i] - v.y_prev.values()[i], 2);
    }
    const double primal =
        std::sqrt(dxy) / std::max({v.x.frobenius_norm(), v.y.frobenius_norm(), 1e-12});
    const double dual = rho * std::sqrt(dyy) / std::max(rho * v.u.frobenius_norm(), 1e-12);
    recomputed.emplace_back(primal, dual);
  };
  const auto result = dcsc::solve(s, dcsc::fallback_dictionary(8, 8, 0), cfg, record);
  ASSERT_EQ(result.trace.size(), 50u);
  for (std::size_t t = 0; t < 50; ++t) {
    EXPECT_NEAR(result.trace[t].primal, recomputed[t].first, 1e-12 * recomputed[t].first + 1e-300);
    EXPECT_NEAR(result.trace[t].dual, recomputed[t].second, 1e-12 * recomputed[t].second + 1e-300);
  }
  EXPECT_LE(result.trace.back().primal, 1e-2 * result.trace.front().primal);
  EXPECT_LE(result.trace.back().dual, 1e-2 * result.trace.front().dual);
}

TEST(Solve, DataTermBelowZeroSolution) {
  for (const char* name : {"astronaut_64.pgm", "camera_128.pgm"}) {
    const ImageGrid s = dcsc::add_gaussian_noise(test_image(name), {20.0, 3});
    SolverConfig cfg;
    const auto result = dcsc::solve(s, dcsc::fallback_dictionary(8, 8, 0), cfg);
    const auto split = dcsc::lowpass_split(s, cfg.lowpass_strength);
    const ImageGrid synth = dcsc::circular_convolve_sum(dcsc::fallback_dictionary(8, 8, 0),
                                                        result.x);
    double data = 0.0, zero = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      data += std::pow(synth.values()[i] - split.high.values()[i], 2);
      zero += std::pow(split.high.values()[i], 2);
    }
    EXPECT_LE(0.5 * data, 0.5 * zero) << name;
  }
}

TEST(Solve, GraphFreeVariantsReduceToCsc) {
  const ImageGrid s = dcsc::add_gaussian_noise(test_image("astronaut_64.pgm"), {20.0, 4});
  const auto dict = dcsc::fallback_dictionary(8, 8, 0);
  const auto run = [&](SolverConfig cfg) {
    std::vector<CoeffMapSet> xs;
    const auto keep = [&](const dcsc::IterationView& v) { xs.push_back(v.x); };
    const auto result = dcsc::solve(s, dict, cfg, keep);
    return std::make_pair(result, xs);
  };
  const auto [csc, csc_x] = run(config(Variant::csc, 20));
  SolverConfig dual = config(Variant::dcsc, 20);
  dual.alpha = dual.beta = 0.0;
  SolverConfig patch = config(Variant::scsc, 20);
  patch.mu = 0.0;
  for (const SolverConfig& cfg : {dual, patch}) {
    const auto [res, xs] = run(cfg);
    ASSERT_EQ(xs.size(), csc_x.size());
    for (std::size_t t = 0; t < xs.size(); ++t) {
      EXPECT_LE(oracle::max_abs_diff(xs[t].values(), csc_x[t].values()), 1e-10);
      EXPECT_NEAR(res.trace[t].objective, csc.trace[t].objective, 1e-10);
    }
  }
}

TEST(Solve, DeterministicTraces) {
  const ImageGrid s = dcsc::add_gaussian_noise(test_image("astronaut_64.pgm"), {15.0, 5});
  const auto dict = dcsc::fallback_dictionary(8, 8, 0);
  const auto a = dcsc::solve(s, dict, config(Variant::dcsc, 10));
  const auto b = dcsc::solve(s, dict, config(Variant::dcsc, 10));
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.reconstruction, b.reconstruction);
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    EXPECT_EQ(a.trace[t].objective, b.trace[t].objective);
    EXPECT_EQ(a.trace[t].primal, b.trace[t].primal);
    EXPECT_EQ(a.trace[t].dual, b.trace[t].dual);
    EXPECT_EQ(a.trace[t].cg_iterations, b.trace[t].cg_iterations);
  }
}

TEST(Solve, DenoisesBundledCrop) {
  const ImageGrid clean = test_image("camera_128.pgm");
  const ImageGrid noisy = dcsc::add_gaussian_noise(clean, {20.0, 0});
  const auto result = dcsc::solve(noisy, dcsc::fallback_dictionary(8, 8, 0), SolverConfig{});
  EXPECT_GE(dcsc::psnr(result.reconstruction, clean), dcsc::psnr(noisy, clean) + 2.0);
}

TEST(Solve, StopsOnceBothResidualsMeetTolerance) {
  const ImageGrid s = dcsc::add_gaussian_noise(test_image("astronaut_64.pgm"), {20.0, 6});
  const auto dict = dcsc::fallback_dictionary(8, 8, 0);
  const auto full = dcsc::solve(s, dict, config(Variant::csc, 50));
  EXPECT_FALSE(full.converged);
  SolverConfig cfg = config(Variant::csc, 50);
  cfg.primal_tolerance = full.trace[19].primal;
  cfg.dual_tolerance = full.trace[19].dual;
  const auto result = dcsc::solve(s, dict, cfg);
  EXPECT_TRUE(result.converged);
  EXPECT_LE(result.iterations, 20u);
  EXPECT_EQ(result.trace.size(), result.iterations);
  EXPECT_LE(result.trace.back().primal, cfg.primal_tolerance);
  EXPECT_LE(result.trace.back().dual, cfg.dual_tolerance);
}

TEST(Solve, RejectsOversizedDictionary) {
  EXPECT_THROW(dcsc::solve(ImageGrid(6, 6, 1.0), dcsc::fallback_dictionary(2, 8, 0),
                           SolverConfig{}),
               dcsc::DimensionError);
}

TEST(Solve, CgFailureSurfacesAsSolverError) {
  const ImageGrid s = dcsc::add_gaussian_noise(test_image("astronaut_64.pgm"), {20.0, 7});
  SolverConfig cfg = config(Variant::dcsc, 3);
  cfg.cg.max_iterations = 1;
  cfg.cg.tolerance = 1e-14;
  EXPECT_THROW(dcsc::solve(s, dcsc::fallback_dictionary(8, 8, 0), cfg), dcsc::SolverError);
}

TEST(TraceCsv, HeaderAndCumulativeCg) {
  std::vector<dcsc::IterationRecord> trace{{1, 10.0, 0.5, 0.25, 4, 1.0},
                                           {2, 9.0, 0.1, 0.05, 3, 2.0}};
  const auto path = fs::temp_directory_path() / "dcsc_trace_test.csv";
  dcsc::write_trace_csv(trace, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iteration,objective,primal,dual,cg_iters_total,elapsed_ms");
  std::getline(in, line);
  EXPECT_EQ(line, "1,10.0000,5.0000e-01,2.5000e-01,4,1.0000");
  std::getline(in, line);
  EXPECT_EQ(line, "2,9.0000,1.0000e-01,5.0000e-02,7,2.0000");
  fs::remove(path);
}

}  // namespace
