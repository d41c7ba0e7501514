// dcsc: denoise / benchmark / make-dict front end. Exit codes: 0 success,
// 1 solver failure, 2 I/O or configuration failure. Every flag can also be
// set through a DCSC_<FLAG> environment variable (e.g. DCSC_LAMBDA).

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <variant>

#include "dcsc/dcsc.hpp"
#include "dcsc/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct DenoiseArgs {
  std::string input;
  std::string dict = "fallback:8,8,0";
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::string variant = "dcsc";
  std::optional<double> lambda, alpha, beta, mu, rho, eta, cg_tol, delta;
  std::optional<std::size_t> max_iter, inner_sweeps, radius;
  std::string out = "out";
  std::string clean;
  std::string format = "png";
  std::size_t pad = 0;
  std::size_t max_size = 512;
  bool full_size = false;
  bool dump_graph = false;
  bool jacobi = false;
};

struct BenchmarkArgs {
  std::string plan;
  std::string out;
  std::optional<std::size_t> max_iter;
  std::size_t jobs = 1;
  bool print_plan = false;
};

struct MakeDictArgs {
  std::size_t k = 8;
  std::size_t p = 8;
  std::uint64_t seed = 0;
  std::string out;
};

template <typename T>
CLI::Option* env_option(CLI::App* app, const std::string& flag, T& target,
                        const std::string& help) {
  std::string env = "DCSC_";
  for (char c : flag.substr(flag.find_first_not_of('-'))) {
    env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return app->add_option(flag, target, help)->envname(env);
}

std::string fmt(double v) { return dcsc::detail::format_number(v); }

int run_denoise(const DenoiseArgs& a) {
  dcsc::SolverConfig cfg;
  cfg.variant = dcsc::parse_variant(a.variant);
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.alpha) cfg.alpha = *a.alpha;
  if (a.beta) cfg.beta = *a.beta;
  if (a.mu) cfg.mu = *a.mu;
  if (a.rho) cfg.rho = *a.rho;
  if (a.eta) cfg.eta = *a.eta;
  if (a.cg_tol) cfg.cg.tolerance = *a.cg_tol;
  if (a.delta) cfg.graph.delta = *a.delta;
  if (a.max_iter) cfg.max_outer_iterations = *a.max_iter;
  if (a.inner_sweeps) cfg.inner_sweeps = *a.inner_sweeps;
  if (a.radius) cfg.graph.neighbor_radius = *a.radius;
  cfg.cg.jacobi = a.jacobi;
  cfg.validate();

  const dcsc::Dictionary dict = dcsc::resolve_dictionary(a.dict);
  const dcsc::ImageGrid input =
      dcsc::load_working_image(a.input, a.max_size, a.full_size, &std::cerr);
  std::optional<dcsc::ImageGrid> reference;
  if (!a.clean.empty()) {
    reference = dcsc::load_working_image(a.clean, a.max_size, a.full_size, &std::cerr);
    if (!reference->same_shape(input)) {
      throw dcsc::DimensionError("clean reference and input have different dimensions");
    }
  } else if (a.sigma > 0.0) {
    reference = input;
  }
  const dcsc::ImageGrid noisy = dcsc::add_gaussian_noise(input, {a.sigma, a.seed});

  const dcsc::ImageGrid working = a.pad > 0 ? dcsc::reflect_pad(noisy, a.pad) : noisy;
  const dcsc::SolveResult result = dcsc::solve(working, dict, cfg);
  const dcsc::ImageGrid denoised =
      a.pad > 0 ? dcsc::crop(result.reconstruction, a.pad, a.pad, noisy.rows(), noisy.cols())
                : result.reconstruction;

  const fs::path out(a.out);
  fs::create_directories(out);
  const std::string ext = "." + a.format;
  dcsc::write_image(denoised, out / ("denoised" + ext));
  if (a.sigma > 0.0) dcsc::write_image(noisy, out / ("noisy" + ext));
  dcsc::write_trace_csv(result.trace, out / "trace.csv");
  if (a.dump_graph) {
    const dcsc::ModelPrior prior = dcsc::build_prior(working, cfg);
    if (const auto* dual = std::get_if<dcsc::DualGraphPrior>(&prior)) {
      dcsc::write_graph_csv(dual->column(), out / "graph_columns.csv");
      dcsc::write_graph_csv(dual->row(), out / "graph_rows.csv");
    } else if (const auto* patch = std::get_if<dcsc::PatchGraphPrior>(&prior)) {
      dcsc::write_graph_csv(patch->graph().tiles(), out / "graph_patches.csv");
    }
  }

  std::cout << "image=" << fs::path(a.input).filename().string()
            << " variant=" << dcsc::to_string(cfg.variant) << " sigma=" << fmt(a.sigma)
            << " seed=" << a.seed << " iterations=" << result.iterations
            << " converged=" << (result.converged ? "true" : "false");
  if (reference) {
    std::cout << " psnr_noisy=" << fmt(dcsc::psnr(noisy, *reference))
              << " psnr_denoised=" << fmt(dcsc::psnr(denoised, *reference));
  }
  std::cout << '\n';
  return 0;
}

int run_benchmark(const BenchmarkArgs& a) {
  dcsc::ExperimentPlan plan = dcsc::parse_plan(a.plan);
  if (a.max_iter) {
    plan.solver.max_outer_iterations = *a.max_iter;
    plan.solver.validate();
  }
  if (!a.out.empty()) plan.output = a.out;
  if (a.print_plan) {
    std::cout << dcsc::dump_plan(plan);
    return 0;
  }
  const dcsc::BenchmarkOutcome outcome = dcsc::run_benchmark(plan, a.jobs, &std::cerr);
  dcsc::write_benchmark_outputs(outcome, plan.output);
  if (!outcome.any_failed) return 0;
  const bool io_failure = std::any_of(outcome.rows.begin(), outcome.rows.end(),
                                      [](const dcsc::ResultRow& r) {
                                        return !r.error.empty() && !r.solver_failure;
                                      });
  std::cerr << "some benchmark rows failed, see the error column of results.csv\n";
  return io_failure ? 2 : 1;
}

int run_make_dict(const MakeDictArgs& a) {
  dcsc::save_dictionary(dcsc::fallback_dictionary(a.k, a.p, a.seed), a.out);
  std::cout << "wrote " << a.k << " filters of size " << a.p << "x" << a.p << " to " << a.out
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional sparse coding denoiser with dual graph Laplacian regularization"};
  app.require_subcommand(1);

  DenoiseArgs den;
  CLI::App* denoise = app.add_subcommand("denoise", "Denoise one image");
  denoise->add_option("input", den.input, "Input image (.png, .pgm)")->required();
  env_option(denoise, "--dict", den.dict, "Dictionary file or fallback:K,p,seed")
      ->capture_default_str();
  env_option(denoise, "--sigma", den.sigma, "Gaussian noise std added to the input [0,255]")
      ->capture_default_str();
  env_option(denoise, "--seed", den.seed, "Noise seed")->capture_default_str();
  env_option(denoise, "--variant", den.variant, "csc, scsc or dcsc")
      ->check(CLI::IsMember({"csc", "scsc", "dcsc"}, CLI::ignore_case))
      ->capture_default_str();
  env_option(denoise, "--lambda", den.lambda, "l1 weight (0.28)");
  env_option(denoise, "--alpha", den.alpha, "Column graph weight (0.2)");
  env_option(denoise, "--beta", den.beta, "Row graph weight (0.2)");
  env_option(denoise, "--mu", den.mu, "Patch graph weight (0.1)");
  env_option(denoise, "--rho", den.rho, "Outer penalty (50 lambda + 1)");
  env_option(denoise, "--eta", den.eta, "Inner penalty (5)");
  env_option(denoise, "--delta", den.delta, "Edge weight shape factor (1)");
  env_option(denoise, "--radius", den.radius, "Line graph neighbourhood radius (10)");
  env_option(denoise, "--max-iter", den.max_iter, "Outer iteration cap (50)");
  env_option(denoise, "--inner-sweeps", den.inner_sweeps, "Inner sweeps per iteration (1)");
  env_option(denoise, "--cg-tol", den.cg_tol, "CG relative residual tolerance (1e-5)");
  denoise->add_flag("--jacobi", den.jacobi, "Jacobi-preconditioned CG")->envname("DCSC_JACOBI");
  env_option(denoise, "--out", den.out, "Output directory")->capture_default_str();
  env_option(denoise, "--clean", den.clean, "Clean reference image for PSNR");
  env_option(denoise, "--format", den.format, "Output image format")
      ->check(CLI::IsMember({"png", "pgm"}))
      ->capture_default_str();
  env_option(denoise, "--pad", den.pad, "Reflect-pad by this many pixels before solving")
      ->capture_default_str();
  env_option(denoise, "--max-size", den.max_size, "Center-crop larger inputs to this size")
      ->capture_default_str();
  denoise->add_flag("--full-size", den.full_size, "Disable center cropping")
      ->envname("DCSC_FULL_SIZE");
  denoise->add_flag("--dump-graph", den.dump_graph, "Write the graph weights as CSV")
      ->envname("DCSC_DUMP_GRAPH");

  BenchmarkArgs bench;
  CLI::App* benchmark = app.add_subcommand("benchmark", "Run a noise/variant sweep");
  env_option(benchmark, "--plan", bench.plan, "YAML plan file")->required();
  env_option(benchmark, "--out", bench.out, "Output directory (overrides the plan)");
  env_option(benchmark, "--max-iter", bench.max_iter, "Outer iteration cap override");
  env_option(benchmark, "--jobs", bench.jobs, "Worker threads")->capture_default_str();
  benchmark->add_flag("--print-plan", bench.print_plan, "Print the validated plan and exit");

  MakeDictArgs mk;
  CLI::App* make_dict = app.add_subcommand("make-dict", "Write a fallback dictionary file");
  env_option(make_dict, "--k", mk.k, "Number of filters")->capture_default_str();
  env_option(make_dict, "--p", mk.p, "Filter size")->capture_default_str();
  env_option(make_dict, "--seed", mk.seed, "Seed for random filters")->capture_default_str();
  env_option(make_dict, "--out", mk.out, "Output .cscd file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*denoise) return run_denoise(den);
    if (*benchmark) return run_benchmark(bench);
    if (*make_dict) return run_make_dict(mk);
  } catch (const dcsc::SolverError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
