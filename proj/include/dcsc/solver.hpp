#ifndef DCSC_SOLVER_HPP
#define DCSC_SOLVER_HPP

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dcsc/convolution.hpp"
#include "dcsc/core.hpp"
#include "dcsc/error.hpp"
#include "dcsc/freq.hpp"
#include "dcsc/graph.hpp"
#include "dcsc/regularizers.hpp"

namespace dcsc {

enum class Variant { csc, scsc, dcsc };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::csc: return "csc";
    case Variant::scsc: return "scsc";
    case Variant::dcsc: return "dcsc";
  }
  return "?";
}

inline Variant parse_variant(std::string name) {
  std::transform(name.begin(), name.end(), name.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (name == "csc") return Variant::csc;
  if (name == "scsc") return Variant::scsc;
  if (name == "dcsc") return Variant::dcsc;
  throw ParameterError("unknown variant '" + name + "' (expected csc, scsc or dcsc)");
}

struct SolverConfig {
  Variant variant = Variant::dcsc;
  double lambda = 0.28;
  // SCSC patch-graph weight.
  double mu = 0.1;
  // DCSC column- and row-graph weights.
  double alpha = 0.2;
  double beta = 0.2;
  // Outer penalty; unset means 50 lambda + 1.
  std::optional<double> rho;
  // Inner penalty. Larger values couple the graph solve to y more tightly.
  double eta = 5.0;
  std::size_t max_outer_iterations = 50;
  std::size_t inner_sweeps = 1;
  CGConfig cg;
  GraphConfig graph;
  double primal_tolerance = 1e-4;
  double dual_tolerance = 1e-4;
  double lowpass_strength = 5.0;
  // Factor applied to [0, 255] intensities before coding.
  double intensity_scale = 1.0;

  double effective_rho() const { return rho.value_or(50.0 * lambda + 1.0); }

  void validate() const {
    const auto nonneg = [](double v, const char* name) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ParameterError(std::string(name) + " must be finite and >= 0");
      }
    };
    const auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw ParameterError(std::string(name) + " must be finite and > 0");
      }
    };
    nonneg(lambda, "lambda");
    nonneg(mu, "mu");
    nonneg(alpha, "alpha");
    nonneg(beta, "beta");
    positive(effective_rho(), "rho");
    positive(eta, "eta");
    positive(lowpass_strength, "lowpass_strength");
    positive(intensity_scale, "intensity_scale");
    nonneg(primal_tolerance, "primal_tolerance");
    nonneg(dual_tolerance, "dual_tolerance");
    if (max_outer_iterations < 1) throw ParameterError("max_outer_iterations must be >= 1");
    if (inner_sweeps < 1) throw ParameterError("inner_sweeps must be >= 1");
    cg.validate();
    graph.validate();
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  std::size_t cg_iterations = 0;
  double elapsed_ms = 0.0;
};

struct SolveResult {
  // Coefficient maps on the internal (scaled, highpass) signal.
  CoeffMapSet x;
  // sum_k d_k * x_k plus the lowpass component, on the input intensity scale.
  ImageGrid reconstruction;
  ImageGrid lowpass;
  std::vector<IterationRecord> trace;
  std::size_t iterations = 0;
  bool converged = false;
};

struct Residuals {
  double primal = 0.0;
  double dual = 0.0;
};

// Normalized ADMM residuals:
//   primal = ||x - y|| / max(||x||, ||y||, 1e-12)
//   dual   = rho ||y - y_prev|| / max(rho ||u||, 1e-12)
inline Residuals residuals(const CoeffMapSet& x, const CoeffMapSet& y, const CoeffMapSet& y_prev,
                           const CoeffMapSet& u, double rho) {
  require_same_shape(x, y, "residuals");
  require_same_shape(y, y_prev, "residuals");
  require_same_shape(y, u, "residuals");
  Residuals r;
  r.primal = distance(x, y) / std::max({x.frobenius_norm(), y.frobenius_norm(), 1e-12});
  r.dual = rho * distance(y, y_prev) / std::max(rho * u.frobenius_norm(), 1e-12);
  return r;
}

using ModelPrior = std::variant<NoGraphPrior, DualGraphPrior, PatchGraphPrior>;

// Graphs for cfg.variant built from `image`. Neighbourhood radius and patch
// size are clamped to what the image dimensions allow.
inline ModelPrior build_prior(const ImageGrid& image, const SolverConfig& cfg) {
  switch (cfg.variant) {
    case Variant::csc:
      return NoGraphPrior(image.rows(), image.cols());
    case Variant::dcsc: {
      GraphConfig column_cfg = cfg.graph;
      GraphConfig row_cfg = cfg.graph;
      column_cfg.neighbor_radius =
          std::max<std::size_t>(1, std::min(cfg.graph.neighbor_radius, image.cols() - 1));
      row_cfg.neighbor_radius =
          std::max<std::size_t>(1, std::min(cfg.graph.neighbor_radius, image.rows() - 1));
      if (image.rows() < 2 || image.cols() < 2) {
        throw DimensionError("the dual graph prior needs at least two rows and columns");
      }
      return DualGraphPrior(build_line_graph(image, Axis::columns, column_cfg),
                            build_line_graph(image, Axis::rows, row_cfg), cfg.alpha, cfg.beta);
    }
    case Variant::scsc: {
      GraphConfig patch_cfg = cfg.graph;
      patch_cfg.patch_size =
          std::min({cfg.graph.patch_size, image.rows(), image.cols()});
      return PatchGraphPrior(build_patch_graph(image, patch_cfg), cfg.mu);
    }
  }
  throw ParameterError("unknown variant");
}

// 1/2 ||sum_k d_k * x_k - s||^2 + lambda sum_k ||x_k||_1 + 1/2 sum_k q(x_k),
// with q the prior's weighted quadratic form (alpha tr(x Lc x^T) +
// beta tr(x^T Lr x) for DCSC, mu <x, L x> for SCSC, 0 for CSC).
template <GraphPrior Prior>
double objective_value(const CoeffMapSet& x, const ImageGrid& signal, const DictionaryFreq& freq,
                       const Prior& prior, double lambda) {
  if (signal.rows() != x.rows() || signal.cols() != x.cols()) {
    throw DimensionError("objective: signal and coefficient maps differ in size");
  }
  const ImageGrid synth = circular_convolve_sum(freq, x);
  double data = 0.0;
  auto a = synth.values();
  auto b = signal.values();
  for (std::size_t i = 0; i < a.size(); ++i) data += (a[i] - b[i]) * (a[i] - b[i]);
  double graph = 0.0;
  if (!prior.inert()) {
    if (prior.rows() != x.rows() || prior.cols() != x.cols()) {
      throw DimensionError("objective: graph prior does not match the coefficient maps");
    }
    for (std::size_t k = 0; k < x.count(); ++k) graph += prior.quadratic(x.map(k));
  }
  return 0.5 * data + lambda * x.l1_norm() + 0.5 * graph;
}

// Variant-aware objective: the prior is only consulted when it belongs to
// cfg.variant, so CSC ignores any graphs passed in.
inline double objective_value(const CoeffMapSet& x, const ImageGrid& signal, const Dictionary& dict,
                              const ModelPrior& prior, const SolverConfig& cfg) {
  const DictionaryFreq freq(dict, signal.rows(), signal.cols());
  const NoGraphPrior none(signal.rows(), signal.cols());
  switch (cfg.variant) {
    case Variant::csc:
      return objective_value(x, signal, freq, none, cfg.lambda);
    case Variant::dcsc:
      if (const auto* p = std::get_if<DualGraphPrior>(&prior)) {
        return objective_value(x, signal, freq, *p, cfg.lambda);
      }
      throw ParameterError("DCSC objective needs a dual graph prior");
    case Variant::scsc:
      if (const auto* p = std::get_if<PatchGraphPrior>(&prior)) {
        return objective_value(x, signal, freq, *p, cfg.lambda);
      }
      throw ParameterError("SCSC objective needs a patch graph prior");
  }
  throw ParameterError("unknown variant");
}

// Per-iteration view of the ADMM state, for diagnostics and tests.
struct IterationView {
  std::size_t iteration;
  const CoeffMapSet& x;
  const CoeffMapSet& y;
  const CoeffMapSet& y_prev;
  const CoeffMapSet& u;
  const CoeffMapSet& u_prev;
};
using IterationCallback = std::function<void(const IterationView&)>;

// Outer ADMM on the highpass signal `signal` (already scaled) with a fixed
// prior. Returns the iterate and trace; the caller adds back the lowpass.
template <GraphPrior Prior>
SolveResult solve_highpass(const ImageGrid& signal, const Dictionary& dict, const Prior& prior,
                           const SolverConfig& cfg, const IterationCallback& callback = {}) {
  cfg.validate();
  dict.check_fits(signal.rows(), signal.cols());
  const std::size_t count = dict.filter_count();
  const std::size_t rows = signal.rows();
  const std::size_t cols = signal.cols();
  const double rho = cfg.effective_rho();
  const XUpdateWorkspace ws(dict, signal, rho);
  const auto start = std::chrono::steady_clock::now();

  SolveResult result;
  CoeffMapSet x(count, rows, cols);
  CoeffMapSet y(count, rows, cols);
  CoeffMapSet u(count, rows, cols);
  InnerState inner(count, rows, cols, cfg.eta);

  for (std::size_t t = 1; t <= cfg.max_outer_iterations; ++t) {
    x = x_update(ws, y, u);
    if (!x.finite()) throw SolverError("non-finite coefficient maps at iteration " +
                                       std::to_string(t), std::nan(""));
    CoeffMapSet y_prev = std::move(y);
    std::size_t cg_iterations = 0;
    if (prior.inert()) {
      // With a zero graph term the y-subproblem is the plain l1 prox.
      y = l1_prox(x, u, cfg.lambda, rho);
    } else {
      InnerStep step = inner_admm_step(x, u, inner, prior, cfg.lambda, rho, cfg.cg,
                                       cfg.inner_sweeps);
      y = std::move(step.y);
      cg_iterations = step.cg_iterations;
    }
    CoeffMapSet u_prev = u;
    {
      auto uv = u.values();
      auto xv = x.values();
      auto yv = y.values();
      for (std::size_t i = 0; i < uv.size(); ++i) uv[i] = uv[i] + xv[i] - yv[i];
    }

    IterationRecord rec;
    rec.iteration = t;
    rec.objective = objective_value(x, signal, ws.freq(), prior, cfg.lambda);
    const Residuals res = residuals(x, y, y_prev, u, rho);
    rec.primal = res.primal;
    rec.dual = res.dual;
    rec.cg_iterations = cg_iterations;
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.objective)) {
      throw SolverError("objective became non-finite at iteration " + std::to_string(t),
                        rec.objective);
    }
    result.trace.push_back(rec);
    if (callback) callback(IterationView{t, x, y, y_prev, u, u_prev});
    result.iterations = t;
    if (res.primal <= cfg.primal_tolerance && res.dual <= cfg.dual_tolerance) {
      result.converged = true;
      break;
    }
  }
  result.x = std::move(x);
  return result;
}

// Full denoising pipeline: scale to the coding range, split off the lowpass
// component, build the variant's graphs from the (noisy) input, run the outer
// ADMM on the highpass part and reassemble on the input intensity scale.
inline SolveResult solve(const ImageGrid& image, const Dictionary& dict, const SolverConfig& cfg,
                         const IterationCallback& callback = {}) {
  cfg.validate();
  detail::require_finite(image.values(), "image");
  dict.check_fits(image.rows(), image.cols());
  ImageGrid scaled = image;
  for (double& v : scaled.values()) v *= cfg.intensity_scale;
  LowpassSplit split = lowpass_split(scaled, cfg.lowpass_strength);
  const ModelPrior prior = build_prior(scaled, cfg);

  SolveResult result = std::visit(
      [&](const auto& p) { return solve_highpass(split.high, dict, p, cfg, callback); }, prior);

  ImageGrid recon = circular_convolve_sum(dict, result.x);
  auto rv = recon.values();
  auto lv = split.low.values();
  for (std::size_t i = 0; i < rv.size(); ++i) rv[i] = (rv[i] + lv[i]) / cfg.intensity_scale;
  for (double& v : split.low.values()) v /= cfg.intensity_scale;
  result.reconstruction = std::move(recon);
  result.lowpass = std::move(split.low);
  return result;
}

// iteration,objective,primal,dual,cg_iters_total,elapsed_ms
inline void write_trace_csv(const std::vector<IterationRecord>& trace,
                            const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "iteration,objective,primal,dual,cg_iters_total,elapsed_ms\n";
  char line[256];
  std::size_t cg_total = 0;
  for (const auto& rec : trace) {
    cg_total += rec.cg_iterations;
    std::snprintf(line, sizeof line, "%zu,%.4f,%.4e,%.4e,%zu,%.4f\n", rec.iteration,
                  rec.objective, rec.primal, rec.dual, cg_total, rec.elapsed_ms);
    out << line;
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dcsc

#endif  // DCSC_SOLVER_HPP
