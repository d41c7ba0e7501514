#ifndef DCSC_EXPERIMENT_HPP
#define DCSC_EXPERIMENT_HPP

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dcsc/core.hpp"
#include "dcsc/dictionary_io.hpp"
#include "dcsc/error.hpp"
#include "dcsc/image_io.hpp"
#include "dcsc/metrics.hpp"
#include "dcsc/solver.hpp"

namespace dcsc {

// Plan file problems. Syntax errors carry a line/column; semantic validation
// lists every violation, one per line.
class PlanError : public Error {
 public:
  using Error::Error;
};

// "fallback:K,p,seed" or a path to a CSCD dictionary file.
inline Dictionary resolve_dictionary(const std::string& source) {
  constexpr std::string_view prefix = "fallback:";
  if (source.rfind(prefix, 0) == 0) {
    std::istringstream in(source.substr(prefix.size()));
    std::size_t k = 0, p = 0;
    std::uint64_t seed = 0;
    char c1 = 0, c2 = 0;
    if (!(in >> k >> c1 >> p >> c2 >> seed) || c1 != ',' || c2 != ',' || !in.eof()) {
      throw ParameterError("malformed dictionary source '" + source +
                           "', expected fallback:K,p,seed");
    }
    return fallback_dictionary(k, p, seed);
  }
  if (!std::filesystem::exists(source)) {
    throw IoError("dictionary file not found: " + source);
  }
  return load_dictionary(source);
}

struct ExperimentPlan {
  std::vector<std::filesystem::path> images;
  std::string dictionary = "fallback:8,8,0";
  std::vector<double> sigmas;
  std::vector<std::uint64_t> seeds{0};
  std::vector<Variant> variants;
  SolverConfig solver;
  std::filesystem::path output = "results";
  // Larger inputs are center-cropped to max_size x max_size unless full_size.
  std::size_t max_size = 512;
  bool full_size = false;
};

namespace detail {

inline std::string mark_of(const YAML::Node& node) {
  const YAML::Mark m = node.Mark();
  if (m.is_null()) return "";
  return "line " + std::to_string(m.line + 1) + ", column " + std::to_string(m.column + 1);
}

template <typename T>
std::optional<T> scalar_as(const YAML::Node& node, const std::string& key,
                           std::vector<std::string>& errors) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    errors.push_back(key + ": invalid value at " + mark_of(node));
    return std::nullopt;
  }
}

template <typename T>
std::vector<T> list_as(const YAML::Node& node, const std::string& key,
                       std::vector<std::string>& errors) {
  std::vector<T> out;
  if (node.IsScalar()) {
    if (auto v = scalar_as<T>(node, key, errors)) out.push_back(*v);
    return out;
  }
  if (!node.IsSequence()) {
    errors.push_back(key + ": expected a list at " + mark_of(node));
    return out;
  }
  for (const auto& item : node) {
    if (auto v = scalar_as<T>(item, key, errors)) out.push_back(*v);
  }
  return out;
}

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

// Parses a YAML plan. Relative image paths resolve against `base_dir`.
//
//   images: [a.png, b.pgm]        # or a directory path
//   dictionary: fallback:8,8,0    # or a .cscd file
//   sigmas: [15, 20, 25, 30, 35]
//   seeds: [0, 1]
//   variants: [csc, scsc, dcsc]
//   output: results
//   max_size: 512
//   full_size: false
//   solver: { lambda: 0.28, mu: 0.1, alpha: 0.2, beta: 0.2, rho: 15, eta: 1,
//             max_iter: 50, inner_sweeps: 1, cg_tol: 1e-5, cg_max_iter: 500,
//             jacobi: false, delta: 1, radius: 10, patch_size: 8, knn: 8,
//             primal_tol: 1e-4, dual_tol: 1e-4, lowpass_strength: 5,
//             intensity_scale: 1 }
inline ExperimentPlan parse_plan_text(const std::string& text,
                                      const std::filesystem::path& base_dir = ".") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw PlanError("plan parse error at line " + std::to_string(e.mark.line + 1) +
                    ", column " + std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw PlanError("plan must be a YAML mapping of keys to values");

  static const std::set<std::string> top_keys{"images", "dictionary", "sigmas", "seeds",
                                              "variants", "output", "max_size", "full_size",
                                              "solver"};
  static const std::set<std::string> solver_keys{
      "lambda", "mu", "alpha", "beta", "rho", "eta", "max_iter", "inner_sweeps",
      "cg_tol", "cg_max_iter", "jacobi", "delta", "radius", "patch_size", "knn",
      "primal_tol", "dual_tol", "lowpass_strength", "intensity_scale"};

  std::vector<std::string> errors;
  ExperimentPlan plan;
  bool have_images = false;
  bool have_sigmas = false;
  bool have_variants = false;

  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    const YAML::Node& value = entry.second;
    if (!top_keys.contains(key)) {
      errors.push_back("unknown key '" + key + "' at " + detail::mark_of(entry.first));
      continue;
    }
    if (key == "images") {
      have_images = true;
      if (value.IsScalar()) {
        const std::filesystem::path dir = base_dir / value.as<std::string>();
        if (std::filesystem::is_directory(dir)) {
          std::vector<std::filesystem::path> found;
          for (const auto& f : std::filesystem::directory_iterator(dir)) {
            const std::string ext = detail::lower_extension(f.path());
            if (ext == ".png" || ext == ".pgm" || ext == ".pnm") found.push_back(f.path());
          }
          std::sort(found.begin(), found.end());
          plan.images = std::move(found);
          continue;
        }
      }
      for (const auto& p : detail::list_as<std::string>(value, key, errors)) {
        const std::filesystem::path path(p);
        plan.images.push_back(path.is_absolute() ? path : base_dir / path);
      }
    } else if (key == "dictionary") {
      if (auto v = detail::scalar_as<std::string>(value, key, errors)) plan.dictionary = *v;
    } else if (key == "sigmas") {
      have_sigmas = true;
      plan.sigmas = detail::list_as<double>(value, key, errors);
    } else if (key == "seeds") {
      plan.seeds = detail::list_as<std::uint64_t>(value, key, errors);
    } else if (key == "variants") {
      have_variants = true;
      for (const auto& name : detail::list_as<std::string>(value, key, errors)) {
        try {
          plan.variants.push_back(parse_variant(name));
        } catch (const ParameterError& e) {
          errors.push_back(std::string("variants: ") + e.what());
        }
      }
    } else if (key == "output") {
      if (auto v = detail::scalar_as<std::string>(value, key, errors)) plan.output = *v;
    } else if (key == "max_size") {
      if (auto v = detail::scalar_as<std::size_t>(value, key, errors)) plan.max_size = *v;
    } else if (key == "full_size") {
      if (auto v = detail::scalar_as<bool>(value, key, errors)) plan.full_size = *v;
    } else if (key == "solver") {
      if (!value.IsMap()) {
        errors.push_back("solver: expected a mapping at " + detail::mark_of(value));
        continue;
      }
      SolverConfig& s = plan.solver;
      for (const auto& se : value) {
        const auto sk = se.first.as<std::string>();
        const YAML::Node& sv = se.second;
        const std::string name = "solver." + sk;
        if (!solver_keys.contains(sk)) {
          errors.push_back("unknown key '" + name + "' at " + detail::mark_of(se.first));
          continue;
        }
        const auto real = [&](double& target) {
          if (auto v = detail::scalar_as<double>(sv, name, errors)) target = *v;
        };
        const auto count = [&](std::size_t& target) {
          if (auto v = detail::scalar_as<long long>(sv, name, errors)) {
            if (*v < 0) {
              errors.push_back(name + " must be >= 0");
            } else {
              target = static_cast<std::size_t>(*v);
            }
          }
        };
        if (sk == "lambda") real(s.lambda);
        else if (sk == "mu") real(s.mu);
        else if (sk == "alpha") real(s.alpha);
        else if (sk == "beta") real(s.beta);
        else if (sk == "rho") {
          double rho = 0.0;
          real(rho);
          s.rho = rho;
        } else if (sk == "eta") real(s.eta);
        else if (sk == "max_iter") count(s.max_outer_iterations);
        else if (sk == "inner_sweeps") count(s.inner_sweeps);
        else if (sk == "cg_tol") real(s.cg.tolerance);
        else if (sk == "cg_max_iter") count(s.cg.max_iterations);
        else if (sk == "jacobi") {
          if (auto v = detail::scalar_as<bool>(sv, name, errors)) s.cg.jacobi = *v;
        } else if (sk == "delta") real(s.graph.delta);
        else if (sk == "radius") count(s.graph.neighbor_radius);
        else if (sk == "patch_size") count(s.graph.patch_size);
        else if (sk == "knn") count(s.graph.knn);
        else if (sk == "primal_tol") real(s.primal_tolerance);
        else if (sk == "dual_tol") real(s.dual_tolerance);
        else if (sk == "lowpass_strength") real(s.lowpass_strength);
        else if (sk == "intensity_scale") real(s.intensity_scale);
      }
    }
  }

  if (!have_images || plan.images.empty()) errors.push_back("images: at least one image is required");
  if (!have_sigmas || plan.sigmas.empty()) errors.push_back("sigmas: at least one sigma is required");
  if (!have_variants || plan.variants.empty()) {
    errors.push_back("variants: at least one variant is required");
  }
  if (plan.seeds.empty()) errors.push_back("seeds: at least one seed is required");
  for (double sigma : plan.sigmas) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
      errors.push_back("sigmas: " + detail::format_number(sigma) + " must be >= 0");
    }
  }
  if (plan.max_size < 1) errors.push_back("max_size must be >= 1");
  try {
    plan.solver.validate();
  } catch (const ParameterError& e) {
    errors.push_back(std::string("solver: ") + e.what());
  }

  if (!errors.empty()) {
    std::string message = "invalid plan:";
    for (const auto& e : errors) message += "\n  " + e;
    throw PlanError(message);
  }
  return plan;
}

inline ExperimentPlan parse_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plan file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_plan_text(buffer.str(), path.parent_path());
}

// Normalized YAML echo of a plan (every solver field explicit).
inline std::string dump_plan(const ExperimentPlan& plan) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "images" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : plan.images) out << p.string();
  out << YAML::EndSeq;
  out << YAML::Key << "dictionary" << YAML::Value << plan.dictionary;
  out << YAML::Key << "sigmas" << YAML::Value << YAML::Flow << plan.sigmas;
  out << YAML::Key << "seeds" << YAML::Value << YAML::Flow << plan.seeds;
  out << YAML::Key << "variants" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (Variant v : plan.variants) out << to_string(v);
  out << YAML::EndSeq;
  out << YAML::Key << "output" << YAML::Value << plan.output.string();
  out << YAML::Key << "max_size" << YAML::Value << plan.max_size;
  out << YAML::Key << "full_size" << YAML::Value << plan.full_size;
  const SolverConfig& s = plan.solver;
  out << YAML::Key << "solver" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "lambda" << YAML::Value << s.lambda;
  out << YAML::Key << "mu" << YAML::Value << s.mu;
  out << YAML::Key << "alpha" << YAML::Value << s.alpha;
  out << YAML::Key << "beta" << YAML::Value << s.beta;
  out << YAML::Key << "rho" << YAML::Value << s.effective_rho();
  out << YAML::Key << "eta" << YAML::Value << s.eta;
  out << YAML::Key << "max_iter" << YAML::Value << s.max_outer_iterations;
  out << YAML::Key << "inner_sweeps" << YAML::Value << s.inner_sweeps;
  out << YAML::Key << "cg_tol" << YAML::Value << s.cg.tolerance;
  out << YAML::Key << "cg_max_iter" << YAML::Value << s.cg.max_iterations;
  out << YAML::Key << "jacobi" << YAML::Value << s.cg.jacobi;
  out << YAML::Key << "delta" << YAML::Value << s.graph.delta;
  out << YAML::Key << "radius" << YAML::Value << s.graph.neighbor_radius;
  out << YAML::Key << "patch_size" << YAML::Value << s.graph.patch_size;
  out << YAML::Key << "knn" << YAML::Value << s.graph.knn;
  out << YAML::Key << "primal_tol" << YAML::Value << s.primal_tolerance;
  out << YAML::Key << "dual_tol" << YAML::Value << s.dual_tolerance;
  out << YAML::Key << "lowpass_strength" << YAML::Value << s.lowpass_strength;
  out << YAML::Key << "intensity_scale" << YAML::Value << s.intensity_scale;
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// Loads an image and center-crops it to `max_size` unless `full_size`.
inline ImageGrid load_working_image(const std::filesystem::path& path, std::size_t max_size,
                                    bool full_size, std::ostream* log) {
  ImageGrid image = read_image(path);
  if (!full_size && (image.rows() > max_size || image.cols() > max_size)) {
    if (log != nullptr) {
      *log << "warning: " << path.string() << " is " << image.rows() << "x" << image.cols()
           << ", center-cropping to at most " << max_size << "x" << max_size
           << " (use full-size to disable)\n";
    }
    image = center_crop(image, max_size, max_size);
  }
  return image;
}

struct ResultRow {
  std::string image;
  Variant variant = Variant::dcsc;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double psnr_noisy = 0.0;
  double psnr_denoised = 0.0;
  std::size_t iterations = 0;
  double wall_ms = 0.0;
  // Empty on success.
  std::string error;
  bool solver_failure = false;
};

struct BenchmarkOutcome {
  std::vector<ResultRow> rows;
  bool any_failed = false;
};

// One row per (image, variant, sigma, seed) in that nesting order. Rows run on
// `jobs` worker threads; the output order does not depend on scheduling.
inline BenchmarkOutcome run_benchmark(const ExperimentPlan& plan, std::size_t jobs = 1,
                                      std::ostream* log = nullptr) {
  const Dictionary dict = resolve_dictionary(plan.dictionary);
  std::vector<ImageGrid> images;
  std::vector<std::string> ids;
  for (const auto& path : plan.images) {
    images.push_back(load_working_image(path, plan.max_size, plan.full_size, log));
    ids.push_back(path.stem().string());
  }

  struct Task {
    std::size_t image;
    Variant variant;
    double sigma;
    std::uint64_t seed;
  };
  std::vector<Task> tasks;
  for (std::size_t i = 0; i < images.size(); ++i) {
    for (Variant v : plan.variants) {
      for (double sigma : plan.sigmas) {
        for (std::uint64_t seed : plan.seeds) tasks.push_back({i, v, sigma, seed});
      }
    }
  }

  BenchmarkOutcome outcome;
  outcome.rows.resize(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const Task& task = tasks[t];
      ResultRow& row = outcome.rows[t];
      row.image = ids[task.image];
      row.variant = task.variant;
      row.sigma = task.sigma;
      row.seed = task.seed;
      const auto start = std::chrono::steady_clock::now();
      try {
        const ImageGrid& clean = images[task.image];
        const ImageGrid noisy = add_gaussian_noise(clean, {task.sigma, task.seed});
        SolverConfig cfg = plan.solver;
        cfg.variant = task.variant;
        const SolveResult result = solve(noisy, dict, cfg);
        row.psnr_noisy = psnr(noisy, clean);
        row.psnr_denoised = psnr(result.reconstruction, clean);
        row.iterations = result.iterations;
      } catch (const SolverError& e) {
        row.error = e.what();
        row.solver_failure = true;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      row.wall_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - start).count();
      if (log != nullptr) {
        std::lock_guard lock(log_mutex);
        *log << row.image << ' ' << to_string(row.variant) << " sigma="
             << detail::format_number(row.sigma) << " seed=" << row.seed << ' '
             << (row.error.empty() ? "psnr=" + detail::format_number(row.psnr_denoised)
                                   : "error: " + row.error)
             << '\n';
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  outcome.any_failed = std::any_of(outcome.rows.begin(), outcome.rows.end(),
                                   [](const ResultRow& r) { return !r.error.empty(); });
  return outcome;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c == '\n' ? ' ' : c;
  }
  return quoted + "\"";
}

inline std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace detail

// image,variant,sigma,seed,psnr_noisy,psnr_denoised,iterations,error
// Wall-clock times live in timings.csv so this file is reproducible.
inline void write_results_csv(const std::vector<ResultRow>& rows,
                              const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "image,variant,sigma,seed,psnr_noisy,psnr_denoised,iterations,error\n";
  for (const auto& r : rows) {
    out << detail::csv_field(r.image) << ',' << to_string(r.variant) << ','
        << detail::format_number(r.sigma) << ',' << r.seed << ',';
    if (r.error.empty()) {
      out << detail::format_number(r.psnr_noisy) << ',' << detail::format_number(r.psnr_denoised)
          << ',' << r.iterations << ",\n";
    } else {
      out << ",,," << detail::csv_field(r.error) << '\n';
    }
  }
}

// image,variant,sigma,seed,wall_ms
inline void write_timings_csv(const std::vector<ResultRow>& rows,
                              const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "image,variant,sigma,seed,wall_ms\n";
  for (const auto& r : rows) {
    out << detail::csv_field(r.image) << ',' << to_string(r.variant) << ','
        << detail::format_number(r.sigma) << ',' << r.seed << ','
        << detail::format_number(r.wall_ms) << '\n';
  }
}

struct AverageRow {
  Variant variant = Variant::dcsc;
  double sigma = 0.0;
  std::size_t count = 0;
  double mean_psnr_noisy = 0.0;
  double mean_psnr_denoised = 0.0;
};

// Per-(variant, sigma) means over successful rows, in first-appearance order.
inline std::vector<AverageRow> average_rows(const std::vector<ResultRow>& rows) {
  std::vector<AverageRow> out;
  for (const auto& r : rows) {
    if (!r.error.empty()) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const AverageRow& a) {
      return a.variant == r.variant && a.sigma == r.sigma;
    });
    if (it == out.end()) {
      out.push_back({r.variant, r.sigma, 0, 0.0, 0.0});
      it = std::prev(out.end());
    }
    ++it->count;
    it->mean_psnr_noisy += r.psnr_noisy;
    it->mean_psnr_denoised += r.psnr_denoised;
  }
  for (auto& a : out) {
    a.mean_psnr_noisy /= static_cast<double>(a.count);
    a.mean_psnr_denoised /= static_cast<double>(a.count);
  }
  return out;
}

// variant,sigma,count,mean_psnr_noisy,mean_psnr_denoised
inline void write_averages_csv(const std::vector<AverageRow>& averages,
                               const std::filesystem::path& path) {
  auto out = detail::open_csv(path);
  out << "variant,sigma,count,mean_psnr_noisy,mean_psnr_denoised\n";
  for (const auto& a : averages) {
    out << to_string(a.variant) << ',' << detail::format_number(a.sigma) << ',' << a.count << ','
        << detail::format_number(a.mean_psnr_noisy) << ','
        << detail::format_number(a.mean_psnr_denoised) << '\n';
  }
}

// sigma,dcsc,scsc: mean denoised PSNR of the two graph variants per noise
// level, for plotting. Missing series are left empty.
inline void write_fig1_csv(const std::vector<AverageRow>& averages,
                           const std::filesystem::path& path) {
  std::map<double, std::pair<std::optional<double>, std::optional<double>>> series;
  for (const auto& a : averages) {
    if (a.variant == Variant::dcsc) series[a.sigma].first = a.mean_psnr_denoised;
    if (a.variant == Variant::scsc) series[a.sigma].second = a.mean_psnr_denoised;
  }
  auto out = detail::open_csv(path);
  out << "sigma,dcsc,scsc\n";
  for (const auto& [sigma, values] : series) {
    out << detail::format_number(sigma) << ','
        << (values.first ? detail::format_number(*values.first) : "") << ','
        << (values.second ? detail::format_number(*values.second) : "") << '\n';
  }
}

// Writes results.csv, averages.csv, fig1.csv and timings.csv under `dir`.
inline void write_benchmark_outputs(const BenchmarkOutcome& outcome,
                                    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_results_csv(outcome.rows, dir / "results.csv");
  const auto averages = average_rows(outcome.rows);
  write_averages_csv(averages, dir / "averages.csv");
  write_fig1_csv(averages, dir / "fig1.csv");
  write_timings_csv(outcome.rows, dir / "timings.csv");
}

}  // namespace dcsc

#endif  // DCSC_EXPERIMENT_HPP
