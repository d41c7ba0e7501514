#ifndef DCSC_REGULARIZERS_HPP
#define DCSC_REGULARIZERS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dcsc/core.hpp"
#include "dcsc/error.hpp"
#include "dcsc/graph.hpp"

namespace dcsc {

// sign(v) max(|v| - t, 0): the proximal operator of t |.|.
inline double soft_threshold(double value, double threshold) {
  if (!(threshold >= 0.0)) throw ParameterError("soft threshold must be >= 0");
  const double magnitude = std::abs(value) - threshold;
  if (magnitude <= 0.0) return 0.0;
  return std::copysign(magnitude, value);
}

// Exact minimizer over y of
//   lambda |y|_1 + rho/2 |x - y + u|^2 + eta/2 |y - z + v|^2,
// i.e. soft_threshold((rho (x + u) + eta (z - v)) / (rho + eta), lambda / (rho + eta)).
inline CoeffMapSet y_update(const CoeffMapSet& x, const CoeffMapSet& u, const CoeffMapSet& z,
                            const CoeffMapSet& v, double lambda, double rho, double eta) {
  require_same_shape(x, u, "y_update");
  require_same_shape(x, z, "y_update");
  require_same_shape(x, v, "y_update");
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
  if (!(rho > 0.0)) throw ParameterError("rho must be > 0");
  if (!(eta > 0.0)) throw ParameterError("eta must be > 0");
  const double denom = rho + eta;
  const double threshold = lambda / denom;
  CoeffMapSet y(x.count(), x.rows(), x.cols());
  auto xv = x.values();
  auto uv = u.values();
  auto zv = z.values();
  auto vv = v.values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) {
    const double w = (rho * (xv[i] + uv[i]) + eta * (zv[i] - vv[i])) / denom;
    yv[i] = soft_threshold(w, threshold);
  }
  return y;
}

// Plain CBPDN prox: soft_threshold(x + u, lambda / rho).
inline CoeffMapSet l1_prox(const CoeffMapSet& x, const CoeffMapSet& u, double lambda,
                           double rho) {
  require_same_shape(x, u, "l1_prox");
  if (!(lambda >= 0.0)) throw ParameterError("lambda must be >= 0");
  if (!(rho > 0.0)) throw ParameterError("rho must be > 0");
  CoeffMapSet y(x.count(), x.rows(), x.cols());
  auto xv = x.values();
  auto uv = u.values();
  auto yv = y.values();
  const double threshold = lambda / rho;
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = soft_threshold(xv[i] + uv[i], threshold);
  return y;
}

// (Q + eta I) Z for one row-major M x N map, Q being the prior's operator.
template <GraphPrior Prior>
void kron_operator_apply(std::span<const double> map, const Prior& prior, double eta,
                         std::span<double> out) {
  if (map.size() != prior.rows() * prior.cols() || out.size() != map.size()) {
    throw DimensionError("map does not match the graph prior dimensions");
  }
  prior.apply(map, out);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += eta * map[i];
}

template <GraphPrior Prior>
std::vector<double> kron_operator_apply(std::span<const double> map, const Prior& prior,
                                        double eta) {
  std::vector<double> out(map.size());
  kron_operator_apply(map, prior, eta, out);
  return out;
}

struct CGConfig {
  // Stop once ||A z - b|| / ||b|| <= tolerance.
  double tolerance = 1e-5;
  std::size_t max_iterations = 500;
  bool jacobi = false;

  void validate() const {
    if (!(tolerance > 0.0)) throw ParameterError("CG tolerance must be > 0");
    if (max_iterations < 1) throw ParameterError("CG max_iterations must be >= 1");
  }
};

struct CGReport {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

// Called after every CG iteration with (iteration, current iterate).
using CGObserver = std::function<void(std::size_t, std::span<const double>)>;

// Preconditioned conjugate gradient for a symmetric positive definite operator
// given as apply(in, out). `x` holds the initial guess on entry. An empty
// `inverse_diagonal` means no preconditioning.
template <typename Operator>
CGReport conjugate_gradient(const Operator& apply, std::span<const double> b, std::span<double> x,
                            const CGConfig& cfg, std::span<const double> inverse_diagonal = {},
                            const CGObserver& observer = {}) {
  cfg.validate();
  const std::size_t n = b.size();
  if (x.size() != n) throw DimensionError("CG: solution and right-hand side sizes differ");
  if (!inverse_diagonal.empty() && inverse_diagonal.size() != n) {
    throw DimensionError("CG: preconditioner size differs from the system size");
  }
  const double b_norm = std::sqrt(detail::dot(b, b));
  if (b_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    return {};
  }
  std::vector<double> r(n), z(n), p(n), ap(n);
  apply(std::span<const double>(x), std::span<double>(ap));
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  const auto precondition = [&] {
    if (inverse_diagonal.empty()) {
      std::copy(r.begin(), r.end(), z.begin());
    } else {
      for (std::size_t i = 0; i < n; ++i) z[i] = inverse_diagonal[i] * r[i];
    }
  };
  double residual = std::sqrt(detail::dot(r, r)) / b_norm;
  if (residual <= cfg.tolerance) return {0, residual};
  precondition();
  p = z;
  double rz = detail::dot(r, z);
  for (std::size_t it = 1; it <= cfg.max_iterations; ++it) {
    apply(std::span<const double>(p), std::span<double>(ap));
    const double pap = detail::dot(p, ap);
    if (!(pap > 0.0)) {
      throw SolverError("CG: operator is not positive definite along a search direction",
                        residual);
    }
    const double step = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += step * p[i];
      r[i] -= step * ap[i];
    }
    residual = std::sqrt(detail::dot(r, r)) / b_norm;
    if (observer) observer(it, std::span<const double>(x));
    if (residual <= cfg.tolerance) return {it, residual};
    precondition();
    const double rz_next = detail::dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  throw SolverError("CG did not reach relative residual " + std::to_string(cfg.tolerance) +
                        " within " + std::to_string(cfg.max_iterations) +
                        " iterations (final " + std::to_string(residual) + ")",
                    residual);
}

struct ZUpdate {
  CoeffMapSet z;
  std::size_t cg_iterations = 0;
  double max_relative_residual = 0.0;
};

// Solves (Q + eta I) vec(z_k) = eta vec(y_k + v_k) independently for every
// map k by matrix-free CG. `warm_start`, when given, seeds each solve.
template <GraphPrior Prior>
ZUpdate z_update(const CoeffMapSet& y, const CoeffMapSet& v, const Prior& prior, double eta,
                 const CGConfig& cg, const CoeffMapSet* warm_start = nullptr) {
  require_same_shape(y, v, "z_update");
  if (warm_start != nullptr) require_same_shape(y, *warm_start, "z_update warm start");
  if (!(eta > 0.0)) throw ParameterError("eta must be > 0");
  if (y.rows() != prior.rows() || y.cols() != prior.cols()) {
    throw DimensionError("z_update: maps do not match the graph prior");
  }
  const std::size_t rows = y.rows();
  const std::size_t cols = y.cols();
  std::vector<double> inverse_diagonal;
  if (cg.jacobi) {
    inverse_diagonal.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        inverse_diagonal[r * cols + c] = 1.0 / (prior.diagonal(r, c) + eta);
      }
    }
  }
  const auto op = [&](std::span<const double> in, std::span<double> out) {
    kron_operator_apply(in, prior, eta, out);
  };

  ZUpdate result{CoeffMapSet(y.count(), rows, cols), 0, 0.0};
  std::vector<double> rhs(rows * cols);
  for (std::size_t k = 0; k < y.count(); ++k) {
    auto yk = y.map(k);
    auto vk = v.map(k);
    for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = eta * (yk[i] + vk[i]);
    auto zk = result.z.map(k);
    if (warm_start != nullptr) {
      auto w = warm_start->map(k);
      std::copy(w.begin(), w.end(), zk.begin());
    }
    const CGReport report = conjugate_gradient(op, rhs, zk, cg, inverse_diagonal);
    result.cg_iterations += report.iterations;
    result.max_relative_residual = std::max(result.max_relative_residual,
                                            report.relative_residual);
  }
  return result;
}

// Inner splitting variables z (= y at consensus) and scaled multipliers v.
struct InnerState {
  CoeffMapSet z;
  CoeffMapSet v;
  double eta = 1.0;
  std::size_t iterations = 0;

  InnerState(std::size_t count, std::size_t rows, std::size_t cols, double eta_)
      : z(count, rows, cols), v(count, rows, cols), eta(eta_) {
    if (!(eta_ > 0.0)) throw ParameterError("eta must be > 0");
  }
};

struct InnerStep {
  CoeffMapSet y;
  std::size_t cg_iterations = 0;
};

// `sweeps` rounds of y-update (l1 prox), z-update (graph solve) and
// v <- v + y - z, warm-started from and writing back into `state`.
template <GraphPrior Prior>
InnerStep inner_admm_step(const CoeffMapSet& x, const CoeffMapSet& u, InnerState& state,
                          const Prior& prior, double lambda, double rho, const CGConfig& cg,
                          std::size_t sweeps = 1) {
  if (sweeps < 1) throw ParameterError("inner sweeps must be >= 1");
  require_same_shape(x, state.z, "inner_admm_step");
  InnerStep step{CoeffMapSet(), 0};
  for (std::size_t s = 0; s < sweeps; ++s) {
    step.y = y_update(x, u, state.z, state.v, lambda, rho, state.eta);
    ZUpdate zu = z_update(step.y, state.v, prior, state.eta, cg, &state.z);
    step.cg_iterations += zu.cg_iterations;
    state.z = std::move(zu.z);
    auto vv = state.v.values();
    auto yv = step.y.values();
    auto zv = state.z.values();
    for (std::size_t i = 0; i < vv.size(); ++i) vv[i] = vv[i] + yv[i] - zv[i];
    ++state.iterations;
  }
  return step;
}

}  // namespace dcsc

#endif  // DCSC_REGULARIZERS_HPP
