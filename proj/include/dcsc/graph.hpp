#ifndef DCSC_GRAPH_HPP
#define DCSC_GRAPH_HPP

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dcsc/core.hpp"
#include "dcsc/error.hpp"

namespace dcsc {

enum class Axis { rows, columns };

struct GraphConfig {
  // Shape factor of exp(-d^2 / delta^2).
  double delta = 1.0;
  // Line graphs connect nodes i, j with 0 < |i - j| <= neighbor_radius.
  std::size_t neighbor_radius = 10;
  // Non-local patch graph only.
  std::size_t patch_size = 8;
  std::size_t knn = 8;
  // Floor applied to vector norms inside the cosine similarity.
  double epsilon_norm = 1e-12;

  void validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("graph delta must be > 0");
    if (neighbor_radius < 1) throw ParameterError("graph neighbor_radius must be >= 1");
    if (patch_size < 1) throw ParameterError("graph patch_size must be >= 1");
    if (knn < 1) throw ParameterError("graph knn must be >= 1");
    if (!(epsilon_norm > 0.0)) throw ParameterError("graph epsilon_norm must be > 0");
  }
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// cos(a, b) with both norms floored at cfg.epsilon_norm.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b,
                                double epsilon_norm) {
  if (a.size() != b.size() || a.empty()) {
    throw DimensionError("cosine similarity needs two vectors of equal, non-zero length");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double sim = dot / (std::max(std::sqrt(na), epsilon_norm) *
                            std::max(std::sqrt(nb), epsilon_norm));
  return std::clamp(sim, -1.0, 1.0);
}

inline double weight_from_similarity(double similarity, double delta) {
  const double d = 1.0 - similarity;
  return std::exp(-(d * d) / (delta * delta));
}

// exp(-d^2 / delta^2) with cosine distance d = 1 - cos(a, b) in [0, 2], so
// positively parallel vectors get weight 1.
inline double cosine_edge_weight(std::span<const double> a, std::span<const double> b,
                                 const GraphConfig& cfg) {
  cfg.validate();
  return weight_from_similarity(cosine_similarity(a, b, cfg.epsilon_norm), cfg.delta);
}

// Undirected weighted graph with W symmetric, zero diagonal and entries in
// [0, 1]; D(i) = sum_{j != i} W(i, j); L = D - W. Stored sparse.
class GraphLaplacian {
 public:
  struct Edge {
    std::size_t i;
    std::size_t j;
    double weight;
  };

  GraphLaplacian() = default;

  // Each undirected edge listed once (either orientation); duplicates keep the
  // larger weight.
  GraphLaplacian(std::size_t size, const std::vector<Edge>& edges) : size_(size) {
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(2 * edges.size());
    for (const auto& e : edges) {
      if (e.i >= size || e.j >= size) throw DimensionError("edge endpoint out of range");
      if (e.i == e.j) throw ValidationError("graph edges may not be self-loops");
      if (!(e.weight >= 0.0 && e.weight <= 1.0)) {
        throw ValidationError("edge weights must lie in [0, 1]");
      }
      triplets.emplace_back(e.i, e.j, e.weight);
      triplets.emplace_back(e.j, e.i, e.weight);
    }
    const auto n = static_cast<Eigen::Index>(size);
    weights_.resize(n, n);
    weights_.setFromTriplets(triplets.begin(), triplets.end(),
                             [](double a, double b) { return std::max(a, b); });
    weights_.makeCompressed();
    degree_ = Eigen::VectorXd::Zero(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (SparseMatrix::InnerIterator it(weights_, r); it; ++it) degree_(r) += it.value();
    }
    SparseMatrix diag(n, n);
    diag.reserve(Eigen::VectorXi::Constant(n, 1));
    for (Eigen::Index r = 0; r < n; ++r) diag.insert(r, r) = degree_(r);
    laplacian_ = diag - weights_;
    laplacian_.makeCompressed();
  }

  std::size_t size() const noexcept { return size_; }
  const SparseMatrix& weights() const noexcept { return weights_; }
  const Eigen::VectorXd& degree() const noexcept { return degree_; }
  const SparseMatrix& laplacian() const noexcept { return laplacian_; }

  Eigen::MatrixXd weights_dense() const { return Eigen::MatrixXd(weights_); }
  Eigen::MatrixXd laplacian_dense() const { return Eigen::MatrixXd(laplacian_); }

  double weight(std::size_t i, std::size_t j) const {
    return weights_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  std::size_t size_ = 0;
  SparseMatrix weights_;
  Eigen::VectorXd degree_;
  SparseMatrix laplacian_;
};

namespace detail {

// Node vectors of a line graph as rows of a dense matrix.
inline Eigen::MatrixXd line_nodes(const ImageGrid& image, Axis axis) {
  using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMajorMatrix> s(image.values().data(),
                                           static_cast<Eigen::Index>(image.rows()),
                                           static_cast<Eigen::Index>(image.cols()));
  if (axis == Axis::rows) return s;
  return s.transpose();
}

inline std::span<const double> row_span(const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                            Eigen::RowMajor>& m,
                                        Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

}  // namespace detail

// Row graph (axis = rows, M nodes) or column graph (axis = columns, N nodes)
// of `image`; nodes i, j are joined when 0 < |i - j| <= cfg.neighbor_radius.
inline GraphLaplacian build_line_graph(const ImageGrid& image, Axis axis,
                                       const GraphConfig& cfg) {
  cfg.validate();
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> nodes =
      detail::line_nodes(image, axis);
  const auto n = static_cast<std::size_t>(nodes.rows());
  if (cfg.neighbor_radius >= n) {
    throw ParameterError("neighbor_radius " + std::to_string(cfg.neighbor_radius) +
                         " must be smaller than the node count " + std::to_string(n));
  }
  std::vector<GraphLaplacian::Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j <= std::min(n - 1, i + cfg.neighbor_radius); ++j) {
      const double w = cosine_edge_weight(detail::row_span(nodes, static_cast<Eigen::Index>(i)),
                                          detail::row_span(nodes, static_cast<Eigen::Index>(j)),
                                          cfg);
      edges.push_back({i, j, w});
    }
  }
  return GraphLaplacian(n, edges);
}

// Non-local graph whose vertices are the non-overlapping patch_size x
// patch_size tiles of an image in raster order (edge tiles zero-padded).
class PatchGraph {
 public:
  PatchGraph() = default;

  PatchGraph(std::size_t rows, std::size_t cols, std::size_t patch_size,
             GraphLaplacian tiles)
      : rows_(rows), cols_(cols), patch_(patch_size),
        tile_rows_((rows + patch_size - 1) / patch_size),
        tile_cols_((cols + patch_size - 1) / patch_size), tiles_(std::move(tiles)) {
    if (tiles_.size() != tile_rows_ * tile_cols_) {
      throw DimensionError("patch graph vertex count does not match the tiling");
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t patch_size() const noexcept { return patch_; }
  std::size_t tile_rows() const noexcept { return tile_rows_; }
  std::size_t tile_cols() const noexcept { return tile_cols_; }
  std::size_t tile_count() const noexcept { return tile_rows_ * tile_cols_; }
  const GraphLaplacian& tiles() const noexcept { return tiles_; }

  std::size_t tile_of(std::size_t r, std::size_t c) const {
    return (r / patch_) * tile_cols_ + c / patch_;
  }

  // Pixel of `tile` at in-tile offset (dr, dc); false when it falls outside
  // the image (zero padding).
  bool pixel_of(std::size_t tile, std::size_t dr, std::size_t dc, std::size_t& r,
                std::size_t& c) const {
    r = (tile / tile_cols_) * patch_ + dr;
    c = (tile % tile_cols_) * patch_ + dc;
    return r < rows_ && c < cols_;
  }

  // Tile `t` of a row-major M x N map, zero-padded, flattened row-major.
  std::vector<double> tile_vector(std::span<const double> map, std::size_t tile) const {
    std::vector<double> v(patch_ * patch_, 0.0);
    for (std::size_t dr = 0; dr < patch_; ++dr) {
      for (std::size_t dc = 0; dc < patch_; ++dc) {
        std::size_t r = 0;
        std::size_t c = 0;
        if (pixel_of(tile, dr, dc, r, c)) v[dr * patch_ + dc] = map[r * cols_ + c];
      }
    }
    return v;
  }

  // Pixel-level Laplacian induced by tile membership: every in-tile offset
  // carries its own copy of the tile graph.
  void apply(std::span<const double> in, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    const SparseMatrix& lap = tiles_.laplacian();
    for (Eigen::Index a = 0; a < lap.outerSize(); ++a) {
      for (SparseMatrix::InnerIterator it(lap, a); it; ++it) {
        const auto b = static_cast<std::size_t>(it.col());
        for (std::size_t dr = 0; dr < patch_; ++dr) {
          for (std::size_t dc = 0; dc < patch_; ++dc) {
            std::size_t ra = 0, ca = 0, rb = 0, cb = 0;
            if (pixel_of(static_cast<std::size_t>(a), dr, dc, ra, ca) &&
                pixel_of(b, dr, dc, rb, cb)) {
              out[ra * cols_ + ca] += it.value() * in[rb * cols_ + cb];
            }
          }
        }
      }
    }
  }

  // Diagonal of the pixel-level Laplacian.
  double diagonal(std::size_t r, std::size_t c) const {
    return tiles_.degree()(static_cast<Eigen::Index>(tile_of(r, c)));
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t patch_ = 1;
  std::size_t tile_rows_ = 0;
  std::size_t tile_cols_ = 0;
  GraphLaplacian tiles_;
};

// Each tile is linked to its cfg.knn most cosine-similar other tiles (ties to
// the lower index); W is symmetrized by elementwise max.
inline PatchGraph build_patch_graph(const ImageGrid& image, const GraphConfig& cfg) {
  cfg.validate();
  if (cfg.patch_size > std::min(image.rows(), image.cols())) {
    throw ParameterError("patch_size exceeds the image dimensions");
  }
  const PatchGraph layout(image.rows(), image.cols(), cfg.patch_size,
                          GraphLaplacian(((image.rows() + cfg.patch_size - 1) / cfg.patch_size) *
                                             ((image.cols() + cfg.patch_size - 1) / cfg.patch_size),
                                         {}));
  const std::size_t n = layout.tile_count();
  std::vector<std::vector<double>> vectors(n);
  for (std::size_t t = 0; t < n; ++t) vectors[t] = layout.tile_vector(image.values(), t);

  std::vector<GraphLaplacian::Edge> edges;
  std::vector<double> sim(n);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      sim[j] = j == i ? -2.0 : cosine_similarity(vectors[i], vectors[j], cfg.epsilon_norm);
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t keep = std::min(cfg.knn, n - 1);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        return sim[a] != sim[b] ? sim[a] > sim[b] : a < b;
                      });
    for (std::size_t m = 0; m < keep; ++m) {
      edges.push_back({i, order[m], weight_from_similarity(sim[order[m]], cfg.delta)});
    }
  }
  return PatchGraph(image.rows(), image.cols(), cfg.patch_size, GraphLaplacian(n, edges));
}

namespace detail {

// out += scale * op(in) where op(Z) = Z * L (column side) or L * Z (row side)
// for a row-major M x N map and a symmetric L.
inline void add_laplacian_product(const SparseMatrix& lap, Axis side, std::size_t rows,
                                  std::size_t cols, double scale, std::span<const double> in,
                                  std::span<double> out) {
  if (side == Axis::columns) {
    for (std::size_t i = 0; i < rows; ++i) {
      const double* zin = in.data() + i * cols;
      double* zout = out.data() + i * cols;
      for (Eigen::Index j = 0; j < lap.outerSize(); ++j) {
        double acc = 0.0;
        for (SparseMatrix::InnerIterator it(lap, j); it; ++it) acc += it.value() * zin[it.col()];
        zout[j] += scale * acc;
      }
    }
  } else {
    for (Eigen::Index i = 0; i < lap.outerSize(); ++i) {
      double* zout = out.data() + static_cast<std::size_t>(i) * cols;
      for (SparseMatrix::InnerIterator it(lap, i); it; ++it) {
        const double a = scale * it.value();
        const double* zin = in.data() + static_cast<std::size_t>(it.col()) * cols;
        for (std::size_t c = 0; c < cols; ++c) zout[c] += a * zin[c];
      }
    }
  }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace detail

// tr(x L x^T) for side = columns (L is N x N), tr(x^T L x) for side = rows
// (L is M x M); x is a row-major M x N map.
inline double glr_value(std::span<const double> map, std::size_t rows, std::size_t cols,
                        const GraphLaplacian& lap, Axis side) {
  if (map.size() != rows * cols) throw DimensionError("map buffer does not hold M*N values");
  const std::size_t expected = side == Axis::columns ? cols : rows;
  if (lap.size() != expected) {
    throw DimensionError("Laplacian size " + std::to_string(lap.size()) +
                         " does not match map dimension " + std::to_string(expected));
  }
  std::vector<double> product(map.size(), 0.0);
  detail::add_laplacian_product(lap.laplacian(), side, rows, cols, 1.0, map, product);
  return detail::dot(map, product);
}

// Requirements on the graph term of the coefficient-map objective. For a map
// x, apply() computes the gradient of quadratic(x) / 2, i.e. Q x with Q the
// symmetric PSD operator of the regularizer (weights included).
template <typename P>
concept GraphPrior = requires(const P& p, std::span<const double> in, std::span<double> out,
                              std::size_t r, std::size_t c) {
  { p.rows() } -> std::convertible_to<std::size_t>;
  { p.cols() } -> std::convertible_to<std::size_t>;
  { p.inert() } -> std::convertible_to<bool>;
  p.apply(in, out);
  { p.quadratic(in) } -> std::convertible_to<double>;
  { p.diagonal(r, c) } -> std::convertible_to<double>;
};

// Plain CSC: no graph term.
class NoGraphPrior {
 public:
  NoGraphPrior(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool inert() const noexcept { return true; }
  void apply(std::span<const double>, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
  }
  double quadratic(std::span<const double>) const { return 0.0; }
  double diagonal(std::size_t, std::size_t) const { return 0.0; }

 private:
  std::size_t rows_;
  std::size_t cols_;
};

// Row and column graph pair weighted by alpha (column graph) and beta (row
// graph). The operator Q = alpha Lc (x) I_M + beta I_N (x) Lr acts on a map Z
// as alpha Z Lc + beta Lr Z and is never materialized.
class DualGraphPrior {
 public:
  DualGraphPrior(GraphLaplacian column, GraphLaplacian row, double alpha, double beta)
      : column_(std::move(column)), row_(std::move(row)), alpha_(alpha), beta_(beta) {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) {
      throw ParameterError("dual graph weights alpha, beta must be >= 0");
    }
  }

  std::size_t rows() const noexcept { return row_.size(); }
  std::size_t cols() const noexcept { return column_.size(); }
  double alpha() const noexcept { return alpha_; }
  double beta() const noexcept { return beta_; }
  const GraphLaplacian& column() const noexcept { return column_; }
  const GraphLaplacian& row() const noexcept { return row_; }
  bool inert() const noexcept { return alpha_ == 0.0 && beta_ == 0.0; }

  void apply(std::span<const double> in, std::span<double> out) const {
    check(in.size());
    std::fill(out.begin(), out.end(), 0.0);
    if (alpha_ != 0.0) {
      detail::add_laplacian_product(column_.laplacian(), Axis::columns, rows(), cols(), alpha_,
                                    in, out);
    }
    if (beta_ != 0.0) {
      detail::add_laplacian_product(row_.laplacian(), Axis::rows, rows(), cols(), beta_, in, out);
    }
  }

  // alpha tr(x Lc x^T) + beta tr(x^T Lr x)
  double quadratic(std::span<const double> map) const {
    std::vector<double> product(map.size());
    apply(map, product);
    return detail::dot(map, product);
  }

  double diagonal(std::size_t r, std::size_t c) const {
    return alpha_ * column_.degree()(static_cast<Eigen::Index>(c)) +
           beta_ * row_.degree()(static_cast<Eigen::Index>(r));
  }

 private:
  void check(std::size_t n) const {
    if (n != rows() * cols()) throw DimensionError("map does not match the dual graph prior");
  }

  GraphLaplacian column_;
  GraphLaplacian row_;
  double alpha_;
  double beta_;
};

// Single non-local patch graph weighted by mu.
class PatchGraphPrior {
 public:
  PatchGraphPrior(PatchGraph graph, double mu) : graph_(std::move(graph)), mu_(mu) {
    if (!(mu >= 0.0)) throw ParameterError("patch graph weight mu must be >= 0");
  }

  std::size_t rows() const noexcept { return graph_.rows(); }
  std::size_t cols() const noexcept { return graph_.cols(); }
  double mu() const noexcept { return mu_; }
  const PatchGraph& graph() const noexcept { return graph_; }
  bool inert() const noexcept { return mu_ == 0.0; }

  void apply(std::span<const double> in, std::span<double> out) const {
    if (in.size() != rows() * cols()) throw DimensionError("map does not match the patch graph");
    graph_.apply(in, out);
    for (double& v : out) v *= mu_;
  }

  double quadratic(std::span<const double> map) const {
    std::vector<double> product(map.size());
    apply(map, product);
    return detail::dot(map, product);
  }

  double diagonal(std::size_t r, std::size_t c) const { return mu_ * graph_.diagonal(r, c); }

 private:
  PatchGraph graph_;
  double mu_;
};

static_assert(GraphPrior<NoGraphPrior>);
static_assert(GraphPrior<DualGraphPrior>);
static_assert(GraphPrior<PatchGraphPrior>);

// alpha tr(x Lc x^T) + beta tr(x^T Lr x) for one M x N map.
inline double dglr_value(std::span<const double> map, const DualGraphPrior& prior) {
  if (map.size() != prior.rows() * prior.cols()) {
    throw DimensionError("map does not match the dual graph prior");
  }
  return prior.quadratic(map);
}

// (row, col, value) triples of the non-zero entries of W and L.
inline void write_graph_csv(const GraphLaplacian& graph, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "matrix,row,col,value\n";
  out.precision(17);
  const auto dump = [&](const char* name, const SparseMatrix& m) {
    for (Eigen::Index r = 0; r < m.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator it(m, r); it; ++it) {
        out << name << ',' << it.row() << ',' << it.col() << ',' << it.value() << '\n';
      }
    }
  };
  dump("W", graph.weights());
  dump("L", graph.laplacian());
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace dcsc

#endif  // DCSC_GRAPH_HPP
