#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace uot {

using Vector = Eigen::VectorXd;
/// Row-major so that a point (or a cost row) is contiguous.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Weighted point cloud sum_i w_i delta_{x_i}; one point per row.
class DiscreteMeasure {
 public:
  DiscreteMeasure(RowMatrix points, Vector weights);

  /// Uniform weights total_mass / n.
  static DiscreteMeasure uniform(RowMatrix points, double total_mass = 1.0);

  std::size_t size() const { return static_cast<std::size_t>(points_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(points_.cols()); }
  const RowMatrix& points() const { return points_; }
  const Vector& weights() const { return weights_; }
  const Vector& log_weights() const { return log_weights_; }
  double total_mass() const { return total_mass_; }
  double min_weight() const { return weights_.minCoeff(); }
  double max_weight() const { return weights_.maxCoeff(); }

  /// Non-empty when max/min weight exceeds `max_ratio`; solvers assume roughly
  /// balanced target weights.
  std::optional<std::string> balance_warning(double max_ratio = 10.0) const;

 private:
  RowMatrix points_;
  Vector weights_;
  Vector log_weights_;
  double total_mass_ = 0.0;
};

enum class Metric { SquaredEuclidean, Euclidean };

/// Dense n1 x n2 matrix of c(x_i, y_j); entries are finite and non-negative.
class CostMatrix {
 public:
  explicit CostMatrix(RowMatrix values);

  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values_.cols()); }
  const RowMatrix& values() const { return values_; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  Eigen::Map<const Vector> row(std::size_t i) const {
    return Eigen::Map<const Vector>(values_.row(static_cast<Eigen::Index>(i)).data(),
                                    values_.cols());
  }
  double max_entry() const { return values_.size() ? values_.maxCoeff() : 0.0; }

 private:
  RowMatrix values_;
};

CostMatrix build_cost_matrix(const RowMatrix& source_points, const RowMatrix& target_points,
                             Metric metric = Metric::SquaredEuclidean);

/// c(x, y_j) for every target point y_j.
void cost_row(const Eigen::Ref<const Vector>& x, const RowMatrix& target_points, Metric metric,
              Eigen::Ref<Vector> out);

enum class SampleMode { FiniteDataset, GeneratorStream };

/// Isotropic Gaussian component with covariance `scale * I`.
struct GaussianMode {
  Vector mean;
  double scale = 1.0;
};

/// Seeded stream of i.i.d. draws from the normalized source measure mu / mu(X).
///
/// Finite mode draws dataset indices with replacement, proportionally to the
/// weights; generator mode samples an equal-weight Gaussian mixture. A single
/// instance must not be shared between threads.
class SampleSource {
 public:
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

  static SampleSource finite(RowMatrix points, const Vector& weights, std::uint64_t seed);
  static SampleSource gaussian_mixture(std::vector<GaussianMode> modes, std::size_t dim,
                                       std::uint64_t seed, double total_mass = 1.0);

  SampleMode mode() const { return mode_; }
  std::uint64_t seed() const { return seed_; }
  double total_mass() const { return total_mass_; }
  std::size_t dim() const { return dim_; }
  /// Number of stored points in finite mode, 0 in generator mode.
  std::size_t dataset_size() const { return static_cast<std::size_t>(points_.rows()); }
  const RowMatrix& dataset() const { return points_; }

  /// Writes one draw into `out` (length dim()) and returns its dataset index,
  /// or kNoIndex in generator mode.
  std::size_t draw(Eigen::Ref<Vector> out);
  /// Finite mode only.
  std::size_t draw_index();
  /// Restart the stream as if freshly constructed with `seed`.
  void reseed(std::uint64_t seed);

 private:
  SampleSource() = default;

  SampleMode mode_ = SampleMode::FiniteDataset;
  std::uint64_t seed_ = 0;
  double total_mass_ = 1.0;
  std::size_t dim_ = 0;
  std::mt19937_64 rng_;

  RowMatrix points_;
  std::vector<double> index_weights_;
  std::discrete_distribution<std::size_t> index_dist_;

  std::vector<GaussianMode> modes_;
  std::uniform_int_distribution<std::size_t> mode_dist_;
  std::normal_distribution<double> normal_;
};

SampleSource gaussian_mixture_sampler(std::vector<GaussianMode> modes, std::size_t dim,
                                      std::uint64_t seed, double total_mass = 1.0);

/// Discrete source measure plus a with-replacement sampler over it.
std::pair<DiscreteMeasure, SampleSource> empirical_source(RowMatrix points, Vector weights,
                                                          std::uint64_t seed);

/// n points drawn uniformly from [0, 1]^dim.
RowMatrix uniform_cube_points(std::size_t n, std::size_t dim, std::uint64_t seed);

}  // namespace uot
