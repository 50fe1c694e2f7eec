#include "uot/measures.hpp"

#include <cmath>
#include <sstream>

#include "uot/error.hpp"

namespace uot {

DiscreteMeasure::DiscreteMeasure(RowMatrix points, Vector weights)
    : points_(std::move(points)), weights_(std::move(weights)) {
  if (points_.rows() == 0) throw_invalid("measure has no points");
  if (points_.rows() != weights_.size()) {
    throw_invalid("measure has " + std::to_string(points_.rows()) + " points but " +
                  std::to_string(weights_.size()) + " weights");
  }
  if (!points_.allFinite()) throw_invalid("measure points must be finite");
  for (Eigen::Index i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
      throw Error(ErrorKind::InvalidInput, "measure weights must be finite and > 0",
                  static_cast<std::size_t>(i));
    }
  }
  total_mass_ = weights_.sum();
  if (!std::isfinite(total_mass_)) throw_invalid("measure total mass is not finite");
  log_weights_ = weights_.array().log().matrix();
}

DiscreteMeasure DiscreteMeasure::uniform(RowMatrix points, double total_mass) {
  if (!(total_mass > 0.0)) throw_invalid("total mass must be > 0");
  const auto n = points.rows();
  if (n == 0) throw_invalid("measure has no points");
  return DiscreteMeasure(std::move(points),
                         Vector::Constant(n, total_mass / static_cast<double>(n)));
}

std::optional<std::string> DiscreteMeasure::balance_warning(double max_ratio) const {
  const double ratio = max_weight() / min_weight();
  if (ratio <= max_ratio) return std::nullopt;
  std::ostringstream os;
  os << "weight ratio max/min = " << ratio << " exceeds " << max_ratio
     << "; smoothness and conditioning estimates assume balanced weights";
  return os.str();
}

CostMatrix::CostMatrix(RowMatrix values) : values_(std::move(values)) {
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      const double c = values_(i, j);
      if (!std::isfinite(c) || c < 0.0) {
        throw Error(ErrorKind::InvalidInput, "cost entries must be finite and >= 0",
                    static_cast<std::size_t>(i));
      }
    }
  }
}

void cost_row(const Eigen::Ref<const Vector>& x, const RowMatrix& target_points, Metric metric,
              Eigen::Ref<Vector> out) {
  const Eigen::Index n = target_points.rows();
  const Eigen::Index d = target_points.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    const double* y = target_points.row(j).data();
    double s = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
      const double diff = x[k] - y[k];
      s += diff * diff;
    }
    out[j] = metric == Metric::Euclidean ? std::sqrt(s) : s;
  }
}

CostMatrix build_cost_matrix(const RowMatrix& source_points, const RowMatrix& target_points,
                             Metric metric) {
  if (source_points.rows() == 0 || target_points.rows() == 0) {
    throw_invalid("cost matrix needs non-empty point sets");
  }
  if (source_points.cols() != target_points.cols()) {
    throw_invalid("dimension mismatch: source d=" + std::to_string(source_points.cols()) +
                  ", target d=" + std::to_string(target_points.cols()));
  }
  RowMatrix values(source_points.rows(), target_points.rows());
  Vector row(target_points.rows());
  for (Eigen::Index i = 0; i < source_points.rows(); ++i) {
    cost_row(source_points.row(i).transpose(), target_points, metric, row);
    values.row(i) = row.transpose();
  }
  return CostMatrix(std::move(values));
}

SampleSource SampleSource::finite(RowMatrix points, const Vector& weights, std::uint64_t seed) {
  // Validates the weights with the same rules as a measure.
  DiscreteMeasure measure(points, weights);
  SampleSource s;
  s.mode_ = SampleMode::FiniteDataset;
  s.total_mass_ = measure.total_mass();
  s.dim_ = static_cast<std::size_t>(points.cols());
  s.points_ = std::move(points);
  s.index_weights_.assign(weights.data(), weights.data() + weights.size());
  s.reseed(seed);
  return s;
}

SampleSource SampleSource::gaussian_mixture(std::vector<GaussianMode> modes, std::size_t dim,
                                            std::uint64_t seed, double total_mass) {
  if (modes.empty()) throw_invalid("gaussian mixture needs at least one mode");
  if (dim == 0) throw_invalid("gaussian mixture dimension must be >= 1");
  if (!(total_mass > 0.0) || !std::isfinite(total_mass)) throw_invalid("total mass must be > 0");
  for (const auto& m : modes) {
    if (static_cast<std::size_t>(m.mean.size()) != dim) {
      throw_invalid("gaussian mode mean has wrong dimension");
    }
    if (!(m.scale >= 0.0) || !std::isfinite(m.scale) || !m.mean.allFinite()) {
      throw_invalid("gaussian mode needs finite mean and scale >= 0");
    }
  }
  SampleSource s;
  s.mode_ = SampleMode::GeneratorStream;
  s.total_mass_ = total_mass;
  s.dim_ = dim;
  s.modes_ = std::move(modes);
  s.reseed(seed);
  return s;
}

void SampleSource::reseed(std::uint64_t seed) {
  seed_ = seed;
  rng_.seed(seed);
  if (mode_ == SampleMode::FiniteDataset) {
    index_dist_ = std::discrete_distribution<std::size_t>(index_weights_.begin(),
                                                          index_weights_.end());
  } else {
    mode_dist_ = std::uniform_int_distribution<std::size_t>(0, modes_.size() - 1);
    normal_ = std::normal_distribution<double>(0.0, 1.0);
  }
}

std::size_t SampleSource::draw_index() {
  if (mode_ != SampleMode::FiniteDataset) throw_invalid("draw_index needs a finite dataset");
  return index_dist_(rng_);
}

std::size_t SampleSource::draw(Eigen::Ref<Vector> out) {
  if (static_cast<std::size_t>(out.size()) != dim_) throw_invalid("draw buffer has wrong size");
  if (mode_ == SampleMode::FiniteDataset) {
    const std::size_t i = index_dist_(rng_);
    out = points_.row(static_cast<Eigen::Index>(i)).transpose();
    return i;
  }
  const GaussianMode& m = modes_[mode_dist_(rng_)];
  const double sd = std::sqrt(m.scale);
  for (std::size_t k = 0; k < dim_; ++k) {
    out[static_cast<Eigen::Index>(k)] = m.mean[static_cast<Eigen::Index>(k)] + sd * normal_(rng_);
  }
  return kNoIndex;
}

SampleSource gaussian_mixture_sampler(std::vector<GaussianMode> modes, std::size_t dim,
                                      std::uint64_t seed, double total_mass) {
  return SampleSource::gaussian_mixture(std::move(modes), dim, seed, total_mass);
}

std::pair<DiscreteMeasure, SampleSource> empirical_source(RowMatrix points, Vector weights,
                                                          std::uint64_t seed) {
  DiscreteMeasure measure(points, weights);
  SampleSource source = SampleSource::finite(std::move(points), weights, seed);
  return {std::move(measure), std::move(source)};
}

RowMatrix uniform_cube_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  RowMatrix pts(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (Eigen::Index k = 0; k < pts.cols(); ++k) pts(i, k) = unif(rng);
  }
  return pts;
}

}  // namespace uot
