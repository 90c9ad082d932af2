#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "taco/matrix.hpp"

namespace taco::spectral {

/// Row mean and unbiased sample covariance (d x d, row-major, symmetric).
struct CovarianceModel {
  std::size_t dim = 0;
  std::vector<double> mean;
  std::vector<double> cov;

  double at(std::size_t i, std::size_t j) const { return cov[i * dim + j]; }
};

/// Eigenpairs sorted by descending eigenvalue. `eigenvalues` are the scaled
/// values used by the allocation (all >= 1); `raw_eigenvalues` are the
/// eigenvalues of the covariance itself, clamped at zero.
struct EigenSystem {
  std::size_t dim = 0;
  std::vector<double> eigenvalues;
  std::vector<double> raw_eigenvalues;
  std::vector<double> eigenvectors;  // eigenvector i occupies [i*dim, (i+1)*dim)
  double scale_factor = 1.0;         // eigenvalues[i] = max(raw[i], floor) * scale_factor
  std::size_t sweeps = 0;

  std::span<const double> eigenvector(std::size_t i) const {
    return {eigenvectors.data() + i * dim, dim};
  }
};

/// buckets[j] lists eigen-indices assigned to subspace j, in assignment order.
/// log_products[j] is the sum of log scaled eigenvalues in bucket j.
struct SubspaceAllocation {
  std::vector<std::vector<std::size_t>> buckets;
  std::vector<double> log_products;

  double max_log_product() const;
};

/// Centered linear map R^d -> R^(num_subspaces * subspace_dim).
class TransformModel {
 public:
  TransformModel() = default;
  TransformModel(std::size_t dim, std::size_t num_subspaces, std::size_t subspace_dim,
                 std::vector<float> mean, std::vector<float> basis);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_subspaces() const noexcept { return num_subspaces_; }
  std::size_t subspace_dim() const noexcept { return subspace_dim_; }
  std::size_t output_dim() const noexcept { return num_subspaces_ * subspace_dim_; }

  std::span<const float> mean() const noexcept { return mean_; }
  /// Column c of the concatenated basis; subspace j owns columns [j*s, (j+1)*s).
  std::span<const float> column(std::size_t c) const {
    return {basis_.data() + c * dim_, dim_};
  }
  const std::vector<float>& basis() const noexcept { return basis_; }

  /// Writes output_dim() coordinates of the centered projection of `point`.
  void apply(std::span<const float> point, std::span<float> out) const;

  bool operator==(const TransformModel&) const = default;

 private:
  std::size_t dim_ = 0;
  std::size_t num_subspaces_ = 0;
  std::size_t subspace_dim_ = 0;
  std::vector<float> mean_;
  std::vector<float> basis_;  // column-major d x output_dim
};

CovarianceModel fit_covariance(const DatasetMatrix& data, std::size_t threads = 0);

/// Cyclic Jacobi eigensolver for symmetric input.
EigenSystem eigendecompose(const CovarianceModel& model);

/// Greedy balanced assignment of the top num_subspaces * subspace_dim
/// eigenpairs: each goes to the non-full bucket with the smallest product.
SubspaceAllocation allocate_eigensystem(const EigenSystem& eig, std::size_t num_subspaces,
                                        std::size_t subspace_dim);

struct FitReport {
  std::vector<std::string> warnings;
  EigenSystem eigen;
  SubspaceAllocation allocation;
};

TransformModel fit_transform_model(const DatasetMatrix& data, std::size_t num_subspaces,
                                   std::size_t subspace_dim, FitReport* report = nullptr,
                                   std::size_t threads = 0);

DatasetMatrix transform_points(const TransformModel& model, const DatasetMatrix& points,
                               std::size_t threads = 0);

}  // namespace taco::spectral
