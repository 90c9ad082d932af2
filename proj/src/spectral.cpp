#include "taco/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "taco/parallel.hpp"

namespace taco::spectral {
namespace {

constexpr std::size_t kCovarianceBlockRows = 4096;
constexpr std::size_t kMaxSweeps = 100;
constexpr double kOffDiagonalTolerance = 1e-9;
constexpr double kResidualTolerance = 1e-4;
constexpr double kZeroEigenvalueRatio = 1e-12;
constexpr double kLogTieTolerance = 1e-12;

void require_params(std::size_t dim, std::size_t num_subspaces, std::size_t subspace_dim) {
  if (num_subspaces < 1 || subspace_dim < 1) {
    throw Error(ErrorKind::kParameter, "num_subspaces and subspace_dim must be >= 1");
  }
  if (num_subspaces * subspace_dim > dim) {
    throw Error(ErrorKind::kCapacity,
                "num_subspaces * subspace_dim = " + std::to_string(num_subspaces) + " * " +
                    std::to_string(subspace_dim) + " = " +
                    std::to_string(num_subspaces * subspace_dim) + " exceeds dimension " +
                    std::to_string(dim));
  }
}

}  // namespace

double SubspaceAllocation::max_log_product() const {
  return log_products.empty() ? 0.0 : *std::ranges::max_element(log_products);
}

TransformModel::TransformModel(std::size_t dim, std::size_t num_subspaces,
                               std::size_t subspace_dim, std::vector<float> mean,
                               std::vector<float> basis)
    : dim_(dim),
      num_subspaces_(num_subspaces),
      subspace_dim_(subspace_dim),
      mean_(std::move(mean)),
      basis_(std::move(basis)) {
  require_params(dim_, num_subspaces_, subspace_dim_);
  if (mean_.size() != dim_ || basis_.size() != dim_ * output_dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "transform model storage does not match shape");
  }
}

void TransformModel::apply(std::span<const float> point, std::span<float> out) const {
  if (point.size() != dim_ || out.size() != output_dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "point dimension " + std::to_string(point.size()) + " vs model dimension " +
                    std::to_string(dim_));
  }
  thread_local std::vector<double> centered;
  centered.resize(dim_);
  for (std::size_t j = 0; j < dim_; ++j) {
    centered[j] = static_cast<double>(point[j]) - static_cast<double>(mean_[j]);
  }
  for (std::size_t c = 0; c < output_dim(); ++c) {
    const float* col = basis_.data() + c * dim_;
    double acc = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) acc += centered[j] * static_cast<double>(col[j]);
    out[c] = static_cast<float>(acc);
  }
}

CovarianceModel fit_covariance(const DatasetMatrix& data, std::size_t threads) {
  const std::size_t n = data.rows();
  const std::size_t d = data.cols();
  if (n < 2) {
    throw Error(ErrorKind::kInsufficientData,
                "covariance needs at least 2 rows, got " + std::to_string(n));
  }
  CovarianceModel model{d, std::vector<double>(d, 0.0), std::vector<double>(d * d, 0.0)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = data.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(row[j])) {
        throw Error(ErrorKind::kNumeric, "non-finite value in row " + std::to_string(i));
      }
      model.mean[j] += row[j];
    }
  }
  for (double& m : model.mean) m /= static_cast<double>(n);

  // Fixed-size row blocks reduced in block order, so the sum is independent
  // of the worker count.
  const std::size_t blocks = (n + kCovarianceBlockRows - 1) / kCovarianceBlockRows;
  std::vector<std::vector<double>> partial(blocks);
  parallel_for(blocks, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<double> centered(d);
    for (std::size_t b = begin; b < end; ++b) {
      auto& acc = partial[b];
      acc.assign(d * d, 0.0);
      const std::size_t stop = std::min(n, (b + 1) * kCovarianceBlockRows);
      for (std::size_t i = b * kCovarianceBlockRows; i < stop; ++i) {
        const auto row = data.row(i);
        for (std::size_t j = 0; j < d; ++j) centered[j] = row[j] - model.mean[j];
        for (std::size_t r = 0; r < d; ++r) {
          const double cr = centered[r];
          double* out = acc.data() + r * d;
          for (std::size_t c = r; c < d; ++c) out[c] += cr * centered[c];
        }
      }
    }
  });
  for (const auto& acc : partial) {
    for (std::size_t k = 0; k < d * d; ++k) model.cov[k] += acc[k];
  }
  const double denom = static_cast<double>(n - 1);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = r; c < d; ++c) {
      const double v = model.cov[r * d + c] / denom;
      model.cov[r * d + c] = v;
      model.cov[c * d + r] = v;
    }
  }
  return model;
}

EigenSystem eigendecompose(const CovarianceModel& model) {
  const std::size_t d = model.dim;
  if (d == 0 || model.cov.size() != d * d) {
    throw Error(ErrorKind::kDimensionMismatch, "covariance storage does not match dimension");
  }
  std::vector<double> a(d * d);
  for (std::size_t r = 0; r < d; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      a[r * d + c] = 0.5 * (model.at(r, c) + model.at(c, r));
    }
  }
  double frob = 0.0;
  for (double v : a) frob += v * v;
  frob = std::sqrt(frob);

  std::vector<double> v(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) v[i * d + i] = 1.0;

  auto max_off_diagonal = [&] {
    double m = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      for (std::size_t c = r + 1; c < d; ++c) m = std::max(m, std::abs(a[r * d + c]));
    }
    return m;
  };

  const double tol = kOffDiagonalTolerance * frob;
  std::size_t sweeps = 0;
  while (sweeps < kMaxSweeps && max_off_diagonal() > tol) {
    ++sweeps;
    for (std::size_t p = 0; p + 1 < d; ++p) {
      for (std::size_t q = p + 1; q < d; ++q) {
        const double apq = a[p * d + q];
        if (std::abs(apq) <= tol * 1e-3) continue;
        const double app = a[p * d + p];
        const double aqq = a[q * d + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        for (std::size_t k = 0; k < d; ++k) {
          if (k == p || k == q) continue;
          const double akp = a[k * d + p];
          const double akq = a[k * d + q];
          const double np = cs * akp - sn * akq;
          const double nq = sn * akp + cs * akq;
          a[k * d + p] = a[p * d + k] = np;
          a[k * d + q] = a[q * d + k] = nq;
        }
        a[p * d + p] = app - t * apq;
        a[q * d + q] = aqq + t * apq;
        a[p * d + q] = a[q * d + p] = 0.0;
        // v is row-major with eigenvector columns.
        for (std::size_t k = 0; k < d; ++k) {
          const double vkp = v[k * d + p];
          const double vkq = v[k * d + q];
          v[k * d + p] = cs * vkp - sn * vkq;
          v[k * d + q] = sn * vkp + cs * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::ranges::stable_sort(order, [&](std::size_t x, std::size_t y) {
    return a[x * d + x] > a[y * d + y];
  });

  EigenSystem eig;
  eig.dim = d;
  eig.sweeps = sweeps;
  eig.raw_eigenvalues.resize(d);
  eig.eigenvectors.resize(d * d);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t col = order[i];
    eig.raw_eigenvalues[i] = std::max(0.0, a[col * d + col]);
    double* dst = eig.eigenvectors.data() + i * d;
    std::size_t pivot = 0;
    for (std::size_t k = 0; k < d; ++k) {
      dst[k] = v[k * d + col];
      if (std::abs(dst[k]) > std::abs(dst[pivot])) pivot = k;
    }
    // Fix the sign so the largest-magnitude component is positive.
    if (dst[pivot] < 0.0) {
      for (std::size_t k = 0; k < d; ++k) dst[k] = -dst[k];
    }
  }

  // Residual check against the symmetrized input; the scale is the largest
  // eigenvalue magnitude (spectral norm).
  double spectral = 0.0;
  for (std::size_t i = 0; i < d; ++i) spectral = std::max(spectral, std::abs(a[i * d + i]));
  double worst = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const auto vec = eig.eigenvector(i);
    const double lambda = a[order[i] * d + order[i]];
    double res = 0.0;
    for (std::size_t r = 0; r < d; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += 0.5 * (model.at(r, c) + model.at(c, r)) * vec[c];
      const double diff = acc - lambda * vec[r];
      res += diff * diff;
    }
    worst = std::max(worst, std::sqrt(res));
  }
  if (spectral > 0.0 && worst > kResidualTolerance * spectral) {
    throw Error(ErrorKind::kConvergence, "Jacobi eigensolver residual " + std::to_string(worst) +
                                             " after " + std::to_string(sweeps) + " sweeps");
  }

  const double lambda_max = eig.raw_eigenvalues.front();
  eig.eigenvalues.resize(d);
  if (lambda_max <= 0.0) {
    std::ranges::fill(eig.eigenvalues, 1.0);
    eig.scale_factor = 1.0;
    return eig;
  }
  const double floor = kZeroEigenvalueRatio * lambda_max;
  double smallest = std::numeric_limits<double>::infinity();
  for (double raw : eig.raw_eigenvalues) smallest = std::min(smallest, std::max(raw, floor));
  eig.scale_factor = 1.0 / smallest;
  for (std::size_t i = 0; i < d; ++i) {
    eig.eigenvalues[i] = std::max(1.0, std::max(eig.raw_eigenvalues[i], floor) * eig.scale_factor);
  }
  return eig;
}

SubspaceAllocation allocate_eigensystem(const EigenSystem& eig, std::size_t num_subspaces,
                                        std::size_t subspace_dim) {
  require_params(eig.dim, num_subspaces, subspace_dim);
  SubspaceAllocation alloc;
  alloc.buckets.resize(num_subspaces);
  alloc.log_products.assign(num_subspaces, 0.0);
  const std::size_t total = num_subspaces * subspace_dim;
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t target = num_subspaces;
    for (std::size_t j = 0; j < num_subspaces; ++j) {
      if (alloc.buckets[j].size() >= subspace_dim) continue;
      if (target == num_subspaces) {
        target = j;
        continue;
      }
      // Log-sums of equal products can differ in the last bits.
      const double current = alloc.log_products[target];
      const double slack = kLogTieTolerance * std::max(1.0, std::abs(current));
      if (alloc.log_products[j] < current - slack) target = j;
    }
    alloc.buckets[target].push_back(i);
    alloc.log_products[target] += std::log(eig.eigenvalues[i]);
  }
  return alloc;
}

TransformModel fit_transform_model(const DatasetMatrix& data, std::size_t num_subspaces,
                                   std::size_t subspace_dim, FitReport* report,
                                   std::size_t threads) {
  require_params(data.cols(), num_subspaces, subspace_dim);
  const CovarianceModel cov = fit_covariance(data, threads);
  EigenSystem eig = eigendecompose(cov);
  SubspaceAllocation alloc = allocate_eigensystem(eig, num_subspaces, subspace_dim);

  const std::size_t d = data.cols();
  const std::size_t out_dim = num_subspaces * subspace_dim;
  std::vector<float> mean(d);
  std::ranges::transform(cov.mean, mean.begin(), [](double m) { return static_cast<float>(m); });
  std::vector<float> basis(d * out_dim);
  std::size_t c = 0;
  for (const auto& bucket : alloc.buckets) {
    for (std::size_t idx : bucket) {
      const auto vec = eig.eigenvector(idx);
      for (std::size_t k = 0; k < d; ++k) basis[c * d + k] = static_cast<float>(vec[k]);
      ++c;
    }
  }

  if (report != nullptr) {
    const double floor = kZeroEigenvalueRatio * eig.raw_eigenvalues.front();
    std::size_t rank = 0;
    for (double raw : eig.raw_eigenvalues) rank += (raw > floor && raw > 0.0) ? 1 : 0;
    if (rank < out_dim) {
      report->warnings.push_back("data rank " + std::to_string(rank) + " is below " +
                                 std::to_string(out_dim) +
                                 " transformed dimensions; zero eigenvalues were floored");
    }
    report->eigen = std::move(eig);
    report->allocation = std::move(alloc);
  }
  return TransformModel(d, num_subspaces, subspace_dim, std::move(mean), std::move(basis));
}

DatasetMatrix transform_points(const TransformModel& model, const DatasetMatrix& points,
                               std::size_t threads) {
  if (points.cols() != model.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "point dimension " + std::to_string(points.cols()) + " vs model dimension " +
                    std::to_string(model.dim()));
  }
  DatasetMatrix out(points.rows(), model.output_dim());
  parallel_for(points.rows(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) model.apply(points.row(i), out.row(i));
  });
  return out;
}

}  // namespace taco::spectral
