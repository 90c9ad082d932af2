#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "taco/imi.hpp"
#include "taco/matrix.hpp"

namespace taco::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("taco_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline DatasetMatrix gaussian_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                     float scale = 1.0f) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, scale);
  DatasetMatrix m(rows, cols);
  for (auto& v : m.values()) v = normal(rng);
  return m;
}

/// Gaussian mixture on a low-dimensional latent space with a decaying
/// spectrum, embedded linearly into `dim` dimensions plus isotropic noise.
/// Draws from one fixed mixture per `mixture_seed`; `sample_seed` picks the
/// points, so base and query sets can share a mixture.
inline DatasetMatrix clustered_dataset(std::size_t rows, std::size_t dim, std::uint64_t mixture_seed,
                                       std::uint64_t sample_seed, std::size_t latent = 24,
                                       std::size_t components = 64) {
  std::mt19937_64 mix(mixture_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> embed(dim * latent);
  for (auto& v : embed) v = normal(mix) / std::sqrt(static_cast<double>(latent));
  std::vector<double> scale(latent);
  for (std::size_t l = 0; l < latent; ++l) scale[l] = 10.0 * std::pow(0.88, static_cast<double>(l));
  std::vector<double> centers(components * latent);
  for (std::size_t c = 0; c < components; ++c) {
    for (std::size_t l = 0; l < latent; ++l) centers[c * latent + l] = 2.0 * scale[l] * normal(mix);
  }

  std::mt19937_64 rng(sample_seed);
  std::uniform_int_distribution<std::size_t> pick(0, components - 1);
  DatasetMatrix out(rows, dim);
  std::vector<double> z(latent);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t c = pick(rng);
    for (std::size_t l = 0; l < latent; ++l) z[l] = centers[c * latent + l] + scale[l] * normal(rng);
    auto row = out.row(i);
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.3 * normal(rng);
      for (std::size_t l = 0; l < latent; ++l) v += embed[j * latent + l] * z[l];
      row[j] = static_cast<float>(v);
    }
  }
  return out;
}

struct ActivationInstance {
  imi::InvertedMultiIndex index;
  imi::CentroidOrder order;
};

/// Random cell occupancy (including empty cells) and random centroid
/// distances for a K'-by-K' index over n points. Distances are drawn from a
/// small integer grid when `ties` is set so equal sums occur often.
inline ActivationInstance random_activation_instance(std::size_t clusters, std::size_t n,
                                                     std::mt19937_64& rng, bool ties = false) {
  std::uniform_int_distribution<std::uint32_t> label(0, static_cast<std::uint32_t>(clusters - 1));
  std::vector<std::uint32_t> l1(n), l2(n);
  for (std::size_t i = 0; i < n; ++i) {
    l1[i] = label(rng);
    l2[i] = label(rng);
  }
  ActivationInstance inst{imi::InvertedMultiIndex(clusters, 1, 1, std::vector<float>(clusters),
                                                  std::vector<float>(clusters), l1, l2),
                          {}};
  std::uniform_real_distribution<float> real(0.0f, 10.0f);
  std::uniform_int_distribution<int> grid(0, 4);
  auto fill = [&](std::vector<float>& dists, std::vector<std::uint32_t>& idx) {
    dists.resize(clusters);
    for (auto& d : dists) d = ties ? static_cast<float>(grid(rng)) : real(rng);
    idx.resize(clusters);
    for (std::uint32_t c = 0; c < clusters; ++c) idx[c] = c;
    std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
      return dists[a] < dists[b] || (dists[a] == dists[b] && a < b);
    });
  };
  fill(inst.order.dists1, inst.order.idx1);
  fill(inst.order.dists2, inst.order.idx2);
  return inst;
}

}  // namespace taco::testing
