#include "taco/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "taco/parallel.hpp"

namespace taco {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kEmptyInput: return "empty_input";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kBounds: return "bounds";
    case ErrorKind::kDimensionMismatch: return "dimension_mismatch";
    case ErrorKind::kInsufficientData: return "insufficient_data";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kConvergence: return "convergence";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kParameter: return "parameter";
    case ErrorKind::kState: return "state";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kUnsupportedVersion: return "unsupported_version";
  }
  return "unknown";
}

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorKind::kIo, "read failure on '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "write failure on '" + path + "'");
}

}  // namespace detail

namespace dataio {
namespace {

// Shared record walker: calls emit(element_bits) for every element and
// returns (records, dimension).
template <typename Emit>
std::pair<std::size_t, std::size_t> walk_records(const std::vector<std::uint8_t>& bytes,
                                                  const std::string& path, Emit&& emit) {
  detail::ByteReader reader(bytes);
  std::size_t records = 0;
  std::size_t dim = 0;
  while (reader.remaining() > 0) {
    const std::size_t offset = reader.offset();
    if (reader.remaining() < 4) {
      throw Error(ErrorKind::kFormat, "'" + path + "': truncated record header at byte offset " +
                                          std::to_string(offset));
    }
    const std::int32_t declared = reader.get_i32();
    if (declared <= 0) {
      throw Error(ErrorKind::kFormat, "'" + path + "': non-positive dimension " +
                                          std::to_string(declared) + " at byte offset " +
                                          std::to_string(offset));
    }
    const auto d = static_cast<std::size_t>(declared);
    if (records == 0) {
      dim = d;
    } else if (d != dim) {
      throw Error(ErrorKind::kFormat, "'" + path + "': inconsistent dimension " +
                                          std::to_string(d) + " (expected " + std::to_string(dim) +
                                          ") at byte offset " + std::to_string(offset));
    }
    if (reader.remaining() < 4 * d) {
      throw Error(ErrorKind::kFormat, "'" + path + "': truncated record at byte offset " +
                                          std::to_string(offset));
    }
    for (std::size_t j = 0; j < d; ++j) emit(records, reader.get_u32());
    ++records;
  }
  if (records == 0) throw Error(ErrorKind::kEmptyInput, "'" + path + "' holds no records");
  return {records, dim};
}

void check_writable(std::size_t rows, const std::string& path) {
  if (rows == 0) throw Error(ErrorKind::kEmptyInput, "refusing to write empty matrix to '" + path + "'");
}

}  // namespace

DatasetMatrix read_vectors(const std::string& path, ElementKind kind) {
  const auto bytes = detail::read_file(path);
  std::vector<float> values;
  values.reserve(bytes.size() / 4);
  auto [n, d] = walk_records(bytes, path, [&](std::size_t row, std::uint32_t bits) {
    float v = kind == ElementKind::kFloat32
                  ? std::bit_cast<float>(bits)
                  : static_cast<float>(std::bit_cast<std::int32_t>(bits));
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::kFormat,
                  "'" + path + "': non-finite element in row " + std::to_string(row));
    }
    values.push_back(v);
  });
  return DatasetMatrix(n, d, std::move(values));
}

void write_vectors(const DatasetMatrix& matrix, const std::string& path, ElementKind kind) {
  check_writable(matrix.rows(), path);
  detail::ByteWriter writer;
  writer.bytes().reserve(matrix.rows() * (4 + 4 * matrix.cols()));
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    writer.put_i32(static_cast<std::int32_t>(matrix.cols()));
    for (float v : matrix.row(i)) {
      if (kind == ElementKind::kFloat32) {
        writer.put_f32(v);
      } else {
        writer.put_i32(static_cast<std::int32_t>(v));
      }
    }
  }
  detail::write_file(path, writer.bytes());
}

IdMatrix read_ids(const std::string& path) {
  const auto bytes = detail::read_file(path);
  std::vector<std::int32_t> values;
  values.reserve(bytes.size() / 4);
  auto [n, d] = walk_records(bytes, path, [&](std::size_t, std::uint32_t bits) {
    values.push_back(std::bit_cast<std::int32_t>(bits));
  });
  return IdMatrix(n, d, std::move(values));
}

void write_ids(const IdMatrix& matrix, const std::string& path) {
  check_writable(matrix.rows(), path);
  detail::ByteWriter writer;
  writer.bytes().reserve(matrix.rows() * (4 + 4 * matrix.cols()));
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    writer.put_i32(static_cast<std::int32_t>(matrix.cols()));
    for (std::int32_t v : matrix.row(i)) writer.put_i32(v);
  }
  detail::write_file(path, writer.bytes());
}

Subset sample_subset(const DatasetMatrix& matrix, std::size_t m, std::uint64_t seed) {
  const std::size_t n = matrix.rows();
  if (m < 1 || m > n) {
    throw Error(ErrorKind::kBounds, "sample size " + std::to_string(m) + " outside [1, " +
                                        std::to_string(n) + "]");
  }
  // Partial Fisher-Yates: the first m slots end up a uniform m-subset.
  std::vector<std::uint32_t> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(ids[i], ids[pick(rng)]);
  }
  ids.resize(m);

  Subset out{DatasetMatrix(m, matrix.cols()), std::move(ids)};
  for (std::size_t i = 0; i < m; ++i) {
    std::ranges::copy(matrix.row(out.original_ids[i]), out.rows.row(i).begin());
  }
  return out;
}

Subset remove_rows(const DatasetMatrix& matrix, std::span<const std::uint32_t> ids) {
  std::vector<bool> drop(matrix.rows(), false);
  for (auto id : ids) {
    if (id >= matrix.rows()) {
      throw Error(ErrorKind::kBounds, "row id " + std::to_string(id) + " out of range");
    }
    drop[id] = true;
  }
  Subset out;
  for (std::uint32_t i = 0; i < matrix.rows(); ++i) {
    if (!drop[i]) out.original_ids.push_back(i);
  }
  if (out.original_ids.empty()) throw Error(ErrorKind::kEmptyInput, "every row was removed");
  out.rows = DatasetMatrix(out.original_ids.size(), matrix.cols());
  for (std::size_t i = 0; i < out.original_ids.size(); ++i) {
    std::ranges::copy(matrix.row(out.original_ids[i]), out.rows.row(i).begin());
  }
  return out;
}

double l2_distance_sq(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    sum += diff * diff;
  }
  return sum;
}

double l2_distance(std::span<const float> a, std::span<const float> b) {
  return std::sqrt(l2_distance_sq(a, b));
}

GroundTruth compute_ground_truth(const DatasetMatrix& base, const DatasetMatrix& queries,
                                 std::size_t k, std::size_t threads) {
  if (base.cols() != queries.cols()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "base dimension " + std::to_string(base.cols()) + " vs query dimension " +
                    std::to_string(queries.cols()));
  }
  const std::size_t n = base.rows();
  if (k < 1 || k > n) {
    throw Error(ErrorKind::kBounds,
                "k = " + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
  }
  GroundTruth truth(queries.rows(), k);
  parallel_for(queries.rows(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::pair<double, std::uint32_t>> scored(n);
    for (std::size_t q = begin; q < end; ++q) {
      const auto query = queries.row(q);
      for (std::uint32_t i = 0; i < n; ++i) scored[i] = {l2_distance_sq(query, base.row(i)), i};
      std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                        scored.end());
      auto row = truth.row(q);
      for (std::size_t r = 0; r < k; ++r) {
        row[r] = {scored[r].second, static_cast<float>(std::sqrt(scored[r].first))};
      }
    }
  });
  return truth;
}

void save_ground_truth(const GroundTruth& truth, const std::string& ids_path,
                       const std::string& distances_path) {
  IdMatrix ids(truth.queries(), truth.k());
  DatasetMatrix dists(truth.queries(), truth.k());
  for (std::size_t q = 0; q < truth.queries(); ++q) {
    for (std::size_t r = 0; r < truth.k(); ++r) {
      ids(q, r) = static_cast<std::int32_t>(truth.row(q)[r].id);
      dists(q, r) = truth.row(q)[r].distance;
    }
  }
  write_ids(ids, ids_path);
  write_vectors(dists, distances_path);
}

GroundTruth load_ground_truth(const std::string& ids_path, const std::string& distances_path) {
  const IdMatrix ids = read_ids(ids_path);
  const DatasetMatrix dists = read_vectors(distances_path);
  if (ids.rows() != dists.rows() || ids.cols() != dists.cols()) {
    throw Error(ErrorKind::kFormat, "ground truth files disagree: '" + ids_path + "' is " +
                                        std::to_string(ids.rows()) + "x" +
                                        std::to_string(ids.cols()) + ", '" + distances_path +
                                        "' is " + std::to_string(dists.rows()) + "x" +
                                        std::to_string(dists.cols()));
  }
  GroundTruth truth(ids.rows(), ids.cols());
  for (std::size_t q = 0; q < ids.rows(); ++q) {
    for (std::size_t r = 0; r < ids.cols(); ++r) {
      if (ids(q, r) < 0) throw Error(ErrorKind::kFormat, "negative id in '" + ids_path + "'");
      truth.row(q)[r] = {static_cast<std::uint32_t>(ids(q, r)), dists(q, r)};
    }
  }
  return truth;
}

}  // namespace dataio
}  // namespace taco
