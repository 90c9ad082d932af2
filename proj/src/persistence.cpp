#include <cfloat>

#include "binary_io.hpp"
#include "taco/engine.hpp"

namespace taco::engine {
namespace {

constexpr char kMagic[4] = {'T', 'A', 'C', 'O'};

void put_floats(detail::ByteWriter& out, std::span<const float> values) {
  for (float v : values) out.put_f32(v);
}

std::vector<float> get_floats(detail::ByteReader& in, std::size_t count) {
  if (count > in.remaining() / 4) {
    throw Error(ErrorKind::kCorruption, "float block larger than remaining data");
  }
  std::vector<float> values(count);
  for (auto& v : values) v = in.get_f32();
  return values;
}

std::uint32_t narrow32(std::size_t v, const char* what) {
  if (v > 0xffffffffULL) throw Error(ErrorKind::kParameter, std::string(what) + " exceeds 32 bits");
  return static_cast<std::uint32_t>(v);
}

void write_cells(detail::ByteWriter& out, const imi::InvertedMultiIndex& sub) {
  const auto cells = sub.nonempty_cells();
  out.put_u32(narrow32(sub.clusters(), "K'"));
  out.put_u32(narrow32(cells.size(), "cell count"));
  for (const auto& cell : cells) {
    out.put_u16(static_cast<std::uint16_t>(cell.label1));
    out.put_u16(static_cast<std::uint16_t>(cell.label2));
    out.put_u32(narrow32(cell.ids.size(), "cell size"));
    for (auto id : cell.ids) out.put_u32(id);
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_index(const TacoIndex& index) {
  const auto& p = index.params();
  const auto& model = index.transform();
  detail::ByteWriter out;
  out.put_raw({kMagic, 4});
  out.put_u16(kIndexFormatVersion);
  out.put_u32(narrow32(p.num_subspaces, "N_s"));
  out.put_u32(narrow32(p.subspace_dim, "s"));
  out.put_u32(narrow32(p.num_cells, "K"));
  out.put_u32(narrow32(p.kmeans_iterations, "t"));
  out.put_u64(p.seed);
  out.put_u32(narrow32(index.dim(), "d"));
  out.put_u32(narrow32(index.num_points(), "n"));
  put_floats(out, model.mean());
  put_floats(out, model.basis());
  for (const auto& sub : index.subspaces()) {
    put_floats(out, sub.codebook1());
    put_floats(out, sub.codebook2());
    write_cells(out, sub);
  }
  out.put_u64(detail::fnv1a64(out.bytes()));
  return std::move(out.bytes());
}

TacoIndex deserialize_index(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(bytes);
  if (bytes.size() < 4 || in.get_raw(4) != std::string(kMagic, 4)) {
    throw Error(ErrorKind::kFormat, "not a TACO index (bad magic)");
  }
  const std::uint16_t version = in.get_u16();
  if (version != kIndexFormatVersion) {
    throw Error(ErrorKind::kUnsupportedVersion,
                "index format version " + std::to_string(version) + " is not supported (expected " +
                    std::to_string(kIndexFormatVersion) + ")");
  }
  if (bytes.size() < 14) throw Error(ErrorKind::kCorruption, "index file truncated");
  const auto body = bytes.first(bytes.size() - 8);
  detail::ByteReader tail(bytes.subspan(bytes.size() - 8));
  if (tail.get_u64() != detail::fnv1a64(body)) {
    throw Error(ErrorKind::kCorruption, "index checksum mismatch");
  }

  IndexParams params;
  params.num_subspaces = in.get_u32();
  params.subspace_dim = in.get_u32();
  params.num_cells = in.get_u32();
  params.kmeans_iterations = in.get_u32();
  params.seed = in.get_u64();
  const std::size_t d = in.get_u32();
  const std::size_t n = in.get_u32();
  params.validate(d, n);

  const std::size_t s = params.subspace_dim;
  const std::size_t out_dim = params.num_subspaces * s;
  auto mean = get_floats(in, d);
  auto basis = get_floats(in, d * out_dim);
  spectral::TransformModel model(d, params.num_subspaces, s, std::move(mean), std::move(basis));

  const std::size_t clusters = params.clusters_per_codebook();
  const std::size_t dim1 = imi::split_point(s);
  const std::size_t dim2 = s - dim1;
  std::vector<imi::InvertedMultiIndex> subspaces;
  subspaces.reserve(params.num_subspaces);
  for (std::size_t j = 0; j < params.num_subspaces; ++j) {
    auto codebook1 = get_floats(in, clusters * dim1);
    auto codebook2 = get_floats(in, clusters * dim2);
    if (in.get_u32() != clusters) throw Error(ErrorKind::kCorruption, "cell block K' mismatch");
    const std::size_t count = in.get_u32();
    std::vector<imi::InvertedMultiIndex::Cell> cells(count);
    for (auto& cell : cells) {
      cell.label1 = in.get_u16();
      cell.label2 = in.get_u16();
      const std::size_t size = in.get_u32();
      if (size > in.remaining() / 4) throw Error(ErrorKind::kCorruption, "cell larger than file");
      cell.ids.resize(size);
      for (auto& id : cell.ids) id = in.get_u32();
      if (cell.label1 >= clusters || cell.label2 >= clusters) {
        throw Error(ErrorKind::kCorruption, "cell label out of range");
      }
    }
    subspaces.push_back(imi::InvertedMultiIndex::from_cells(
        clusters, dim1, dim2, std::move(codebook1), std::move(codebook2), cells, n));
  }
  if (in.remaining() != 8) throw Error(ErrorKind::kCorruption, "trailing bytes after index body");
  TacoIndex index(params, n, std::move(model), std::move(subspaces));
  index.metadata().reduction_percent =
      100.0 * (1.0 - static_cast<double>(out_dim) / static_cast<double>(d));
  return index;
}

void save_index(const TacoIndex& index, const std::string& path) {
  detail::write_file(path, serialize_index(index));
}

TacoIndex load_index(const std::string& path) {
  return deserialize_index(detail::read_file(path));
}

void save_results(const std::vector<SearchResult>& results, std::size_t k,
                  const std::string& ids_path, const std::string& distances_path) {
  IdMatrix ids(results.size(), k);
  DatasetMatrix dists(results.size(), k);
  for (std::size_t q = 0; q < results.size(); ++q) {
    for (std::size_t r = 0; r < k; ++r) {
      if (r < results[q].size()) {
        ids(q, r) = static_cast<std::int32_t>(results[q][r].id);
        dists(q, r) = results[q][r].distance;
      } else {
        ids(q, r) = -1;
        dists(q, r) = FLT_MAX;
      }
    }
  }
  dataio::write_ids(ids, ids_path);
  dataio::write_vectors(dists, distances_path);
}

std::vector<SearchResult> load_results(const std::string& ids_path,
                                       const std::string& distances_path) {
  const IdMatrix ids = dataio::read_ids(ids_path);
  const DatasetMatrix dists = dataio::read_vectors(distances_path);
  if (ids.rows() != dists.rows() || ids.cols() != dists.cols()) {
    throw Error(ErrorKind::kFormat, "result files disagree in shape");
  }
  std::vector<SearchResult> results(ids.rows());
  for (std::size_t q = 0; q < ids.rows(); ++q) {
    for (std::size_t r = 0; r < ids.cols(); ++r) {
      if (ids(q, r) < 0) break;
      results[q].push_back({static_cast<std::uint32_t>(ids(q, r)), dists(q, r)});
    }
  }
  return results;
}

}  // namespace taco::engine
