#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "taco/bench.hpp"
#include "taco/dataio.hpp"
#include "taco/engine.hpp"
#include "taco/spectral.hpp"

namespace py = pybind11;
using namespace taco;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

DatasetMatrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::kDimensionMismatch, "expected a 2-d array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return DatasetMatrix(rows, cols, std::vector<float>(a.data(), a.data() + rows * cols));
}

std::vector<float> to_vector(const FloatArray& a) {
  if (a.ndim() != 1) throw Error(ErrorKind::kDimensionMismatch, "expected a 1-d array");
  return std::vector<float>(a.data(), a.data() + a.size());
}

py::array_t<float> from_matrix(const DatasetMatrix& m) {
  py::array_t<float> out({m.rows(), m.cols()});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

py::tuple result_arrays(const std::vector<engine::SearchResult>& results, std::size_t k) {
  py::array_t<std::int64_t> ids({results.size(), k});
  py::array_t<float> dists({results.size(), k});
  auto id = ids.mutable_unchecked<2>();
  auto dist = dists.mutable_unchecked<2>();
  for (std::size_t q = 0; q < results.size(); ++q) {
    for (std::size_t r = 0; r < k; ++r) {
      const bool present = r < results[q].size();
      id(q, r) = present ? static_cast<std::int64_t>(results[q][r].id) : -1;
      dist(q, r) = present ? results[q][r].distance : std::numeric_limits<float>::max();
    }
  }
  return py::make_tuple(ids, dists);
}

}  // namespace

PYBIND11_MODULE(_taco, m) {
  m.doc() = "Subspace-collision approximate nearest neighbor search";

  static py::exception<Error> taco_error(m, "TacoError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(taco_error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  m.def("read_vectors", [](const std::string& path) { return from_matrix(dataio::read_vectors(path)); },
        py::arg("path"));
  m.def("write_vectors",
        [](const FloatArray& a, const std::string& path) { dataio::write_vectors(to_matrix(a), path); },
        py::arg("data"), py::arg("path"));

  m.def(
      "ground_truth",
      [](const FloatArray& base, const FloatArray& queries, std::size_t k, std::size_t threads) {
        const auto truth = dataio::compute_ground_truth(to_matrix(base), to_matrix(queries), k, threads);
        std::vector<engine::SearchResult> rows(truth.queries());
        for (std::size_t q = 0; q < rows.size(); ++q) {
          rows[q].assign(truth.row(q).begin(), truth.row(q).end());
        }
        return result_arrays(rows, k);
      },
      py::arg("base"), py::arg("queries"), py::arg("k") = 100, py::arg("threads") = 0);

  m.def(
      "allocate",
      [](std::vector<double> eigenvalues, std::size_t num_subspaces, std::size_t subspace_dim) {
        spectral::EigenSystem eig;
        eig.dim = eigenvalues.size();
        eig.raw_eigenvalues = eigenvalues;
        eig.eigenvalues = std::move(eigenvalues);
        const auto alloc = spectral::allocate_eigensystem(eig, num_subspaces, subspace_dim);
        return py::make_tuple(alloc.buckets, alloc.log_products);
      },
      py::arg("eigenvalues"), py::arg("num_subspaces"), py::arg("subspace_dim"),
      "Greedy bucket assignment of descending eigenvalues (all >= 1).");

  m.def(
      "select_candidates",
      [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> scores, double beta,
         std::size_t num_subspaces) {
        const auto c = engine::select_candidates({scores.data(), static_cast<std::size_t>(scores.size())},
                                                 beta, num_subspaces);
        return py::make_tuple(c.ids, c.candidate_num, c.last_collision);
      },
      py::arg("scores"), py::arg("beta"), py::arg("num_subspaces"));

  py::class_<engine::IndexParams>(m, "IndexParams")
      .def(py::init([](std::size_t ns, std::size_t s, std::size_t cells, std::size_t iters,
                       std::uint64_t seed) { return engine::IndexParams{ns, s, cells, iters, seed}; }),
           py::arg("num_subspaces") = 6, py::arg("subspace_dim") = 8, py::arg("num_cells") = 4096,
           py::arg("kmeans_iterations") = 20, py::arg("seed") = 0)
      .def_readwrite("num_subspaces", &engine::IndexParams::num_subspaces)
      .def_readwrite("subspace_dim", &engine::IndexParams::subspace_dim)
      .def_readwrite("num_cells", &engine::IndexParams::num_cells)
      .def_readwrite("kmeans_iterations", &engine::IndexParams::kmeans_iterations)
      .def_readwrite("seed", &engine::IndexParams::seed);

  py::class_<engine::TacoIndex>(m, "Index")
      .def_property_readonly("num_points", &engine::TacoIndex::num_points)
      .def_property_readonly("dim", &engine::TacoIndex::dim)
      .def_property_readonly("params", &engine::TacoIndex::params)
      .def_property_readonly("warnings",
                             [](const engine::TacoIndex& i) { return i.metadata().warnings; })
      .def("transform",
           [](const engine::TacoIndex& i, const FloatArray& points) {
             return from_matrix(spectral::transform_points(i.transform(), to_matrix(points)));
           })
      .def("collisions",
           [](const engine::TacoIndex& i, const FloatArray& query, double alpha) {
             const auto scores = engine::count_collisions(i, to_vector(query), alpha);
             py::array_t<std::uint8_t> out(scores.size());
             std::copy(scores.begin(), scores.end(), out.mutable_data());
             return out;
           },
           py::arg("query"), py::arg("alpha"))
      .def("save", &engine::save_index, py::arg("path"))
      .def("to_bytes",
           [](const engine::TacoIndex& i) {
             const auto bytes = engine::serialize_index(i);
             return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
           });

  m.def(
      "build_index",
      [](const FloatArray& data, const engine::IndexParams& params, std::size_t threads) {
        py::gil_scoped_release release;
        return engine::build_index(to_matrix(data), params, {false, threads});
      },
      py::arg("data"), py::arg("params"), py::arg("threads") = 0);
  m.def("load_index", &engine::load_index, py::arg("path"));

  m.def(
      "search",
      [](const engine::TacoIndex& index, const FloatArray& data, const FloatArray& queries,
         std::size_t k, double alpha, double beta, std::size_t threads) {
        engine::QueryParams qp{alpha, beta, k};
        qp.validate();
        const auto base = to_matrix(data);
        const auto q = to_matrix(queries);
        std::vector<engine::SearchResult> results;
        {
          py::gil_scoped_release release;
          results = engine::knn_query_batch(index, base, q, qp, threads);
        }
        return result_arrays(results, k);
      },
      py::arg("index"), py::arg("data"), py::arg("queries"), py::arg("k") = 50,
      py::arg("alpha") = 0.05, py::arg("beta") = 0.005, py::arg("threads") = 0,
      "Returns (ids, distances), each queries x k; missing slots are -1 / FLT_MAX.");

  m.def(
      "recall",
      [](py::array_t<std::int64_t> result, py::array_t<std::int64_t> truth, std::size_t k) {
        auto r = result.unchecked<2>();
        auto t = truth.unchecked<2>();
        double total = 0.0;
        for (py::ssize_t q = 0; q < r.shape(0); ++q) {
          std::vector<dataio::Neighbor> a, b;
          for (std::size_t j = 0; j < k; ++j) {
            if (r(q, j) >= 0) a.push_back({static_cast<std::uint32_t>(r(q, j)), 0.0f});
            b.push_back({static_cast<std::uint32_t>(t(q, j)), 0.0f});
          }
          total += bench::recall(a, b, k);
        }
        return r.shape(0) == 0 ? 0.0 : total / static_cast<double>(r.shape(0));
      },
      py::arg("result_ids"), py::arg("truth_ids"), py::arg("k"));
}
