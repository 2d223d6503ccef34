#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "metacausal/experiments.hpp"
#include "metacausal/meta.hpp"

namespace py = pybind11;
namespace ex = metacausal::experiments;
namespace meta = metacausal::meta;

namespace {

py::dict manifest_dict(const ex::RunManifest& m) {
  py::dict d;
  d["experiment"] = m.experiment;
  d["profile"] = ex::to_string(m.profile);
  d["seed"] = m.seed;
  py::dict cfg;
  for (const auto& [k, v] : m.config) cfg[py::str(k)] = v;
  d["config"] = cfg;
  d["stream_ids"] = m.streams;
  d["version"] = m.version;
  d["outputs"] = m.outputs;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Meta-transfer structure learning core";

  py::register_exception<ex::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<metacausal::NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("mixture_regret", &meta::mixture_regret, py::arg("gamma"), py::arg("log_l_ab"),
        py::arg("log_l_ba"));
  m.def("gamma_gradient", &meta::gamma_gradient, py::arg("gamma"), py::arg("log_l_ab"),
        py::arg("log_l_ba"));
  m.def("regret_mixture", &meta::regret_mixture, py::arg("gamma"), py::arg("regret_ab"),
        py::arg("regret_ba"));
  m.def("regret_mixture_gradient", &meta::regret_mixture_gradient, py::arg("gamma"),
        py::arg("regret_ab"), py::arg("regret_ba"));
  m.def("exact_edge_gradient", &meta::exact_edge_gradient, py::arg("gamma"), py::arg("log_l"));
  m.def("edge_cross_entropy",
        [](const metacausal::Matrix& gamma, const metacausal::Matrix& truth) {
          return meta::edge_cross_entropy(gamma, truth.cast<int>());
        },
        py::arg("gamma"), py::arg("truth"));

  m.def("experiment_names", &ex::experiment_names);
  m.def(
      "run_experiment",
      [](const std::string& experiment, std::uint64_t seed, const std::filesystem::path& out_dir,
         const std::string& profile, const std::map<std::string, std::string>& config, int workers) {
        ex::RunRequest req;
        req.experiment = experiment;
        req.config = ex::Config(experiment);
        for (const auto& [k, v] : config) req.config.set(k, v);
        req.seed = seed;
        req.profile = ex::parse_profile(profile);
        req.out_dir = out_dir;
        req.workers = workers;
        ex::RunManifest result;
        {
          py::gil_scoped_release release;
          result = ex::run_experiment(req);
        }
        return manifest_dict(result);
      },
      py::arg("experiment"), py::arg("seed"), py::arg("out_dir"), py::arg("profile") = "desk",
      py::arg("config") = std::map<std::string, std::string>{}, py::arg("workers") = 1);
  m.def(
      "read_manifest", [](const std::filesystem::path& p) { return manifest_dict(ex::read_manifest(p)); },
      py::arg("path"));
  m.attr("__version__") = METACAUSAL_VERSION;
}
