#include "metacausal/experiments.hpp"

namespace metacausal::experiments {

namespace {

template <class Params, class Result>
RunManifest drive(const RunRequest& req, Result (*run)(const Params&, std::uint64_t, int)) {
  const Params p = bind_params<Params>(req.config, req.profile);
  const Result result = run(p, req.seed, req.workers);
  RunManifest m;
  m.experiment = req.experiment;
  m.profile = req.profile;
  m.seed = req.seed;
  m.config = describe(p);
  m.version = METACAUSAL_VERSION;
  if constexpr (requires { result.streams; }) {
    m.streams = result.streams;
  } else {
    for (const auto& r : result.runs) m.streams.push_back(r.stream);
  }
  for (const Table& t : tables(result)) {
    write_table(t, req.profile, req.out_dir);
    m.outputs.push_back(t.file);
  }
  m.outputs.push_back("manifest.json");
  write_manifest(m, req.out_dir / "manifest.json");
  return m;
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"nonident",      "adapt-speed",     "bivariate-discrete",
                                              "mlp-structure", "continuous",      "linear-gaussian",
                                              "encoder"};
  return names;
}

RunManifest run_experiment(const RunRequest& req) {
  if (!req.config.experiment().empty() && req.config.experiment() != req.experiment)
    throw ConfigError("config is for '" + req.config.experiment() + "', not '" + req.experiment + "'");
  if (req.workers < 1) throw ConfigError("workers must be >= 1");
  const std::string& e = req.experiment;
  if (e == "nonident") return drive(req, &run_nonident);
  if (e == "adapt-speed") return drive(req, &run_adapt_speed);
  if (e == "bivariate-discrete") return drive(req, &run_bivariate_discrete);
  if (e == "mlp-structure") return drive(req, &run_mlp_structure);
  if (e == "continuous") return drive(req, &run_continuous);
  if (e == "linear-gaussian") return drive(req, &run_linear_gaussian);
  if (e == "encoder") return drive(req, &run_encoder);
  throw ConfigError("unknown experiment '" + e + "'");
}

}  // namespace metacausal::experiments
