#ifndef METACAUSAL_EXPERIMENTS_HPP
#define METACAUSAL_EXPERIMENTS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "metacausal/numkit.hpp"

namespace metacausal::experiments {

/// Malformed config file, unknown key, bad value or unknown experiment.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Profile { desk, paper };
Profile parse_profile(const std::string& name);
std::string to_string(Profile p);

/// Flat key=value settings under an experiment-name header line "[name]".
/// '#' starts a comment.
class Config {
 public:
  Config() = default;
  explicit Config(std::string experiment) : experiment_(std::move(experiment)) {}

  static Config parse(std::istream& in);
  static Config load(const std::filesystem::path& path);

  const std::string& experiment() const { return experiment_; }
  const std::map<std::string, std::string>& values() const { return values_; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

 private:
  std::string experiment_;
  std::map<std::string, std::string> values_;
};

/// Reads typed values out of a Config; keys never read are reported by finish().
class ConfigReader {
 public:
  explicit ConfigReader(const Config& c) : config_(c) {}

  void operator()(const char* key, int& v);
  void operator()(const char* key, std::uint64_t& v);
  void operator()(const char* key, double& v);
  void operator()(const char* key, bool& v);
  void operator()(const char* key, std::string& v);
  void operator()(const char* key, std::vector<int>& v);

  /// Throws ConfigError naming the first unrecognised key.
  void finish() const;

 private:
  const std::string* find(const char* key);
  const Config& config_;
  std::set<std::string> seen_;
};

/// Collects the resolved parameters as strings, in declaration order.
class ConfigWriter {
 public:
  template <class T>
  void operator()(const char* key, const T& v) {
    entries.emplace_back(key, format(v));
  }
  std::vector<std::pair<std::string, std::string>> entries;

 private:
  static std::string format(int v) { return std::to_string(v); }
  static std::string format(std::uint64_t v) { return std::to_string(v); }
  static std::string format(double v);
  static std::string format(bool v) { return v ? "true" : "false"; }
  static std::string format(const std::string& v) { return v; }
  static std::string format(const std::vector<int>& v);
};

/// Numeric CSV table; when `with_profile` is set a leading "profile" column
/// carries the profile name on every row.
struct Table {
  std::string file;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  bool with_profile = true;
};

/// Writes with %.17g; throws NumericalError on a non-finite cell.
void write_table(const Table& t, Profile profile, const std::filesystem::path& dir);

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

/// Quantile with linear interpolation between order statistics.
double quantile(std::vector<double> v, double q);

// --- per-experiment parameters ------------------------------------------------------

struct NonidentParams {
  int runs = 20;
  std::vector<int> n_values{10};
  int train_size = 10000;
  int test_size = 10000;
  int steps = 3000;
  double learning_rate = 1.0;
  int log_every = 10;
  int exact_tables = 100;
  std::vector<int> exact_n_values{2, 5, 10};
  int exact_samples = 50;

  static NonidentParams defaults(Profile p);
  void validate() const;
  template <class V>
  void visit(V& v) {
    v("runs", runs);
    v("n_values", n_values);
    v("train_size", train_size);
    v("test_size", test_size);
    v("steps", steps);
    v("learning_rate", learning_rate);
    v("log_every", log_every);
    v("exact_tables", exact_tables);
    v("exact_n_values", exact_n_values);
    v("exact_samples", exact_samples);
  }
};

struct AdaptSpeedParams {
  int n_values = 10;
  int n_train = 10;
  int n_transfer = 10;
  int steps = 200;
  int test_size = 10000;
  double learning_rate = 0.3;
  std::string optimizer = "rmsprop";

  static AdaptSpeedParams defaults(Profile p);
  void validate() const;
  template <class V>
  void visit(V& v) {
    v("n_values", n_values);
    v("n_train", n_train);
    v("n_transfer", n_transfer);
    v("steps", steps);
    v("test_size", test_size);
    v("learning_rate", learning_rate);
    v("optimizer", optimizer);
  }
};

struct BivariateDiscreteParams {
  std::vector<int> n_values{10, 100};
  int runs = 5;
  int episodes = 500;
  int T = 2;
  int batch_size = 10;
  int transfer_examples = 20;
  double inner_lr = 0.1;
  std::string inner_optimizer = "sgd";
  double meta_lr = 0.01;
  std::string objective = "likelihood";
  bool reset = true;
  bool write_traces = true;

  static BivariateDiscreteParams defaults(Profile p);
  void validate() const;
  template <class V>
  void visit(V& v) {
    v("n_values", n_values);
    v("runs", runs);
    v("episodes", episodes);
    v("T", T);
    v("batch_size", batch_size);
    v("transfer_examples", transfer_examples);
    v("inner_lr", inner_lr);
    v("inner_optimizer", inner_optimizer);
    v("meta_lr", meta_lr);
    v("objective", objective);
    v("reset", reset);
    v("write_traces", write_traces);
  }
};

struct MlpStructureParams {
  std::vector<int> n_values{10};
  int runs = 5;
  int episodes = 150;
  int K = 16;
  int T = 2;
  int batch_size = 10;
  int pretrain_examples = 100;
  int pretrain_batch = 10;
  double pretrain_lr = 0.01;
  double inner_lr = 0.01;
  double meta_lr = 0.1;
  std::string estimator = "ksample";
  bool reset = true;

  static MlpStructureParams defaults(Profile p);
  void validate() const;
  template <class V>
  void visit(V& v) {
    v("n_values", n_values);
    v("runs", runs);
    v("episodes", episodes);
    v("K", K);
    v("T", T);
    v("batch_size", batch_size);
    v("pretrain_examples", pretrain_examples);
    v("pretrain_batch", pretrain_batch);
    v("pretrain_lr", pretrain_lr);
    v("inner_lr", inner_lr);
    v("meta_lr", meta_lr);
    v("estimator", estimator);
    v("reset", reset);
  }
};

struct ContinuousParams {
  int runs = 5;
  int iterations = 200;
  int T = 10;
  int batch_size = 10;
  int train_size = 5000;
  int pretrain_steps = 20000;
  int pretrain_batch = 100;
  double pretrain_lr = 1e-3;
  double inner_lr = 1e-3;
  double meta_lr = 0.03;
  int components = 10;
  int hidden = 32;
  std::string marginal = "refit";
  std::string objective = "regret";
  double noise_variance = 1.0;
  std::string mechanism = "spline";  // or "linear": f(a) = a
  int scatter_samples = 300;

  static ContinuousParams defaults(Profile p);
  void validate() const;
  template <class V>
  void visit(V& v) {
    v("runs", runs);
    v("iterations", iterations);
    v("T", T);
    v("batch_size", batch_size);
    v("train_size", train_size);
    v("pretrain_steps", pretrain_steps);
    v("pretrain_batch", pretrain_batch);
    v("pretrain_lr", pretrain_lr);
    v("inner_lr", inner_lr);
    v("meta_lr", meta_lr);
    v("components", components);
    v("hidden", hidden);
    v("marginal", marginal);
    v("objective", objective);
    v("noise_variance", noise_variance);
    v("mechanism", mechanism);
    v("scatter_samples", scatter_samples);
  }
};

struct LinearGaussianParams {
  int dim = 10;
  int runs = 5;
  int episodes = 200;
  int T = 10;
  int batch_size = 10;
  double inner_lr = 0.01;
  double meta_lr = 0.03;
  bool write_traces = true;

  static LinearGaussianParams defaults(Profile p);
  void validate() const;
  template <class V>
  void visit(V& v) {
    v("dim", dim);
    v("runs", runs);
    v("episodes", episodes);
    v("T", T);
    v("batch_size", batch_size);
    v("inner_lr", inner_lr);
    v("meta_lr", meta_lr);
    v("write_traces", write_traces);
  }
};

struct EncoderParams {
  int runs = 5;
  int iterations = 1000;
  double theta_D = -0.78539816339744831;
  double theta_E0 = 0.0;
  int train_steps = 20;  // T'
  int train_batch = 100;
  int T = 5;
  int batch_size = 10;
  double train_lr = 1e-3;
  double inner_lr = 1e-3;
  double meta_lr = 0.01;
  double encoder_lr = 0.01;
  double fd_step = 1e-3;
  int components = 10;
  int hidden = 32;
  std::string marginal = "refit";
  bool freeze_encoder = false;

  static EncoderParams defaults(Profile p);
  void validate() const;
  template <class V>
  void visit(V& v) {
    v("runs", runs);
    v("iterations", iterations);
    v("theta_D", theta_D);
    v("theta_E0", theta_E0);
    v("train_steps", train_steps);
    v("train_batch", train_batch);
    v("T", T);
    v("batch_size", batch_size);
    v("train_lr", train_lr);
    v("inner_lr", inner_lr);
    v("meta_lr", meta_lr);
    v("encoder_lr", encoder_lr);
    v("fd_step", fd_step);
    v("components", components);
    v("hidden", hidden);
    v("marginal", marginal);
    v("freeze_encoder", freeze_encoder);
  }
};

/// Resolves profile defaults, then overrides from the config.
template <class P>
P bind_params(const Config& c, Profile profile) {
  P p = P::defaults(profile);
  ConfigReader r(c);
  p.visit(r);
  r.finish();
  p.validate();
  return p;
}

template <class P>
std::vector<std::pair<std::string, std::string>> describe(const P& p) {
  ConfigWriter w;
  const_cast<P&>(p).visit(w);
  return w.entries;
}

// --- results ------------------------------------------------------------------------

struct NonidentResult {
  double exact_max_abs_diff = 0.0;
  std::vector<double> exact_diffs;        // per table
  std::vector<int> exact_table_n;         // N of each table
  struct Curve {
    int n_values = 0;
    std::vector<int> steps;
    std::vector<std::vector<double>> train_gap;  // [logged step][run]
    std::vector<std::vector<double>> test_gap;
  };
  std::vector<Curve> curves;
  std::vector<std::uint64_t> streams;
};
NonidentResult run_nonident(const NonidentParams& p, std::uint64_t seed, int workers = 1);
std::vector<Table> tables(const NonidentResult& r);

struct AdaptSpeedResult {
  std::vector<std::vector<double>> ab;  // [step][run], step 0 = before adaptation
  std::vector<std::vector<double>> ba;
  std::vector<std::uint64_t> streams;
};
AdaptSpeedResult run_adapt_speed(const AdaptSpeedParams& p, std::uint64_t seed, int workers = 1);
std::vector<Table> tables(const AdaptSpeedResult& r);

struct BeliefRun {
  int n_values = 0;  // or dimension
  int run = 0;
  std::uint64_t stream = 0;
  std::vector<double> sigma_gamma;
  std::vector<double> delta;
};

struct BivariateDiscreteResult {
  std::vector<BeliefRun> runs;
  std::vector<std::vector<Table>> traces;  // per run
};
BivariateDiscreteResult run_bivariate_discrete(const BivariateDiscreteParams& p,
                                               std::uint64_t seed, int workers = 1);
std::vector<Table> tables(const BivariateDiscreteResult& r);

struct MlpStructureRun {
  int n_values = 0;
  int run = 0;
  std::uint64_t stream = 0;
  std::vector<double> cross_entropy;  // after each episode
  std::vector<double> sigma_ab;       // belief that A -> B, i.e. sigma(gamma_BA)
  std::vector<double> sigma_ba;
};
struct MlpStructureResult {
  std::vector<MlpStructureRun> runs;
};
MlpStructureResult run_mlp_structure(const MlpStructureParams& p, std::uint64_t seed,
                                     int workers = 1);
std::vector<Table> tables(const MlpStructureResult& r);

struct ContinuousRun {
  int run = 0;
  std::uint64_t stream = 0;
  std::vector<double> regret_ab;
  std::vector<double> regret_ba;
  std::vector<double> sigma_gamma;
};
struct ContinuousResult {
  std::vector<ContinuousRun> runs;
  std::vector<std::array<double, 3>> scatter;  // (mu, a, b) of the first run's SCM
};
ContinuousResult run_continuous(const ContinuousParams& p, std::uint64_t seed, int workers = 1);
std::vector<Table> tables(const ContinuousResult& r);

struct LinearGaussianResult {
  std::vector<BeliefRun> runs;
  std::vector<std::vector<Table>> traces;
  double max_joint_mismatch = 0.0;  // max abs log-density gap of the two models, 100 points
};
LinearGaussianResult run_linear_gaussian(const LinearGaussianParams& p, std::uint64_t seed,
                                         int workers = 1);
std::vector<Table> tables(const LinearGaussianResult& r);

struct EncoderRun {
  int run = 0;
  std::uint64_t stream = 0;
  std::vector<double> theta_E;
  std::vector<double> sigma_gamma;
  std::vector<double> regret_uv;
  std::vector<double> regret_vu;
};
struct EncoderResult {
  std::vector<EncoderRun> runs;
};
EncoderResult run_encoder(const EncoderParams& p, std::uint64_t seed, int workers = 1);
std::vector<Table> tables(const EncoderResult& r);

// --- driver -----------------------------------------------------------------------

const std::vector<std::string>& experiment_names();

struct RunRequest {
  std::string experiment;
  Config config;  // experiment() may be empty when no file was given
  std::uint64_t seed = 0;
  Profile profile = Profile::desk;
  std::filesystem::path out_dir = ".";
  int workers = 1;
};

struct RunManifest {
  std::string experiment;
  Profile profile = Profile::desk;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::uint64_t> streams;
  std::string version;
  std::vector<std::string> outputs;
};

/// Runs one experiment, writes its CSVs and manifest.json into out_dir.
RunManifest run_experiment(const RunRequest& request);

/// The config text that reproduces a manifest's run.
std::string manifest_config_text(const RunManifest& m);
void write_manifest(const RunManifest& m, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace metacausal::experiments

#endif
