#include <cmath>

#include "internal.hpp"
#include "metacausal/learners/mlp.hpp"
#include "metacausal/meta.hpp"

namespace metacausal::experiments {

using numkit::OptimizerState;
using numkit::RngStream;

namespace detail {

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

OptimizerState make_optimizer(const std::string& kind, double lr) {
  if (kind == "sgd") return OptimizerState::sgd(lr);
  if (kind == "rmsprop") return OptimizerState::rmsprop(lr);
  throw ConfigError("unknown optimizer '" + kind + "' (expected sgd or rmsprop)");
}

}  // namespace detail

namespace {

using detail::make_optimizer;
using detail::require;

void require_values(const std::vector<int>& v, int lo, const char* key) {
  require(!v.empty(), std::string(key) + " must not be empty");
  for (int x : v) require(x >= lo, std::string(key) + " entries must be >= " + std::to_string(lo));
}

meta::Objective parse_objective(const std::string& s) {
  if (s == "likelihood") return meta::Objective::likelihood_mixture;
  if (s == "regret") return meta::Objective::regret_mixture;
  throw ConfigError("unknown objective '" + s + "' (expected likelihood or regret)");
}

double mean_log_prob_from_counts(const learners::TabularBivariateModel& m, const Matrix& counts,
                                 double total) {
  const Matrix logj = m.joint().array().log().matrix();
  double s = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i)
    if (counts.data()[i] > 0.0) s += counts.data()[i] * logj.data()[i];
  return s / total;
}

Matrix count_table(const std::vector<scm::DiscretePair>& pairs, int n) {
  Matrix c = Matrix::Zero(n, n);
  for (const auto& p : pairs) c(p.a, p.b) += 1.0;
  return c;
}

std::vector<int> firsts(const std::vector<scm::DiscretePair>& v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (const auto& p : v) out.push_back(p.a);
  return out;
}

std::vector<int> seconds(const std::vector<scm::DiscretePair>& v) {
  std::vector<int> out;
  out.reserve(v.size());
  for (const auto& p : v) out.push_back(p.b);
  return out;
}

learners::CategoricalSamples as_samples(std::span<const scm::DiscretePair> pairs) {
  learners::CategoricalSamples s{2, {}};
  s.values.reserve(pairs.size() * 2);
  for (const auto& p : pairs) {
    s.values.push_back(p.a);
    s.values.push_back(p.b);
  }
  return s;
}

std::vector<std::string> trace_columns() {
  std::vector<std::string> cols;
  std::string header = meta::kTraceHeader;
  std::size_t start = 0;
  while (true) {
    const auto comma = header.find(',', start);
    cols.push_back(header.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cols;
}

}  // namespace

Table detail::trace_table(const meta::MetaRun& run, const std::string& file) {
  Table t{file, trace_columns(), {}, false};
  for (const auto& tr : run.traces) {
    double cum_ab = 0.0, cum_ba = 0.0;
    for (std::size_t s = 0; s < tr.ab_steps.size(); ++s) {
      cum_ab += tr.ab_steps[s];
      cum_ba += tr.ba_steps[s];
      t.rows.push_back({static_cast<double>(tr.episode), static_cast<double>(s), tr.ab_steps[s],
                        tr.ba_steps[s], cum_ab, cum_ba, cum_ab - cum_ba,
                        meta::mixture_regret(tr.gamma, cum_ab, cum_ba), tr.sigma_gamma});
    }
  }
  return t;
}

// --- non-identifiability -----------------------------------------------------------

NonidentParams NonidentParams::defaults(Profile p) {
  NonidentParams d;
  if (p == Profile::paper) {
    d.runs = 100;
    d.n_values = {10, 20, 50};
  }
  return d;
}

void NonidentParams::validate() const {
  require(runs >= 1, "runs must be >= 1");
  require_values(n_values, 2, "n_values");
  require_values(exact_n_values, 2, "exact_n_values");
  require(train_size >= 1 && test_size >= 1, "train_size and test_size must be >= 1");
  require(steps >= 1 && log_every >= 1, "steps and log_every must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(exact_tables >= 0 && exact_samples >= 1, "exact_tables >= 0, exact_samples >= 1");
}

NonidentResult run_nonident(const NonidentParams& p, std::uint64_t seed, int workers) {
  NonidentResult res;
  RngStream exact_rng(seed, 0);
  res.streams.push_back(0);
  for (int t = 0; t < p.exact_tables; ++t) {
    RngStream r = exact_rng.split(static_cast<std::uint64_t>(t));
    const int n = p.exact_n_values[static_cast<std::size_t>(t) % p.exact_n_values.size()];
    const Vector cells = numkit::sample_dirichlet(Vector::Ones(n * n), r);
    std::vector<scm::DiscretePair> data;
    for (int k = 0; k < p.exact_samples; ++k) {
      const int c = numkit::sample_categorical(cells, r);
      data.push_back({c / n, c % n});
    }
    const auto a = firsts(data), b = seconds(data);
    const auto ab = learners::fit_tabular_mle(a, b, n);
    const auto ba = learners::fit_tabular_mle(b, a, n);
    const learners::TabularBivariateModel mab{ab.marginal, ab.conditional, false};
    const learners::TabularBivariateModel mba{ba.marginal, ba.conditional, true};
    const double diff = (mab.joint() - mba.joint()).cwiseAbs().maxCoeff();
    res.exact_diffs.push_back(diff);
    res.exact_table_n.push_back(n);
    res.exact_max_abs_diff = std::max(res.exact_max_abs_diff, diff);
  }

  for (std::size_t ni = 0; ni < p.n_values.size(); ++ni) {
    const int n = p.n_values[ni];
    NonidentResult::Curve curve;
    curve.n_values = n;
    for (int s = p.log_every; s <= p.steps; s += p.log_every) curve.steps.push_back(s);
    if (curve.steps.empty() || curve.steps.back() != p.steps) curve.steps.push_back(p.steps);
    curve.train_gap.assign(curve.steps.size(), std::vector<double>(static_cast<std::size_t>(p.runs)));
    curve.test_gap = curve.train_gap;
    std::vector<std::uint64_t> streams;
    for (int r = 0; r < p.runs; ++r)
      streams.push_back(1 + ni * static_cast<std::uint64_t>(p.runs) + static_cast<std::uint64_t>(r));
    parallel_for(p.runs, workers, [&](int r) {
      RngStream rng(seed, streams[static_cast<std::size_t>(r)]);
      const auto s = scm::sample_categorical_scm(n, rng);
      const auto train = scm::ancestral_sample(s, static_cast<std::size_t>(p.train_size), rng);
      const auto test = scm::ancestral_sample(s, static_cast<std::size_t>(p.test_size), rng);
      const Matrix train_counts = count_table(train, n), test_counts = count_table(test, n);
      learners::TabularBivariateModel ab{learners::TabularMarginal(n), learners::TabularConditional(n), false};
      auto ba = ab;
      ba.reversed = true;
      auto oa = OptimizerState::sgd(p.learning_rate), ob = oa;
      std::size_t logged = 0;
      for (int step = 1; step <= p.steps; ++step) {
        learners::adapt_step(ab, oa, std::span<const scm::DiscretePair>(train));
        learners::adapt_step(ba, ob, std::span<const scm::DiscretePair>(train));
        if (curve.steps[logged] != step) continue;
        curve.train_gap[logged][static_cast<std::size_t>(r)] =
            mean_log_prob_from_counts(ab, train_counts, p.train_size) -
            mean_log_prob_from_counts(ba, train_counts, p.train_size);
        curve.test_gap[logged][static_cast<std::size_t>(r)] =
            mean_log_prob_from_counts(ab, test_counts, p.test_size) -
            mean_log_prob_from_counts(ba, test_counts, p.test_size);
        ++logged;
      }
    });
    res.streams.insert(res.streams.end(), streams.begin(), streams.end());
    res.curves.push_back(std::move(curve));
  }
  return res;
}

std::vector<Table> tables(const NonidentResult& r) {
  Table curve{"nonident.csv",
              {"n_values", "step", "train_gap_median", "train_gap_q25", "train_gap_q75",
               "test_gap_median", "test_gap_q25", "test_gap_q75"},
              {}};
  for (const auto& c : r.curves)
    for (std::size_t i = 0; i < c.steps.size(); ++i)
      curve.rows.push_back({static_cast<double>(c.n_values), static_cast<double>(c.steps[i]),
                            quantile(c.train_gap[i], 0.5), quantile(c.train_gap[i], 0.25),
                            quantile(c.train_gap[i], 0.75), quantile(c.test_gap[i], 0.5),
                            quantile(c.test_gap[i], 0.25), quantile(c.test_gap[i], 0.75)});
  Table exact{"nonident_exact.csv", {"table", "n_values", "max_abs_joint_diff"}, {}};
  for (std::size_t i = 0; i < r.exact_diffs.size(); ++i)
    exact.rows.push_back({static_cast<double>(i), static_cast<double>(r.exact_table_n[i]),
                          r.exact_diffs[i]});
  return {std::move(curve), std::move(exact)};
}

// --- adaptation speed --------------------------------------------------------------

AdaptSpeedParams AdaptSpeedParams::defaults(Profile p) {
  AdaptSpeedParams d;
  if (p == Profile::paper) {
    d.n_train = 100;
    d.n_transfer = 100;
  }
  return d;
}

void AdaptSpeedParams::validate() const {
  require(n_values >= 2, "n_values must be >= 2");
  require(n_train >= 1 && n_transfer >= 1, "n_train and n_transfer must be >= 1");
  require(steps >= 1 && test_size >= 1, "steps and test_size must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  make_optimizer(optimizer, learning_rate);
}

AdaptSpeedResult run_adapt_speed(const AdaptSpeedParams& p, std::uint64_t seed, int workers) {
  const int runs = p.n_train * p.n_transfer;
  AdaptSpeedResult res;
  res.ab.assign(static_cast<std::size_t>(p.steps + 1), std::vector<double>(static_cast<std::size_t>(runs)));
  res.ba = res.ab;
  for (int i = 0; i < p.n_train; ++i) res.streams.push_back(1 + static_cast<std::uint64_t>(i));
  parallel_for(p.n_train, workers, [&](int i) {
    RngStream rng(seed, res.streams[static_cast<std::size_t>(i)]);
    const auto train = scm::sample_categorical_scm(p.n_values, rng);
    const auto [ab0, ba0] = learners::tabular_models_from_joint(train.joint());
    for (int j = 0; j < p.n_transfer; ++j) {
      RngStream r = rng.split(static_cast<std::uint64_t>(j));
      const auto transfer = scm::intervene_on_cause(train, r);
      const Matrix test = count_table(
          scm::ancestral_sample(transfer, static_cast<std::size_t>(p.test_size), r), p.n_values);
      const auto stream = scm::ancestral_sample(transfer, static_cast<std::size_t>(p.steps), r);
      auto ab = ab0, ba = ba0;
      auto oa = make_optimizer(p.optimizer, p.learning_rate), ob = oa;
      const auto run = static_cast<std::size_t>(i * p.n_transfer + j);
      for (int t = 0; t <= p.steps; ++t) {
        res.ab[static_cast<std::size_t>(t)][run] = mean_log_prob_from_counts(ab, test, p.test_size);
        res.ba[static_cast<std::size_t>(t)][run] = mean_log_prob_from_counts(ba, test, p.test_size);
        if (t == p.steps) break;
        const std::span<const scm::DiscretePair> one(stream.data() + t, 1);
        learners::adapt_step(ab, oa, one);
        learners::adapt_step(ba, ob, one);
      }
    }
  });
  return res;
}

std::vector<Table> tables(const AdaptSpeedResult& r) {
  Table t{"adapt_speed.csv",
          {"step", "ab_median", "ab_q25", "ab_q75", "ba_median", "ba_q25", "ba_q75"},
          {}};
  for (std::size_t s = 0; s < r.ab.size(); ++s)
    t.rows.push_back({static_cast<double>(s), quantile(r.ab[s], 0.5), quantile(r.ab[s], 0.25),
                      quantile(r.ab[s], 0.75), quantile(r.ba[s], 0.5), quantile(r.ba[s], 0.25),
                      quantile(r.ba[s], 0.75)});
  return {std::move(t)};
}

// --- bivariate discrete meta-training ----------------------------------------------

BivariateDiscreteParams BivariateDiscreteParams::defaults(Profile p) {
  BivariateDiscreteParams d;
  if (p == Profile::paper) d.runs = 20;
  return d;
}

void BivariateDiscreteParams::validate() const {
  require_values(n_values, 2, "n_values");
  require(runs >= 1 && episodes >= 1, "runs and episodes must be >= 1");
  require(T >= 1 && batch_size >= 1, "T and batch_size must be >= 1");
  require(T * batch_size <= transfer_examples, "T * batch_size must not exceed transfer_examples");
  require(inner_lr > 0.0 && meta_lr > 0.0, "learning rates must be > 0");
  make_optimizer(inner_optimizer, inner_lr);
  parse_objective(objective);
}

BivariateDiscreteResult run_bivariate_discrete(const BivariateDiscreteParams& p,
                                               std::uint64_t seed, int workers) {
  const int total = static_cast<int>(p.n_values.size()) * p.runs;
  BivariateDiscreteResult res;
  res.runs.resize(static_cast<std::size_t>(total));
  res.traces.resize(static_cast<std::size_t>(total));
  parallel_for(total, workers, [&](int idx) {
    const int n = p.n_values[static_cast<std::size_t>(idx / p.runs)];
    BeliefRun& out = res.runs[static_cast<std::size_t>(idx)];
    out.n_values = n;
    out.run = idx % p.runs;
    out.stream = 1 + static_cast<std::uint64_t>(idx);
    RngStream rng(seed, out.stream);
    const auto s = scm::sample_categorical_scm(n, rng);
    const auto [ab, ba] = learners::tabular_models_from_joint(s.joint());
    meta::BivariateConfig c;
    c.meta.episodes = p.episodes;
    c.meta.objective = parse_objective(p.objective);
    c.meta.meta_optimizer = OptimizerState::rmsprop(p.meta_lr);
    c.T = p.T;
    c.batch_size = p.batch_size;
    c.transfer_examples = p.transfer_examples;
    c.inner = make_optimizer(p.inner_optimizer, p.inner_lr);
    c.reset_to_pretrained = p.reset;
    const meta::MetaRun run = meta::run_bivariate_meta_training(s, ab, ba, c, rng);
    out.sigma_gamma = run.sigma_gamma;
    for (const auto& tr : run.traces) out.delta.push_back(tr.delta);
    if (p.write_traces)
      res.traces[static_cast<std::size_t>(idx)] = {detail::trace_table(
          run, "bivariate_discrete_trace_n" + std::to_string(n) + "_run" + std::to_string(out.run) + ".csv")};
  });
  return res;
}

std::vector<Table> tables(const BivariateDiscreteResult& r) {
  Table t{"bivariate_discrete.csv", {"n_values", "run", "episode", "delta", "sigma_gamma"}, {}};
  for (const auto& run : r.runs)
    for (std::size_t e = 0; e < run.sigma_gamma.size(); ++e)
      t.rows.push_back({static_cast<double>(run.n_values), static_cast<double>(run.run),
                        static_cast<double>(e + 1), run.delta[e], run.sigma_gamma[e]});
  std::vector<Table> out{std::move(t)};
  for (const auto& tr : r.traces) out.insert(out.end(), tr.begin(), tr.end());
  return out;
}

// --- masked-MLP structure learning --------------------------------------------------

MlpStructureParams MlpStructureParams::defaults(Profile p) {
  MlpStructureParams d;
  if (p == Profile::paper) d.n_values = {10, 100};
  return d;
}

void MlpStructureParams::validate() const {
  require_values(n_values, 2, "n_values");
  require(runs >= 1 && episodes >= 1, "runs and episodes must be >= 1");
  require(K >= 1 && T >= 1 && batch_size >= 1, "K, T and batch_size must be >= 1");
  require(pretrain_examples >= 0 && pretrain_batch >= 1, "bad pretraining sizes");
  require(pretrain_lr > 0.0 && inner_lr > 0.0 && meta_lr > 0.0, "learning rates must be > 0");
  require(estimator == "ksample" || estimator == "unbiased",
          "estimator must be ksample or unbiased");
}

MlpStructureResult run_mlp_structure(const MlpStructureParams& p, std::uint64_t seed,
                                     int workers) {
  const int total = static_cast<int>(p.n_values.size()) * p.runs;
  MlpStructureResult res;
  res.runs.resize(static_cast<std::size_t>(total));
  parallel_for(total, workers, [&](int idx) {
    const int n = p.n_values[static_cast<std::size_t>(idx / p.runs)];
    MlpStructureRun& out = res.runs[static_cast<std::size_t>(idx)];
    out.n_values = n;
    out.run = idx % p.runs;
    out.stream = 1 + static_cast<std::uint64_t>(idx);
    RngStream rng(seed, out.stream);
    const auto s = scm::sample_categorical_scm(n, rng);
    std::vector<learners::MaskedMlpConditional> nets;
    for (int i = 0; i < 2; ++i) nets.emplace_back(i, 2, n, rng);
    const std::vector<int> all_edges{1, 1};
    for (auto& net : nets) net.set_mask(all_edges);
    std::vector<OptimizerState> pre(2, OptimizerState::rmsprop(p.pretrain_lr));
    for (int done = 0; done < p.pretrain_examples; done += p.pretrain_batch) {
      const int b = std::min(p.pretrain_batch, p.pretrain_examples - done);
      const auto batch = as_samples(scm::ancestral_sample(s, static_cast<std::size_t>(b), rng));
      for (int i = 0; i < 2; ++i) learners::adapt_step(nets[static_cast<std::size_t>(i)], pre[static_cast<std::size_t>(i)], batch);
    }
    const auto pretrained = nets;
    meta::Mask truth = meta::Mask::Zero(2, 2);
    truth(1, 0) = 1;
    Matrix gamma = Matrix::Zero(2, 2);
    OptimizerState meta_opt = OptimizerState::rmsprop(p.meta_lr);
    const int m = p.T * p.batch_size;
    for (int e = 0; e < p.episodes; ++e) {
      RngStream er = rng.split(static_cast<std::uint64_t>(e));
      const auto transfer = scm::intervene_on_cause(s, er);
      const auto data = as_samples(scm::ancestral_sample(transfer, static_cast<std::size_t>(m), er));
      const auto masks = meta::sample_structures(gamma, p.K, er);
      const auto& start = p.reset ? pretrained : nets;
      std::vector<learners::CategoricalSamples> batches;
      for (int t = 0; t < p.T; ++t)
        batches.push_back(data.slice(static_cast<std::size_t>(t * p.batch_size),
                                     static_cast<std::size_t>(p.batch_size)));
      const std::span<const learners::CategoricalSamples> view(batches);
      Matrix log_l = Matrix::Zero(2, p.K);
      for (int k = 0; k < p.K; ++k)
        for (int i = 0; i < 2; ++i) {
          auto net = start[static_cast<std::size_t>(i)];
          const auto& mk = masks[static_cast<std::size_t>(k)];
          net.set_mask({mk(i, 0), mk(i, 1)});
          auto opt = OptimizerState::rmsprop(p.inner_lr);
          log_l(i, k) = meta::online_log_likelihood(net, opt, view, p.T).total;
        }
      Matrix g = Matrix::Zero(2, 2);
      if (p.estimator == "ksample") {
        g = meta::edge_gradient_ksample(gamma, masks, log_l);
      } else {
        for (int k = 0; k < p.K; ++k)
          g += meta::edge_gradient_unbiased(gamma, masks[static_cast<std::size_t>(k)], log_l.col(k));
        g /= p.K;
      }
      Vector flat = gamma.reshaped();
      const Vector gflat = g.reshaped();
      numkit::optimizer_step(meta_opt, flat, gflat);
      gamma = flat.reshaped(2, 2);
      gamma.diagonal().setZero();
      if (!p.reset) {
        for (int i = 0; i < 2; ++i) {
          auto& net = nets[static_cast<std::size_t>(i)];
          net.set_mask(all_edges);
          auto opt = OptimizerState::rmsprop(p.inner_lr);
          for (const auto& b : batches) learners::adapt_step(net, opt, b);
        }
      }
      out.cross_entropy.push_back(meta::edge_cross_entropy(gamma, truth));
      out.sigma_ab.push_back(numkit::sigmoid(gamma(1, 0)));
      out.sigma_ba.push_back(numkit::sigmoid(gamma(0, 1)));
    }
  });
  return res;
}

std::vector<Table> tables(const MlpStructureResult& r) {
  Table t{"mlp_structure.csv",
          {"n_values", "run", "episode", "cross_entropy", "sigma_a_to_b", "sigma_b_to_a"},
          {}};
  for (const auto& run : r.runs)
    for (std::size_t e = 0; e < run.cross_entropy.size(); ++e)
      t.rows.push_back({static_cast<double>(run.n_values), static_cast<double>(run.run),
                        static_cast<double>(e + 1), run.cross_entropy[e], run.sigma_ab[e],
                        run.sigma_ba[e]});
  return {std::move(t)};
}

}  // namespace metacausal::experiments
