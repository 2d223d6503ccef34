#include <cmath>

#include "internal.hpp"

namespace metacausal::experiments {

using detail::make_optimizer;
using detail::require;
using numkit::OptimizerState;
using numkit::RngStream;

namespace {

void unzip(const std::vector<scm::ContinuousPair>& d, std::vector<double>& a,
           std::vector<double>& b) {
  a.clear();
  b.clear();
  a.reserve(d.size());
  b.reserve(d.size());
  for (const auto& p : d) {
    a.push_back(p.a);
    b.push_back(p.b);
  }
}

meta::MarginalMode parse_marginal(const std::string& s) {
  if (s == "frozen") return meta::MarginalMode::frozen;
  if (s == "refit") return meta::MarginalMode::refit;
  throw ConfigError("unknown marginal mode '" + s + "' (expected frozen or refit)");
}

}  // namespace

// --- continuous multimodal ---------------------------------------------------------

ContinuousParams ContinuousParams::defaults(Profile p) {
  ContinuousParams d;
  if (p == Profile::paper) d.runs = 20;
  return d;
}

void ContinuousParams::validate() const {
  require(runs >= 1 && iterations >= 1, "runs and iterations must be >= 1");
  require(T >= 1 && batch_size >= 1, "T and batch_size must be >= 1");
  require(train_size >= components, "train_size must be >= components");
  require(pretrain_steps >= 0 && pretrain_batch >= 1, "bad pretraining sizes");
  require(pretrain_lr > 0.0 && inner_lr > 0.0 && meta_lr > 0.0, "learning rates must be > 0");
  require(components >= 1 && hidden >= 1, "components and hidden must be >= 1");
  require(noise_variance > 0.0, "noise_variance must be > 0");
  require(scatter_samples >= 0, "scatter_samples must be >= 0");
  require(mechanism == "spline" || mechanism == "linear", "mechanism must be spline or linear");
  require(objective == "regret" || objective == "likelihood",
          "objective must be regret or likelihood");
  parse_marginal(marginal);
}

ContinuousResult run_continuous(const ContinuousParams& p, std::uint64_t seed, int workers) {
  ContinuousResult res;
  res.runs.resize(static_cast<std::size_t>(p.runs));
  const auto mode = parse_marginal(p.marginal);
  parallel_for(p.runs, workers, [&](int r) {
    ContinuousRun& out = res.runs[static_cast<std::size_t>(r)];
    out.run = r;
    out.stream = 1 + static_cast<std::uint64_t>(r);
    RngStream rng(seed, out.stream);
    auto s = scm::sample_spline_scm(rng);
    s.noise_variance = p.noise_variance;
    if (p.mechanism == "linear") s.f = scm::QuadraticSpline::through(s.f.xs, s.f.xs);
    std::vector<double> A, B;
    unzip(scm::ancestral_sample(s, static_cast<std::size_t>(p.train_size), rng), A, B);

    meta::ContinuousHypothesis ab{learners::fit_gmm_em(A, p.components, rng).model,
                                  learners::MdnConditional(p.hidden, p.components, rng)};
    meta::ContinuousHypothesis ba{learners::fit_gmm_em(B, p.components, rng).model,
                                  learners::MdnConditional(p.hidden, p.components, rng)};
    ab.conditional.fit_normalization(A, B);
    ba.conditional.fit_normalization(B, A);
    auto oab = OptimizerState::rmsprop(p.pretrain_lr), oba = oab;
    std::vector<double> xa(static_cast<std::size_t>(p.pretrain_batch)), xb(xa.size());
    for (int it = 0; it < p.pretrain_steps; ++it) {
      for (std::size_t k = 0; k < xa.size(); ++k) {
        const auto i = rng.below(static_cast<std::uint64_t>(p.train_size));
        xa[k] = A[i];
        xb[k] = B[i];
      }
      learners::adapt_step(ab.conditional, oab, std::span<const double>(xb), std::span<const double>(xa));
      learners::adapt_step(ba.conditional, oba, std::span<const double>(xa), std::span<const double>(xb));
    }

    if (r == 0) {
      RngStream sr = rng.split(0);
      for (int k = 0; k < p.scatter_samples; ++k) {
        const auto st = scm::intervene_on_cause(s, sr);
        const auto x = scm::ancestral_sample(st, 1, sr).front();
        res.scatter.push_back({st.cause_mean, x.a, x.b});
      }
    }

    meta::MetaConfig mc;
    mc.episodes = p.iterations;
    mc.objective = p.objective == "regret" ? meta::Objective::regret_mixture
                                           : meta::Objective::likelihood_mixture;
    mc.meta_optimizer = OptimizerState::rmsprop(p.meta_lr);
    const auto inner = OptimizerState::rmsprop(p.inner_lr);
    const auto need = static_cast<std::size_t>(p.T * p.batch_size);
    const meta::MetaRun run = meta::run_meta_loop(mc, [&](int e) {
      RngStream er = rng.split(1 + static_cast<std::uint64_t>(e));
      const auto st = scm::intervene_on_cause(s, er);
      std::vector<double> ta, tb;
      unzip(scm::ancestral_sample(st, need, er), ta, tb);
      meta::EpisodeLikelihoods lik;
      lik.regret_ab = meta::continuous_regret(ab, ta, tb, p.T, p.batch_size, inner, mode);
      lik.regret_ba = meta::continuous_regret(ba, tb, ta, p.T, p.batch_size, inner, mode);
      lik.ab_steps = {-lik.regret_ab};
      lik.ba_steps = {-lik.regret_ba};
      out.regret_ab.push_back(lik.regret_ab);
      out.regret_ba.push_back(lik.regret_ba);
      return lik;
    });
    out.sigma_gamma = run.sigma_gamma;
  });
  return res;
}

std::vector<Table> tables(const ContinuousResult& r) {
  Table t{"continuous.csv", {"run", "iteration", "regret_ab", "regret_ba", "sigma_gamma"}, {}};
  for (const auto& run : r.runs)
    for (std::size_t i = 0; i < run.sigma_gamma.size(); ++i)
      t.rows.push_back({static_cast<double>(run.run), static_cast<double>(i + 1), run.regret_ab[i],
                        run.regret_ba[i], run.sigma_gamma[i]});
  Table sc{"continuous_scatter.csv", {"mu", "a", "b"}, {}};
  for (const auto& x : r.scatter) sc.rows.push_back({x[0], x[1], x[2]});
  return {std::move(t), std::move(sc)};
}

// --- linear Gaussian -----------------------------------------------------------------

LinearGaussianParams LinearGaussianParams::defaults(Profile p) {
  LinearGaussianParams d;
  if (p == Profile::paper) {
    d.dim = 100;
    d.runs = 20;
  }
  return d;
}

void LinearGaussianParams::validate() const {
  require(dim >= 1, "dim must be >= 1");
  require(runs >= 1 && episodes >= 1, "runs and episodes must be >= 1");
  require(T >= 1 && batch_size >= 1, "T and batch_size must be >= 1");
  require(inner_lr > 0.0 && meta_lr > 0.0, "learning rates must be > 0");
}

LinearGaussianResult run_linear_gaussian(const LinearGaussianParams& p, std::uint64_t seed,
                                         int workers) {
  LinearGaussianResult res;
  res.runs.resize(static_cast<std::size_t>(p.runs));
  res.traces.resize(static_cast<std::size_t>(p.runs));
  std::vector<double> mismatch(static_cast<std::size_t>(p.runs), 0.0);
  parallel_for(p.runs, workers, [&](int r) {
    BeliefRun& out = res.runs[static_cast<std::size_t>(r)];
    out.n_values = p.dim;
    out.run = r;
    out.stream = 1 + static_cast<std::uint64_t>(r);
    RngStream rng(seed, out.stream);
    const auto s = scm::sample_linear_gaussian_scm(p.dim, rng);
    const auto [ab, ba] = learners::flip_linear_gaussian(s);

    RngStream check = rng.split(0);
    const auto [ca, cb] = scm::ancestral_sample(s, 100, check);
    double& m = mismatch[static_cast<std::size_t>(r)];
    for (Eigen::Index j = 0; j < ca.cols(); ++j) {
      const double lab = ab.sum_log_prob(ca.col(j), cb.col(j));
      const double lba = ba.sum_log_prob(ca.col(j), cb.col(j));
      m = std::max(m, std::abs(lab - lba));
    }

    meta::BivariateConfig c;
    c.meta.episodes = p.episodes;
    c.meta.meta_optimizer = OptimizerState::rmsprop(p.meta_lr);
    c.T = p.T;
    c.batch_size = p.batch_size;
    c.transfer_examples = p.T * p.batch_size;
    c.inner = OptimizerState::rmsprop(p.inner_lr);
    const meta::MetaRun run = meta::run_bivariate_meta_training(s, ab, ba, c, rng);
    out.sigma_gamma = run.sigma_gamma;
    for (const auto& tr : run.traces) out.delta.push_back(tr.delta);
    if (p.write_traces)
      res.traces[static_cast<std::size_t>(r)] = {
          detail::trace_table(run, "linear_gaussian_trace_run" + std::to_string(r) + ".csv")};
  });
  for (double m : mismatch) res.max_joint_mismatch = std::max(res.max_joint_mismatch, m);
  return res;
}

std::vector<Table> tables(const LinearGaussianResult& r) {
  Table t{"linear_gaussian.csv", {"dim", "run", "episode", "delta", "sigma_gamma"}, {}};
  for (const auto& run : r.runs)
    for (std::size_t e = 0; e < run.sigma_gamma.size(); ++e)
      t.rows.push_back({static_cast<double>(run.n_values), static_cast<double>(run.run),
                        static_cast<double>(e + 1), run.delta[e], run.sigma_gamma[e]});
  std::vector<Table> out{std::move(t)};
  for (const auto& tr : r.traces) out.insert(out.end(), tr.begin(), tr.end());
  return out;
}

// --- representation learning ---------------------------------------------------------

EncoderParams EncoderParams::defaults(Profile p) {
  EncoderParams d;
  if (p == Profile::paper) d.runs = 20;
  return d;
}

void EncoderParams::validate() const {
  require(runs >= 1 && iterations >= 1, "runs and iterations must be >= 1");
  require(std::isfinite(theta_D) && std::isfinite(theta_E0), "angles must be finite");
  require(train_steps >= 0 && train_batch >= 1, "bad training sizes");
  require(T >= 1 && batch_size >= 1, "T and batch_size must be >= 1");
  require(train_lr > 0.0 && inner_lr > 0.0 && meta_lr > 0.0 && encoder_lr > 0.0,
          "learning rates must be > 0");
  require(fd_step > 0.0, "fd_step must be > 0");
  require(components >= 1 && hidden >= 1, "components and hidden must be >= 1");
  parse_marginal(marginal);
}

EncoderResult run_encoder(const EncoderParams& p, std::uint64_t seed, int workers) {
  struct Trained {
    meta::ContinuousHypothesis h;
    OptimizerState marginal_opt;
    OptimizerState conditional_opt;
    void step(const std::vector<double>& cause, const std::vector<double>& effect) {
      learners::adapt_step(h.marginal, marginal_opt, std::span<const double>(cause));
      learners::adapt_step(h.conditional, conditional_opt, std::span<const double>(effect),
                           std::span<const double>(cause));
    }
  };
  EncoderResult res;
  res.runs.resize(static_cast<std::size_t>(p.runs));
  const auto mode = parse_marginal(p.marginal);
  parallel_for(p.runs, workers, [&](int r) {
    EncoderRun& out = res.runs[static_cast<std::size_t>(r)];
    out.run = r;
    out.stream = 1 + static_cast<std::uint64_t>(r);
    RngStream rng(seed, out.stream);
    const auto s = scm::sample_spline_scm(rng);
    const scm::RotationDecoder decoder{p.theta_D};
    double theta = p.theta_E0, gamma = 0.0;

    const auto train_opt = OptimizerState::rmsprop(p.train_lr);
    Trained uv, vu;
    {
      const auto obs = scm::decode_observations(decoder, scm::ancestral_sample(s, 1000, rng));
      std::vector<double> u, v;
      unzip(learners::encode({theta}, obs), u, v);
      uv = {{learners::fit_gmm_em(u, p.components, rng).model,
             learners::MdnConditional(p.hidden, p.components, rng)},
            train_opt,
            train_opt};
      vu = {{learners::fit_gmm_em(v, p.components, rng).model,
             learners::MdnConditional(p.hidden, p.components, rng)},
            train_opt,
            train_opt};
      // rotation-invariant scale of the raw observations
      double ss = 0.0;
      for (const auto& x : obs) ss += x.a * x.a + x.b * x.b;
      const double sd = std::sqrt(ss / (2.0 * static_cast<double>(obs.size())));
      uv.h.conditional.set_normalization(0.0, sd, 0.0, sd);
      vu.h.conditional.set_normalization(0.0, sd, 0.0, sd);
    }

    auto theta_opt = OptimizerState::rmsprop(p.encoder_lr);
    auto gamma_opt = OptimizerState::rmsprop(p.meta_lr);
    const auto inner = OptimizerState::rmsprop(p.inner_lr);
    Vector x(1), g(1);
    for (int it = 0; it < p.iterations; ++it) {
      RngStream er = rng.split(static_cast<std::uint64_t>(it));
      std::vector<double> u, v;
      for (int k = 0; k < p.train_steps; ++k) {
        const auto obs = scm::decode_observations(
            decoder, scm::ancestral_sample(s, static_cast<std::size_t>(p.train_batch), er));
        unzip(learners::encode({theta}, obs), u, v);
        uv.step(u, v);
        vu.step(v, u);
      }
      const auto st = scm::intervene_on_cause(s, er);
      const auto obs = scm::decode_observations(
          decoder, scm::ancestral_sample(st, static_cast<std::size_t>(p.T * p.batch_size), er));
      double r_uv = 0.0, r_vu = 0.0;
      const auto evaluate = [&](double th) {
        std::vector<double> eu, ev;
        unzip(learners::encode({th}, obs), eu, ev);
        r_uv = meta::continuous_regret(uv.h, eu, ev, p.T, p.batch_size, inner, mode);
        r_vu = meta::continuous_regret(vu.h, ev, eu, p.T, p.batch_size, inner, mode);
        return meta::regret_mixture(gamma, r_uv, r_vu);
      };
      const double g_theta = meta::encoder_meta_gradient(theta, evaluate, p.fd_step);
      evaluate(theta);
      const double g_gamma = meta::regret_mixture_gradient(gamma, r_uv, r_vu);
      if (!std::isfinite(g_theta) || !std::isfinite(g_gamma))
        throw NumericalError("non-finite encoder meta-gradient");
      if (!p.freeze_encoder) {
        x[0] = theta;
        g[0] = g_theta;
        numkit::optimizer_step(theta_opt, x, g);
        theta = x[0];
      }
      x[0] = gamma;
      g[0] = g_gamma;
      numkit::optimizer_step(gamma_opt, x, g);
      gamma = x[0];
      out.theta_E.push_back(theta);
      out.sigma_gamma.push_back(numkit::sigmoid(gamma));
      out.regret_uv.push_back(r_uv);
      out.regret_vu.push_back(r_vu);
    }
  });
  return res;
}

std::vector<Table> tables(const EncoderResult& r) {
  Table t{"encoder.csv", {"run", "iteration", "theta_E", "sigma_gamma", "regret_uv", "regret_vu"}, {}};
  for (const auto& run : r.runs)
    for (std::size_t i = 0; i < run.theta_E.size(); ++i)
      t.rows.push_back({static_cast<double>(run.run), static_cast<double>(i + 1), run.theta_E[i],
                        run.sigma_gamma[i], run.regret_uv[i], run.regret_vu[i]});
  return {std::move(t)};
}

}  // namespace metacausal::experiments
