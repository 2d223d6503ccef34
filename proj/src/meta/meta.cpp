#include "metacausal/meta.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace metacausal::meta {

using numkit::log_sigmoid;
using numkit::sigmoid;

double mixture_regret(double gamma, double log_l_ab, double log_l_ba) {
  const double terms[2] = {log_sigmoid(gamma) + log_l_ab, log_sigmoid(-gamma) + log_l_ba};
  return -numkit::log_sum_exp(terms);
}

double gamma_gradient(double gamma, double log_l_ab, double log_l_ba) {
  return sigmoid(gamma) - sigmoid(gamma + (log_l_ab - log_l_ba));
}

double regret_mixture(double gamma, double regret_ab, double regret_ba) {
  const double terms[2] = {log_sigmoid(gamma) + regret_ab, log_sigmoid(-gamma) + regret_ba};
  return numkit::log_sum_exp(terms);
}

double regret_mixture_gradient(double gamma, double regret_ab, double regret_ba) {
  return sigmoid(gamma + regret_ab - regret_ba) - sigmoid(gamma);
}

void write_trace_csv(std::ostream& os, const EpisodeTrace& trace, bool header) {
  if (header) os << kTraceHeader << '\n';
  double cum_ab = 0.0, cum_ba = 0.0;
  for (std::size_t t = 0; t < trace.ab_steps.size(); ++t) {
    cum_ab += trace.ab_steps[t];
    cum_ba += trace.ba_steps[t];
    os << trace.episode << ',' << t << ',' << trace.ab_steps[t] << ',' << trace.ba_steps[t]
       << ',' << cum_ab << ',' << cum_ba << ',' << cum_ab - cum_ba << ','
       << mixture_regret(trace.gamma, cum_ab, cum_ba) << ',' << trace.sigma_gamma << '\n';
  }
}

MetaRun run_meta_loop(const MetaConfig& config,
                      const std::function<EpisodeLikelihoods(int)>& episode) {
  MetaRun run;
  run.gamma = config.gamma0;
  numkit::OptimizerState opt = config.meta_optimizer;
  Vector g(1);
  run.sigma_gamma.reserve(static_cast<std::size_t>(config.episodes));
  for (int e = 0; e < config.episodes; ++e) {
    const EpisodeLikelihoods lik = episode(e);
    EpisodeTrace tr;
    tr.episode = e;
    tr.ab_steps = lik.ab_steps;
    tr.ba_steps = lik.ba_steps;
    for (double v : lik.ab_steps) tr.log_l_ab += v;
    for (double v : lik.ba_steps) tr.log_l_ba += v;
    tr.delta = tr.log_l_ab - tr.log_l_ba;
    tr.gamma = run.gamma;
    tr.sigma_gamma = sigmoid(run.gamma);
    if (config.objective == Objective::likelihood_mixture) {
      tr.regret = mixture_regret(run.gamma, tr.log_l_ab, tr.log_l_ba);
      tr.gradient = gamma_gradient(run.gamma, tr.log_l_ab, tr.log_l_ba);
    } else {
      tr.regret = regret_mixture(run.gamma, lik.regret_ab, lik.regret_ba);
      tr.gradient = regret_mixture_gradient(run.gamma, lik.regret_ab, lik.regret_ba);
    }
    if (!std::isfinite(tr.regret) || !std::isfinite(tr.gradient))
      throw NumericalError("non-finite regret");
    g[0] = tr.gradient;
    Vector p(1);
    p[0] = run.gamma;
    numkit::optimizer_step(opt, p, g);
    run.gamma = p[0];
    run.sigma_gamma.push_back(sigmoid(run.gamma));
    run.traces.push_back(std::move(tr));
  }
  return run;
}

namespace {

template <class Batch>
std::vector<Batch> split_batches(const Batch& all, int batch_size, int T);

template <>
std::vector<std::vector<scm::DiscretePair>> split_batches(
    const std::vector<scm::DiscretePair>& all, int batch_size, int T) {
  std::vector<std::vector<scm::DiscretePair>> out;
  for (int t = 0; t < T; ++t) {
    const auto begin = all.begin() + static_cast<std::ptrdiff_t>(t) * batch_size;
    out.emplace_back(begin, begin + batch_size);
  }
  return out;
}

void check_config(const BivariateConfig& c) {
  if (c.T < 1 || c.batch_size < 1)
    throw std::invalid_argument("T and batch_size must be >= 1");
  if (c.T * c.batch_size > c.transfer_examples)
    throw std::invalid_argument("T * batch_size exceeds the transfer examples");
}

}  // namespace

MetaRun run_bivariate_meta_training(const scm::CategoricalScm& scm,
                                    const learners::TabularBivariateModel& pretrained_ab,
                                    const learners::TabularBivariateModel& pretrained_ba,
                                    const BivariateConfig& config, numkit::RngStream& rng) {
  check_config(config);
  auto ab = pretrained_ab;
  auto ba = pretrained_ba;
  auto episode = [&](int e) {
    numkit::RngStream er = rng.split(static_cast<std::uint64_t>(e));
    const auto transfer = scm::intervene_on_cause(scm, er);
    auto data = scm::ancestral_sample(transfer, static_cast<std::size_t>(config.transfer_examples), er);
    if (config.swap_variables) data = scm::swap_roles(data);
    const auto batches = split_batches(data, config.batch_size, config.T);
    if (config.reset_to_pretrained) {
      ab = pretrained_ab;
      ba = pretrained_ba;
    }
    return bivariate_episode(ab, ba, config.inner,
                             std::span<const std::vector<scm::DiscretePair>>(batches), config.T);
  };
  return run_meta_loop(config.meta, episode);
}

MetaRun run_bivariate_meta_training(const scm::LinearGaussianScm& scm,
                                    const learners::LinearGaussianModule& pretrained_ab,
                                    const learners::LinearGaussianModule& pretrained_ba,
                                    const BivariateConfig& config, numkit::RngStream& rng) {
  check_config(config);
  auto ab = pretrained_ab;
  auto ba = pretrained_ba;
  using Batch = std::pair<Matrix, Matrix>;
  auto episode = [&](int e) {
    numkit::RngStream er = rng.split(static_cast<std::uint64_t>(e));
    const auto transfer = scm::intervene_on_cause(scm, er);
    auto [a, b] = scm::ancestral_sample(transfer, static_cast<std::size_t>(config.transfer_examples), er);
    if (config.swap_variables) std::swap(a, b);
    std::vector<Batch> batches;
    for (int t = 0; t < config.T; ++t)
      batches.emplace_back(a.middleCols(t * config.batch_size, config.batch_size),
                           b.middleCols(t * config.batch_size, config.batch_size));
    if (config.reset_to_pretrained) {
      ab = pretrained_ab;
      ba = pretrained_ba;
    }
    return bivariate_episode(ab, ba, config.inner, std::span<const Batch>(batches), config.T);
  };
  return run_meta_loop(config.meta, episode);
}

double continuous_regret(const ContinuousHypothesis& h, std::span<const double> cause,
                         std::span<const double> effect, int T, int batch_size,
                         const numkit::OptimizerState& inner, MarginalMode mode,
                         int em_iterations) {
  if (T < 1 || batch_size < 1) throw std::invalid_argument("T and batch_size must be >= 1");
  const auto need = static_cast<std::size_t>(T) * static_cast<std::size_t>(batch_size);
  if (cause.size() < need || effect.size() < need)
    throw std::out_of_range("transfer stream exhausted");
  const learners::GaussianMixtureMarginal marginal =
      mode == MarginalMode::refit
          ? learners::refine_gmm_em(h.marginal, cause.first(need), em_iterations).model
          : h.marginal;
  auto conditional = h.conditional;
  auto opt = inner;
  opt.accumulator.resize(0);
  double regret = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto off = static_cast<std::size_t>(t) * static_cast<std::size_t>(batch_size);
    const auto c = cause.subspan(off, static_cast<std::size_t>(batch_size));
    const auto e = effect.subspan(off, static_cast<std::size_t>(batch_size));
    const double ll = conditional.sum_log_prob(e, c) + marginal.sum_log_prob(c);
    if (!std::isfinite(ll)) throw NumericalError("non-finite online log-likelihood");
    regret -= ll;
    learners::adapt_step(conditional, opt, e, c);
  }
  return regret;
}

// --- many variables -------------------------------------------------------------

std::vector<Mask> sample_structures(const Matrix& gamma_matrix, int K, numkit::RngStream& rng) {
  if (K < 1) throw std::invalid_argument("sample_structures: K must be >= 1");
  if (gamma_matrix.rows() != gamma_matrix.cols())
    throw std::invalid_argument("gamma matrix must be square");
  const Eigen::Index m = gamma_matrix.rows();
  std::vector<Mask> out;
  out.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    Mask b = Mask::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index j = 0; j < m; ++j)
        if (i != j) b(i, j) = rng.uniform() < sigmoid(gamma_matrix(i, j)) ? 1 : 0;
    out.push_back(std::move(b));
  }
  return out;
}

Matrix edge_gradient_ksample(const Matrix& gamma_matrix, const std::vector<Mask>& samples,
                             const Matrix& log_l) {
  const Eigen::Index m = gamma_matrix.rows();
  const auto k = static_cast<Eigen::Index>(samples.size());
  if (k == 0) throw std::invalid_argument("edge_gradient_ksample: no samples");
  if (log_l.rows() != m || log_l.cols() != k)
    throw std::invalid_argument("edge_gradient_ksample: log-likelihood shape mismatch");
  Matrix g = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vector w = numkit::softmax(log_l.row(i).transpose());
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      const double s = sigmoid(gamma_matrix(i, j));
      double acc = 0.0;
      for (Eigen::Index q = 0; q < k; ++q)
        acc += w[q] * (s - samples[static_cast<std::size_t>(q)](i, j));
      g(i, j) = acc;
    }
  }
  return g;
}

unsigned parent_code(const Mask& mask, int i) {
  unsigned code = 0;
  int bit = 0;
  for (Eigen::Index j = 0; j < mask.cols(); ++j) {
    if (j == i) continue;
    if (mask(i, j) != 0) code |= 1u << bit;
    ++bit;
  }
  return code;
}

namespace {

// log P(B_i = code) and the posterior-free pieces shared by the enumerations.
void check_tables(const Matrix& gamma_matrix, const ParentTables& log_l) {
  const Eigen::Index m = gamma_matrix.rows();
  if (m - 1 > 20) throw std::invalid_argument("enumeration infeasible");
  if (static_cast<Eigen::Index>(log_l.size()) != m)
    throw std::invalid_argument("parent tables: one table per node expected");
  for (const auto& t : log_l)
    if (t.size() != (std::size_t{1} << (m - 1)))
      throw std::invalid_argument("parent tables: wrong table size");
}

double log_prior(const Matrix& gamma_matrix, Eigen::Index i, unsigned code) {
  double lp = 0.0;
  int bit = 0;
  for (Eigen::Index j = 0; j < gamma_matrix.cols(); ++j) {
    if (j == i) continue;
    const bool on = (code >> bit) & 1u;
    lp += on ? log_sigmoid(gamma_matrix(i, j)) : log_sigmoid(-gamma_matrix(i, j));
    ++bit;
  }
  return lp;
}

}  // namespace

double exact_edge_regret(const Matrix& gamma_matrix, const ParentTables& log_l) {
  check_tables(gamma_matrix, log_l);
  double r = 0.0;
  for (Eigen::Index i = 0; i < gamma_matrix.rows(); ++i) {
    const auto& table = log_l[static_cast<std::size_t>(i)];
    std::vector<double> terms(table.size());
    for (unsigned c = 0; c < table.size(); ++c)
      terms[c] = log_prior(gamma_matrix, i, c) + table[c];
    r -= numkit::log_sum_exp(terms);
  }
  return r;
}

Matrix exact_edge_gradient(const Matrix& gamma_matrix, const ParentTables& log_l) {
  check_tables(gamma_matrix, log_l);
  const Eigen::Index m = gamma_matrix.rows();
  Matrix g = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& table = log_l[static_cast<std::size_t>(i)];
    Vector terms(static_cast<Eigen::Index>(table.size()));
    for (unsigned c = 0; c < table.size(); ++c)
      terms[c] = log_prior(gamma_matrix, i, c) + table[c];
    const Vector post = numkit::softmax(terms);
    int bit = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      double on = 0.0;
      for (unsigned c = 0; c < table.size(); ++c)
        if ((c >> bit) & 1u) on += post[c];
      g(i, j) = sigmoid(gamma_matrix(i, j)) - on;
      ++bit;
    }
  }
  return g;
}

Matrix edge_gradient_unbiased(const Matrix& gamma_matrix, const Mask& sample,
                              const Vector& log_l) {
  const Eigen::Index m = gamma_matrix.rows();
  if (sample.rows() != m || sample.cols() != m || log_l.size() != m)
    throw std::invalid_argument("edge_gradient_unbiased: shape mismatch");
  Matrix g = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      if (i != j) g(i, j) = (sigmoid(gamma_matrix(i, j)) - sample(i, j)) * log_l[i];
  return g;
}

Matrix exact_additive_edge_gradient(const Matrix& gamma_matrix, const ParentTables& log_l) {
  check_tables(gamma_matrix, log_l);
  const Eigen::Index m = gamma_matrix.rows();
  Matrix g = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& table = log_l[static_cast<std::size_t>(i)];
    int bit = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (j == i) continue;
      // d/dgamma_ij of -sum_c P(c) log L_c, with dP(c)/dgamma_ij = P(c)(b_j - s)
      const double s = sigmoid(gamma_matrix(i, j));
      double acc = 0.0;
      for (unsigned c = 0; c < table.size(); ++c) {
        const double b = ((c >> bit) & 1u) ? 1.0 : 0.0;
        acc += std::exp(log_prior(gamma_matrix, i, c)) * (s - b) * table[c];
      }
      g(i, j) = acc;
      ++bit;
    }
  }
  return g;
}

double edge_cross_entropy(const Matrix& gamma_matrix, const Mask& truth) {
  double ce = 0.0;
  for (Eigen::Index i = 0; i < gamma_matrix.rows(); ++i)
    for (Eigen::Index j = 0; j < gamma_matrix.cols(); ++j) {
      if (i == j) continue;
      ce -= truth(i, j) != 0 ? log_sigmoid(gamma_matrix(i, j)) : log_sigmoid(-gamma_matrix(i, j));
    }
  return ce;
}

double encoder_meta_gradient(double theta_E, const std::function<double(double)>& evaluator,
                             double h) {
  if (!(h > 0.0)) throw std::invalid_argument("encoder_meta_gradient: h must be > 0");
  const double up = evaluator(theta_E + h);
  const double down = evaluator(theta_E - h);
  if (!std::isfinite(up) || !std::isfinite(down))
    throw NumericalError("encoder_meta_gradient: non-finite regret");
  return (up - down) / (2.0 * h);
}

}  // namespace metacausal::meta
