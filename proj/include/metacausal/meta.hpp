#ifndef METACAUSAL_META_HPP
#define METACAUSAL_META_HPP

#include <functional>
#include <iosfwd>
#include <span>
#include <tuple>
#include <type_traits>
#include <vector>

#include "metacausal/learners/adapt.hpp"
#include "metacausal/learners/gaussian.hpp"
#include "metacausal/learners/mixture.hpp"
#include "metacausal/learners/tabular.hpp"
#include "metacausal/numkit.hpp"
#include "metacausal/scm.hpp"

namespace metacausal::meta {

using Mask = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

/// Meta-parameters: p(A->B) = sigmoid(gamma), per-edge logits, encoder angle.
struct StructuralBelief {
  double gamma = 0.0;
  Matrix gamma_matrix;  // diagonal never read
  double theta_E = 0.0;
};

enum class Objective { likelihood_mixture, regret_mixture };

struct OnlineResult {
  double total = 0.0;
  std::vector<double> steps;  // log P(batch_t; theta_t), before the update at t
};

namespace detail {

template <class T, class = void>
struct is_tuple_like : std::false_type {};
template <class T>
struct is_tuple_like<T, std::void_t<decltype(std::tuple_size<T>::value)>> : std::true_type {};

template <class M, class B>
double batch_log_prob(const M& m, const B& b) {
  if constexpr (is_tuple_like<B>::value)
    return std::apply([&](const auto&... xs) { return m.sum_log_prob(xs...); }, b);
  else
    return m.sum_log_prob(b);
}

template <class M, class B>
void batch_adapt(M& m, numkit::OptimizerState& opt, const B& b) {
  if constexpr (is_tuple_like<B>::value)
    std::apply([&](const auto&... xs) { learners::adapt_step(m, opt, xs...); }, b);
  else
    learners::adapt_step(m, opt, b);
}

}  // namespace detail

/// Runs T adaptation steps; each batch is scored before the step it drives.
template <learners::FlatParametrized M, class Batch>
OnlineResult online_log_likelihood(M& model, numkit::OptimizerState& opt,
                                   std::span<const Batch> batches, int T) {
  if (T < 1) throw std::invalid_argument("online_log_likelihood: T must be >= 1");
  if (batches.size() < static_cast<std::size_t>(T))
    throw std::out_of_range("transfer stream exhausted");
  OnlineResult r;
  r.steps.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const auto& b = batches[static_cast<std::size_t>(t)];
    const double ll = detail::batch_log_prob(model, b);
    if (!std::isfinite(ll)) throw NumericalError("non-finite online log-likelihood");
    r.steps.push_back(ll);
    r.total += ll;
    detail::batch_adapt(model, opt, b);
  }
  return r;
}

/// -log[s L_ab + (1-s) L_ba], s = sigmoid(gamma), evaluated in the log domain.
double mixture_regret(double gamma, double log_l_ab, double log_l_ba);
/// d/dgamma of mixture_regret: sigmoid(gamma) - sigmoid(gamma + delta).
double gamma_gradient(double gamma, double log_l_ab, double log_l_ba);

/// log[s e^{R_ab} + (1-s) e^{R_ba}] over per-hypothesis regrets.
double regret_mixture(double gamma, double regret_ab, double regret_ba);
double regret_mixture_gradient(double gamma, double regret_ab, double regret_ba);

/// One episode's outcome for both hypotheses.
struct EpisodeTrace {
  int episode = 0;
  std::vector<double> ab_steps;
  std::vector<double> ba_steps;
  double log_l_ab = 0.0;
  double log_l_ba = 0.0;
  double delta = 0.0;
  double regret = 0.0;
  double gradient = 0.0;
  double gamma = 0.0;  // belief logit used during the episode
  double sigma_gamma = 0.5;
};

/// Writes the per-step rows of an episode; header written when `header` is true.
void write_trace_csv(std::ostream& os, const EpisodeTrace& trace, bool header);
inline constexpr const char* kTraceHeader =
    "episode,step,logL_ab_step,logL_ba_step,logL_ab_cum,logL_ba_cum,delta,regret,sigma_gamma";

struct EpisodeLikelihoods {
  std::vector<double> ab_steps;
  std::vector<double> ba_steps;
  /// For the regret-mixture objective: per-hypothesis regrets.
  double regret_ab = 0.0;
  double regret_ba = 0.0;
};

struct MetaConfig {
  int episodes = 500;
  Objective objective = Objective::likelihood_mixture;
  numkit::OptimizerState meta_optimizer = numkit::OptimizerState::rmsprop(0.01);
  double gamma0 = 0.0;
};

struct MetaRun {
  std::vector<double> sigma_gamma;  // after each episode's update
  std::vector<EpisodeTrace> traces;
  double gamma = 0.0;
};

/// Generic outer loop: one gamma step per episode.
MetaRun run_meta_loop(const MetaConfig& config,
                      const std::function<EpisodeLikelihoods(int episode)>& episode);

/// Both hypotheses adapt on the same batches (fresh optimizer state each).
template <learners::FlatParametrized M, class Batch>
EpisodeLikelihoods bivariate_episode(M& ab, M& ba, const numkit::OptimizerState& inner,
                                     std::span<const Batch> batches, int T) {
  auto opt_ab = inner;
  auto opt_ba = inner;
  opt_ab.accumulator.resize(0);
  opt_ba.accumulator.resize(0);
  EpisodeLikelihoods e;
  e.ab_steps = online_log_likelihood(ab, opt_ab, batches, T).steps;
  e.ba_steps = online_log_likelihood(ba, opt_ba, batches, T).steps;
  return e;
}

struct BivariateConfig {
  MetaConfig meta;
  int T = 2;
  int batch_size = 10;
  int transfer_examples = 20;  // m
  bool reset_to_pretrained = true;
  numkit::OptimizerState inner = numkit::OptimizerState::sgd(0.1);
  bool swap_variables = false;  // present the ground truth as B->A
};

/// Tabular categorical meta-training: each episode intervenes on the cause,
/// draws m transfer examples and adapts both factorisations on them.
MetaRun run_bivariate_meta_training(const scm::CategoricalScm& scm,
                                    const learners::TabularBivariateModel& pretrained_ab,
                                    const learners::TabularBivariateModel& pretrained_ba,
                                    const BivariateConfig& config, numkit::RngStream& rng);

/// Linear-Gaussian meta-training with the same episode structure.
MetaRun run_bivariate_meta_training(const scm::LinearGaussianScm& scm,
                                    const learners::LinearGaussianModule& pretrained_ab,
                                    const learners::LinearGaussianModule& pretrained_ba,
                                    const BivariateConfig& config, numkit::RngStream& rng);

// --- continuous hypotheses --------------------------------------------------------

/// P(cause) by a mixture marginal, P(effect | cause) by an MDN.
struct ContinuousHypothesis {
  learners::GaussianMixtureMarginal marginal;
  learners::MdnConditional conditional;
};

/// frozen: the marginal keeps its pretrained value; refit: warm-started EM on
/// the episode's cause samples before scoring.
enum class MarginalMode { frozen, refit };

/// -sum_t [log P(effect_t | cause_t; theta_t) + log P(cause_t)] over T
/// consecutive batches; the conditional adapts after each batch is scored.
double continuous_regret(const ContinuousHypothesis& h, std::span<const double> cause,
                         std::span<const double> effect, int T, int batch_size,
                         const numkit::OptimizerState& inner, MarginalMode mode,
                         int em_iterations = 20);

// --- many variables -------------------------------------------------------------

/// K masks with B_ij ~ Bernoulli(sigmoid(gamma_ij)) and zero diagonal.
std::vector<Mask> sample_structures(const Matrix& gamma_matrix, int K, numkit::RngStream& rng);

/// Self-normalised K-sample estimator. log_l(i, k) is node i's accumulated
/// log-likelihood under sample k.
Matrix edge_gradient_ksample(const Matrix& gamma_matrix, const std::vector<Mask>& samples,
                             const Matrix& log_l);

/// Per-node tables over parent sets: tables[i][code] where bit r of code is
/// the edge from the r-th variable other than i (in increasing order).
using ParentTables = std::vector<std::vector<double>>;

/// Parent-set code for row i of a mask.
unsigned parent_code(const Mask& mask, int i);

/// R = -sum_i log sum_{B_i} P(B_i) L_{B_i} by enumeration, and its gradient.
double exact_edge_regret(const Matrix& gamma_matrix, const ParentTables& log_l);
Matrix exact_edge_gradient(const Matrix& gamma_matrix, const ParentTables& log_l);

/// g_ij = (sigmoid(gamma_ij) - B_ij) * log_l[i] for one sampled mask.
Matrix edge_gradient_unbiased(const Matrix& gamma_matrix, const Mask& sample,
                              const Vector& log_l);
/// Exact gradient of -sum_i E_{B_i}[log L_{B_i}], the target of the unbiased form.
Matrix exact_additive_edge_gradient(const Matrix& gamma_matrix, const ParentTables& log_l);

/// Sum over i != j of the cross entropy between the true edge indicator and
/// sigmoid(gamma_ij).
double edge_cross_entropy(const Matrix& gamma_matrix, const Mask& truth);

// --- encoder ----------------------------------------------------------------------

/// Central difference of the regret in theta_E with step h. The evaluator
/// must hold episode randomness fixed.
double encoder_meta_gradient(double theta_E, const std::function<double(double)>& evaluator,
                             double h = 1e-3);

}  // namespace metacausal::meta

#endif
