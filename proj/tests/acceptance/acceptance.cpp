#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "../common/gradcheck.hpp"
#include "metacausal/experiments.hpp"
#include "metacausal/meta.hpp"

using namespace metacausal;
namespace ex = metacausal::experiments;
using numkit::RngStream;

namespace {

constexpr std::uint64_t kSeed = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

template <class P>
P defaults() {
  return P::defaults(ex::Profile::desk);
}

// --- non-identifiability --------------------------------------------------------------

Outcome nonident_exact() {
  auto p = defaults<ex::NonidentParams>();
  p.runs = 1;
  p.n_values = {2};
  p.train_size = p.test_size = 10;
  p.steps = p.log_every = 1;
  const auto r = ex::run_nonident(p, kSeed);
  return {r.exact_diffs.size() == 100 && r.exact_max_abs_diff < 1e-12,
          fmt("%zu tables, max |joint_AB - joint_BA| = %.3g (< 1e-12)", r.exact_diffs.size(),
              r.exact_max_abs_diff)};
}

Outcome nonident_sgd() {
  auto p = defaults<ex::NonidentParams>();
  p.exact_tables = 0;
  const auto r = ex::run_nonident(p, kSeed);
  double worst = 0.0;
  for (double g : r.curves.front().test_gap.back()) worst = std::max(worst, std::abs(g));
  return {worst < 0.01, fmt("N=10, %d runs, %d full-batch steps: max |test gap| = %.3g nats (< 0.01)",
                            p.runs, p.steps, worst)};
}

// --- adaptation speed -----------------------------------------------------------------

Outcome adapt_speed() {
  const auto p = defaults<ex::AdaptSpeedParams>();
  const auto r = ex::run_adapt_speed(p, kSeed);
  std::vector<double> gap;
  for (std::size_t s = 0; s < r.ab.size(); ++s)
    gap.push_back(ex::quantile(r.ab[s], 0.5) - ex::quantile(r.ba[s], 0.5));
  bool ahead = true;
  for (int s = 1; s <= 20; ++s) ahead = ahead && gap[static_cast<std::size_t>(s)] >= 0.0;
  const auto argmax = static_cast<int>(std::max_element(gap.begin(), gap.end()) - gap.begin());
  return {ahead && argmax >= 1 && argmax <= 20,
          fmt("%d runs: median gap >= 0 at steps 1-20: %s; argmax at step %d (within 1-20); "
              "gap(10) = %.3f, gap(200) = %.3f",
              p.n_train * p.n_transfer, ahead ? "yes" : "no", argmax, gap[10], gap.back())};
}

// --- zero expected gradient of the invariant module ----------------------------------------

Outcome prop1() {
  RngStream rng(kSeed, 101);
  const auto s = scm::sample_categorical_scm(10, rng);
  const auto [ab, ba] = learners::tabular_models_from_joint(s.joint());
  (void)ba;
  const auto transfer = scm::intervene_on_cause(s, rng);
  const std::size_t n = 100000;
  const auto data = scm::ancestral_sample(transfer, n, rng);
  const Eigen::Index dim = ab.params().size();
  Vector sum = Vector::Zero(dim), sq = Vector::Zero(dim);
  for (const auto& x : data) {
    const Vector g = ab.grad_mean_log_prob(std::span<const scm::DiscretePair>(&x, 1));
    sum += g;
    sq += g.cwiseProduct(g);
  }
  const double nn = static_cast<double>(n);
  const Vector mean = sum / nn;
  const Vector se = ((sq / nn - mean.cwiseProduct(mean)) / (nn - 1.0)).cwiseSqrt();
  const Eigen::Index n_marg = 10;
  double worst_cond = 0.0, best_marg = 0.0;
  for (Eigen::Index i = 0; i < dim; ++i) {
    const double z = std::abs(mean[i]) / se[i];
    if (i < n_marg) best_marg = std::max(best_marg, z);
    else worst_cond = std::max(worst_cond, z);
  }
  return {worst_cond < 3.0 && best_marg > 5.0,
          fmt("N=10, 1e5 transfer samples: max |z| over 100 theta_B|A components = %.2f (< 3); "
              "max |z| over theta_A = %.1f (> 5)",
              worst_cond, best_marg)};
}

// --- gamma gradient oracle ---------------------------------------------------------------

Outcome prop2() {
  RngStream rng(kSeed, 102);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const double gamma = rng.uniform(-8.0, 8.0);
    const double log_ab = rng.uniform(-50.0, 0.0);
    const double log_ba = log_ab - rng.uniform(-10.0, 10.0);
    const double h = 1e-4;
    const double fd = (meta::mixture_regret(gamma + h, log_ab, log_ba) -
                       meta::mixture_regret(gamma - h, log_ab, log_ba)) /
                      (2.0 * h);
    const double g = meta::gamma_gradient(gamma, log_ab, log_ba);
    worst = std::max(worst, std::abs(g - fd) / std::max(std::abs(fd), 1e-300));
  }
  return {worst < 1e-6, fmt("1000 random (gamma, delta): max relative error = %.3g (< 1e-6)", worst)};
}

// --- belief trajectories -------------------------------------------------------------------

int first_above(const std::vector<double>& traj, double level) {
  for (std::size_t i = 0; i < traj.size(); ++i)
    if (traj[i] > level) return static_cast<int>(i) + 1;
  return -1;
}

Outcome bivariate_discrete() {
  auto p = defaults<ex::BivariateDiscreteParams>();
  p.write_traces = false;
  const auto r = ex::run_bivariate_discrete(p, kSeed);
  bool pass = true;
  std::string detail;
  for (int n : p.n_values) {
    int ok = 0;
    std::string episodes;
    for (const auto& run : r.runs) {
      if (run.n_values != n) continue;
      const int e = first_above(run.sigma_gamma, 0.9);
      ok += e > 0 && e <= 500;
      episodes += (episodes.empty() ? "" : ",") + std::to_string(e);
    }
    pass = pass && ok >= 4;
    detail += fmt("N=%d: %d/%d seeds cross 0.9 (episodes %s); ", n, ok, p.runs, episodes.c_str());
  }
  return {pass, detail + "need >= 4/5 each, start at 0.5"};
}

Outcome mlp_structure() {
  const auto p = defaults<ex::MlpStructureParams>();
  const auto r = ex::run_mlp_structure(p, kSeed);
  int ok = 0;
  std::string at;
  for (const auto& run : r.runs) {
    if (run.n_values != 10) continue;
    int hit = -1;
    for (std::size_t e = 0; e < run.cross_entropy.size() && e < 100; ++e)
      if (run.cross_entropy[e] < 0.1) {
        hit = static_cast<int>(e) + 1;
        break;
      }
    ok += hit > 0;
    double best = run.cross_entropy.front();
    for (std::size_t e = 0; e < run.cross_entropy.size() && e < 100; ++e)
      best = std::min(best, run.cross_entropy[e]);
    at += fmt("%s%.3f", at.empty() ? "" : ",", best);
  }
  return {ok >= 4, fmt("M=2, N=10: %d/5 seeds reach CE < 0.1 within 100 meta-examples "
                       "(min CE per seed %s); need >= 4",
                       ok, at.c_str())};
}

// --- edge-gradient estimators -------------------------------------------------------------

Outcome edge_estimators() {
  const int n = 100000;
  double worst_k = 0.0, worst_u = 0.0;
  for (int m : {2, 3}) {
    RngStream rng(kSeed, 103 + static_cast<std::uint64_t>(m));
    Matrix gamma = Matrix::Zero(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j) gamma(i, j) = rng.uniform(-1.5, 1.5);
    meta::ParentTables tables(static_cast<std::size_t>(m));
    for (auto& t : tables) {
      t.resize(std::size_t{1} << (m - 1));
      for (auto& v : t) v = rng.uniform(-3.0, 0.0);
    }
    const auto masks = meta::sample_structures(gamma, n, rng);
    Matrix log_l(m, n);
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < m; ++i)
        log_l(i, k) = tables[static_cast<std::size_t>(i)][meta::parent_code(masks[static_cast<std::size_t>(k)], i)];

    // one K-sample estimate with K = 1e5; standard error of the self-normalised mean
    const Matrix gk = meta::edge_gradient_ksample(gamma, masks, log_l);
    const Matrix exact = meta::exact_edge_gradient(gamma, tables);
    for (int i = 0; i < m; ++i) {
      const Vector w = numkit::softmax(log_l.row(i).transpose());
      for (int j = 0; j < m; ++j) {
        if (i == j) continue;
        const double s = numkit::sigmoid(gamma(i, j));
        double var = 0.0;
        for (int k = 0; k < n; ++k) {
          const double d = s - masks[static_cast<std::size_t>(k)](i, j) - gk(i, j);
          var += w[k] * w[k] * d * d;
        }
        worst_k = std::max(worst_k, std::abs(gk(i, j) - exact(i, j)) / std::sqrt(var));
      }
    }

    // per-draw unbiased estimates averaged over 1e5 draws
    const Matrix additive = meta::exact_additive_edge_gradient(gamma, tables);
    Matrix sum = Matrix::Zero(m, m), sq = Matrix::Zero(m, m);
    for (int k = 0; k < n; ++k) {
      const Matrix g = meta::edge_gradient_unbiased(gamma, masks[static_cast<std::size_t>(k)], log_l.col(k));
      sum += g;
      sq += g.cwiseProduct(g);
    }
    const Matrix mean = sum / n;
    const Matrix se = ((sq / n - mean.cwiseProduct(mean)) / (n - 1.0)).cwiseSqrt();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (i != j) worst_u = std::max(worst_u, std::abs(mean(i, j) - additive(i, j)) / se(i, j));
  }
  return {worst_k < 3.0 && worst_u < 3.0,
          fmt("M in {2,3}, 1e5 draws: K-sample vs exact max |z| = %.2f; unbiased vs additive exact "
              "max |z| = %.2f (< 3)",
              worst_k, worst_u)};
}

// --- continuous, linear-Gaussian, encoder ------------------------------------------------------

Outcome continuous() {
  const auto p = defaults<ex::ContinuousParams>();
  const auto r = ex::run_continuous(p, kSeed);
  int ok = 0;
  std::string finals;
  for (const auto& run : r.runs) {
    ok += run.sigma_gamma.back() > 0.9;
    finals += fmt("%s%.3f", finals.empty() ? "" : ",", run.sigma_gamma.back());
  }
  return {ok >= 4, fmt("%d/%d seeds with sigma(gamma) > 0.9 after %d iterations (%s); need >= 4",
                       ok, p.runs, p.iterations, finals.c_str())};
}

Outcome linear_gaussian() {
  auto p = defaults<ex::LinearGaussianParams>();
  p.write_traces = false;
  const auto r = ex::run_linear_gaussian(p, kSeed);
  int ok = 0;
  std::string finals;
  for (const auto& run : r.runs) {
    ok += run.sigma_gamma.back() > 0.95;
    finals += fmt("%s%.4f", finals.empty() ? "" : ",", run.sigma_gamma.back());
  }
  return {ok >= 4 && r.max_joint_mismatch < 1e-8,
          fmt("d=%d: %d/%d seeds with sigma(gamma) > 0.95 after %d episodes (%s); "
              "max |log p_AB - log p_BA| at 100 points = %.3g (< 1e-8)",
              p.dim, ok, p.runs, p.episodes, finals.c_str(), r.max_joint_mismatch)};
}

Outcome encoder() {
  const auto p = defaults<ex::EncoderParams>();
  const auto r = ex::run_encoder(p, kSeed);
  const double q = std::numbers::pi / 4.0;
  int ok = 0;
  std::string finals;
  for (const auto& run : r.runs) {
    const double th = run.theta_E.back(), sg = run.sigma_gamma.back();
    const bool plus = std::abs(th - q) < 0.05 && sg > 0.5;
    const bool minus = std::abs(th + q) < 0.05 && sg < 0.5;
    ok += plus || minus;
    finals += fmt("%s(%.3f, %.3f)", finals.empty() ? "" : ",", th, sg);
  }
  return {ok >= 3, fmt("theta_D = -pi/4: %d/%d seeds end within 0.05 rad of +-pi/4 with consistent "
                       "gamma; final (theta_E, sigma) = %s; need >= 3",
                       ok, p.runs, finals.c_str())};
}

// --- density-module gradients ---------------------------------------------------------------

Outcome gradient_suite() {
  RngStream rng(kSeed, 104);
  bool pass = true;
  std::string detail;
  for (const auto& family : gradcheck::families()) {
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) worst = std::max(worst, family.check(rng));
    pass = pass && worst < 1e-4;
    detail += fmt("%s%s %.2g", detail.empty() ? "" : "; ", family.name.c_str(), worst);
  }
  return {pass, "max rel err (< 1e-4, floor 1e-6): " + detail};
}

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all{
      {"nonident_exact", 1.0, nonident_exact},
      {"nonident_sgd", 60.0, nonident_sgd},
      {"adapt_speed", 300.0, adapt_speed},
      {"zero_gradient_invariant_module", 30.0, prop1},
      {"gamma_gradient_oracle", 1.0, prop2},
      {"bivariate_discrete", 600.0, bivariate_discrete},
      {"mlp_structure", 600.0, mlp_structure},
      {"edge_gradient_estimators", 120.0, edge_estimators},
      {"continuous_multimodal", 1200.0, continuous},
      {"linear_gaussian", 300.0, linear_gaussian},
      {"encoder", 1200.0, encoder},
      {"gradient_suite", 60.0, gradient_suite},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (wanted.size() == 1 && wanted[0] == "--list") {
    for (const auto& c : criteria()) std::printf("%s\n", c.id);
    return 0;
  }
  int failures = 0, ran = 0;
  for (const auto& c : criteria()) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget_seconds;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::printf("%s %s: %s; runtime %.1f s (< %.0f s)\n", pass ? "PASS" : "FAIL", c.id,
                o.detail.c_str(), secs, c.budget_seconds);
    std::fflush(stdout);
  }
  if (ran == 0) {
    std::fprintf(stderr, "no matching criterion\n");
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
