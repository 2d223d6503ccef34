// Random gradient-check cases for every density-module family. Each function
// builds one random module and batch and returns the max relative error
// between the analytic gradient and central differences.
#ifndef METACAUSAL_TESTS_GRADCHECK_HPP
#define METACAUSAL_TESTS_GRADCHECK_HPP

#include <functional>
#include <string>
#include <vector>

#include "metacausal/learners/gaussian.hpp"
#include "metacausal/learners/mixture.hpp"
#include "metacausal/learners/mlp.hpp"
#include "metacausal/learners/tabular.hpp"

namespace gradcheck {

using metacausal::Matrix;
using metacausal::Vector;
using metacausal::numkit::RngStream;
namespace lrn = metacausal::learners;

inline constexpr double kStep = 1e-5;
inline constexpr double kFloor = 1e-6;
inline constexpr int kBatch = 8;

template <class M, class Eval, class Grad>
double compare(M module, Eval eval, Grad grad) {
  const Vector x = module.params();
  const Vector analytic = grad(module);
  auto f = [&](const Vector& p) {
    M copy = module;
    copy.set_params(p);
    return eval(copy);
  };
  const Vector numeric = metacausal::numkit::finite_diff_grad(f, x, kStep);
  return metacausal::numkit::max_relative_error(analytic, numeric, kFloor);
}

inline Vector random_vector(Eigen::Index n, double scale, RngStream& rng) {
  Vector v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

inline double tabular_marginal(RngStream& rng) {
  const int n = 2 + static_cast<int>(rng.below(9));
  lrn::TabularMarginal m(random_vector(n, 1.0, rng));
  std::vector<int> batch(kBatch);
  for (auto& v : batch) v = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
  return compare(
      m, [&](const lrn::TabularMarginal& c) { return c.sum_log_prob(batch) / kBatch; },
      [&](const lrn::TabularMarginal& c) { return c.grad_mean_log_prob(batch); });
}

inline double tabular_conditional(RngStream& rng) {
  const int n = 2 + static_cast<int>(rng.below(6));
  Matrix logits(n, n);
  for (auto& v : logits.reshaped()) v = rng.normal();
  lrn::TabularConditional m(logits);
  std::vector<int> values(kBatch), parents(kBatch);
  for (int k = 0; k < kBatch; ++k) {
    values[static_cast<std::size_t>(k)] = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
    parents[static_cast<std::size_t>(k)] = static_cast<int>(rng.below(static_cast<std::size_t>(n)));
  }
  return compare(
      m,
      [&](const lrn::TabularConditional& c) { return c.sum_log_prob(values, parents) / kBatch; },
      [&](const lrn::TabularConditional& c) { return c.grad_mean_log_prob(values, parents); });
}

inline double masked_mlp(RngStream& rng) {
  const int m_vars = 2 + static_cast<int>(rng.below(3));
  const int n_values = 2 + static_cast<int>(rng.below(4));
  const int node = static_cast<int>(rng.below(static_cast<std::size_t>(m_vars)));
  lrn::MaskedMlpConditional mlp(node, m_vars, n_values, rng);
  Vector p = mlp.params();
  p += random_vector(p.size(), 0.3, rng);
  mlp.set_params(p);
  std::vector<int> mask(static_cast<std::size_t>(m_vars));
  for (auto& b : mask) b = static_cast<int>(rng.below(2));
  mlp.set_mask(mask);
  lrn::CategoricalSamples batch{m_vars, {}};
  for (int k = 0; k < kBatch * m_vars; ++k)
    batch.values.push_back(static_cast<int>(rng.below(static_cast<std::size_t>(n_values))));
  return compare(
      mlp, [&](const lrn::MaskedMlpConditional& c) { return c.sum_log_prob(batch) / kBatch; },
      [&](const lrn::MaskedMlpConditional& c) { return c.grad_mean_log_prob(batch); });
}

inline double gaussian_mixture(RngStream& rng) {
  const int k = 10;
  Vector w(k), mu(k), var(k);
  for (int c = 0; c < k; ++c) {
    w[c] = rng.uniform(0.5, 1.5);
    mu[c] = rng.uniform(-3.0, 3.0);
    var[c] = rng.uniform(0.5, 3.0);
  }
  lrn::GaussianMixtureMarginal m(w, mu, var);
  std::vector<double> xs(kBatch);
  for (auto& x : xs) x = 2.0 * rng.normal();
  return compare(
      m, [&](const lrn::GaussianMixtureMarginal& c) { return c.mean_log_prob(xs); },
      [&](const lrn::GaussianMixtureMarginal& c) { return c.grad_mean_log_prob(xs); });
}

inline double mdn(RngStream& rng) {
  lrn::MdnConditional m(32, 10, rng);
  m.set_normalization(rng.uniform(-1.0, 1.0), rng.uniform(1.0, 3.0), rng.uniform(-1.0, 1.0),
                      rng.uniform(1.0, 3.0));
  Vector p = m.params();
  p += random_vector(p.size(), 0.1, rng);
  m.set_params(p);
  std::vector<double> xs(kBatch), ys(kBatch);
  for (int i = 0; i < kBatch; ++i) {
    xs[static_cast<std::size_t>(i)] = 2.0 * rng.normal();
    ys[static_cast<std::size_t>(i)] = 2.0 * rng.normal();
  }
  return compare(
      m, [&](const lrn::MdnConditional& c) { return c.sum_log_prob(ys, xs) / kBatch; },
      [&](const lrn::MdnConditional& c) { return c.grad_mean_log_prob(ys, xs); });
}

inline lrn::CholeskyFactor random_factor(int d, RngStream& rng) {
  Matrix l = Matrix::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < i; ++j) l(i, j) = 0.3 * rng.normal();
    l(i, i) = rng.uniform(0.7, 1.5);
  }
  return lrn::CholeskyFactor(l);
}

inline double gaussian_marginal(RngStream& rng) {
  const int d = 1 + static_cast<int>(rng.below(4));
  lrn::GaussianMarginal m(random_vector(d, 1.0, rng), random_factor(d, rng));
  Matrix x(d, kBatch);
  for (auto& v : x.reshaped()) v = 1.5 * rng.normal();
  return compare(
      m, [&](const lrn::GaussianMarginal& c) { return c.sum_log_prob(x) / kBatch; },
      [&](const lrn::GaussianMarginal& c) { return c.grad_mean_log_prob(x); });
}

inline double linear_gaussian_conditional(RngStream& rng) {
  const int d = 1 + static_cast<int>(rng.below(4));
  Matrix w(d, d);
  for (auto& v : w.reshaped()) v = 0.5 * rng.normal();
  lrn::LinearGaussianConditional m(w, random_vector(d, 1.0, rng), random_factor(d, rng));
  Matrix x(d, kBatch), y(d, kBatch);
  for (auto& v : x.reshaped()) v = rng.normal();
  for (auto& v : y.reshaped()) v = 1.5 * rng.normal();
  return compare(
      m, [&](const lrn::LinearGaussianConditional& c) { return c.sum_log_prob(y, x) / kBatch; },
      [&](const lrn::LinearGaussianConditional& c) { return c.grad_mean_log_prob(y, x); });
}

struct Family {
  std::string name;
  std::function<double(RngStream&)> check;
};

inline std::vector<Family> families() {
  return {{"tabular_marginal", tabular_marginal},
          {"tabular_conditional", tabular_conditional},
          {"masked_mlp_conditional", masked_mlp},
          {"gaussian_mixture_marginal", gaussian_mixture},
          {"mdn_conditional", mdn},
          {"gaussian_marginal", gaussian_marginal},
          {"linear_gaussian_conditional", linear_gaussian_conditional}};
}

}  // namespace gradcheck

#endif
