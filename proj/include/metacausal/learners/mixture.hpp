#ifndef METACAUSAL_LEARNERS_MIXTURE_HPP
#define METACAUSAL_LEARNERS_MIXTURE_HPP

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

#include "metacausal/numkit.hpp"

namespace metacausal::learners {

inline constexpr double kVarianceFloor = 1e-4;
inline constexpr double kScaleFloor = 1e-3;

/// 1-D Gaussian mixture. Gradient parametrisation: [weight logits, means,
/// log variances].
class GaussianMixtureMarginal {
 public:
  GaussianMixtureMarginal() = default;
  GaussianMixtureMarginal(Vector weights, Vector means, Vector variances);

  int n_components() const { return static_cast<int>(weights_.size()); }
  const Vector& weights() const { return weights_; }
  const Vector& means() const { return means_; }
  const Vector& variances() const { return variances_; }

  double log_prob(double x) const;
  double sum_log_prob(std::span<const double> xs) const;
  double mean_log_prob(std::span<const double> xs) const;
  Vector grad_mean_log_prob(std::span<const double> xs) const;

  Vector params() const;
  void set_params(const Vector& p);

 private:
  Vector weights_;
  Vector means_;
  Vector variances_;
};

struct EmResult {
  GaussianMixtureMarginal model;
  std::vector<double> log_likelihood_trace;  // mean log-likelihood per iteration
  int iterations = 0;
};

/// EM from a seeded initialisation: means drawn from data points, variances
/// equal to the data variance, uniform weights.
EmResult fit_gmm_em(std::span<const double> samples, int n_components,
                    numkit::RngStream& rng, int max_iterations = 200,
                    double tolerance = 1e-6);

/// EM warm-started from `init`, for a fixed iteration budget.
EmResult refine_gmm_em(const GaussianMixtureMarginal& init,
                       std::span<const double> samples, int max_iterations,
                       double tolerance = 1e-6);

/// Mixture density network P(y | x): x -> tanh hidden layer -> per-component
/// mixture logits, means and log-scales. Inputs and outputs are standardised
/// with fixed affine maps.
class MdnConditional {
 public:
  MdnConditional() = default;
  MdnConditional(int n_hidden, int n_components, numkit::RngStream& rng);

  int n_hidden() const { return static_cast<int>(b1_.size()); }
  int n_components() const { return static_cast<int>(b2_.size() / 3); }

  void set_normalization(double in_shift, double in_scale, double out_shift,
                         double out_scale);
  /// Standardise from data statistics.
  void fit_normalization(std::span<const double> inputs, std::span<const double> outputs);

  double log_prob(double y, double x) const;
  double sum_log_prob(std::span<const double> ys, std::span<const double> xs) const;
  Vector grad_mean_log_prob(std::span<const double> ys, std::span<const double> xs) const;

  /// Mixture parameters at a given input (in standardised output units).
  struct Components {
    Vector weights;
    Vector means;
    Vector scales;
  };
  Components components(double x) const;

  /// [w1, b1, W2 row-major, b2]
  Vector params() const;
  void set_params(const Vector& p);

  friend void to_json(nlohmann::json& j, const MdnConditional& m);
  friend void from_json(const nlohmann::json& j, MdnConditional& m);

 private:
  Vector w1_;
  Vector b1_;
  Matrix w2_;  // 3K x H
  Vector b2_;  // [logits(K), means(K), log-scales(K)]
  double in_shift_ = 0.0;
  double in_scale_ = 1.0;
  double out_shift_ = 0.0;
  double out_scale_ = 1.0;
};

void to_json(nlohmann::json& j, const GaussianMixtureMarginal& m);
void from_json(const nlohmann::json& j, GaussianMixtureMarginal& m);

}  // namespace metacausal::learners

#endif
