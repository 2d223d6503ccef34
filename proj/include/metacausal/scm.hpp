#ifndef METACAUSAL_SCM_HPP
#define METACAUSAL_SCM_HPP

#include <nlohmann/json.hpp>

#include <utility>
#include <vector>

#include "metacausal/numkit.hpp"

namespace metacausal::scm {

using numkit::RngStream;

/// A ~ Categorical(pi_A), B | A=a ~ Categorical(pi_B_given_A[a]).
struct CategoricalScm {
  int n_values = 0;
  Vector pi_A;
  Matrix pi_B_given_A;  // row a is the distribution of B given A = a

  void validate() const;
  /// Exact joint table P(A=i, B=j).
  Matrix joint() const;
};

struct DiscretePair {
  int a;
  int b;
  bool operator==(const DiscretePair&) const = default;
};

struct ContinuousPair {
  double a;
  double b;
};

/// Quadratic spline through the knots; natural at the left end and continued
/// linearly outside the knot range.
struct QuadraticSpline {
  std::vector<double> xs;
  std::vector<double> ys;
  // per segment k: y = ys[k] + slope[k] (x - xs[k]) + curv[k] (x - xs[k])^2
  std::vector<double> slope;
  std::vector<double> curv;

  static QuadraticSpline through(std::vector<double> xs, std::vector<double> ys);
  double operator()(double x) const;
  double derivative(double x) const;
};

/// A ~ N(mu, cause_variance), B := f(A) + N(0, noise_variance).
struct SplineScm {
  QuadraticSpline f;
  double cause_mean = 0.0;
  double cause_variance = 4.0;
  double noise_variance = 1.0;
  double range_a = 8.0;
  double range_b = 8.0;

  void validate() const;
};

/// A ~ N(mu_A, Sigma_A), B := beta_1 A + beta_0 + N(0, Sigma_B).
struct LinearGaussianScm {
  int dim = 0;
  Vector mu_A;
  Matrix Sigma_A;
  Vector beta_0;
  Matrix beta_1;
  Matrix Sigma_B;

  void validate() const;
};

/// (X, Y)^T = R(theta_D) (A, B)^T.
struct RotationDecoder {
  double theta_D = 0.0;
  Eigen::Matrix2d matrix() const;
};

Eigen::Matrix2d rotation(double theta);

CategoricalScm sample_categorical_scm(int n_values, RngStream& rng);
SplineScm sample_spline_scm(RngStream& rng, int n_knots = 8, double range_a = 8.0,
                            double range_b = 8.0);
LinearGaussianScm sample_linear_gaussian_scm(int dim, RngStream& rng);

std::vector<DiscretePair> ancestral_sample(const CategoricalScm& scm,
                                           std::size_t n, RngStream& rng);
std::vector<ContinuousPair> ancestral_sample(const SplineScm& scm,
                                             std::size_t n, RngStream& rng);
/// Returns (A, B) with one sample per column.
std::pair<Matrix, Matrix> ancestral_sample(const LinearGaussianScm& scm,
                                           std::size_t n, RngStream& rng);

/// Soft interventions on the cause: only the cause's marginal is redrawn.
CategoricalScm intervene_on_cause(const CategoricalScm& scm, RngStream& rng);
SplineScm intervene_on_cause(const SplineScm& scm, RngStream& rng);
LinearGaussianScm intervene_on_cause(const LinearGaussianScm& scm,
                                     RngStream& rng);

double eval_spline(const SplineScm& scm, double x);

std::vector<ContinuousPair> decode_observations(
    const RotationDecoder& decoder, const std::vector<ContinuousPair>& pairs);

/// Relabels a dataset so that the cause appears as the second variable.
std::vector<DiscretePair> swap_roles(const std::vector<DiscretePair>& pairs);

void to_json(nlohmann::json& j, const CategoricalScm& s);
void from_json(const nlohmann::json& j, CategoricalScm& s);
void to_json(nlohmann::json& j, const SplineScm& s);
void from_json(const nlohmann::json& j, SplineScm& s);
void to_json(nlohmann::json& j, const LinearGaussianScm& s);
void from_json(const nlohmann::json& j, LinearGaussianScm& s);
void to_json(nlohmann::json& j, const RotationDecoder& s);
void from_json(const nlohmann::json& j, RotationDecoder& s);

}  // namespace metacausal::scm

#endif
