#ifndef METACAUSAL_LEARNERS_GAUSSIAN_HPP
#define METACAUSAL_LEARNERS_GAUSSIAN_HPP

#include <nlohmann/json.hpp>

#include <utility>

#include "metacausal/numkit.hpp"
#include "metacausal/scm.hpp"

namespace metacausal::learners {

/// Lower-triangular factor with the diagonal stored as logs. Packed row-major
/// over the lower triangle: (0,0), (1,0), (1,1), (2,0), ...
class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(const Matrix& lower);
  static CholeskyFactor from_covariance(const Matrix& cov);

  int dim() const { return static_cast<int>(lower_.rows()); }
  const Matrix& lower() const { return lower_; }
  Matrix covariance() const { return lower_ * lower_.transpose(); }
  double log_det() const;  // log |L L^T|

  Eigen::Index packed_size() const { return lower_.rows() * (lower_.rows() + 1) / 2; }
  Vector packed() const;
  void unpack(const Vector& p);
  /// Chain rule from dL (lower part read) to the packed parametrisation.
  Vector pack_gradient(const Matrix& grad_lower) const;

 private:
  Matrix lower_;
};

/// x ~ N(mean, L L^T); columns of `x` are samples.
class GaussianMarginal {
 public:
  GaussianMarginal() = default;
  GaussianMarginal(Vector mean, CholeskyFactor chol);

  int dim() const { return static_cast<int>(mean_.size()); }
  const Vector& mean() const { return mean_; }
  const CholeskyFactor& chol() const { return chol_; }

  double log_prob(const Vector& x) const;
  double sum_log_prob(const Matrix& x) const;
  Vector grad_mean_log_prob(const Matrix& x) const;

  /// [mean, packed factor]
  Vector params() const;
  void set_params(const Vector& p);

 private:
  Vector mean_;
  CholeskyFactor chol_;
};

/// y | x ~ N(W x + w0, L L^T).
class LinearGaussianConditional {
 public:
  LinearGaussianConditional() = default;
  LinearGaussianConditional(Matrix weight, Vector offset, CholeskyFactor chol);

  int dim() const { return static_cast<int>(offset_.size()); }
  const Matrix& weight() const { return weight_; }
  const Vector& offset() const { return offset_; }
  const CholeskyFactor& chol() const { return chol_; }

  double log_prob(const Vector& y, const Vector& x) const;
  double sum_log_prob(const Matrix& y, const Matrix& x) const;
  Vector grad_mean_log_prob(const Matrix& y, const Matrix& x) const;

  /// [W row-major, w0, packed factor]
  Vector params() const;
  void set_params(const Vector& p);

 private:
  Matrix weight_;
  Vector offset_;
  CholeskyFactor chol_;
};

/// Factorisation of (A, B): P(A) P(B|A), or P(B) P(A|B) when reversed.
struct LinearGaussianModule {
  GaussianMarginal marginal;
  LinearGaussianConditional conditional;
  bool reversed = false;

  double sum_log_prob(const Matrix& a, const Matrix& b) const;
  double mean_log_prob(const Matrix& a, const Matrix& b) const;
  Vector grad_mean_log_prob(const Matrix& a, const Matrix& b) const;
  Vector params() const;
  void set_params(const Vector& p);
};

/// Exact parameters of both factorisations of the SCM's joint.
std::pair<LinearGaussianModule, LinearGaussianModule> flip_linear_gaussian(
    const scm::LinearGaussianScm& scm);

/// (U, V)^T = R(theta_E) (X, Y)^T.
struct RotationEncoder {
  double theta_E = 0.0;
  Eigen::Matrix2d matrix() const { return scm::rotation(theta_E); }
};

std::vector<scm::ContinuousPair> encode(const RotationEncoder& encoder,
                                        const std::vector<scm::ContinuousPair>& pairs);

void to_json(nlohmann::json& j, const LinearGaussianModule& m);
void from_json(const nlohmann::json& j, LinearGaussianModule& m);

}  // namespace metacausal::learners

#endif
