#ifndef METACAUSAL_NUMKIT_HPP
#define METACAUSAL_NUMKIT_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metacausal {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a loss, likelihood or gradient becomes non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace numkit {

/// Counter-based random stream (Philox4x32-10). The key is the seed, the
/// upper half of the counter is the stream id, so distinct stream ids never
/// share a block.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return counter_ * 2 - buffered_; }

  /// Child stream, deterministic in (seed, stream_id, child).
  RngStream split(std::uint64_t child) const;

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double gamma(double shape);
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

/// log(sum(exp(values))). Throws std::invalid_argument("empty reduction").
double log_sum_exp(std::span<const double> values);
double log_sum_exp(const Vector& values);

Vector softmax(const Vector& logits);
Vector log_softmax(const Vector& logits);

double sigmoid(double x);
/// log(sigmoid(x)) without underflow for large negative x.
double log_sigmoid(double x);
double logit(double p);

/// Gradient of -log softmax(logits)[target] with respect to logits.
Vector softmax_cross_entropy_grad(const Vector& logits, int target);
double softmax_cross_entropy(const Vector& logits, int target);

Vector sample_dirichlet(const Vector& alpha, RngStream& rng);
int sample_categorical(const Vector& probs, RngStream& rng);
/// mean + L z with z ~ N(0, I); `chol` is a lower-triangular factor.
Vector sample_gaussian(const Vector& mean, const Matrix& chol, RngStream& rng);

enum class OptimizerKind { sgd, rmsprop };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::rmsprop;
  double learning_rate = 0.1;
  double decay = 0.9;
  double epsilon = 1e-8;
  Vector accumulator;

  static OptimizerState sgd(double lr);
  static OptimizerState rmsprop(double lr, double decay = 0.9,
                                double epsilon = 1e-8);
};

/// Plain gradient descent: params -= lr * grads.
void sgd_step(const OptimizerState& state, Vector& params, const Vector& grads);

/// accumulator <- rho*accumulator + (1-rho)*g^2;
/// params <- params - lr*g/(sqrt(accumulator)+eps).
void rmsprop_step(OptimizerState& state, Vector& params, const Vector& grads);

/// Dispatches on state.kind. `grads` is the gradient of the loss.
void optimizer_step(OptimizerState& state, Vector& params, const Vector& grads);

/// Central differences (f(x+h e_i) - f(x-h e_i)) / 2h.
Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& x, double h);

/// Max over components of |a-b| / max(|b|, floor).
double max_relative_error(const Vector& a, const Vector& b, double floor);

/// Lower Cholesky factor; throws std::domain_error if not SPD.
Matrix cholesky_lower(const Matrix& spd);

/// Sample from an inverse-Wishart with the given scale and degrees of freedom.
Matrix sample_inverse_wishart(const Matrix& scale, double dof, RngStream& rng);

inline bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace numkit
}  // namespace metacausal

#endif
