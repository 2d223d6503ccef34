#include "metacausal/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metacausal::numkit {

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("empty reduction");
  const double m = *std::max_element(values.begin(), values.end());
  if (m == -std::numeric_limits<double>::infinity()) return m;
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

double log_sum_exp(const Vector& values) {
  return log_sum_exp(std::span<const double>(values.data(),
                                             static_cast<std::size_t>(values.size())));
}

Vector log_softmax(const Vector& logits) {
  return logits.array() - log_sum_exp(logits);
}

Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

double logit(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("logit outside (0, 1)");
  return std::log(p) - std::log1p(-p);
}

Vector softmax_cross_entropy_grad(const Vector& logits, int target) {
  Vector g = softmax(logits);
  g[target] -= 1.0;
  return g;
}

double softmax_cross_entropy(const Vector& logits, int target) {
  return log_sum_exp(logits) - logits[target];
}

Matrix cholesky_lower(const Matrix& spd) {
  if (spd.rows() != spd.cols())
    throw std::domain_error("cholesky of a non-square matrix");
  Eigen::LLT<Matrix> llt(spd);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("matrix is not symmetric positive definite");
  Matrix l = llt.matrixL();
  if ((l.diagonal().array() <= 0.0).any() || !l.allFinite())
    throw std::domain_error("matrix is not symmetric positive definite");
  return l;
}

}  // namespace metacausal::numkit
