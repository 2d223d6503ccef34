#include "metacausal/numkit.hpp"

#include <cmath>

namespace metacausal::numkit {

OptimizerState OptimizerState::sgd(double lr) {
  OptimizerState s;
  s.kind = OptimizerKind::sgd;
  s.learning_rate = lr;
  return s;
}

OptimizerState OptimizerState::rmsprop(double lr, double decay,
                                       double epsilon) {
  OptimizerState s;
  s.kind = OptimizerKind::rmsprop;
  s.learning_rate = lr;
  s.decay = decay;
  s.epsilon = epsilon;
  return s;
}

void sgd_step(const OptimizerState& state, Vector& params,
              const Vector& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("sgd_step: shape mismatch");
  params -= state.learning_rate * grads;
}

void rmsprop_step(OptimizerState& state, Vector& params, const Vector& grads) {
  if (params.size() != grads.size())
    throw std::invalid_argument("rmsprop_step: shape mismatch");
  if (state.accumulator.size() == 0) state.accumulator = Vector::Zero(params.size());
  if (state.accumulator.size() != params.size())
    throw std::invalid_argument("rmsprop_step: accumulator shape mismatch");
  state.accumulator = state.decay * state.accumulator +
                      (1.0 - state.decay) * grads.cwiseAbs2();
  params.array() -= state.learning_rate * grads.array() /
                    (state.accumulator.array().sqrt() + state.epsilon);
}

void optimizer_step(OptimizerState& state, Vector& params, const Vector& grads) {
  if (!grads.allFinite()) throw NumericalError("non-finite gradient");
  if (state.kind == OptimizerKind::sgd)
    sgd_step(state, params, grads);
  else
    rmsprop_step(state, params, grads);
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& f,
                        const Vector& x, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + h;
    const double fp = f(xp);
    xp[i] = x[i] - h;
    const double fm = f(xp);
    xp[i] = x[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericalError("finite_diff_grad: non-finite evaluation");
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

double max_relative_error(const Vector& a, const Vector& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double denom = std::max(std::abs(b[i]), floor);
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace metacausal::numkit
