#ifndef METACAUSAL_LEARNERS_ADAPT_HPP
#define METACAUSAL_LEARNERS_ADAPT_HPP

#include <concepts>

#include "metacausal/numkit.hpp"

namespace metacausal::learners {

/// Anything whose parameters can be read and written as one flat vector.
template <class M>
concept FlatParametrized = requires(M m, const M cm, const Vector& v) {
  { cm.params() } -> std::convertible_to<Vector>;
  m.set_params(v);
};

/// One optimizer step on the negative mean log-likelihood of `batch...`.
template <FlatParametrized M, class... Batch>
void adapt_step(M& module, numkit::OptimizerState& state, const Batch&... batch) {
  Vector p = module.params();
  const Vector loss_grad = -module.grad_mean_log_prob(batch...);
  numkit::optimizer_step(state, p, loss_grad);
  module.set_params(p);
}

}  // namespace metacausal::learners

#endif
