#ifndef METACAUSAL_LEARNERS_MLP_HPP
#define METACAUSAL_LEARNERS_MLP_HPP

#include <nlohmann/json.hpp>

#include <vector>

#include "metacausal/numkit.hpp"

namespace metacausal::learners {

/// Rows of jointly observed discrete variables, row-major (n_rows x n_vars).
struct CategoricalSamples {
  int n_vars = 0;
  std::vector<int> values;

  std::size_t size() const {
    return n_vars == 0 ? 0 : values.size() / static_cast<std::size_t>(n_vars);
  }
  int at(std::size_t row, int var) const {
    return values[row * static_cast<std::size_t>(n_vars) + static_cast<std::size_t>(var)];
  }
  CategoricalSamples slice(std::size_t begin, std::size_t count) const;
};

/// P(V_i | masked one-hot inputs of all variables): one ReLU hidden layer of
/// H = 4M units followed by a softmax over the N values of V_i.
class MaskedMlpConditional {
 public:
  MaskedMlpConditional() = default;
  MaskedMlpConditional(int node, int n_vars, int n_values, numkit::RngStream& rng);

  int node() const { return node_; }
  int n_vars() const { return n_vars_; }
  int n_values() const { return n_values_; }
  int n_hidden() const { return static_cast<int>(b1_.size()); }

  const std::vector<int>& mask() const { return mask_; }
  /// Input flags B_i; the self entry is always forced to 0.
  void set_mask(std::vector<int> mask);

  Vector logits(const CategoricalSamples& x, std::size_t row) const;
  double log_prob(const CategoricalSamples& x, std::size_t row) const;
  double sum_log_prob(const CategoricalSamples& batch) const;
  Vector grad_mean_log_prob(const CategoricalSamples& batch) const;

  /// [W1 row-major, b1, W2 row-major, b2]
  Vector params() const;
  void set_params(const Vector& p);

  const Matrix& w1() const { return w1_; }
  const Matrix& w2() const { return w2_; }

  friend void to_json(nlohmann::json& j, const MaskedMlpConditional& m);
  friend void from_json(const nlohmann::json& j, MaskedMlpConditional& m);

 private:
  Vector hidden_pre(const CategoricalSamples& x, std::size_t row) const;

  int node_ = 0;
  int n_vars_ = 0;
  int n_values_ = 0;
  std::vector<int> mask_;
  Matrix w1_;  // H x (M N)
  Vector b1_;
  Matrix w2_;  // N x H
  Vector b2_;
};

}  // namespace metacausal::learners

#endif
