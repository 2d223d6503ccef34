#ifndef METACAUSAL_LEARNERS_TABULAR_HPP
#define METACAUSAL_LEARNERS_TABULAR_HPP

#include <nlohmann/json.hpp>

#include <span>
#include <vector>

#include "metacausal/numkit.hpp"
#include "metacausal/scm.hpp"

namespace metacausal::learners {

/// P(x = i) = softmax(logits)_i
class TabularMarginal {
 public:
  TabularMarginal() = default;
  explicit TabularMarginal(int n_values) : logits_(Vector::Zero(n_values)) {}
  explicit TabularMarginal(Vector logits) : logits_(std::move(logits)) {}
  static TabularMarginal from_probs(const Vector& probs);

  int n_values() const { return static_cast<int>(logits_.size()); }
  const Vector& logits() const { return logits_; }
  Vector probs() const { return numkit::softmax(logits_); }

  double log_prob(int value) const;
  double sum_log_prob(std::span<const int> values) const;
  Vector grad_mean_log_prob(std::span<const int> values) const;

  Vector params() const { return logits_; }
  void set_params(const Vector& p);

 private:
  Vector logits_;
};

/// P(x = j | parent = i) = softmax(logits.row(i))_j
class TabularConditional {
 public:
  TabularConditional() = default;
  explicit TabularConditional(int n_values)
      : logits_(Matrix::Zero(n_values, n_values)) {}
  explicit TabularConditional(Matrix logits) : logits_(std::move(logits)) {}
  static TabularConditional from_probs(const Matrix& probs);

  int n_values() const { return static_cast<int>(logits_.rows()); }
  const Matrix& logits() const { return logits_; }
  Matrix probs() const;

  double log_prob(int value, int parent) const;
  double sum_log_prob(std::span<const int> values, std::span<const int> parents) const;
  Vector grad_mean_log_prob(std::span<const int> values,
                            std::span<const int> parents) const;

  /// Row-major flattening.
  Vector params() const;
  void set_params(const Vector& p);

 private:
  Matrix logits_;
};

struct TabularFit {
  TabularMarginal marginal;
  TabularConditional conditional;
  std::vector<int> unseen_rows;  // conditioning values with no observations
};

/// Maximum-likelihood fit of P(first) P(second | first) from count ratios.
/// Unseen conditioning rows are set to uniform and reported.
TabularFit fit_tabular_mle(std::span<const int> first, std::span<const int> second,
                           int n_values, double pseudo_count = 0.0);

/// A tabular factorisation P(cause) P(effect | cause) over discrete pairs.
/// `reversed` models the pair as P(b) P(a | b).
struct TabularBivariateModel {
  TabularMarginal marginal;
  TabularConditional conditional;
  bool reversed = false;

  double log_prob(const scm::DiscretePair& x) const;
  double sum_log_prob(std::span<const scm::DiscretePair> batch) const;
  double mean_log_prob(std::span<const scm::DiscretePair> batch) const;
  /// Gradient of the mean log-likelihood, marginal parameters first.
  Vector grad_mean_log_prob(std::span<const scm::DiscretePair> batch) const;
  Vector params() const;
  void set_params(const Vector& p);
  Matrix joint() const;
};

/// The A->B and B->A models that reproduce an exact joint table.
std::pair<TabularBivariateModel, TabularBivariateModel> tabular_models_from_joint(
    const Matrix& joint);

void to_json(nlohmann::json& j, const TabularMarginal& m);
void from_json(const nlohmann::json& j, TabularMarginal& m);
void to_json(nlohmann::json& j, const TabularConditional& m);
void from_json(const nlohmann::json& j, TabularConditional& m);

}  // namespace metacausal::learners

#endif
