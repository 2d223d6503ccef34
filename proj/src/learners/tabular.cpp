#include "metacausal/learners/tabular.hpp"

#include <cmath>

#include "metacausal/json_eigen.hpp"

namespace metacausal::learners {

namespace {

void check_value(int v, int n) {
  if (v < 0 || v >= n) throw std::out_of_range("discrete value out of range");
}

}  // namespace

TabularMarginal TabularMarginal::from_probs(const Vector& probs) {
  return TabularMarginal(Vector(probs.array().log()));
}

double TabularMarginal::log_prob(int value) const {
  check_value(value, n_values());
  return logits_[value] - numkit::log_sum_exp(logits_);
}

double TabularMarginal::sum_log_prob(std::span<const int> values) const {
  const double lse = numkit::log_sum_exp(logits_);
  double s = 0.0;
  for (int v : values) {
    check_value(v, n_values());
    s += logits_[v] - lse;
  }
  return s;
}

Vector TabularMarginal::grad_mean_log_prob(std::span<const int> values) const {
  if (values.empty()) throw std::invalid_argument("empty batch");
  Vector g = Vector::Zero(logits_.size());
  for (int v : values) {
    check_value(v, n_values());
    g[v] += 1.0;
  }
  g /= static_cast<double>(values.size());
  return g - probs();
}

void TabularMarginal::set_params(const Vector& p) {
  if (p.size() != logits_.size())
    throw std::invalid_argument("TabularMarginal: parameter size mismatch");
  logits_ = p;
}

TabularConditional TabularConditional::from_probs(const Matrix& probs) {
  return TabularConditional(Matrix(probs.array().log()));
}

Matrix TabularConditional::probs() const {
  Matrix p(logits_.rows(), logits_.cols());
  for (Eigen::Index r = 0; r < logits_.rows(); ++r)
    p.row(r) = numkit::softmax(logits_.row(r).transpose()).transpose();
  return p;
}

double TabularConditional::log_prob(int value, int parent) const {
  check_value(value, n_values());
  check_value(parent, n_values());
  const Vector row = logits_.row(parent).transpose();
  return row[value] - numkit::log_sum_exp(row);
}

double TabularConditional::sum_log_prob(std::span<const int> values,
                                        std::span<const int> parents) const {
  if (values.size() != parents.size())
    throw std::invalid_argument("values/parents size mismatch");
  Vector lse(logits_.rows());
  for (Eigen::Index r = 0; r < logits_.rows(); ++r)
    lse[r] = numkit::log_sum_exp(Vector(logits_.row(r).transpose()));
  double s = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    check_value(values[k], n_values());
    check_value(parents[k], n_values());
    s += logits_(parents[k], values[k]) - lse[parents[k]];
  }
  return s;
}

Vector TabularConditional::grad_mean_log_prob(std::span<const int> values,
                                              std::span<const int> parents) const {
  if (values.empty()) throw std::invalid_argument("empty batch");
  if (values.size() != parents.size())
    throw std::invalid_argument("values/parents size mismatch");
  const Eigen::Index n = logits_.rows();
  Matrix counts = Matrix::Zero(n, n);
  Vector row_counts = Vector::Zero(n);
  for (std::size_t k = 0; k < values.size(); ++k) {
    check_value(values[k], n_values());
    check_value(parents[k], n_values());
    counts(parents[k], values[k]) += 1.0;
    row_counts[parents[k]] += 1.0;
  }
  const Matrix p = probs();
  Matrix g = (counts - row_counts.asDiagonal() * p) / static_cast<double>(values.size());
  Vector flat(n * n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), n, n) = g;
  return flat;
}

Vector TabularConditional::params() const {
  const Eigen::Index n = logits_.rows();
  Vector flat(n * n);
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), n, n) = logits_;
  return flat;
}

void TabularConditional::set_params(const Vector& p) {
  const Eigen::Index n = logits_.rows();
  if (p.size() != n * n)
    throw std::invalid_argument("TabularConditional: parameter size mismatch");
  logits_ = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>(p.data(), n, n);
}

TabularFit fit_tabular_mle(std::span<const int> first, std::span<const int> second,
                           int n_values, double pseudo_count) {
  if (first.size() != second.size())
    throw std::invalid_argument("fit_tabular_mle: size mismatch");
  Matrix counts = Matrix::Constant(n_values, n_values, pseudo_count);
  for (std::size_t k = 0; k < first.size(); ++k) {
    check_value(first[k], n_values);
    check_value(second[k], n_values);
    counts(first[k], second[k]) += 1.0;
  }
  const Vector row_totals = counts.rowwise().sum();
  TabularFit fit;
  fit.marginal = TabularMarginal(Vector(row_totals.array().log()));
  Matrix cond(n_values, n_values);
  for (int i = 0; i < n_values; ++i) {
    if (row_totals[i] > 0.0) {
      cond.row(i) = counts.row(i).array().log();
    } else {
      cond.row(i).setZero();
      fit.unseen_rows.push_back(i);
    }
  }
  fit.conditional = TabularConditional(std::move(cond));
  return fit;
}

double TabularBivariateModel::log_prob(const scm::DiscretePair& x) const {
  return reversed ? marginal.log_prob(x.b) + conditional.log_prob(x.a, x.b)
                  : marginal.log_prob(x.a) + conditional.log_prob(x.b, x.a);
}

double TabularBivariateModel::sum_log_prob(
    std::span<const scm::DiscretePair> batch) const {
  std::vector<int> cause, effect;
  cause.reserve(batch.size());
  effect.reserve(batch.size());
  for (const auto& x : batch) {
    cause.push_back(reversed ? x.b : x.a);
    effect.push_back(reversed ? x.a : x.b);
  }
  return marginal.sum_log_prob(cause) + conditional.sum_log_prob(effect, cause);
}

double TabularBivariateModel::mean_log_prob(
    std::span<const scm::DiscretePair> batch) const {
  return sum_log_prob(batch) / static_cast<double>(batch.size());
}

Vector TabularBivariateModel::grad_mean_log_prob(
    std::span<const scm::DiscretePair> batch) const {
  std::vector<int> cause, effect;
  cause.reserve(batch.size());
  effect.reserve(batch.size());
  for (const auto& x : batch) {
    cause.push_back(reversed ? x.b : x.a);
    effect.push_back(reversed ? x.a : x.b);
  }
  const Vector gm = marginal.grad_mean_log_prob(cause);
  const Vector gc = conditional.grad_mean_log_prob(effect, cause);
  Vector g(gm.size() + gc.size());
  g << gm, gc;
  return g;
}

Vector TabularBivariateModel::params() const {
  const Vector pm = marginal.params();
  const Vector pc = conditional.params();
  Vector p(pm.size() + pc.size());
  p << pm, pc;
  return p;
}

void TabularBivariateModel::set_params(const Vector& p) {
  const Eigen::Index n = marginal.n_values();
  marginal.set_params(p.head(n));
  conditional.set_params(p.tail(p.size() - n));
}

Matrix TabularBivariateModel::joint() const {
  const Matrix j = marginal.probs().asDiagonal() * conditional.probs();
  return reversed ? Matrix(j.transpose()) : j;
}

std::pair<TabularBivariateModel, TabularBivariateModel> tabular_models_from_joint(
    const Matrix& joint) {
  const Vector pa = joint.rowwise().sum();
  const Vector pb = joint.colwise().sum().transpose();
  TabularBivariateModel causal{TabularMarginal::from_probs(pa),
                               TabularConditional::from_probs(pa.cwiseInverse().asDiagonal() * joint),
                               false};
  const Matrix jt = joint.transpose();
  TabularBivariateModel anticausal{TabularMarginal::from_probs(pb),
                                   TabularConditional::from_probs(pb.cwiseInverse().asDiagonal() * jt),
                                   true};
  return {std::move(causal), std::move(anticausal)};
}

void to_json(nlohmann::json& j, const TabularMarginal& m) {
  j = {{"type", "tabular_marginal"}, {"logits", jsonio::vector_to_json(m.logits())}};
}

void from_json(const nlohmann::json& j, TabularMarginal& m) {
  m = TabularMarginal(jsonio::vector_from_json(j.at("logits")));
}

void to_json(nlohmann::json& j, const TabularConditional& m) {
  j = {{"type", "tabular_conditional"}, {"logits", jsonio::matrix_to_json(m.logits())}};
}

void from_json(const nlohmann::json& j, TabularConditional& m) {
  m = TabularConditional(jsonio::matrix_from_json(j.at("logits")));
}

}  // namespace metacausal::learners
