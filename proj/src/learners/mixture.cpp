#include "metacausal/learners/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "metacausal/json_eigen.hpp"

namespace metacausal::learners {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

// --- Gaussian mixture ---------------------------------------------------------

GaussianMixtureMarginal::GaussianMixtureMarginal(Vector weights, Vector means,
                                                 Vector variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
  if (weights_.size() == 0 || weights_.size() != means_.size() ||
      weights_.size() != variances_.size())
    throw std::invalid_argument("GaussianMixtureMarginal: shape mismatch");
  weights_ /= weights_.sum();
  variances_ = variances_.cwiseMax(kVarianceFloor);
}

double GaussianMixtureMarginal::log_prob(double x) const {
  Vector terms(weights_.size());
  for (Eigen::Index c = 0; c < terms.size(); ++c) {
    const double d = x - means_[c];
    terms[c] = std::log(weights_[c]) - kHalfLog2Pi - 0.5 * std::log(variances_[c]) -
               0.5 * d * d / variances_[c];
  }
  return numkit::log_sum_exp(terms);
}

double GaussianMixtureMarginal::sum_log_prob(std::span<const double> xs) const {
  double s = 0.0;
  for (double x : xs) s += log_prob(x);
  return s;
}

double GaussianMixtureMarginal::mean_log_prob(std::span<const double> xs) const {
  return sum_log_prob(xs) / static_cast<double>(xs.size());
}

Vector GaussianMixtureMarginal::grad_mean_log_prob(std::span<const double> xs) const {
  if (xs.empty()) throw std::invalid_argument("empty batch");
  const Eigen::Index k = weights_.size();
  Vector g = Vector::Zero(3 * k);
  Vector terms(k);
  for (double x : xs) {
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = x - means_[c];
      terms[c] = std::log(weights_[c]) - kHalfLog2Pi - 0.5 * std::log(variances_[c]) -
                 0.5 * d * d / variances_[c];
    }
    const Vector r = numkit::softmax(terms);
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = x - means_[c];
      g[c] += r[c] - weights_[c];
      g[k + c] += r[c] * d / variances_[c];
      if (variances_[c] > kVarianceFloor)
        g[2 * k + c] += r[c] * (0.5 * d * d / variances_[c] - 0.5);
    }
  }
  return g / static_cast<double>(xs.size());
}

Vector GaussianMixtureMarginal::params() const {
  const Eigen::Index k = weights_.size();
  Vector p(3 * k);
  p.head(k) = weights_.array().log();
  p.segment(k, k) = means_;
  p.tail(k) = variances_.array().log();
  return p;
}

void GaussianMixtureMarginal::set_params(const Vector& p) {
  const Eigen::Index k = weights_.size();
  if (p.size() != 3 * k)
    throw std::invalid_argument("GaussianMixtureMarginal: parameter size mismatch");
  weights_ = numkit::softmax(p.head(k));
  means_ = p.segment(k, k);
  variances_ = p.tail(k).array().exp().cwiseMax(kVarianceFloor);
}

namespace {

// One EM sweep; returns the mean log-likelihood under the *input* parameters.
double em_sweep(Vector& weights, Vector& means, Vector& variances,
                std::span<const double> xs) {
  const Eigen::Index k = weights.size();
  const auto n = static_cast<Eigen::Index>(xs.size());
  Matrix resp(n, k);
  Vector terms(k);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double x = xs[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < k; ++c) {
      const double d = x - means[c];
      terms[c] = std::log(weights[c]) - kHalfLog2Pi - 0.5 * std::log(variances[c]) -
                 0.5 * d * d / variances[c];
    }
    const double lse = numkit::log_sum_exp(terms);
    total += lse;
    resp.row(i) = (terms.array() - lse).exp().transpose();
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    const double nc = resp.col(c).sum();
    if (nc < 1e-12) {
      weights[c] = 1e-300;
      continue;
    }
    double mean = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) mean += resp(i, c) * xs[static_cast<std::size_t>(i)];
    mean /= nc;
    double var = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = xs[static_cast<std::size_t>(i)] - mean;
      var += resp(i, c) * d * d;
    }
    weights[c] = nc / static_cast<double>(n);
    means[c] = mean;
    variances[c] = std::max(var / nc, kVarianceFloor);
  }
  weights /= weights.sum();
  return total / static_cast<double>(n);
}

EmResult run_em(Vector weights, Vector means, Vector variances,
                std::span<const double> xs, int max_iterations, double tolerance) {
  EmResult result;
  double previous = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iterations; ++it) {
    const double ll = em_sweep(weights, means, variances, xs);
    if (!std::isfinite(ll)) throw NumericalError("EM: non-finite log-likelihood");
    result.log_likelihood_trace.push_back(ll);
    result.iterations = it + 1;
    if (ll - previous < tolerance) break;
    previous = ll;
  }
  result.model = GaussianMixtureMarginal(std::move(weights), std::move(means),
                                         std::move(variances));
  result.log_likelihood_trace.push_back(result.model.mean_log_prob(xs));
  return result;
}

}  // namespace

EmResult fit_gmm_em(std::span<const double> samples, int n_components,
                    numkit::RngStream& rng, int max_iterations, double tolerance) {
  if (n_components < 1) throw std::invalid_argument("fit_gmm_em: n_components < 1");
  const std::set<double> distinct(samples.begin(), samples.end());
  if (static_cast<int>(distinct.size()) < n_components)
    throw std::invalid_argument("fit_gmm_em: fewer distinct samples than components");
  const auto n = samples.size();
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double x : samples) var += (x - mean) * (x - mean);
  var = std::max(var / static_cast<double>(n), kVarianceFloor);

  // distinct data points as initial means
  std::vector<double> pool(distinct.begin(), distinct.end());
  Vector means(n_components);
  for (int c = 0; c < n_components; ++c) {
    const std::size_t pick = c + rng.below(pool.size() - static_cast<std::size_t>(c));
    std::swap(pool[static_cast<std::size_t>(c)], pool[pick]);
    means[c] = pool[static_cast<std::size_t>(c)];
  }
  return run_em(Vector::Constant(n_components, 1.0 / n_components), std::move(means),
                Vector::Constant(n_components, var), samples, max_iterations, tolerance);
}

EmResult refine_gmm_em(const GaussianMixtureMarginal& init,
                       std::span<const double> samples, int max_iterations,
                       double tolerance) {
  if (samples.empty()) throw std::invalid_argument("refine_gmm_em: empty sample");
  return run_em(init.weights(), init.means(), init.variances(), samples, max_iterations,
                tolerance);
}

void to_json(nlohmann::json& j, const GaussianMixtureMarginal& m) {
  j = {{"type", "gaussian_mixture"},
       {"weights", jsonio::vector_to_json(m.weights())},
       {"means", jsonio::vector_to_json(m.means())},
       {"variances", jsonio::vector_to_json(m.variances())}};
}

void from_json(const nlohmann::json& j, GaussianMixtureMarginal& m) {
  m = GaussianMixtureMarginal(jsonio::vector_from_json(j.at("weights")),
                              jsonio::vector_from_json(j.at("means")),
                              jsonio::vector_from_json(j.at("variances")));
}

// --- mixture density network --------------------------------------------------

MdnConditional::MdnConditional(int n_hidden, int n_components, numkit::RngStream& rng) {
  if (n_hidden < 1 || n_components < 1)
    throw std::invalid_argument("MdnConditional: bad dimensions");
  w1_.resize(n_hidden);
  b1_.resize(n_hidden);
  for (int h = 0; h < n_hidden; ++h) {
    w1_[h] = 2.0 * rng.normal();
    b1_[h] = rng.uniform(-2.0, 2.0);
  }
  w2_.resize(3 * n_components, n_hidden);
  const double r = 1.0 / std::sqrt(static_cast<double>(n_hidden));
  for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = rng.uniform(-r, r);
  b2_ = Vector::Zero(3 * n_components);
  for (int c = 0; c < n_components; ++c) {
    b2_[n_components + c] =
        n_components == 1 ? 0.0 : -2.0 + 4.0 * c / static_cast<double>(n_components - 1);
    b2_[2 * n_components + c] = std::log(0.5);
  }
}

void MdnConditional::set_normalization(double in_shift, double in_scale,
                                       double out_shift, double out_scale) {
  if (!(in_scale > 0.0) || !(out_scale > 0.0))
    throw std::invalid_argument("MdnConditional: scales must be positive");
  in_shift_ = in_shift;
  in_scale_ = in_scale;
  out_shift_ = out_shift;
  out_scale_ = out_scale;
}

void MdnConditional::fit_normalization(std::span<const double> inputs,
                                       std::span<const double> outputs) {
  auto stats = [](std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair{m, std::sqrt(std::max(s / static_cast<double>(v.size()), 1e-12))};
  };
  const auto [mi, si] = stats(inputs);
  const auto [mo, so] = stats(outputs);
  set_normalization(mi, si, mo, so);
}

MdnConditional::Components MdnConditional::components(double x) const {
  const int k = n_components();
  const double xs = (x - in_shift_) / in_scale_;
  const Vector h = (w1_ * xs + b1_).array().tanh();
  const Vector o = w2_ * h + b2_;
  Components c;
  c.weights = numkit::softmax(o.head(k));
  c.means = o.segment(k, k);
  c.scales = o.tail(k).array().exp().cwiseMax(kScaleFloor);
  return c;
}

double MdnConditional::log_prob(double y, double x) const {
  const int k = n_components();
  const Components c = components(x);
  const double ys = (y - out_shift_) / out_scale_;
  Vector terms(k);
  for (int i = 0; i < k; ++i) {
    const double z = (ys - c.means[i]) / c.scales[i];
    terms[i] = std::log(c.weights[i]) - kHalfLog2Pi - std::log(c.scales[i]) - 0.5 * z * z;
  }
  return numkit::log_sum_exp(terms) - std::log(out_scale_);
}

double MdnConditional::sum_log_prob(std::span<const double> ys,
                                    std::span<const double> xs) const {
  if (ys.size() != xs.size()) throw std::invalid_argument("MDN: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < ys.size(); ++i) s += log_prob(ys[i], xs[i]);
  return s;
}

Vector MdnConditional::grad_mean_log_prob(std::span<const double> ys,
                                          std::span<const double> xs) const {
  if (ys.empty()) throw std::invalid_argument("empty batch");
  if (ys.size() != xs.size()) throw std::invalid_argument("MDN: size mismatch");
  const int k = n_components();
  const Eigen::Index hdim = b1_.size();
  Vector gw1 = Vector::Zero(hdim);
  Vector gb1 = Vector::Zero(hdim);
  Matrix gw2 = Matrix::Zero(w2_.rows(), w2_.cols());
  Vector gb2 = Vector::Zero(b2_.size());
  Vector terms(k), z(k), dout(3 * k);
  for (std::size_t n = 0; n < ys.size(); ++n) {
    const double xs_n = (xs[n] - in_shift_) / in_scale_;
    const double ys_n = (ys[n] - out_shift_) / out_scale_;
    const Vector h = (w1_ * xs_n + b1_).array().tanh();
    const Vector o = w2_ * h + b2_;
    const Vector logw = numkit::log_softmax(o.head(k));
    const Vector w = logw.array().exp();
    for (int i = 0; i < k; ++i) {
      const double sigma = std::max(std::exp(o[2 * k + i]), kScaleFloor);
      z[i] = (ys_n - o[k + i]) / sigma;
      terms[i] = logw[i] - kHalfLog2Pi - std::log(sigma) - 0.5 * z[i] * z[i];
    }
    const Vector r = numkit::softmax(terms);
    for (int i = 0; i < k; ++i) {
      const double sigma = std::max(std::exp(o[2 * k + i]), kScaleFloor);
      dout[i] = r[i] - w[i];
      dout[k + i] = r[i] * z[i] / sigma;
      dout[2 * k + i] = std::exp(o[2 * k + i]) > kScaleFloor ? r[i] * (z[i] * z[i] - 1.0) : 0.0;
    }
    gb2 += dout;
    gw2 += dout * h.transpose();
    const Vector dpre = (w2_.transpose() * dout).array() * (1.0 - h.array().square());
    gb1 += dpre;
    gw1 += dpre * xs_n;
  }
  const double inv = 1.0 / static_cast<double>(ys.size());
  Vector g(params().size());
  Eigen::Index off = 0;
  g.segment(off, hdim) = gw1 * inv;
  off += hdim;
  g.segment(off, hdim) = gb1 * inv;
  off += hdim;
  Eigen::Map<RowMajor>(g.data() + off, gw2.rows(), gw2.cols()) = gw2 * inv;
  off += gw2.size();
  g.segment(off, gb2.size()) = gb2 * inv;
  return g;
}

Vector MdnConditional::params() const {
  Vector p(w1_.size() + b1_.size() + w2_.size() + b2_.size());
  Eigen::Index off = 0;
  p.segment(off, w1_.size()) = w1_;
  off += w1_.size();
  p.segment(off, b1_.size()) = b1_;
  off += b1_.size();
  Eigen::Map<RowMajor>(p.data() + off, w2_.rows(), w2_.cols()) = w2_;
  off += w2_.size();
  p.segment(off, b2_.size()) = b2_;
  return p;
}

void MdnConditional::set_params(const Vector& p) {
  if (p.size() != w1_.size() + b1_.size() + w2_.size() + b2_.size())
    throw std::invalid_argument("MdnConditional: parameter size mismatch");
  Eigen::Index off = 0;
  w1_ = p.segment(off, w1_.size());
  off += w1_.size();
  b1_ = p.segment(off, b1_.size());
  off += b1_.size();
  w2_ = Eigen::Map<const RowMajor>(p.data() + off, w2_.rows(), w2_.cols());
  off += w2_.size();
  b2_ = p.segment(off, b2_.size());
}

void to_json(nlohmann::json& j, const MdnConditional& m) {
  j = {{"type", "mdn_conditional"},
       {"w1", jsonio::vector_to_json(m.w1_)},
       {"b1", jsonio::vector_to_json(m.b1_)},
       {"W2", jsonio::matrix_to_json(m.w2_)},
       {"b2", jsonio::vector_to_json(m.b2_)},
       {"normalization", {m.in_shift_, m.in_scale_, m.out_shift_, m.out_scale_}}};
}

void from_json(const nlohmann::json& j, MdnConditional& m) {
  m.w1_ = jsonio::vector_from_json(j.at("w1"));
  m.b1_ = jsonio::vector_from_json(j.at("b1"));
  m.w2_ = jsonio::matrix_from_json(j.at("W2"));
  m.b2_ = jsonio::vector_from_json(j.at("b2"));
  const auto norm = j.at("normalization").get<std::vector<double>>();
  m.set_normalization(norm.at(0), norm.at(1), norm.at(2), norm.at(3));
}

}  // namespace metacausal::learners
