#include "metacausal/learners/gaussian.hpp"

#include <cmath>
#include <numbers>

#include "metacausal/json_eigen.hpp"

namespace metacausal::learners {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Shared Gaussian core for residuals R (d x n): returns the summed log-density
// and, optionally, the summed gradients w.r.t. the mean and the factor.
struct ResidualTerms {
  double sum_log_prob = 0.0;
  Matrix u;  // Sigma^{-1} R
  Matrix z;  // L^{-1} R
};

ResidualTerms residual_terms(const CholeskyFactor& chol, const Matrix& r) {
  ResidualTerms t;
  const auto l = chol.lower().triangularView<Eigen::Lower>();
  t.z = l.solve(r);
  t.u = chol.lower().transpose().triangularView<Eigen::Upper>().solve(t.z);
  const double n = static_cast<double>(r.cols());
  const double d = static_cast<double>(r.rows());
  t.sum_log_prob = -0.5 * n * (d * kLog2Pi + chol.log_det()) - 0.5 * t.z.squaredNorm();
  return t;
}

// Mean-over-batch gradient w.r.t. the lower factor.
Matrix factor_gradient(const CholeskyFactor& chol, const ResidualTerms& t) {
  const double n = static_cast<double>(t.z.cols());
  Matrix g = (t.u * t.z.transpose()) / n;
  g = g.triangularView<Eigen::Lower>();
  g.diagonal() -= chol.lower().diagonal().cwiseInverse();
  return g;
}

}  // namespace

// --- Cholesky factor ----------------------------------------------------------

CholeskyFactor::CholeskyFactor(const Matrix& lower) : lower_(lower) {
  if (lower_.rows() != lower_.cols())
    throw std::invalid_argument("CholeskyFactor: matrix must be square");
  for (Eigen::Index i = 0; i < lower_.rows(); ++i)
    if (!(lower_(i, i) > 0.0))
      throw std::domain_error("CholeskyFactor: diagonal must be positive");
  lower_ = Matrix(lower_.triangularView<Eigen::Lower>());
}

CholeskyFactor CholeskyFactor::from_covariance(const Matrix& cov) {
  return CholeskyFactor(numkit::cholesky_lower(cov));
}

double CholeskyFactor::log_det() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

Vector CholeskyFactor::packed() const {
  Vector p(packed_size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < lower_.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      p[k++] = i == j ? std::log(lower_(i, i)) : lower_(i, j);
  return p;
}

void CholeskyFactor::unpack(const Vector& p) {
  if (p.size() != packed_size())
    throw std::invalid_argument("CholeskyFactor: parameter size mismatch");
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < lower_.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      lower_(i, j) = i == j ? std::exp(p[k++]) : p[k++];
}

Vector CholeskyFactor::pack_gradient(const Matrix& grad_lower) const {
  Vector g(packed_size());
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < lower_.rows(); ++i)
    for (Eigen::Index j = 0; j <= i; ++j)
      g[k++] = i == j ? grad_lower(i, i) * lower_(i, i) : grad_lower(i, j);
  return g;
}

// --- marginal -----------------------------------------------------------------

GaussianMarginal::GaussianMarginal(Vector mean, CholeskyFactor chol)
    : mean_(std::move(mean)), chol_(std::move(chol)) {
  if (mean_.size() != chol_.dim())
    throw std::invalid_argument("GaussianMarginal: dimension mismatch");
}

double GaussianMarginal::log_prob(const Vector& x) const {
  return sum_log_prob(Matrix(x));
}

double GaussianMarginal::sum_log_prob(const Matrix& x) const {
  if (x.rows() != dim()) throw std::invalid_argument("GaussianMarginal: dimension mismatch");
  return residual_terms(chol_, x.colwise() - mean_).sum_log_prob;
}

Vector GaussianMarginal::grad_mean_log_prob(const Matrix& x) const {
  if (x.cols() == 0) throw std::invalid_argument("empty batch");
  if (x.rows() != dim()) throw std::invalid_argument("GaussianMarginal: dimension mismatch");
  const ResidualTerms t = residual_terms(chol_, x.colwise() - mean_);
  Vector g(params().size());
  g.head(dim()) = t.u.rowwise().mean();
  g.tail(chol_.packed_size()) = chol_.pack_gradient(factor_gradient(chol_, t));
  return g;
}

Vector GaussianMarginal::params() const {
  Vector p(mean_.size() + chol_.packed_size());
  p << mean_, chol_.packed();
  return p;
}

void GaussianMarginal::set_params(const Vector& p) {
  if (p.size() != mean_.size() + chol_.packed_size())
    throw std::invalid_argument("GaussianMarginal: parameter size mismatch");
  mean_ = p.head(mean_.size());
  chol_.unpack(p.tail(chol_.packed_size()));
}

// --- conditional --------------------------------------------------------------

LinearGaussianConditional::LinearGaussianConditional(Matrix weight, Vector offset,
                                                     CholeskyFactor chol)
    : weight_(std::move(weight)), offset_(std::move(offset)), chol_(std::move(chol)) {
  if (weight_.rows() != offset_.size() || offset_.size() != chol_.dim())
    throw std::invalid_argument("LinearGaussianConditional: dimension mismatch");
}

double LinearGaussianConditional::log_prob(const Vector& y, const Vector& x) const {
  return sum_log_prob(Matrix(y), Matrix(x));
}

double LinearGaussianConditional::sum_log_prob(const Matrix& y, const Matrix& x) const {
  if (y.cols() != x.cols() || x.rows() != weight_.cols() || y.rows() != dim())
    throw std::invalid_argument("LinearGaussianConditional: dimension mismatch");
  const Matrix r = (y - weight_ * x).colwise() - offset_;
  return residual_terms(chol_, r).sum_log_prob;
}

Vector LinearGaussianConditional::grad_mean_log_prob(const Matrix& y, const Matrix& x) const {
  if (y.cols() == 0) throw std::invalid_argument("empty batch");
  if (y.cols() != x.cols() || x.rows() != weight_.cols() || y.rows() != dim())
    throw std::invalid_argument("LinearGaussianConditional: dimension mismatch");
  const Matrix r = (y - weight_ * x).colwise() - offset_;
  const ResidualTerms t = residual_terms(chol_, r);
  const double n = static_cast<double>(y.cols());
  Vector g(params().size());
  Eigen::Map<RowMajor>(g.data(), weight_.rows(), weight_.cols()) = t.u * x.transpose() / n;
  g.segment(weight_.size(), dim()) = t.u.rowwise().mean();
  g.tail(chol_.packed_size()) = chol_.pack_gradient(factor_gradient(chol_, t));
  return g;
}

Vector LinearGaussianConditional::params() const {
  Vector p(weight_.size() + offset_.size() + chol_.packed_size());
  Eigen::Map<RowMajor>(p.data(), weight_.rows(), weight_.cols()) = weight_;
  p.segment(weight_.size(), offset_.size()) = offset_;
  p.tail(chol_.packed_size()) = chol_.packed();
  return p;
}

void LinearGaussianConditional::set_params(const Vector& p) {
  if (p.size() != weight_.size() + offset_.size() + chol_.packed_size())
    throw std::invalid_argument("LinearGaussianConditional: parameter size mismatch");
  weight_ = Eigen::Map<const RowMajor>(p.data(), weight_.rows(), weight_.cols());
  offset_ = p.segment(weight_.size(), offset_.size());
  chol_.unpack(p.tail(chol_.packed_size()));
}

// --- bivariate module ---------------------------------------------------------

double LinearGaussianModule::sum_log_prob(const Matrix& a, const Matrix& b) const {
  return reversed ? marginal.sum_log_prob(b) + conditional.sum_log_prob(a, b)
                  : marginal.sum_log_prob(a) + conditional.sum_log_prob(b, a);
}

double LinearGaussianModule::mean_log_prob(const Matrix& a, const Matrix& b) const {
  return sum_log_prob(a, b) / static_cast<double>(a.cols());
}

Vector LinearGaussianModule::grad_mean_log_prob(const Matrix& a, const Matrix& b) const {
  const Vector gm = reversed ? marginal.grad_mean_log_prob(b) : marginal.grad_mean_log_prob(a);
  const Vector gc = reversed ? conditional.grad_mean_log_prob(a, b)
                             : conditional.grad_mean_log_prob(b, a);
  Vector g(gm.size() + gc.size());
  g << gm, gc;
  return g;
}

Vector LinearGaussianModule::params() const {
  const Vector pm = marginal.params();
  const Vector pc = conditional.params();
  Vector p(pm.size() + pc.size());
  p << pm, pc;
  return p;
}

void LinearGaussianModule::set_params(const Vector& p) {
  const Eigen::Index nm = marginal.params().size();
  marginal.set_params(p.head(nm));
  conditional.set_params(p.tail(p.size() - nm));
}

std::pair<LinearGaussianModule, LinearGaussianModule> flip_linear_gaussian(
    const scm::LinearGaussianScm& s) {
  s.validate();
  LinearGaussianModule causal{
      GaussianMarginal(s.mu_A, CholeskyFactor::from_covariance(s.Sigma_A)),
      LinearGaussianConditional(s.beta_1, s.beta_0, CholeskyFactor::from_covariance(s.Sigma_B)),
      false};
  const Vector mu_b = s.beta_1 * s.mu_A + s.beta_0;
  Matrix cov_b = s.beta_1 * s.Sigma_A * s.beta_1.transpose() + s.Sigma_B;
  cov_b = 0.5 * (cov_b + cov_b.transpose());
  const Eigen::LLT<Matrix> llt(cov_b);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("flip_linear_gaussian: marginal covariance not SPD");
  // V1 = Sigma_A beta_1^T Sigma_B^{-1}
  const Matrix v1 = llt.solve(s.beta_1 * s.Sigma_A).transpose();
  const Vector v0 = s.mu_A - v1 * mu_b;
  Matrix residual = s.Sigma_A - v1 * s.beta_1 * s.Sigma_A;
  residual = 0.5 * (residual + residual.transpose());
  LinearGaussianModule anticausal{
      GaussianMarginal(mu_b, CholeskyFactor::from_covariance(cov_b)),
      LinearGaussianConditional(v1, v0, CholeskyFactor::from_covariance(residual)), true};
  return {std::move(causal), std::move(anticausal)};
}

std::vector<scm::ContinuousPair> encode(const RotationEncoder& encoder,
                                        const std::vector<scm::ContinuousPair>& pairs) {
  return scm::decode_observations(scm::RotationDecoder{encoder.theta_E}, pairs);
}

void to_json(nlohmann::json& j, const LinearGaussianModule& m) {
  j = {{"type", "linear_gaussian_module"},
       {"reversed", m.reversed},
       {"marginal",
        {{"mean", jsonio::vector_to_json(m.marginal.mean())},
         {"chol", jsonio::matrix_to_json(m.marginal.chol().lower())}}},
       {"conditional",
        {{"weight", jsonio::matrix_to_json(m.conditional.weight())},
         {"offset", jsonio::vector_to_json(m.conditional.offset())},
         {"chol", jsonio::matrix_to_json(m.conditional.chol().lower())}}}};
}

void from_json(const nlohmann::json& j, LinearGaussianModule& m) {
  const auto& jm = j.at("marginal");
  const auto& jc = j.at("conditional");
  m.reversed = j.at("reversed").get<bool>();
  m.marginal = GaussianMarginal(jsonio::vector_from_json(jm.at("mean")),
                                CholeskyFactor(jsonio::matrix_from_json(jm.at("chol"))));
  m.conditional = LinearGaussianConditional(
      jsonio::matrix_from_json(jc.at("weight")), jsonio::vector_from_json(jc.at("offset")),
      CholeskyFactor(jsonio::matrix_from_json(jc.at("chol"))));
}

}  // namespace metacausal::learners
