#include "metacausal/scm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace metacausal::scm {

namespace {

void check_simplex(const Vector& p, const char* what) {
  if (p.size() < 2 || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(what) + " is not a simplex");
}

}  // namespace

void CategoricalScm::validate() const {
  if (n_values < 2) throw std::invalid_argument("CategoricalScm needs N >= 2");
  if (pi_A.size() != n_values || pi_B_given_A.rows() != n_values ||
      pi_B_given_A.cols() != n_values)
    throw std::invalid_argument("CategoricalScm shape mismatch");
  check_simplex(pi_A, "pi_A");
  for (int a = 0; a < n_values; ++a)
    check_simplex(pi_B_given_A.row(a).transpose(), "pi_B_given_A row");
}

Matrix CategoricalScm::joint() const {
  return pi_A.asDiagonal() * pi_B_given_A;
}

CategoricalScm sample_categorical_scm(int n_values, RngStream& rng) {
  if (n_values < 2) throw std::invalid_argument("CategoricalScm needs N >= 2");
  const Vector ones = Vector::Ones(n_values);
  CategoricalScm scm;
  scm.n_values = n_values;
  scm.pi_A = numkit::sample_dirichlet(ones, rng);
  scm.pi_B_given_A.resize(n_values, n_values);
  for (int a = 0; a < n_values; ++a)
    scm.pi_B_given_A.row(a) = numkit::sample_dirichlet(ones, rng).transpose();
  return scm;
}

std::vector<DiscretePair> ancestral_sample(const CategoricalScm& scm,
                                           std::size_t n, RngStream& rng) {
  std::vector<DiscretePair> out;
  out.reserve(n);
  std::vector<Vector> rows(static_cast<std::size_t>(scm.n_values));
  for (int a = 0; a < scm.n_values; ++a)
    rows[static_cast<std::size_t>(a)] = scm.pi_B_given_A.row(a).transpose();
  for (std::size_t i = 0; i < n; ++i) {
    const int a = numkit::sample_categorical(scm.pi_A, rng);
    const int b = numkit::sample_categorical(rows[static_cast<std::size_t>(a)], rng);
    out.push_back({a, b});
  }
  return out;
}

CategoricalScm intervene_on_cause(const CategoricalScm& scm, RngStream& rng) {
  CategoricalScm out = scm;
  out.pi_A = numkit::sample_dirichlet(Vector::Ones(scm.n_values), rng);
  return out;
}

std::vector<DiscretePair> swap_roles(const std::vector<DiscretePair>& pairs) {
  std::vector<DiscretePair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({p.b, p.a});
  return out;
}

// --- spline ---------------------------------------------------------------

QuadraticSpline QuadraticSpline::through(std::vector<double> xs,
                                         std::vector<double> ys) {
  if (xs.size() != ys.size() || xs.size() < 3)
    throw std::invalid_argument("quadratic spline needs >= 3 knots");
  for (std::size_t k = 1; k < xs.size(); ++k)
    if (!(xs[k] > xs[k - 1]))
      throw std::invalid_argument("spline knots must be strictly increasing");
  QuadraticSpline s;
  const std::size_t segments = xs.size() - 1;
  s.slope.resize(segments);
  s.curv.resize(segments);
  // natural left end: zero curvature on the first segment
  s.slope[0] = (ys[1] - ys[0]) / (xs[1] - xs[0]);
  s.curv[0] = 0.0;
  for (std::size_t k = 1; k < segments; ++k) {
    const double hp = xs[k] - xs[k - 1];
    s.slope[k] = s.slope[k - 1] + 2.0 * s.curv[k - 1] * hp;
    const double h = xs[k + 1] - xs[k];
    s.curv[k] = ((ys[k + 1] - ys[k]) / h - s.slope[k]) / h;
  }
  s.xs = std::move(xs);
  s.ys = std::move(ys);
  return s;
}

double QuadraticSpline::operator()(double x) const {
  const std::size_t last = xs.size() - 1;
  if (x <= xs.front()) return ys.front() + slope.front() * (x - xs.front());
  if (x >= xs.back()) {
    const double h = xs[last] - xs[last - 1];
    const double end_slope = slope[last - 1] + 2.0 * curv[last - 1] * h;
    return ys.back() + end_slope * (x - xs.back());
  }
  std::size_t k = static_cast<std::size_t>(
      std::upper_bound(xs.begin(), xs.end(), x) - xs.begin() - 1);
  const double dx = x - xs[k];
  return ys[k] + slope[k] * dx + curv[k] * dx * dx;
}

double QuadraticSpline::derivative(double x) const {
  const std::size_t last = xs.size() - 1;
  if (x <= xs.front()) return slope.front();
  if (x >= xs.back()) {
    const double h = xs[last] - xs[last - 1];
    return slope[last - 1] + 2.0 * curv[last - 1] * h;
  }
  std::size_t k = static_cast<std::size_t>(
      std::upper_bound(xs.begin(), xs.end(), x) - xs.begin() - 1);
  return slope[k] + 2.0 * curv[k] * (x - xs[k]);
}

void SplineScm::validate() const {
  if (f.xs.size() < 3) throw std::invalid_argument("spline needs >= 3 knots");
  if (!(cause_variance > 0.0) || !(noise_variance >= 0.0))
    throw std::invalid_argument("SplineScm variances must be positive");
}

SplineScm sample_spline_scm(RngStream& rng, int n_knots, double range_a,
                            double range_b) {
  if (n_knots < 3) throw std::invalid_argument("spline needs >= 3 knots");
  std::vector<double> xs(static_cast<std::size_t>(n_knots));
  std::vector<double> ys(static_cast<std::size_t>(n_knots));
  for (int k = 0; k < n_knots; ++k) {
    xs[static_cast<std::size_t>(k)] =
        -range_a + 2.0 * range_a * k / static_cast<double>(n_knots - 1);
    ys[static_cast<std::size_t>(k)] = rng.uniform(-range_b, range_b);
  }
  SplineScm scm;
  scm.f = QuadraticSpline::through(std::move(xs), std::move(ys));
  scm.range_a = range_a;
  scm.range_b = range_b;
  return scm;
}

double eval_spline(const SplineScm& scm, double x) { return scm.f(x); }

std::vector<ContinuousPair> ancestral_sample(const SplineScm& scm,
                                             std::size_t n, RngStream& rng) {
  std::vector<ContinuousPair> out;
  out.reserve(n);
  const double sd_a = std::sqrt(scm.cause_variance);
  const double sd_b = std::sqrt(scm.noise_variance);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = scm.cause_mean + sd_a * rng.normal();
    const double b = scm.f(a) + sd_b * rng.normal();
    out.push_back({a, b});
  }
  return out;
}

SplineScm intervene_on_cause(const SplineScm& scm, RngStream& rng) {
  SplineScm out = scm;
  out.cause_mean = rng.uniform(-4.0, 4.0);
  return out;
}

// --- linear Gaussian --------------------------------------------------------

void LinearGaussianScm::validate() const {
  if (dim < 1) throw std::invalid_argument("LinearGaussianScm needs d >= 1");
  if (mu_A.size() != dim || beta_0.size() != dim || beta_1.rows() != dim ||
      beta_1.cols() != dim || Sigma_A.rows() != dim || Sigma_B.rows() != dim)
    throw std::invalid_argument("LinearGaussianScm shape mismatch");
  numkit::cholesky_lower(Sigma_A);
  numkit::cholesky_lower(Sigma_B);
}

LinearGaussianScm sample_linear_gaussian_scm(int dim, RngStream& rng) {
  if (dim < 1) throw std::invalid_argument("LinearGaussianScm needs d >= 1");
  LinearGaussianScm scm;
  scm.dim = dim;
  scm.mu_A.resize(dim);
  scm.beta_0.resize(dim);
  scm.beta_1.resize(dim, dim);
  for (int i = 0; i < dim; ++i) {
    scm.mu_A[i] = rng.normal();
    scm.beta_0[i] = rng.normal();
    for (int j = 0; j < dim; ++j) scm.beta_1(i, j) = rng.normal();
  }
  const Matrix identity = Matrix::Identity(dim, dim);
  scm.Sigma_A = numkit::sample_inverse_wishart(identity, dim + 2.0, rng);
  scm.Sigma_B = numkit::sample_inverse_wishart(identity, dim + 2.0, rng);
  return scm;
}

std::pair<Matrix, Matrix> ancestral_sample(const LinearGaussianScm& scm,
                                           std::size_t n, RngStream& rng) {
  const Matrix la = numkit::cholesky_lower(scm.Sigma_A);
  const Matrix lb = numkit::cholesky_lower(scm.Sigma_B);
  const Vector zero = Vector::Zero(scm.dim);
  Matrix a(scm.dim, static_cast<Eigen::Index>(n));
  Matrix b(scm.dim, static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    a.col(i) = numkit::sample_gaussian(scm.mu_A, la, rng);
    b.col(i) = scm.beta_1 * a.col(i) + scm.beta_0 +
               numkit::sample_gaussian(zero, lb, rng);
  }
  return {std::move(a), std::move(b)};
}

LinearGaussianScm intervene_on_cause(const LinearGaussianScm& scm,
                                     RngStream& rng) {
  LinearGaussianScm out = scm;
  for (int i = 0; i < scm.dim; ++i) out.mu_A[i] = rng.normal();
  return out;
}

// --- rotation ----------------------------------------------------------------

Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

Eigen::Matrix2d RotationDecoder::matrix() const { return rotation(theta_D); }

std::vector<ContinuousPair> decode_observations(
    const RotationDecoder& decoder, const std::vector<ContinuousPair>& pairs) {
  const double c = std::cos(decoder.theta_D);
  const double s = std::sin(decoder.theta_D);
  std::vector<ContinuousPair> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back({c * p.a - s * p.b, s * p.a + c * p.b});
  return out;
}

}  // namespace metacausal::scm
