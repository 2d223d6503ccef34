#include <doctest.h>

#include <cmath>
#include <numbers>

#include "metacausal/scm.hpp"

using namespace metacausal;
using namespace metacausal::scm;

namespace {

// Second solver: the full 3(K-1) system for y = a_k + b_k t + c_k t^2 on each
// segment (interpolation at both ends, C1 at interior knots, c_0 = 0).
Matrix dense_spline_coefficients(const std::vector<double>& xs, const std::vector<double>& ys) {
  const int seg = static_cast<int>(xs.size()) - 1;
  Matrix a = Matrix::Zero(3 * seg, 3 * seg);
  Vector rhs = Vector::Zero(3 * seg);
  int row = 0;
  for (int k = 0; k < seg; ++k) {
    const double h = xs[k + 1] - xs[k];
    a(row, 3 * k) = 1.0;
    rhs[row++] = ys[k];
    a(row, 3 * k) = 1.0;
    a(row, 3 * k + 1) = h;
    a(row, 3 * k + 2) = h * h;
    rhs[row++] = ys[k + 1];
  }
  for (int k = 0; k + 1 < seg; ++k) {
    const double h = xs[k + 1] - xs[k];
    a(row, 3 * k + 1) = 1.0;
    a(row, 3 * k + 2) = 2.0 * h;
    a(row, 3 * (k + 1) + 1) = -1.0;
    ++row;
  }
  a(row, 2) = 1.0;
  const Vector sol = a.fullPivLu().solve(rhs);
  return Eigen::Map<const Matrix>(sol.data(), 3, seg);
}

}  // namespace

TEST_CASE("categorical scm sampling") {
  RngStream rng(1, 0);
  const auto s = sample_categorical_scm(10, rng);
  CHECK_NOTHROW(s.validate());
  CHECK(s.pi_A.size() == 10);
  CHECK_THROWS_AS(sample_categorical_scm(1, rng), std::invalid_argument);

  RngStream r1(5, 5), r2(5, 5);
  const auto a = sample_categorical_scm(2, r1);
  const auto b = sample_categorical_scm(2, r2);
  CHECK(a.pi_A == b.pi_A);
  CHECK(a.pi_B_given_A == b.pi_B_given_A);

  const int n = 10000;
  double s0 = 0.0;
  for (int i = 0; i < n; ++i) s0 += sample_categorical_scm(2, rng).pi_A[0];
  CHECK(std::abs(s0 / n - 0.5) < 3.0 / std::sqrt(12.0 * n));
}

TEST_CASE("ancestral sampling of a categorical scm") {
  RngStream rng(2, 0);
  auto s = sample_categorical_scm(10, rng);
  s.pi_A.setZero();
  s.pi_A[3] = 1.0;
  for (const auto& p : ancestral_sample(s, 200, rng)) CHECK(p.a == 3);

  s = sample_categorical_scm(10, rng);
  const std::size_t n = 100000;
  Matrix counts = Matrix::Zero(10, 10);
  for (const auto& p : ancestral_sample(s, n, rng)) counts(p.a, p.b) += 1.0;
  const Matrix joint = s.joint();
  int outside = 0;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      const double q = joint(i, j);
      const double se = std::sqrt(q * (1 - q) / n);
      if (std::abs(counts(i, j) / n - q) > 3.0 * se + 1e-12) ++outside;
    }
  // 100 cells at 3 standard errors: a couple of exceedances are expected noise
  CHECK(outside <= 3);

  // chi-square on the marginal of A, 9 dof, critical value at 0.001 is 27.877
  double chi2 = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double e = s.pi_A[i] * n;
    const double o = counts.row(i).sum();
    chi2 += (o - e) * (o - e) / e;
  }
  CHECK(chi2 < 27.877);
}

TEST_CASE("interventions leave the mechanism untouched") {
  RngStream rng(3, 0);
  const auto c = sample_categorical_scm(5, rng);
  const auto c2 = intervene_on_cause(c, rng);
  CHECK(c2.pi_B_given_A == c.pi_B_given_A);
  CHECK(c2.pi_A != c.pi_A);
  CHECK_NOTHROW(c2.validate());

  const auto sp = sample_spline_scm(rng);
  const auto sp2 = intervene_on_cause(sp, rng);
  CHECK(sp2.f.xs == sp.f.xs);
  CHECK(sp2.f.ys == sp.f.ys);
  CHECK(sp2.cause_mean >= -4.0);
  CHECK(sp2.cause_mean <= 4.0);

  const auto lg = sample_linear_gaussian_scm(3, rng);
  CHECK_NOTHROW(lg.validate());
  Vector mean = Vector::Zero(3);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto lg2 = intervene_on_cause(lg, rng);
    CHECK(lg2.beta_1 == lg.beta_1);
    CHECK(lg2.beta_0 == lg.beta_0);
    CHECK(lg2.Sigma_B == lg.Sigma_B);
    mean += lg2.mu_A;
  }
  CHECK((mean / n).cwiseAbs().maxCoeff() < 3.0 / std::sqrt(double(n)));
}

TEST_CASE("spline interpolates and is C1") {
  RngStream rng(4, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = sample_spline_scm(rng);
    for (std::size_t k = 0; k < s.f.xs.size(); ++k)
      CHECK(std::abs(eval_spline(s, s.f.xs[k]) - s.f.ys[k]) < 1e-10);
    for (std::size_t k = 1; k + 1 < s.f.xs.size(); ++k) {
      const double x = s.f.xs[k];
      const double left = s.f.slope[k - 1] + 2.0 * s.f.curv[k - 1] * (x - s.f.xs[k - 1]);
      CHECK(std::abs(left - s.f.derivative(x)) < 1e-8);
    }
    const Matrix coef = dense_spline_coefficients(s.f.xs, s.f.ys);
    for (std::size_t k = 0; k + 1 < s.f.xs.size(); ++k) {
      const double t = 0.5 * (s.f.xs[k + 1] - s.f.xs[k]);
      const double ref = coef(0, k) + coef(1, k) * t + coef(2, k) * t * t;
      CHECK(std::abs(s.f(s.f.xs[k] + t) - ref) < 1e-8);
    }
    // linear beyond the knot range
    const double lo = s.f.xs.front();
    const double hi = s.f.xs.back();
    CHECK(std::abs((s.f(lo - 2.0) - s.f(lo - 1.0)) - (s.f(lo - 1.0) - s.f(lo))) < 1e-9);
    CHECK(std::abs((s.f(hi + 2.0) - s.f(hi + 1.0)) - (s.f(hi + 1.0) - s.f(hi))) < 1e-9);
  }
  const auto flat = QuadraticSpline::through({-1, 0, 1, 2}, {2.5, 2.5, 2.5, 2.5});
  for (double x = -3.0; x < 3.0; x += 0.37) CHECK(flat(x) == doctest::Approx(2.5));
  CHECK_THROWS_AS(QuadraticSpline::through({0, 1}, {0, 1}), std::invalid_argument);
  CHECK_THROWS_AS(QuadraticSpline::through({0, 1, 1}, {0, 1, 2}), std::invalid_argument);
}

TEST_CASE("noise-free spline scm puts b on f(a)") {
  RngStream rng(5, 0);
  auto s = sample_spline_scm(rng);
  s.noise_variance = 0.0;
  for (const auto& p : ancestral_sample(s, 100, rng)) CHECK(p.b == s.f(p.a));
}

TEST_CASE("rotation decoder") {
  const std::vector<ContinuousPair> pairs{{1.0, 0.0}, {0.3, -2.0}, {-1.5, 4.0}};
  const auto id = decode_observations(RotationDecoder{0.0}, pairs);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    CHECK(id[i].a == pairs[i].a);
    CHECK(id[i].b == pairs[i].b);
  }
  const auto r = decode_observations(RotationDecoder{-std::numbers::pi / 4}, pairs);
  CHECK(r[0].a == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(r[0].b == doctest::Approx(-std::sqrt(0.5)).epsilon(1e-15));

  RngStream rng(6, 0);
  for (int trial = 0; trial < 50; ++trial) {
    const double theta = rng.uniform(-4.0, 4.0);
    const RotationDecoder dec{theta};
    const Eigen::Matrix2d m = dec.matrix();
    CHECK((m * m.transpose() - Eigen::Matrix2d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(m.determinant() - 1.0) < 1e-12);
    const auto x = decode_observations(dec, pairs);
    const auto back = decode_observations(RotationDecoder{-theta}, x);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      CHECK(std::abs(x[i].a * x[i].a + x[i].b * x[i].b -
                     (pairs[i].a * pairs[i].a + pairs[i].b * pairs[i].b)) < 1e-12);
      CHECK(std::abs(back[i].a - pairs[i].a) < 1e-10);
      CHECK(std::abs(back[i].b - pairs[i].b) < 1e-10);
    }
  }
}

TEST_CASE("scm json round trip") {
  RngStream rng(7, 0);
  const auto c = sample_categorical_scm(4, rng);
  const CategoricalScm c2 = nlohmann::json(c).get<CategoricalScm>();
  CHECK(c2.pi_A == c.pi_A);
  CHECK(c2.pi_B_given_A == c.pi_B_given_A);

  const auto s = sample_spline_scm(rng);
  const SplineScm s2 = nlohmann::json(s).get<SplineScm>();
  CHECK(s2.f.ys == s.f.ys);
  CHECK(s2.f(1.234) == s.f(1.234));

  const auto l = sample_linear_gaussian_scm(3, rng);
  const LinearGaussianScm l2 = nlohmann::json(l).get<LinearGaussianScm>();
  CHECK(l2.beta_1 == l.beta_1);
  CHECK(l2.Sigma_A == l.Sigma_A);

  nlohmann::json bad = nlohmann::json(c);
  bad["pi_A"] = {0.5, 0.6, 0.0, 0.0};
  CHECK_THROWS(bad.get<CategoricalScm>());
}
