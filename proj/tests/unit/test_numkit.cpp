#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "metacausal/numkit.hpp"

using namespace metacausal;
using namespace metacausal::numkit;

TEST_CASE("log_sum_exp basic values") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp(std::vector<double>{0.0, 0.0}) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(log_sum_exp(std::vector<double>{-inf, 3.0}) == 3.0);
  // reference value from 30-digit arithmetic
  CHECK(log_sum_exp(std::vector<double>{1000.0, 1000.5}) ==
        doctest::Approx(1000.974076984180107).epsilon(1e-15));
  CHECK_THROWS_WITH_AS(log_sum_exp(std::vector<double>{}), "empty reduction",
                       std::invalid_argument);
}

TEST_CASE("log_sum_exp stays within [max, max + log n]") {
  RngStream rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-700.0, 700.0);
    const double m = *std::max_element(v.begin(), v.end());
    const double r = log_sum_exp(v) - m;
    CHECK(r >= 0.0);
    CHECK(r <= std::log(static_cast<double>(n)) + 1e-12);
  }
}

TEST_CASE("softmax values and shift invariance") {
  const Vector u = softmax(Vector::Zero(4));
  for (int i = 0; i < 4; ++i) CHECK(u[i] == doctest::Approx(0.25).epsilon(1e-15));
  Vector l(2);
  l << 1.0, 2.0;
  const Vector p = softmax(l);
  CHECK(p[0] == doctest::Approx(0.268941421369995121).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(0.731058578630004879).epsilon(1e-14));

  RngStream rng(3, 1);
  for (int trial = 0; trial < 100; ++trial) {
    Vector x(7);
    for (auto& v : x) v = rng.normal() * 5.0;
    const double c = rng.uniform(-50.0, 50.0);
    const Vector a = softmax(x);
    const Vector b = softmax((x.array() + c).matrix());
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(a.sum() - 1.0) < 1e-12);
    CHECK((a.array() > 0.0).all());
  }
}

TEST_CASE("sigmoid, log_sigmoid and logit") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(logit(sigmoid(1.3)) == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(std::isfinite(log_sigmoid(-800.0)));
  CHECK(log_sigmoid(-800.0) == doctest::Approx(-800.0));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("rng streams are reproducible and distinct") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
  RngStream s1 = a.split(3), s2 = a.split(3), s3 = a.split(4);
  CHECK(s1.next_u64() == s2.next_u64());
  CHECK(s1.next_u64() != s3.next_u64());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal sampler moments") {
  RngStream rng(5, 0);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  const double mean = s / n;
  CHECK(std::abs(mean) < 3.0 / std::sqrt(n) * 1.5);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("dirichlet sampler") {
  RngStream rng(9, 2);
  for (int i = 0; i < 50; ++i) {
    const Vector p = sample_dirichlet(Vector::Ones(10), rng);
    CHECK((p.array() > 0.0).all());
    CHECK(std::abs(p.sum() - 1.0) < 1e-12);
  }
  // Dirichlet(1, 1) first coordinate is Uniform(0, 1): mean 1/2, sd 1/sqrt(12)
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_dirichlet(Vector::Ones(2), rng)[0];
  const double se = 1.0 / std::sqrt(12.0 * n);
  CHECK(std::abs(s / n - 0.5) < 3.0 * se);

  RngStream r1(1, 1), r2(1, 1);
  CHECK(sample_dirichlet(Vector::Ones(5), r1) == sample_dirichlet(Vector::Ones(5), r2));
  Vector bad(2);
  bad << 1.0, 0.0;
  CHECK_THROWS_AS(sample_dirichlet(bad, rng), std::invalid_argument);
}

TEST_CASE("categorical sampler frequencies") {
  RngStream rng(4, 4);
  Vector p(3);
  p << 0.2, 0.5, 0.3;
  std::vector<int> counts(3, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_categorical(p, rng))];
  for (int k = 0; k < 3; ++k) {
    const double se = std::sqrt(p[k] * (1 - p[k]) / n);
    CHECK(std::abs(counts[static_cast<std::size_t>(k)] / double(n) - p[k]) < 4.0 * se);
  }
}

TEST_CASE("gaussian sampler covariance") {
  RngStream rng(8, 0);
  Matrix cov(2, 2);
  cov << 2.0, 0.6, 0.6, 1.0;
  const Matrix l = cholesky_lower(cov);
  Vector mean(2);
  mean << 1.0, -1.0;
  const int n = 100000;
  Matrix acc = Matrix::Zero(2, 2);
  Vector m = Vector::Zero(2);
  for (int i = 0; i < n; ++i) {
    const Vector x = sample_gaussian(mean, l, rng);
    m += x;
    acc += (x - mean) * (x - mean).transpose();
  }
  CHECK((m / n - mean).cwiseAbs().maxCoeff() < 0.02);
  CHECK((acc / n - cov).cwiseAbs().maxCoeff() < 0.04);
  Matrix bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(cholesky_lower(bad), std::domain_error);
}

TEST_CASE("inverse wishart mean") {
  // E[IW(I, nu)] = I / (nu - d - 1)
  RngStream rng(2, 2);
  const int d = 3;
  const double nu = d + 4.0;
  Matrix acc = Matrix::Zero(d, d);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const Matrix s = sample_inverse_wishart(Matrix::Identity(d, d), nu, rng);
    CHECK((s - s.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    acc += s;
  }
  const Matrix expected = Matrix::Identity(d, d) / (nu - d - 1);
  CHECK((acc / n - expected).cwiseAbs().maxCoeff() < 0.03);
}

TEST_CASE("rmsprop recurrence") {
  auto st = OptimizerState::rmsprop(0.1, 0.9, 1e-8);
  Vector p = Vector::Zero(1);
  const Vector g = Vector::Ones(1);
  rmsprop_step(st, p, g);
  CHECK(st.accumulator[0] == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(p[0] == doctest::Approx(-0.316227766016837942).epsilon(1e-7));
  const double before = p[0];
  rmsprop_step(st, p, g);
  CHECK(st.accumulator[0] == doctest::Approx(0.19).epsilon(1e-15));
  CHECK(before - p[0] == doctest::Approx(0.229415733870561777).epsilon(1e-7));

  auto z = OptimizerState::rmsprop(0.1);
  Vector q = Vector::Constant(3, 2.0);
  rmsprop_step(z, q, Vector::Zero(3));
  CHECK(q == Vector::Constant(3, 2.0));
  CHECK_THROWS_AS(rmsprop_step(z, q, Vector::Zero(2)), std::invalid_argument);
}

TEST_CASE("optimizer steps are pure") {
  RngStream rng(1, 0);
  Vector p(4), g(4);
  for (int i = 0; i < 4; ++i) {
    p[i] = rng.normal();
    g[i] = rng.normal();
  }
  for (auto kind : {OptimizerKind::sgd, OptimizerKind::rmsprop}) {
    OptimizerState s1 = kind == OptimizerKind::sgd ? OptimizerState::sgd(0.05)
                                                   : OptimizerState::rmsprop(0.05);
    OptimizerState s2 = s1;
    Vector p1 = p, p2 = p;
    optimizer_step(s1, p1, g);
    optimizer_step(s2, p2, g);
    CHECK(p1 == p2);
    CHECK(s1.accumulator == s2.accumulator);
  }
  auto sgd = OptimizerState::sgd(0.5);
  Vector x = Vector::Ones(2);
  sgd_step(sgd, x, Vector::Constant(2, 2.0));
  CHECK(x == Vector::Zero(2));
  Vector bad = Vector::Ones(2);
  bad[1] = std::nan("");
  CHECK_THROWS_AS(optimizer_step(sgd, x, bad), NumericalError);
}

TEST_CASE("finite differences") {
  auto sq = [](const Vector& x) { return x.squaredNorm(); };
  Vector x(1);
  x << 3.0;
  CHECK(finite_diff_grad(sq, x, 1e-4)[0] == doctest::Approx(6.0).epsilon(1e-9));
  auto c = [](const Vector&) { return 4.0; };
  CHECK(finite_diff_grad(c, Vector::Ones(3), 1e-3).isZero(0.0));
  auto bad = [](const Vector& v) { return v[0] > 0 ? std::log(-1.0) : 0.0; };
  CHECK_THROWS_AS(finite_diff_grad(bad, Vector::Zero(1), 1e-3), NumericalError);

  RngStream rng(6, 6);
  for (int trial = 0; trial < 20; ++trial) {
    Vector logits(5);
    for (auto& v : logits) v = rng.normal() * 2.0;
    const int target = static_cast<int>(rng.below(5));
    auto f = [&](const Vector& l) { return softmax_cross_entropy(l, target); };
    Vector closed = softmax(logits);
    closed[target] -= 1.0;
    CHECK((finite_diff_grad(f, logits, 1e-5) - closed).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((softmax_cross_entropy_grad(logits, target) - closed).cwiseAbs().maxCoeff() < 1e-14);
  }
}
