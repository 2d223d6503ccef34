#include "metacausal/numkit.hpp"

#include <cmath>
#include <numbers>

namespace metacausal::numkit {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

using Block = std::array<std::uint32_t, 4>;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

Block philox4x32_10(Block ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kPhiloxW0;
    key[1] += kPhiloxW1;
  }
  return ctr;
}

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(seed_, mix64(stream_id_ ^ mix64(child)));
}

void RngStream::refill() {
  const Block ctr = {static_cast<std::uint32_t>(counter_),
                     static_cast<std::uint32_t>(counter_ >> 32),
                     static_cast<std::uint32_t>(stream_id_),
                     static_cast<std::uint32_t>(stream_id_ >> 32)};
  const Block out = philox4x32_10(
      ctr, {static_cast<std::uint32_t>(seed_),
            static_cast<std::uint32_t>(seed_ >> 32)});
  ++counter_;
  // consumed back to front
  buffer_[1] = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
  buffer_[0] = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
  buffered_ = 2;
}

std::uint64_t RngStream::next_u64() {
  if (buffered_ == 0) refill();
  return buffer_[--buffered_];
}

double RngStream::uniform() {
  // 53 random bits, shifted by half an ulp so 0 and 1 are never produced
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

double RngStream::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma shape must be > 0");
  if (shape < 1.0) {
    const double g = gamma(shape + 1.0);
    return g * std::pow(uniform(), 1.0 / shape);
  }
  // Marsaglia & Tsang
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::size_t RngStream::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("below(0)");
  // rejection keeps the draw exactly uniform
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

Vector sample_dirichlet(const Vector& alpha, RngStream& rng) {
  if (alpha.size() == 0) throw std::invalid_argument("empty Dirichlet");
  if ((alpha.array() <= 0.0).any())
    throw std::invalid_argument("Dirichlet concentration must be positive");
  Vector g(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) {
    // floor keeps every entry strictly positive after normalisation
    g[i] = std::max(rng.gamma(alpha[i]), 1e-300);
  }
  return g / g.sum();
}

int sample_categorical(const Vector& probs, RngStream& rng) {
  const double u = rng.uniform() * probs.sum();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  // round-off: fall back to the last category with positive mass
  for (Eigen::Index i = probs.size() - 1; i >= 0; --i)
    if (probs[i] > 0.0) return static_cast<int>(i);
  throw std::invalid_argument("categorical with zero mass");
}

Vector sample_gaussian(const Vector& mean, const Matrix& chol,
                       RngStream& rng) {
  if (chol.rows() != mean.size() || chol.cols() != mean.size())
    throw std::invalid_argument("sample_gaussian: shape mismatch");
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + chol.triangularView<Eigen::Lower>() * z;
}

Matrix sample_inverse_wishart(const Matrix& scale, double dof,
                              RngStream& rng) {
  const Eigen::Index d = scale.rows();
  if (dof <= static_cast<double>(d - 1))
    throw std::invalid_argument("inverse-Wishart needs dof > d - 1");
  // X ~ IW(scale, dof)  <=>  X^{-1} ~ W(scale^{-1}, dof); Bartlett decomposition
  const Matrix precision_chol = cholesky_lower(scale.inverse());
  Matrix bartlett = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    bartlett(i, i) = std::sqrt(2.0 * rng.gamma(0.5 * (dof - static_cast<double>(i))));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  const Matrix factor = precision_chol * bartlett;
  const Matrix wishart = factor * factor.transpose();
  Matrix out = wishart.inverse();
  return 0.5 * (out + out.transpose());
}

}  // namespace metacausal::numkit
