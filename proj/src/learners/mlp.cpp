#include "metacausal/learners/mlp.hpp"

#include <cmath>

#include "metacausal/json_eigen.hpp"

namespace metacausal::learners {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void pack(const Matrix& m, Vector& out, Eigen::Index& offset) {
  Eigen::Map<RowMajor>(out.data() + offset, m.rows(), m.cols()) = m;
  offset += m.size();
}

void unpack(const Vector& in, Matrix& m, Eigen::Index& offset) {
  m = Eigen::Map<const RowMajor>(in.data() + offset, m.rows(), m.cols());
  offset += m.size();
}

}  // namespace

CategoricalSamples CategoricalSamples::slice(std::size_t begin, std::size_t count) const {
  CategoricalSamples out;
  out.n_vars = n_vars;
  const auto stride = static_cast<std::size_t>(n_vars);
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                    values.begin() + static_cast<std::ptrdiff_t>((begin + count) * stride));
  return out;
}

MaskedMlpConditional::MaskedMlpConditional(int node, int n_vars, int n_values,
                                           numkit::RngStream& rng)
    : node_(node), n_vars_(n_vars), n_values_(n_values) {
  if (node < 0 || node >= n_vars || n_values < 2)
    throw std::invalid_argument("MaskedMlpConditional: bad dimensions");
  const int hidden = 4 * n_vars;
  const int inputs = n_vars * n_values;
  w1_.resize(hidden, inputs);
  b1_ = Vector::Zero(hidden);
  w2_.resize(n_values, hidden);
  b2_ = Vector::Zero(n_values);
  // Glorot-uniform initialisation
  const double r1 = std::sqrt(6.0 / (inputs + hidden));
  const double r2 = std::sqrt(6.0 / (hidden + n_values));
  for (Eigen::Index i = 0; i < w1_.size(); ++i) w1_.data()[i] = rng.uniform(-r1, r1);
  for (Eigen::Index i = 0; i < w2_.size(); ++i) w2_.data()[i] = rng.uniform(-r2, r2);
  // small positive bias keeps hidden units alive when every input is masked
  b1_.setConstant(0.1);
  std::vector<int> all(static_cast<std::size_t>(n_vars), 1);
  set_mask(std::move(all));
}

void MaskedMlpConditional::set_mask(std::vector<int> mask) {
  if (static_cast<int>(mask.size()) != n_vars_)
    throw std::invalid_argument("mask size mismatch");
  for (auto& m : mask) m = m != 0 ? 1 : 0;
  mask[static_cast<std::size_t>(node_)] = 0;
  mask_ = std::move(mask);
}

Vector MaskedMlpConditional::hidden_pre(const CategoricalSamples& x,
                                        std::size_t row) const {
  Vector pre = b1_;
  for (int j = 0; j < n_vars_; ++j) {
    if (mask_[static_cast<std::size_t>(j)] == 0) continue;
    const int v = x.at(row, j);
    if (v < 0 || v >= n_values_) throw std::out_of_range("discrete value out of range");
    pre += w1_.col(j * n_values_ + v);
  }
  return pre;
}

Vector MaskedMlpConditional::logits(const CategoricalSamples& x, std::size_t row) const {
  const Vector h = hidden_pre(x, row).cwiseMax(0.0);
  return w2_ * h + b2_;
}

double MaskedMlpConditional::log_prob(const CategoricalSamples& x, std::size_t row) const {
  const int target = x.at(row, node_);
  if (target < 0 || target >= n_values_) throw std::out_of_range("discrete value out of range");
  return -numkit::softmax_cross_entropy(logits(x, row), target);
}

double MaskedMlpConditional::sum_log_prob(const CategoricalSamples& batch) const {
  double s = 0.0;
  for (std::size_t r = 0; r < batch.size(); ++r) s += log_prob(batch, r);
  return s;
}

Vector MaskedMlpConditional::grad_mean_log_prob(const CategoricalSamples& batch) const {
  if (batch.size() == 0) throw std::invalid_argument("empty batch");
  Matrix gw1 = Matrix::Zero(w1_.rows(), w1_.cols());
  Vector gb1 = Vector::Zero(b1_.size());
  Matrix gw2 = Matrix::Zero(w2_.rows(), w2_.cols());
  Vector gb2 = Vector::Zero(b2_.size());
  for (std::size_t r = 0; r < batch.size(); ++r) {
    const Vector pre = hidden_pre(batch, r);
    const Vector h = pre.cwiseMax(0.0);
    const Vector out = w2_ * h + b2_;
    const int target = batch.at(r, node_);
    // d log p / d logits = onehot - softmax
    Vector dout = -numkit::softmax_cross_entropy_grad(out, target);
    gb2 += dout;
    gw2 += dout * h.transpose();
    Vector dh = w2_.transpose() * dout;
    for (Eigen::Index k = 0; k < dh.size(); ++k)
      if (pre[k] <= 0.0) dh[k] = 0.0;
    gb1 += dh;
    for (int j = 0; j < n_vars_; ++j) {
      if (mask_[static_cast<std::size_t>(j)] == 0) continue;
      gw1.col(j * n_values_ + batch.at(r, j)) += dh;
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  Vector g(w1_.size() + b1_.size() + w2_.size() + b2_.size());
  Eigen::Index off = 0;
  pack(gw1 * inv, g, off);
  g.segment(off, gb1.size()) = gb1 * inv;
  off += gb1.size();
  pack(gw2 * inv, g, off);
  g.segment(off, gb2.size()) = gb2 * inv;
  return g;
}

Vector MaskedMlpConditional::params() const {
  Vector p(w1_.size() + b1_.size() + w2_.size() + b2_.size());
  Eigen::Index off = 0;
  pack(w1_, p, off);
  p.segment(off, b1_.size()) = b1_;
  off += b1_.size();
  pack(w2_, p, off);
  p.segment(off, b2_.size()) = b2_;
  return p;
}

void MaskedMlpConditional::set_params(const Vector& p) {
  if (p.size() != w1_.size() + b1_.size() + w2_.size() + b2_.size())
    throw std::invalid_argument("MaskedMlpConditional: parameter size mismatch");
  Eigen::Index off = 0;
  unpack(p, w1_, off);
  b1_ = p.segment(off, b1_.size());
  off += b1_.size();
  unpack(p, w2_, off);
  b2_ = p.segment(off, b2_.size());
}

void to_json(nlohmann::json& j, const MaskedMlpConditional& m) {
  j = {{"type", "masked_mlp_conditional"},
       {"node", m.node_},
       {"n_vars", m.n_vars_},
       {"n_values", m.n_values_},
       {"mask", m.mask_},
       {"W1", jsonio::matrix_to_json(m.w1_)},
       {"b1", jsonio::vector_to_json(m.b1_)},
       {"W2", jsonio::matrix_to_json(m.w2_)},
       {"b2", jsonio::vector_to_json(m.b2_)}};
}

void from_json(const nlohmann::json& j, MaskedMlpConditional& m) {
  m.node_ = j.at("node").get<int>();
  m.n_vars_ = j.at("n_vars").get<int>();
  m.n_values_ = j.at("n_values").get<int>();
  m.w1_ = jsonio::matrix_from_json(j.at("W1"));
  m.b1_ = jsonio::vector_from_json(j.at("b1"));
  m.w2_ = jsonio::matrix_from_json(j.at("W2"));
  m.b2_ = jsonio::vector_from_json(j.at("b2"));
  m.set_mask(j.at("mask").get<std::vector<int>>());
}

}  // namespace metacausal::learners
