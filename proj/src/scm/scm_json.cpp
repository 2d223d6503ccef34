#include "metacausal/json_eigen.hpp"
#include "metacausal/scm.hpp"

namespace metacausal::scm {

using jsonio::matrix_from_json;
using jsonio::matrix_to_json;
using jsonio::vector_from_json;
using jsonio::vector_to_json;

void to_json(nlohmann::json& j, const CategoricalScm& s) {
  j = {{"type", "categorical"},
       {"n_values", s.n_values},
       {"pi_A", vector_to_json(s.pi_A)},
       {"pi_B_given_A", matrix_to_json(s.pi_B_given_A)}};
}

void from_json(const nlohmann::json& j, CategoricalScm& s) {
  s.n_values = j.at("n_values").get<int>();
  s.pi_A = vector_from_json(j.at("pi_A"));
  s.pi_B_given_A = matrix_from_json(j.at("pi_B_given_A"));
  s.validate();
}

void to_json(nlohmann::json& j, const SplineScm& s) {
  nlohmann::json knots = nlohmann::json::array();
  for (std::size_t k = 0; k < s.f.xs.size(); ++k)
    knots.push_back({s.f.xs[k], s.f.ys[k]});
  j = {{"type", "spline"},
       {"knots", knots},
       {"cause_mean", s.cause_mean},
       {"cause_variance", s.cause_variance},
       {"noise_variance", s.noise_variance},
       {"range_a", s.range_a},
       {"range_b", s.range_b}};
}

void from_json(const nlohmann::json& j, SplineScm& s) {
  std::vector<double> xs, ys;
  for (const auto& knot : j.at("knots")) {
    xs.push_back(knot.at(0).get<double>());
    ys.push_back(knot.at(1).get<double>());
  }
  s.f = QuadraticSpline::through(std::move(xs), std::move(ys));
  s.cause_mean = j.at("cause_mean").get<double>();
  s.cause_variance = j.value("cause_variance", 4.0);
  s.noise_variance = j.value("noise_variance", 1.0);
  s.range_a = j.value("range_a", 8.0);
  s.range_b = j.value("range_b", 8.0);
  s.validate();
}

void to_json(nlohmann::json& j, const LinearGaussianScm& s) {
  j = {{"type", "linear_gaussian"},
       {"dim", s.dim},
       {"mu_A", vector_to_json(s.mu_A)},
       {"Sigma_A", matrix_to_json(s.Sigma_A)},
       {"beta_0", vector_to_json(s.beta_0)},
       {"beta_1", matrix_to_json(s.beta_1)},
       {"Sigma_B", matrix_to_json(s.Sigma_B)}};
}

void from_json(const nlohmann::json& j, LinearGaussianScm& s) {
  s.dim = j.at("dim").get<int>();
  s.mu_A = vector_from_json(j.at("mu_A"));
  s.Sigma_A = matrix_from_json(j.at("Sigma_A"));
  s.beta_0 = vector_from_json(j.at("beta_0"));
  s.beta_1 = matrix_from_json(j.at("beta_1"));
  s.Sigma_B = matrix_from_json(j.at("Sigma_B"));
  s.validate();
}

void to_json(nlohmann::json& j, const RotationDecoder& s) {
  j = {{"type", "rotation_decoder"}, {"theta_D", s.theta_D}};
}

void from_json(const nlohmann::json& j, RotationDecoder& s) {
  s.theta_D = j.at("theta_D").get<double>();
}

}  // namespace metacausal::scm
