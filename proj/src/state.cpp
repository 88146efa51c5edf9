#include "caedp/state.hpp"

#include <stdexcept>
#include <string>

namespace caedp {
namespace {

void check_regression(const RegressionAtom& atom, int dim, const char* what) {
  if (atom.beta.size() != dim) {
    throw std::logic_error(std::string(what) + " coefficients have the wrong length");
  }
  if (!(atom.sigma > 0.0) || !atom.beta.allFinite()) {
    throw std::logic_error(std::string(what) + " atom is not finite/positive");
  }
}

}  // namespace

void CaEdpState::validate(const DesignSpec& design, int num_clusters, int num_individuals) const {
  const auto lv = levels();
  weights.validate();
  conc.validate();
  if (static_cast<int>(theta.size()) != lv.L || static_cast<int>(phi.size()) != lv.M ||
      static_cast<int>(eta.size()) != lv.K) {
    throw std::logic_error("atom counts do not match the truncation levels");
  }
  for (const auto& t : theta) {
    check_regression(t.y, design.dim_y(), "outcome");
    check_regression(t.m, design.dim_m(), "mediator");
    check_regression(t.d, design.dim_d(), "confounder");
  }
  for (const auto& f : phi) {
    if (f.mu.size() != design.p || f.var.size() != design.p || (f.var.array() <= 0.0).any()) {
      throw std::logic_error("covariate atom has the wrong shape or a nonpositive variance");
    }
  }
  for (const auto& e : eta) {
    if (!(e.lambda_n > 0.0)) throw std::logic_error("cluster-size rate must be positive");
    if (e.v_mean.size() != design.q || e.v_var.size() != design.q ||
        (e.v_var.array() <= 0.0).any()) {
      throw std::logic_error("cluster-covariate atom has the wrong shape");
    }
  }
  const auto& ind = indicators;
  if (static_cast<int>(ind.zeta_n.size()) != num_clusters ||
      static_cast<int>(ind.zeta_y.size()) != num_individuals ||
      static_cast<int>(ind.zeta_x.size()) != num_individuals) {
    throw std::logic_error("indicator counts do not match the dataset");
  }
  for (int k : ind.zeta_n) {
    if (k < 0 || k >= lv.K) throw std::logic_error("cluster indicator out of range");
  }
  for (int l : ind.zeta_y) {
    if (l < 0 || l >= lv.L) throw std::logic_error("y-class indicator out of range");
  }
  for (int m : ind.zeta_x) {
    if (m < 0 || m >= lv.M) throw std::logic_error("x-class indicator out of range");
  }
  if (design.binary_d && latent_d.size() != num_individuals) {
    throw std::logic_error("binary confounder requires one latent value per individual");
  }
}

}  // namespace caedp
