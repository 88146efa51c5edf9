#pragma once

#include <vector>

#include <Eigen/Core>

#include "caedp/dataset.hpp"
#include "caedp/model.hpp"

namespace caedp {

/// Full truncated model state carried by the blocked Gibbs sampler.
struct CaEdpState {
  StickWeights weights;
  std::vector<ThetaAtom> theta;  // length L
  std::vector<PhiAtom> phi;      // length M
  std::vector<EtaAtom> eta;      // length K
  ClassIndicators indicators;
  ConcentrationParams conc;
  /// Latent probit variables for a binary confounder (empty otherwise).
  Eigen::VectorXd latent_d;

  TruncationLevels levels() const { return {weights.K(), weights.L(), weights.M()}; }

  /// Throws std::logic_error describing the first violated invariant.
  void validate(const DesignSpec& design, int num_clusters, int num_individuals) const;
};

}  // namespace caedp
