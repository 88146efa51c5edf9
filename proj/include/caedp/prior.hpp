#pragma once

#include <cstdint>
#include <vector>

#include "caedp/dataset.hpp"
#include "caedp/model.hpp"
#include "caedp/random.hpp"
#include "caedp/state.hpp"

namespace caedp {

// Draws from the base measures and the truncated generative process.

ThetaAtom draw_theta_atom(const BaseMeasureHyper& base, bool binary_d, Rng& rng);
PhiAtom draw_phi_atom(const NigPrior& prior, Rng& rng);
EtaAtom draw_eta_atom(const BaseMeasureHyper& base, Rng& rng);

/// Fractions s*, v^theta, v^phi ~ Beta(1, alpha) with the truncation closure.
StickWeights draw_stick_weights(const TruncationLevels& levels, const ConcentrationParams& conc,
                                Rng& rng);

/// Concentrations drawn from their gamma hyperpriors (hyperpriors copied).
ConcentrationParams draw_concentrations(const ConcentrationParams& hyper, Rng& rng);

/// One draw of the truncated prior: weights, atoms, and one simulated
/// cluster (its v-class, size and per-individual classes).
struct PriorDraw {
  StickWeights weights;
  std::vector<ThetaAtom> theta;
  std::vector<PhiAtom> phi;
  std::vector<EtaAtom> eta;
  int cluster_class = 0;
  int cluster_size = 0;
  std::vector<int> zeta_y;
  std::vector<int> zeta_x;
};

/// Deterministic in `seed`. Concentrations are taken as given.
PriorDraw sample_prior_draw(const TruncationLevels& levels, const ConcentrationParams& conc,
                            const BaseMeasureHyper& base, const DesignSpec& design,
                            std::uint64_t seed);

/// A state drawn from the full prior together with a dataset simulated from
/// it. Cluster sizes follow the Poisson model and may be zero.
struct PriorPredictiveDraw {
  CaEdpState state;
  ClusterDataset data;
};

PriorPredictiveDraw simulate_prior_predictive(const TruncationLevels& levels,
                                              const ConcentrationParams& hyper,
                                              const BaseMeasureHyper& base,
                                              const DesignSpec& design, int num_clusters,
                                              Rng& rng);

/// Replaces D, M and Y of every individual by draws from the model given the
/// state's atoms and y-class indicators (X, V, N, A kept). With
/// redraw_d = false the current D values are kept.
void simulate_responses(const CaEdpState& state, const DesignSpec& design, ClusterDataset& data,
                        Rng& rng, bool redraw_d = true);

}  // namespace caedp
