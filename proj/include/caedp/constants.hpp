#pragma once

// Repository-wide numerical tolerances and defaults. Everything that a test
// or an algorithm compares against lives here so the values stay in one place.

namespace caedp {

/// Stick-breaking weight vectors must sum to one within this tolerance.
inline constexpr double kSimplexTol = 1e-12;

/// Least-squares reference fits are compared at this precision.
inline constexpr double kRegressionOracleTol = 1e-8;

/// Upper clamp applied to stick fractions before taking log(1 - v).
inline constexpr double kStickClamp = 1.0 - 1e-12;

/// Default tolerance on |F(d) - u| when inverting a mixture CDF.
inline constexpr double kCdfInversionTol = 1e-8;

/// Maximum number of bracket doublings before CDF inversion gives up.
inline constexpr int kMaxBracketDoublings = 60;

/// Mixture components whose combined weight stays below this are dropped
/// when a marginal CDF is assembled for g-computation.
inline constexpr double kMixturePruneMass = 1e-10;

/// Per-draw estimand identities (TE = NDE + NIE, NIE = SME + IME).
inline constexpr double kIdentityTol = 1e-10;

/// Default truncation levels (K, L, M).
inline constexpr int kDefaultTruncation = 15;

/// Default number of synthetic clusters per posterior draw.
inline constexpr int kDefaultSyntheticClusters = 100;

/// Same-world correlation Metropolis-Hastings chain length and burn-in.
inline constexpr int kGammaChainSteps = 2000;
inline constexpr int kGammaChainBurn = 500;

/// Fraction of synthetic clusters that must survive copula inversion.
inline constexpr double kMinSyntheticSuccess = 0.9;

/// Default number of Monte-Carlo clusters for the truth oracle.
inline constexpr int kDefaultTruthClusters = 100000;

}  // namespace caedp
