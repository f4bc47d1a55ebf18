#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "filterlab/model.hpp"

namespace filterlab {

// Closed-form moments of the oracle score on corrupted (0) and clean (1)
// pairs: mu0 = 0, var0 = r(1+1/gamma)(1+1/gamma~), mu1 = r, var1 = r + var0.
struct ScoreMoments {
  double mu0 = 0.0;
  double var0 = 0.0;
  double mu1 = 0.0;
  double var1 = 0.0;
};

ScoreMoments theory_moments(const ModelParams& model);

struct Histogram {
  std::vector<double> bin_edges;  // size n_bins + 1, sorted
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;
};

struct ScoreHistogram {
  Histogram all;
  Histogram clean;    // diagnostics: uses the hidden flags
  Histogram corrupt;
};

// Equal-width bins spanning the observed score range; clean/corrupt
// sub-histograms share the same edges.
ScoreHistogram empirical_score_hist(const Dataset& dataset, const Eigen::MatrixXd& a,
                                    int n_bins);

// CSV rows: bin_left, bin_right, count, subgroup (all / clean / corrupt).
void write_histogram_csv(const ScoreHistogram& hist, std::ostream& os);

// Upper-tail statistics of the oracle score distributions at a threshold on
// the oracle scale, estimated from three independent Monte-Carlo blocks
// (clean-conditioned, corrupt-conditioned, mixture).
struct TailStats {
  double theta = 0.0;
  double p0 = 0.0, p1 = 0.0, p_mix = 0.0;
  double se_p0 = 0.0, se_p1 = 0.0, se_p_mix = 0.0;
  double e0 = 0.0, e1 = 0.0;       // conditional means E[Z | Z > theta]
  double se_e0 = 0.0, se_e1 = 0.0;
  std::int64_t hits0 = 0, hits1 = 0;
  bool e0_low_sample = false;      // fewer than 30 conditioning hits
  bool e1_low_sample = false;
};

TailStats estimate_tail_stats(const ModelParams& model, double theta_oracle,
                              std::int64_t mc_n, std::uint64_t seed,
                              int threads = 0);

// Monte-Carlo estimate of E[x x~^T | oracle score > theta] together with an
// alignment report against the rank-r structure spanned by U and U~.
struct ConditionalCrossCov {
  Eigen::MatrixXd estimate;        // d x d_tilde
  std::int64_t draws = 0;
  std::int64_t hits = 0;
  double aligned_mass_fraction = 0.0;  // ||U^T est U~||_F^2 / ||est||_F^2
  double off_mass = 0.0;               // squared Frobenius mass outside the r x r block
  double off_mass_noise_floor = 0.0;   // sum of squared per-entry standard errors
  double off_mass_debiased = 0.0;      // off_mass - noise floor
  double off_mass_se = 0.0;            // standard error of the debiased mass
  double scalar_estimate = 0.0;        // mean diagonal of U^T est U~
  double scalar_se = 0.0;
  double diag_anisotropy = 0.0;        // max |off-diagonal| / mean diagonal of the r x r block
  bool low_hits = false;               // fewer than 1000 conditioning hits
};

ConditionalCrossCov conditional_cross_cov(const ModelParams& model,
                                          double theta_oracle, std::int64_t mc_n,
                                          std::uint64_t seed, int threads = 0);

// Lower bounds on the conditional-mean coefficients of the rank-r structure
// at a threshold on the oracle scale; used by the verification suites.
double f1_lower_bound(const ModelParams& model, double theta_oracle);
double f0_lower_bound(const ModelParams& model, double theta_oracle);

}  // namespace filterlab
