#include "filterlab/score_stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "filterlab/linalg.hpp"
#include "filterlab/parallel.hpp"

namespace filterlab {

ScoreMoments theory_moments(const ModelParams& model) {
  ScoreMoments m;
  const double gi = inv_or_zero(model.gamma);
  const double gti = inv_or_zero(model.gamma_tilde);
  m.mu0 = 0.0;
  m.var0 = model.r * (1.0 + gi) * (1.0 + gti);
  m.mu1 = model.r;
  m.var1 = model.r + m.var0;
  return m;
}

double f1_lower_bound(const ModelParams& model, double theta_oracle) {
  return std::max(1.0, theta_oracle / model.r);
}

double f0_lower_bound(const ModelParams& model, double theta_oracle) {
  const double gi = inv_or_zero(model.gamma);
  const double gti = inv_or_zero(model.gamma_tilde);
  double bound = std::max(0.0, theta_oracle / model.r);
  if (theta_oracle >= 0.0) {
    // Conditional means are nondecreasing in the threshold, so the theta = 0
    // bound extends to all nonnegative thresholds.
    const double at_zero =
        2.0 / (std::numbers::pi * model.r) * std::sqrt((1.0 + gi) * (1.0 + gti));
    bound = std::max(bound, at_zero);
  }
  return bound;
}

namespace {

Histogram make_histogram(const std::vector<double>& values, double lo, double hi,
                         int n_bins) {
  Histogram h;
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / n_bins;
  h.bin_edges.resize(static_cast<std::size_t>(n_bins) + 1);
  for (int b = 0; b <= n_bins; ++b) h.bin_edges[static_cast<std::size_t>(b)] = lo + b * width;
  h.counts.assign(static_cast<std::size_t>(n_bins), 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / width);
    b = std::clamp(b, 0, n_bins - 1);
    ++h.counts[static_cast<std::size_t>(b)];
  }
  h.total = static_cast<std::int64_t>(values.size());
  return h;
}

}  // namespace

ScoreHistogram empirical_score_hist(const Dataset& dataset, const Eigen::MatrixXd& a,
                                    int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("empirical_score_hist: n_bins must be >= 1");
  if (dataset.n() < 1) throw std::invalid_argument("empirical_score_hist: empty dataset");
  std::vector<double> all, clean, corrupt;
  all.reserve(static_cast<std::size_t>(dataset.n()));
  for (std::int64_t i = 0; i < dataset.n(); ++i) {
    const double s = dataset.pairs.x.row(i).dot(
        (a * dataset.pairs.x_tilde.row(i).transpose()));
    all.push_back(s);
    if (dataset.clean_flags[static_cast<std::size_t>(i)])
      clean.push_back(s);
    else
      corrupt.push_back(s);
  }
  const auto [lo_it, hi_it] = std::minmax_element(all.begin(), all.end());
  ScoreHistogram out;
  out.all = make_histogram(all, *lo_it, *hi_it, n_bins);
  // Sub-histograms share the mixture's edges.
  const double lo = out.all.bin_edges.front();
  const double hi = out.all.bin_edges.back();
  out.clean = make_histogram(clean, lo, hi, n_bins);
  out.corrupt = make_histogram(corrupt, lo, hi, n_bins);
  return out;
}

void write_histogram_csv(const ScoreHistogram& hist, std::ostream& os) {
  os << "bin_left,bin_right,count,subgroup\n";
  const auto dump = [&os](const Histogram& h, const char* name) {
    char buf[128];
    for (std::size_t b = 0; b + 1 < h.bin_edges.size(); ++b) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld,%s\n", h.bin_edges[b],
                    h.bin_edges[b + 1], static_cast<long long>(h.counts[b]), name);
      os << buf;
    }
  };
  dump(hist.all, "all");
  dump(hist.clean, "clean");
  dump(hist.corrupt, "corrupt");
}

namespace {

constexpr std::int64_t kMcBlock = 4096;

// One latent-domain oracle score; the ambient score x^T U U~^T x~ equals
// (U^T x) . (U~^T x~) = (z + eps) . (z~ + eps~) exactly.
double latent_score(const ModelParams& model, RngStream& s, bool clean) {
  const int r = model.r;
  Eigen::VectorXd z(r);
  s.fill_gaussian(z.data(), static_cast<std::size_t>(r));
  Eigen::VectorXd zt;
  if (clean) {
    zt = z;
  } else {
    zt.resize(r);
    s.fill_gaussian(zt.data(), static_cast<std::size_t>(r));
  }
  if (!std::isinf(model.gamma)) {
    const double sigma = std::sqrt(1.0 / model.gamma);
    for (int i = 0; i < r; ++i) z[i] += sigma * s.next_gaussian();
  }
  if (!std::isinf(model.gamma_tilde)) {
    const double sigma = std::sqrt(1.0 / model.gamma_tilde);
    for (int i = 0; i < r; ++i) zt[i] += sigma * s.next_gaussian();
  }
  return z.dot(zt);
}

struct TailPartial {
  std::int64_t hits = 0;
  double sum = 0.0;
  double sum_sq = 0.0;
};

enum class DrawKind { clean, corrupt, mixture };

TailPartial tail_accumulate(const ModelParams& model, double theta, std::int64_t mc_n,
                            RngStream base, DrawKind kind, int threads) {
  return blocked_reduce<TailPartial>(
      mc_n, kMcBlock, TailPartial{},
      [&](std::int64_t lo, std::int64_t hi, TailPartial& p) {
        for (std::int64_t i = lo; i < hi; ++i) {
          RngStream s = base.child(static_cast<std::uint64_t>(i));
          bool clean = kind == DrawKind::clean;
          if (kind == DrawKind::mixture) clean = s.next_double() < model.eta;
          const double v = latent_score(model, s, clean);
          if (v > theta) {
            ++p.hits;
            p.sum += v;
            p.sum_sq += v * v;
          }
        }
      },
      [](TailPartial& a, const TailPartial& b) {
        a.hits += b.hits;
        a.sum += b.sum;
        a.sum_sq += b.sum_sq;
      },
      threads);
}

void fill_tail(const TailPartial& p, std::int64_t n, double* prob, double* se_p,
               double* mean, double* se_mean, std::int64_t* hits, bool* low) {
  const double q = static_cast<double>(p.hits) / static_cast<double>(n);
  *prob = q;
  *se_p = std::sqrt(std::max(0.0, q * (1.0 - q) / static_cast<double>(n)));
  *hits = p.hits;
  if (p.hits < 30) {
    if (low) *low = true;
    if (mean) *mean = std::numeric_limits<double>::quiet_NaN();
    if (se_mean) *se_mean = std::numeric_limits<double>::quiet_NaN();
    return;
  }
  const double m = p.sum / static_cast<double>(p.hits);
  const double var = std::max(0.0, p.sum_sq / static_cast<double>(p.hits) - m * m);
  if (mean) *mean = m;
  if (se_mean) *se_mean = std::sqrt(var / static_cast<double>(p.hits));
}

}  // namespace

TailStats estimate_tail_stats(const ModelParams& model, double theta_oracle,
                              std::int64_t mc_n, std::uint64_t seed, int threads) {
  if (mc_n < 1000) throw std::invalid_argument("estimate_tail_stats: mc_n must be >= 1000");
  RngStream root(seed);
  TailStats out;
  out.theta = theta_oracle;
  const TailPartial p1 =
      tail_accumulate(model, theta_oracle, mc_n, root.child(1), DrawKind::clean, threads);
  const TailPartial p0 =
      tail_accumulate(model, theta_oracle, mc_n, root.child(0), DrawKind::corrupt, threads);
  const TailPartial pm =
      tail_accumulate(model, theta_oracle, mc_n, root.child(2), DrawKind::mixture, threads);
  fill_tail(p1, mc_n, &out.p1, &out.se_p1, &out.e1, &out.se_e1, &out.hits1,
            &out.e1_low_sample);
  fill_tail(p0, mc_n, &out.p0, &out.se_p0, &out.e0, &out.se_e0, &out.hits0,
            &out.e0_low_sample);
  std::int64_t hits_m = 0;
  fill_tail(pm, mc_n, &out.p_mix, &out.se_p_mix, nullptr, nullptr, &hits_m, nullptr);
  return out;
}

namespace {

struct CrossCovPartial {
  Eigen::MatrixXd sum;
  Eigen::MatrixXd sum_sq;
  std::int64_t hits = 0;
};

}  // namespace

ConditionalCrossCov conditional_cross_cov(const ModelParams& model,
                                          double theta_oracle, std::int64_t mc_n,
                                          std::uint64_t seed, int threads) {
  if (mc_n < 1) throw std::invalid_argument("conditional_cross_cov: mc_n must be >= 1");
  const Eigen::MatrixXd u_full =
      (Eigen::MatrixXd(model.d, model.d) << model.u, complete_basis(model.u)).finished();
  const Eigen::MatrixXd ut_full =
      (Eigen::MatrixXd(model.d_tilde, model.d_tilde) << model.u_tilde,
       complete_basis(model.u_tilde))
          .finished();
  const int d = model.d;
  const int dt = model.d_tilde;
  const int r = model.r;

  RngStream root(seed);
  CrossCovPartial init{Eigen::MatrixXd::Zero(d, dt), Eigen::MatrixXd::Zero(d, dt), 0};
  CrossCovPartial acc = blocked_reduce<CrossCovPartial>(
      mc_n, kMcBlock, init,
      [&](std::int64_t lo, std::int64_t hi, CrossCovPartial& p) {
        for (std::int64_t i = lo; i < hi; ++i) {
          RngStream s = root.child(static_cast<std::uint64_t>(i));
          // Draw one mixture sample in ambient coordinates.
          const bool clean = s.next_double() < model.eta;
          Eigen::VectorXd z(r);
          s.fill_gaussian(z.data(), static_cast<std::size_t>(r));
          Eigen::VectorXd zt = z;
          if (!clean) s.fill_gaussian(zt.data(), static_cast<std::size_t>(r));
          Eigen::VectorXd x = model.u * z;
          if (!std::isinf(model.gamma)) {
            const double sigma = std::sqrt(1.0 / model.gamma);
            for (int k = 0; k < d; ++k) x[k] += sigma * s.next_gaussian();
          }
          Eigen::VectorXd xt = model.u_tilde * zt;
          if (!std::isinf(model.gamma_tilde)) {
            const double sigma = std::sqrt(1.0 / model.gamma_tilde);
            for (int k = 0; k < dt; ++k) xt[k] += sigma * s.next_gaussian();
          }
          const Eigen::VectorXd a = u_full.transpose() * x;
          const Eigen::VectorXd b = ut_full.transpose() * xt;
          if (a.head(r).dot(b.head(r)) > theta_oracle) {
            const Eigen::MatrixXd outer = a * b.transpose();
            p.sum += outer;
            p.sum_sq += outer.cwiseProduct(outer);
            ++p.hits;
          }
        }
      },
      [](CrossCovPartial& a, const CrossCovPartial& b) {
        a.sum += b.sum;
        a.sum_sq += b.sum_sq;
        a.hits += b.hits;
      },
      threads);

  ConditionalCrossCov out;
  out.draws = mc_n;
  out.hits = acc.hits;
  out.low_hits = acc.hits < 1000;
  if (acc.hits == 0) {
    out.estimate = Eigen::MatrixXd::Zero(d, dt);
    return out;
  }
  const double h = static_cast<double>(acc.hits);
  const Eigen::MatrixXd est_rot = acc.sum / h;
  const Eigen::MatrixXd var_entry =
      ((acc.sum_sq / h) - est_rot.cwiseProduct(est_rot)).cwiseMax(0.0) / h;
  const Eigen::MatrixXd se = var_entry.cwiseSqrt();

  out.estimate = u_full * est_rot * ut_full.transpose();
  const double total_mass = est_rot.squaredNorm();
  const double aligned_mass = est_rot.topLeftCorner(r, r).squaredNorm();
  out.aligned_mass_fraction = total_mass > 0.0 ? aligned_mass / total_mass : 0.0;
  double off = 0.0, floor = 0.0, se_sq = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < dt; ++j) {
      if (i < r && j < r) continue;
      const double e = est_rot(i, j);
      const double s2 = var_entry(i, j);
      off += e * e;
      floor += s2;
      se_sq += 4.0 * e * e * s2 + 2.0 * s2 * s2;
    }
  }
  out.off_mass = off;
  out.off_mass_noise_floor = floor;
  out.off_mass_debiased = off - floor;
  out.off_mass_se = std::sqrt(se_sq);

  const auto block = est_rot.topLeftCorner(r, r);
  out.scalar_estimate = block.diagonal().mean();
  out.scalar_se = std::sqrt(se.topLeftCorner(r, r).diagonal().squaredNorm()) / r;
  double max_off_diag = 0.0;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (i != j) max_off_diag = std::max(max_off_diag, std::abs(block(i, j)));
  const double denom = std::max(std::abs(out.scalar_estimate), 1e-300);
  out.diag_anisotropy = max_off_diag / denom;
  return out;
}

}  // namespace filterlab
