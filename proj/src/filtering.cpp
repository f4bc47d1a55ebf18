#include "filterlab/filtering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "filterlab/parallel.hpp"

namespace filterlab {

Eigen::VectorXd score_all(const PairedData& data, const Eigen::MatrixXd& a,
                          int threads) {
  const std::int64_t n = data.n();
  Eigen::VectorXd s(n);
  constexpr std::int64_t kBlock = 8192;
  const std::int64_t n_blocks = (n + kBlock - 1) / kBlock;
#pragma omp parallel for schedule(dynamic) num_threads(effective_threads(threads))
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    const std::int64_t lo = b * kBlock;
    const std::int64_t hi = std::min(n, lo + kBlock);
    const auto xb = data.x.middleRows(lo, hi - lo);
    const auto xtb = data.x_tilde.middleRows(lo, hi - lo);
    s.segment(lo, hi - lo) = ((xb * a).cwiseProduct(xtb)).rowwise().sum();
  }
  return s;
}

FilterOutcome filter_dataset(const PairedData& data, const Eigen::MatrixXd& a,
                             double theta, int threads) {
  const Eigen::VectorXd s = score_all(data, a, threads);
  FilterOutcome out;
  out.threshold_used = theta;
  out.selected_indices.reserve(static_cast<std::size_t>(s.size()));
  for (std::int64_t i = 0; i < s.size(); ++i) {
    if (s[i] > theta) out.selected_indices.push_back(i);
  }
  out.n_sel = static_cast<std::int64_t>(out.selected_indices.size());
  out.retention_fraction =
      s.size() > 0 ? static_cast<double>(out.n_sel) / static_cast<double>(s.size()) : 0.0;
  return out;
}

double retention_to_threshold(const std::vector<double>& scores, double fraction) {
  if (scores.empty())
    throw std::invalid_argument("retention_to_threshold: empty score list");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("retention_to_threshold: fraction must lie in (0, 1]");
  const std::size_t n = scores.size();
  const std::size_t k = static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(n) - 1e-12));
  if (k >= n) return -std::numeric_limits<double>::infinity();
  std::vector<double> sorted(scores);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k),
                   sorted.end(), std::greater<double>());
  return sorted[k];
}

std::vector<std::int64_t> select_top_fraction(const Eigen::VectorXd& scores,
                                              double fraction) {
  if (scores.size() == 0)
    throw std::invalid_argument("select_top_fraction: empty score list");
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw std::invalid_argument("select_top_fraction: fraction must lie in (0, 1]");
  const std::int64_t n = scores.size();
  const std::int64_t k = std::min<std::int64_t>(
      n, static_cast<std::int64_t>(
             std::ceil(fraction * static_cast<double>(n) - 1e-12)));
  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::nth_element(order.begin(), order.begin() + k, order.end(),
                   [&](std::int64_t i, std::int64_t j) {
                     if (scores[i] != scores[j]) return scores[i] > scores[j];
                     return i < j;
                   });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

Encoders run_no_filter(const PairedData& data, int r, double rho, CovMode mode,
                       int threads) {
  return solve_closed_form(data, r, rho, mode, threads);
}

namespace {

Encoders solve_on_rows(const PairedData& data, const std::vector<std::int64_t>& rows,
                       int r, double rho, CovMode mode, int threads) {
  if (static_cast<std::int64_t>(rows.size()) < r + 1)
    throw FilteringStarvation(static_cast<std::int64_t>(rows.size()), r + 1);
  return solve_closed_form(subset(data, rows), r, rho, mode, threads);
}

struct SplitView {
  PairedData teacher_half;
  PairedData pool;  // samples to be filtered
};

SplitView split_halves(const PairedData& data) {
  const std::int64_t n = data.n();
  if (n < 4) throw std::invalid_argument("teacher filtering: need n >= 4");
  const std::int64_t n_teacher = (n + 1) / 2;
  SplitView v;
  v.teacher_half.x = data.x.topRows(n_teacher);
  v.teacher_half.x_tilde = data.x_tilde.topRows(n_teacher);
  v.pool.x = data.x.bottomRows(n - n_teacher);
  v.pool.x_tilde = data.x_tilde.bottomRows(n - n_teacher);
  return v;
}

}  // namespace

Encoders run_oracle_filter(const PairedData& data, const ModelParams& model,
                           double theta, int r, double rho, CovMode mode,
                           int threads) {
  const Eigen::MatrixXd a = model.u * model.u_tilde.transpose();
  const FilterOutcome outcome = filter_dataset(data, a, theta, threads);
  return solve_on_rows(data, outcome.selected_indices, r, rho, mode, threads);
}

TeacherRun run_teacher_filter(const PairedData& data, double theta, int r,
                              double rho_teacher, double rho_student,
                              CovMode mode, int threads) {
  const SplitView v = split_halves(data);
  TeacherRun run;
  run.teacher = solve_closed_form(v.teacher_half, r, rho_teacher, mode, threads);
  run.filter = filter_dataset(v.pool, run.teacher.product(), theta, threads);
  run.student =
      solve_on_rows(v.pool, run.filter.selected_indices, r, rho_student, mode, threads);
  return run;
}

TeacherRun run_teacher_filter_retention(const PairedData& data, double fraction,
                                        int r, double rho_teacher,
                                        double rho_student, CovMode mode,
                                        int threads) {
  const SplitView v = split_halves(data);
  TeacherRun run;
  run.teacher = solve_closed_form(v.teacher_half, r, rho_teacher, mode, threads);
  const Eigen::VectorXd scores = score_all(v.pool, run.teacher.product(), threads);
  run.filter.selected_indices = select_top_fraction(scores, fraction);
  run.filter.n_sel = static_cast<std::int64_t>(run.filter.selected_indices.size());
  run.filter.retention_fraction =
      static_cast<double>(run.filter.n_sel) / static_cast<double>(scores.size());
  run.filter.threshold_used = retention_to_threshold(
      std::vector<double>(scores.data(), scores.data() + scores.size()), fraction);
  run.student =
      solve_on_rows(v.pool, run.filter.selected_indices, r, rho_student, mode, threads);
  return run;
}

}  // namespace filterlab
