#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "filterlab/contrastive.hpp"
#include "filterlab/model.hpp"

namespace filterlab {

// Fewer than r+1 samples survived the threshold; the rank-r solve is
// ill-posed on the survivors.
class FilteringStarvation : public std::runtime_error {
 public:
  FilteringStarvation(std::int64_t n_sel, std::int64_t needed)
      : std::runtime_error("filtering starvation: " + std::to_string(n_sel) +
                           " selected, need >= " + std::to_string(needed)),
        n_sel_(n_sel) {}
  std::int64_t n_sel() const { return n_sel_; }

 private:
  std::int64_t n_sel_;
};

// Bilinear quality score x^T A x_tilde.
inline double score(const Eigen::VectorXd& x, const Eigen::VectorXd& x_tilde,
                    const Eigen::MatrixXd& a) {
  return x.dot(a * x_tilde);
}

// Scores of every pair in the data (disjoint per-row writes; deterministic).
Eigen::VectorXd score_all(const PairedData& data, const Eigen::MatrixXd& a,
                          int threads = 0);

struct FilterOutcome {
  std::vector<std::int64_t> selected_indices;  // indices into the scored data
  std::int64_t n_sel = 0;
  double threshold_used = 0.0;
  double retention_fraction = 0.0;
};

// Strict-threshold selection: i is retained iff score_i > theta.
FilterOutcome filter_dataset(const PairedData& data, const Eigen::MatrixXd& a,
                             double theta, int threads = 0);

// Threshold such that strictly-greater selection retains ceil(fraction * n)
// samples when scores are distinct (-inf for fraction = 1). Ties are handled
// by the top-k selection below, which the pipelines use.
double retention_to_threshold(const std::vector<double>& scores, double fraction);

// Indices of the ceil(fraction * n) largest scores, ties broken by lower
// index; returned in ascending index order.
std::vector<std::int64_t> select_top_fraction(const Eigen::VectorXd& scores,
                                              double fraction);

// Train on everything.
Encoders run_no_filter(const PairedData& data, int r, double rho,
                       CovMode mode = CovMode::centered, int threads = 0);

// Score with the ground-truth A = U U~^T at threshold theta, then train on
// the survivors.
Encoders run_oracle_filter(const PairedData& data, const ModelParams& model,
                           double theta, int r, double rho,
                           CovMode mode = CovMode::centered, int threads = 0);

struct TeacherRun {
  Encoders student;
  Encoders teacher;
  FilterOutcome filter;  // indices are into the second (filtered) half
};

// Train-filter-train: teacher on the first ceil(n/2) samples, score the rest
// with g_T^T g~_T, keep scores > theta, train the student on the survivors.
TeacherRun run_teacher_filter(const PairedData& data, double theta, int r,
                              double rho_teacher, double rho_student,
                              CovMode mode = CovMode::centered, int threads = 0);

// Same pipeline, but the threshold is placed so that `fraction` of the second
// half is retained (top-k by score, stable index order).
TeacherRun run_teacher_filter_retention(const PairedData& data, double fraction,
                                        int r, double rho_teacher,
                                        double rho_student,
                                        CovMode mode = CovMode::centered,
                                        int threads = 0);

}  // namespace filterlab
