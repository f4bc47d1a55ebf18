// Compares the OpenMP kernels against their serial reference implementations:
// wall time, speedup, and the max absolute difference (expected to be exactly
// zero, since the parallel kernels reduce fixed blocks in a fixed order).

#include <chrono>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "filterlab/linalg.hpp"
#include "filterlab/model.hpp"
#include "filterlab/score_stats.hpp"

using namespace filterlab;

namespace {

double time_ms(const std::function<void()>& fn, int repeats = 3) {
  double best = 1e300;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void report(const char* name, double serial_ms, double parallel_ms, double max_diff) {
  std::printf("%-28s serial %9.2f ms   parallel %9.2f ms   speedup %5.2fx   max|diff| %g\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms, max_diff);
}

}  // namespace

int main() {
  const int threads = omp_get_max_threads();
  std::printf("threads: %d\n", threads);

  const ModelParams model = make_model(7, 10, 8, 4, 1e4, 1e4, 0.3);
  const std::int64_t n = 2000000;

  Dataset ds_par, ds_ser;
  const double t_gen_par =
      time_ms([&] { ds_par = sample_dataset(model, n, RngStream(42), threads); });
  const double t_gen_ser =
      time_ms([&] { ds_ser = sample_dataset_serial(model, n, RngStream(42)); }, 1);
  const double gen_diff = (ds_par.pairs.x - ds_ser.pairs.x).cwiseAbs().maxCoeff();
  report("sample_dataset", t_gen_ser, t_gen_par, gen_diff);

  Eigen::MatrixXd cov_par, cov_ser;
  const double t_cov_par =
      time_ms([&] { cov_par = cross_covariance(ds_par.pairs, CovMode::centered, threads); });
  const double t_cov_ser =
      time_ms([&] { cov_ser = cross_covariance_serial(ds_par.pairs, CovMode::centered); });
  report("cross_covariance", t_cov_ser, t_cov_par, (cov_par - cov_ser).cwiseAbs().maxCoeff());

  TailStats tail_par, tail_ser;
  const double t_tail_par =
      time_ms([&] { tail_par = estimate_tail_stats(model, 0.0, 1000000, 5, threads); });
  const double t_tail_ser =
      time_ms([&] { tail_ser = estimate_tail_stats(model, 0.0, 1000000, 5, 1); });
  const double tail_diff =
      std::max({std::abs(tail_par.p0 - tail_ser.p0), std::abs(tail_par.p1 - tail_ser.p1),
                std::abs(tail_par.e1 - tail_ser.e1)});
  report("estimate_tail_stats", t_tail_ser, t_tail_par, tail_diff);

  ConditionalCrossCov cc_par, cc_ser;
  const double t_cc_par =
      time_ms([&] { cc_par = conditional_cross_cov(model, 0.0, 400000, 11, threads); });
  const double t_cc_ser =
      time_ms([&] { cc_ser = conditional_cross_cov(model, 0.0, 400000, 11, 1); });
  report("conditional_cross_cov", t_cc_ser, t_cc_par,
         (cc_par.estimate - cc_ser.estimate).cwiseAbs().maxCoeff());
  return 0;
}
