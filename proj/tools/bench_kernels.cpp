// Times the serial reference kernels against the OpenMP variants and checks they agree
// bit-for-bit on the way.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "bdtf/kernels.hpp"
#include "bdtf/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace bdtf;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

void bench_matmul(i64 m, i64 k, i64 n, int reps) {
  Rng rng(1);
  Tensor a({m, k}), b({k, n}), c_serial({m, n}), c_par({m, n});
  for (auto& x : a.data) x = rng.uniform(-1.0, 1.0);
  for (auto& x : b.data) x = rng.uniform(-1.0, 1.0);

  const double serial_ms = time_ms(
      [&] {
        kern::serial::matmul(a.data.data(), b.data.data(), c_serial.data.data(), m, k, n, false,
                             false, false);
      },
      reps);
  const double par_ms = time_ms(
      [&] {
        kern::par::matmul(a.data.data(), b.data.data(), c_par.data.data(), m, k, n, false, false,
                          false);
      },
      reps);

  bool identical = true;
  for (i64 i = 0; i < m * n; ++i) identical = identical && c_serial(i) == c_par(i);

  std::printf("matmul %4lld x %4lld x %4lld   serial %9.3f ms   omp %9.3f ms   speedup %5.2fx   %s\n",
              static_cast<long long>(m), static_cast<long long>(k), static_cast<long long>(n),
              serial_ms, par_ms, serial_ms / par_ms, identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP\n");
#endif
  bench_matmul(64, 1200, 64, 20);    // cyclepatch-sized
  bench_matmul(1000, 64, 64, 20);    // conv im2col-sized
  bench_matmul(128, 6400, 64, 10);   // soc-view temporal encoder-sized
  bench_matmul(64, 64, 5000, 10);    // prediction-head-sized
  bench_matmul(512, 512, 512, 3);    // square reference point
  return 0;
}
