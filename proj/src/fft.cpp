#include "bispec/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

namespace bispec::fft {
namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<cdouble> run(std::span<const cdouble> in, int sign) {
  const int n = static_cast<int>(in.size());
  std::vector<cdouble> out(in.size());
  if (n == 0) return out;
  auto* buf_in = fftw_alloc_complex(in.size());
  auto* buf_out = fftw_alloc_complex(in.size());
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, buf_in, buf_out, sign, FFTW_ESTIMATE);
  }
  std::memcpy(buf_in, in.data(), in.size() * sizeof(cdouble));
  fftw_execute(plan);
  std::memcpy(static_cast<void*>(out.data()), buf_out, in.size() * sizeof(cdouble));
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(buf_in);
  fftw_free(buf_out);
  return out;
}

}  // namespace

std::vector<cdouble> forward(std::span<const cdouble> x) { return run(x, FFTW_FORWARD); }

std::vector<cdouble> inverse(std::span<const cdouble> X) {
  auto out = run(X, FFTW_BACKWARD);
  const double scale = out.empty() ? 1.0 : 1.0 / static_cast<double>(out.size());
  for (auto& v : out) v *= scale;
  return out;
}

std::vector<cdouble> forward_real(std::span<const double> x) {
  std::vector<cdouble> c(x.begin(), x.end());
  return forward(c);
}

std::size_t good_size(std::size_t n) {
  if (n <= 1) return 1;
  std::size_t best = 1;
  while (best < n) best <<= 1;
  for (std::size_t p5 = 1; p5 < best; p5 *= 5) {
    for (std::size_t p35 = p5; p35 < best; p35 *= 3) {
      std::size_t v = p35;
      while (v < n) v <<= 1;
      if (v < best) best = v;
    }
  }
  return best;
}

std::vector<cdouble> analytic(std::span<const double> x) {
  const std::size_t n = x.size();
  auto X = forward_real(x);
  if (n == 0) return X;
  // keep DC and Nyquist once, double positive frequencies, zero negative ones
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k < n; ++k) {
    if (k < (n + 1) / 2) {
      X[k] *= 2.0;
    } else if (!(n % 2 == 0 && k == half)) {
      X[k] = 0.0;
    }
  }
  return inverse(X);
}

}  // namespace bispec::fft
