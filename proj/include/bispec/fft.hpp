#pragma once

#include <span>
#include <vector>

#include "bispec/common.hpp"

namespace bispec::fft {

/// Forward DFT, X[k] = sum_n x[n] exp(-2 pi i k n / N). Unnormalized.
std::vector<cdouble> forward(std::span<const cdouble> x);

/// Inverse DFT including the 1/N factor.
std::vector<cdouble> inverse(std::span<const cdouble> X);

/// Forward DFT of a real sequence, full (two-sided) spectrum of length N.
std::vector<cdouble> forward_real(std::span<const double> x);

/// Smallest 2^a 3^b 5^c >= n.
std::size_t good_size(std::size_t n);

/// Analytic signal via the frequency-domain Hilbert construction.
std::vector<cdouble> analytic(std::span<const double> x);

}  // namespace bispec::fft
