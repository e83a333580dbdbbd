#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bispec/demod.hpp"
#include "bispec/polyspec.hpp"

namespace bispec {

enum class PacScaling { fixed, proportional };

struct PacOptions {
  Normalization normalization = Normalization::magnitude_sum;
  bool bias_correct = true;   // magnitude_sum only
  bool use_power = true;      // false: analytic amplitude instead of squared envelope
  std::optional<std::size_t> hop;  // default: default_hop over the highest band edge
  double oversample = 4.0;
};

/// Phase-power coherence on a theta (rows) x gamma (columns) grid.
struct PacGrid {
  BispecGrid sums;          // B holds phi(theta, gamma) before normalization
  Bicoherence coherence;    // normalized (and possibly bias-corrected) phi
  std::vector<BandSpec> theta_bands;
  std::vector<BandSpec> gamma_bands;  // per column; proportional grids use the row's bandwidth
  PacScaling scaling = PacScaling::fixed;
  double ratio = 0.0;       // gamma bandwidth / theta for proportional scaling

  const Grid2<cdouble>& phi() const { return sums.B; }
};

/// phi(theta, gamma) = sum_m G[theta, m] conj(Q[gamma, theta, m]) where G is
/// the theta-band demodulate and Q the theta-demodulated gamma-band envelope.
PacGrid phase_power_coherence(const Signal& signal, std::span<const BandSpec> theta_bands,
                              std::span<const BandSpec> gamma_bands, const PacOptions& options = {});

/// NBB estimate with legs theta, gamma - theta/2 and gamma + theta/2, so that
/// cell (i, j) lines up with PacGrid cell (i, j). Leg 1 uses the theta window's
/// self-correlation (bandwidth / sqrt 2), matching the |g|^2 kernel of PhPC.
/// Each row is scaled by the overlap of two gamma windows theta apart, so the
/// raw sums carry the same theta attenuation as phi.
BispecGrid pac_as_nbb(const Signal& signal, std::span<const BandSpec> theta_bands,
                      std::span<const BandSpec> gamma_bands, const PacOptions& options = {});

/// PhPC with gamma bandwidth ratio * theta for each theta row. Cells whose
/// gamma band would pass Nyquist, and rows where ratio * theta does not exceed
/// the theta bandwidth, are masked.
PacGrid variable_bandwidth_pac(const Signal& signal, std::span<const BandSpec> theta_bands,
                               std::span<const double> gamma_centers, double ratio,
                               const PacOptions& options = {});

/// Uncentred complex correlation sum(a conj b) / sqrt(sum|a|^2 sum|b|^2) over
/// cells valid in both.
cdouble complex_correlation(const Bicoherence& a, const Bicoherence& b);

}  // namespace bispec
