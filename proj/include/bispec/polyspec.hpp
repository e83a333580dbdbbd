#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bispec/common.hpp"
#include "bispec/demod.hpp"

namespace bispec {

/// Which analysis window (Narrow or Broad) each frequency-ordered leg uses.
enum class EstimatorVariant { BBB, NNB, BBN, NBB };

std::string to_string(EstimatorVariant v);
EstimatorVariant estimator_variant_from_string(const std::string& name);

struct EstimatorKind {
  EstimatorVariant variant = EstimatorVariant::BBB;
  double bw_narrow = 0.0;  // unused for BBB
  double bw_broad = 2.0;
  WindowKind window = WindowKind::gaussian;

  static EstimatorKind bbb(double bw, WindowKind window = WindowKind::gaussian) {
    return {EstimatorVariant::BBB, 0.0, bw, window};
  }

  void validate() const;
  /// Bandwidth of leg 0, 1 or 2.
  double leg_bandwidth(int leg) const;
  bool symmetric() const { return variant == EstimatorVariant::BBB; }
};

enum class Domain { principal_triangle, full_quadrant, full_plane };

std::string to_string(Domain d);

/// Why a cell holds (or lacks) an estimate.
enum class CellState : std::uint8_t {
  valid = 0,
  empty = 1,           // all products were zero
  unmatched = 2,       // no leg-3 band within half its bandwidth of the sum frequency
  outside_domain = 3,  // not part of the requested domain
};

struct FreqRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double f, double tol = 1e-9) const { return f >= lo - tol && f <= hi + tol; }
};

/// Integrated bispectral sums over frames. Rows follow axis 1, columns axis 2.
struct BispecGrid {
  Grid2<cdouble> B;       // sum of S1^k S2 conj(S3)
  Grid2<double> A;        // sum of |S1^k S2 S3|
  Grid2<double> eps;      // expected bias of |B|/A under the null
  Grid2<double> norm12;   // sum of |S1^k S2|^2
  Grid2<double> norm3;    // sum of |S3|^2
  Grid2<CellState> state;
  Grid2<std::int32_t> leg3;  // index into bands3, -1 when unmatched

  std::vector<double> freq1;  // axis-1 coordinates (Hz)
  std::vector<double> freq2;  // axis-2 coordinates (Hz)
  std::vector<BandSpec> bands1, bands2, bands3;

  std::size_t n_frames = 0;
  double frame_rate = 0.0;
  Domain domain = Domain::principal_triangle;
  EstimatorKind kind;
  int order = 1;  // k of the k-mode product; 1 is the bispectrum

  bool valid(std::size_t r, std::size_t c) const { return state(r, c) == CellState::valid; }
};

/// Running sums for one cell; owned by a single worker until stored.
struct CellSums {
  cdouble sum{};
  double abs_sum = 0.0;
  double abs2_sum = 0.0;
  double norm_a = 0.0;
  double norm_b = 0.0;

  void add(cdouble a, cdouble b);  // accumulates a * conj(b)
};

/// Writes a finished cell into the grid. `kappa` is the effective number of
/// correlated frames per independent frame (>= 1).
void store_cell(BispecGrid& grid, std::size_t r, std::size_t c, const CellSums& sums, double kappa);

/// Sum over lags of the product of leg window autocorrelations.
double correlated_frames(std::span<const std::vector<double>* const> leg_acfs);

enum class Normalization { rms, magnitude_sum };

std::string to_string(Normalization n);

/// Normalized bispectrum.
struct Bicoherence {
  Grid2<cdouble> beta;
  Grid2<double> magnitude;  // |beta|, or the signed corrected magnitude
  Grid2<double> eps;        // copied from the source grid
  Grid2<std::uint8_t> mask; // 1 = valid
  std::vector<double> freq1, freq2;
  Normalization normalization = Normalization::magnitude_sum;
  bool bias_corrected = false;
  Domain domain = Domain::principal_triangle;
  EstimatorVariant variant = EstimatorVariant::BBB;

  bool valid(std::size_t r, std::size_t c) const { return mask(r, c) != 0; }
  /// |beta| before bias correction.
  double uncorrected_magnitude(std::size_t r, std::size_t c) const;
};

struct EstimateOptions {
  std::optional<Domain> domain;  // default: principal triangle for BBB, quadrant otherwise
  double oversample = 4.0;       // required frame_rate / leg-3 top edge; 0 disables the check
};

/// Direct estimator with legs drawn from three decompositions that share a
/// frame grid. Leg 1 indexes rows, leg 2 columns; leg 3 is matched to the sum.
BispecGrid estimate_bispectrum(const Decomposition& leg1, const Decomposition& leg2,
                               const Decomposition& leg3, const EstimatorKind& kind,
                               FreqRange range1, FreqRange range2,
                               const EstimateOptions& options = {});

/// Single-bank estimator; all legs come from `decomp`.
BispecGrid estimate_bispectrum(const Decomposition& decomp, const EstimatorKind& kind,
                               FreqRange range1, FreqRange range2,
                               const EstimateOptions& options = {});

/// Designs the banks, demodulates at the default hop and estimates.
BispecGrid estimate_bispectrum(const Signal& signal, const EstimatorKind& kind, FreqRange range1,
                               FreqRange range2, const EstimateOptions& options = {});

/// Accumulates S1^k S2 conj(S3) with leg 3 matched to k*f1 + f2.
BispecGrid kmode_coupling(const Decomposition& decomp, int k, FreqRange range1, FreqRange range2,
                          const EstimateOptions& options = {});

BispecGrid kmode_coupling(const Signal& signal, int k, double bandwidth, FreqRange range1,
                          FreqRange range2, const EstimateOptions& options = {});

/// Cross-bispectrum in symmetrized coordinates: S_i(f1) S_j(f2 - f1/2) conj(S_j(f2 + f1/2)).
/// Leg 2 is the band of `decomp_j` nearest f2 - f1/2; leg 3 is matched to f1 + leg 2.
BispecGrid cross_bispectrum(const Decomposition& decomp_i, const Decomposition& decomp_j,
                            const EstimatorKind& kind, FreqRange range1, FreqRange range2,
                            const EstimateOptions& options = {});

Bicoherence normalize(const BispecGrid& grid, Normalization normalization);

/// (|beta| - eps) / (1 - eps), phase re-attached. Magnitude-sum input only.
Bicoherence bias_correct(const Bicoherence& bic, const BispecGrid& grid);

/// Populates the full plane from a principal-triangle BBB estimate using the
/// twelve-fold symmetry of a real signal's bispectrum.
BispecGrid expand_symmetry(const BispecGrid& grid);
Bicoherence expand_symmetry(const Bicoherence& bic);

/// Indirect check: mean over non-overlapping segments of X(f1) X(f2) conj(X(f1+f2))
/// from plain FFTs. Frequencies are snapped to FFT bins.
BispecGrid oracle_bispectrum(const Signal& signal, std::size_t segment_len,
                             std::span<const double> freqs1, std::span<const double> freqs2);

}  // namespace bispec
