#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "bispec/polyspec.hpp"

namespace bispec {

enum class Region : std::uint8_t { unassigned = 0, outside, inside_so, inside_fo, transition };

std::string to_string(Region r);

/// Labels for every cell of a bicoherence grid. Only quadrant I is labeled.
struct RegionPartition {
  FreqRange so;
  FreqRange fo;
  Grid2<Region> labels;
  std::vector<double> freq1, freq2;

  double so_bandwidth() const { return so.hi - so.lo; }
  std::size_t count(Region r) const;
};

/// Verdict thresholds. The defaults are compiled from data/feature_defaults.json.
struct FeatureThresholds {
  int version = 0;
  double outside_min = 0.0;         // pac_like needs outside_score at least this
  double transition_ratio_max = 0.0; // and transition_score at most this times outside_score
  double transient_match = 0.0;     // transient_like: |transition - outside| within this fraction
  double lattice_min = 0.0;         // lattice_score that counts as a harmonic lattice
  double inside_fo_min = 0.0;       // fo_self_consistent
  double phase_gate = 0.0;          // peak magnitude below which a phase contrast is unreliable
  double isolation_margin = 0.0;    // Hz; FO cells this close to an SO harmonic are left out of inside_fo

  static FeatureThresholds defaults();
};

FeatureThresholds thresholds_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const FeatureThresholds& t);

struct DelayEstimate {
  double tau = 0.0;          // s; positive when the FO envelope lags the SO phase
  double uncertainty = 0.0;  // s; one frame period
};

struct FeatureReport {
  std::optional<double> outside_score;
  std::optional<double> inside_so_score;
  std::optional<double> inside_fo_score;
  std::optional<double> transition_score;
  std::optional<double> lattice_score;
  std::optional<DelayEstimate> delay;
  bool pac_like = false;
  bool transient_like = false;
  bool fo_self_consistent = false;
  bool concurrent = true;  // |delay| under half the SO period, true when no delay was measured
};

nlohmann::json to_json(const FeatureReport& r);

/// Throws unless so_range lies below fo_range without overlap.
RegionPartition partition(const Bicoherence& bic, FreqRange so_range, FreqRange fo_range);

/// Mean signed magnitude over the valid cells of each region, with verdicts
/// derived from whatever the report already holds.
FeatureReport score_regions(const Bicoherence& bic, const RegionPartition& part,
                            const FeatureThresholds& thresholds = FeatureThresholds::defaults());

/// Recomputes the verdict flags from the scores, lattice and delay in `report`.
void apply_verdicts(FeatureReport& report, const RegionPartition& part, const FeatureThresholds& thresholds);

/// Mean uncorrected magnitude on the lattice {(n f0, m f0)} over the mean
/// off-lattice magnitude within the annulus the lattice spans.
double lattice_score(const Bicoherence& bic, double fundamental);

struct ImpulseResponse {
  Grid2<cdouble> I;               // rows: tau, columns: FO frequencies
  std::vector<double> tau;        // s
  std::vector<double> fo_freq;    // Hz
  std::vector<double> profile;    // mean |I| across FO columns
  DelayEstimate delay;
};

/// I(tau, w2) = sum over SO cells of B(w1, w2) exp(i 2 pi w1 tau) dw1.
ImpulseResponse impulse_response(const BispecGrid& grid, const RegionPartition& part);

struct PhaseContrast {
  double radians = 0.0;   // in [0, pi]
  bool reliable = false;  // both peaks above the phase gate
};

/// Phase difference between the cells (theta, gamma - theta) and (theta, gamma).
PhaseContrast peak_phase_contrast(const Bicoherence& bic, double theta, double gamma,
                                  const FeatureThresholds& thresholds = FeatureThresholds::defaults());

struct AnalyzeOptions {
  std::optional<double> fundamental;  // default: SO range centre
  FeatureThresholds thresholds = FeatureThresholds::defaults();
};

struct Analysis {
  RegionPartition partition;
  FeatureReport report;
  std::optional<ImpulseResponse> impulse;
};

/// partition, score_regions, lattice_score and impulse_response in one pass.
/// `bic` is expected bias-corrected and normalized from `grid`.
Analysis analyze(const Bicoherence& bic, const BispecGrid* grid, FreqRange so_range, FreqRange fo_range,
                 const AnalyzeOptions& options = {});

}  // namespace bispec
