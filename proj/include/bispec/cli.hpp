#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "bispec/features.hpp"
#include "bispec/io.hpp"
#include "bispec/polyspec.hpp"

namespace bispec::cli {

/// Storage precision of written arrays; computation is always double.
enum class Precision { f32, f64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& name);

/// Where a signal comes from.
struct SignalInput {
  std::string path;
  io::SignalFormat format = io::SignalFormat::automatic;
  std::optional<double> fs;  // raw input only
};

struct SimulateParams {
  nlohmann::json recipe;  // the full recipe document, so the hash covers its content
};

struct BispecParams {
  SignalInput input;
  EstimatorVariant kind = EstimatorVariant::BBB;
  double bw_narrow = 1.0;
  double bw_broad = 2.0;
  WindowKind window = WindowKind::gaussian;
  Normalization norm = Normalization::magnitude_sum;
  bool bias_correct = false;
  std::optional<FreqRange> range1;  // default: 0 to Nyquist
  std::optional<FreqRange> range2;  // default: range1
  int order = 1;                    // k of the k-mode product, BBB only
};

struct PacParams {
  SignalInput input;
  double theta_bw = 1.0;
  double gamma_bw = 40.0;
  std::optional<double> proportional;  // gamma bandwidth = ratio * theta
  FreqRange theta_range{2.0, 14.0};
  FreqRange gamma_range{20.0, 100.0};
  double gamma_step = 5.0;
  bool bias_correct = true;
  std::optional<std::size_t> hop;
};

struct FeaturesParams {
  std::string input;  // bicoherence ArrayFile written by the bispec command
  std::optional<FreqRange> so_range;
  std::optional<FreqRange> fo_range;
  std::optional<double> fundamental;
  FeatureThresholds thresholds = FeatureThresholds::defaults();
  std::string impulse_output;  // default: output + ".impulse"
};

using CommandParams = std::variant<SimulateParams, BispecParams, PacParams, FeaturesParams>;

/// One command with all of its inputs, so a run can be replayed from JSON.
struct RunConfig {
  CommandParams params;
  std::string output;
  std::optional<std::uint64_t> seed;  // simulate: overrides the recipe seed
  Precision precision = Precision::f64;

  std::string command() const;
};

nlohmann::json to_json(const RunConfig& config);
/// Errors name the offending JSON path.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// FNV-1a of the canonical RunConfig JSON, as 16 hex digits.
std::string provenance_hash(const RunConfig& config);

/// Paths of the companion arrays written next to a bicoherence file.
struct GridFiles {
  std::filesystem::path beta, magnitude, eps, sums;
  static GridFiles at(const std::filesystem::path& beta);
};

/// Runs the command and returns the paths it wrote.
std::vector<std::filesystem::path> execute(const RunConfig& config);

/// Loads a bicoherence file and its companions. `grid` carries the raw sums B,
/// the cell states, the axes and the band metadata; A and the norms are not stored.
struct LoadedGrid {
  Bicoherence bic;
  BispecGrid grid;
  std::string provenance;
};

LoadedGrid load_grid(const std::filesystem::path& beta);

/// Writes `bic` (and `grid`'s raw sums) as a bicoherence file set.
std::vector<std::filesystem::path> write_grid(const std::filesystem::path& beta, const Bicoherence& bic,
                                              const BispecGrid& grid, const std::string& provenance,
                                              Precision precision, const nlohmann::json& attrs);

}  // namespace bispec::cli
