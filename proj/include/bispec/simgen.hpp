#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bispec/demod.hpp"
#include "json.hpp"

namespace bispec::sim {

/// mt19937_64 with hand-rolled uniform and normal draws, so streams are
/// identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1), 53 bits
  double normal();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a(const std::string& bytes);

/// Derives an independent stream seed from a master seed and a label.
std::uint64_t derive_seed(std::uint64_t master, const std::string& label, std::uint64_t occurrence = 0);

enum class NoiseKind { none, white, one_over_f };

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double level_db = 0.0;  // 10 log10(noise power / signal power)
  double exponent = 1.0;  // one_over_f only
};

enum class ProcessKind { poisson, periodic, periodic_jittered };

struct PointProcessSpec {
  ProcessKind kind = ProcessKind::periodic;
  double rate = 0.0;       // events/s, poisson
  double period = 0.0;     // s, periodic kinds
  double jitter_sd = 0.0;  // s, periodic_jittered
  double offset = 0.0;     // s, time of the first periodic event
};

enum class PhasePolicy { locked, jittered, random_per_event };

/// Waveform placed at each event; times are relative to the event.
struct FeatureSpec {
  std::string shape = "so_fo";  // gabor | so_fo | spike | samples
  double so_frequency = 8.0;
  double fo_frequency = 40.0;
  double width = 0.05;      // s, gaussian sd of the SO window / gabor envelope
  double fo_width = 0.02;   // s, gaussian sd of the FO envelope
  double fo_delay = 0.0;    // s, FO envelope centre relative to the SO peak
  double so_amplitude = 1.0;
  double fo_amplitude = 1.0;
  double tau = 0.01;        // s, spike decay
  double fo_phase_sd = 0.5; // rad, per-event FO phase spread under the jittered policy
  std::vector<double> samples;  // shape == samples, sampled at the signal rate
  std::size_t sample_center = 0;
};

/// One synthetic component. `params` holds the kind-specific fields.
struct ComponentSpec {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
};

struct SimRecipe {
  double duration = 0.0;
  double fs = 0.0;
  std::uint64_t seed = 0;
  std::vector<ComponentSpec> components;
  NoiseSpec noise;
};

/// Validates and parses a recipe document. Errors name the offending JSON path.
SimRecipe recipe_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const SimRecipe& recipe);

PointProcessSpec point_process_from_json(const nlohmann::json& doc, const std::string& path);
nlohmann::json to_json(const PointProcessSpec& pp);
FeatureSpec feature_from_json(const nlohmann::json& doc, const std::string& path);
nlohmann::json to_json(const FeatureSpec& f);

/// Sum of rendered components plus calibrated noise.
Signal gen(const SimRecipe& recipe);

/// Renders one component with its own stream.
std::vector<double> render_component(const ComponentSpec& component, double duration, double fs,
                                     std::uint64_t stream_seed);

/// Features placed at point-process event times. Warnings (e.g. a feature
/// longer than the mean interval) are appended to `warnings` when given.
Signal gen_point_process_signal(const PointProcessSpec& pp, const FeatureSpec& feature,
                                PhasePolicy policy, double duration, double fs, std::uint64_t seed,
                                std::vector<std::string>* warnings = nullptr);

/// Event times in seconds.
std::vector<double> event_times(const PointProcessSpec& pp, double duration, Rng& rng);

/// Unit-variance gaussian noise with PSD proportional to 1/f^exponent.
Signal gen_one_over_f(double duration, double fs, std::uint64_t seed, double exponent = 1.0);

/// Unit-variance noise band-limited to [lo, hi] Hz by zeroing FFT bins.
std::vector<double> bandpassed_noise(std::size_t n, double fs, double lo, double hi, Rng& rng);

/// Instantaneous phase of the analytic signal.
std::vector<double> analytic_phase(const std::vector<double>& x);

std::string to_string(PhasePolicy p);
PhasePolicy phase_policy_from_string(const std::string& s);

}  // namespace bispec::sim
