// Command-line front-end: simulate, bispec, pac, features, run.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "bispec/cli.hpp"

namespace {

using bispec::Error;
using bispec::FreqRange;
using nlohmann::json;
namespace cli = bispec::cli;

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

FreqRange parse_range(const std::string& text, const std::string& flag) {
  const auto comma = text.find(',');
  try {
    if (comma == std::string::npos) throw std::invalid_argument("no comma");
    std::size_t used = 0;
    const double lo = std::stod(text.substr(0, comma), &used);
    const double hi = std::stod(text.substr(comma + 1), &used);
    if (!(hi > lo)) throw Error(flag + ": hi must exceed lo");
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw Error(flag + ": expected lo,hi but got \"" + text + "\"");
  }
}

std::optional<FreqRange> opt_range(const std::string& text, const std::string& flag) {
  if (text.empty()) return std::nullopt;
  return parse_range(text, flag);
}

struct Common {
  std::string output;
  std::string precision = "f64";
  std::string save_config;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-o,--output", c.output, "Output path")->required();
  app->add_option("--precision", c.precision, "Storage precision of written arrays")
      ->check(CLI::IsMember({"f32", "f64"}));
  app->add_option("--save-config", c.save_config, "Also write the run configuration as JSON");
}

struct SignalFlags {
  std::string path;
  std::string format = "auto";
  std::optional<double> fs;
};

void add_signal(CLI::App* app, SignalFlags& s) {
  app->add_option("signal", s.path, "Signal file (array file, .csv or raw float32)")->required();
  app->add_option("--format", s.format, "Signal format")->check(CLI::IsMember({"auto", "csv", "raw", "array"}));
  app->add_option("--fs", s.fs, "Sampling rate for raw float32 input (Hz)");
}

cli::SignalInput signal_input(const SignalFlags& s) {
  return {s.path, bispec::io::signal_format_from_string(s.format), s.fs};
}

int finish(cli::CommandParams params, const Common& c, std::optional<std::uint64_t> seed = std::nullopt) {
  cli::RunConfig config;
  config.params = std::move(params);
  config.seed = seed;
  config.output = c.output;
  config.precision = cli::precision_from_string(c.precision);
  if (!c.save_config.empty()) bispec::io::write_atomic(c.save_config, cli::to_json(config).dump(2) + "\n");
  for (const auto& p : cli::execute(config)) std::cout << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bispectral analysis and phase-amplitude coupling toolkit"};
  app.require_subcommand(1);

  Common common;
  SignalFlags sig;

  auto* simulate = app.add_subcommand("simulate", "Render a synthetic signal from a recipe");
  std::string recipe_path;
  std::optional<std::uint64_t> seed;
  simulate->add_option("recipe", recipe_path, "Recipe JSON file")->required();
  simulate->add_option("--seed", seed, "Override the recipe seed");
  add_common(simulate, common);

  auto* bis = app.add_subcommand("bispec", "Estimate a bicoherence grid");
  cli::BispecParams bp;
  std::string kind = "bbb", norm = "magsum", window = "gaussian", range1, range2;
  add_signal(bis, sig);
  bis->add_option("--kind", kind, "Estimator family")->check(CLI::IsMember({"bbb", "nnb", "bbn", "nbb"}));
  bis->add_option("--bw-narrow", bp.bw_narrow, "Narrow leg bandwidth (Hz)")->capture_default_str();
  bis->add_option("--bw-broad", bp.bw_broad, "Broad leg bandwidth (Hz)")->capture_default_str();
  bis->add_option("--window", window, "Window shape")->check(CLI::IsMember({"gaussian", "hann"}));
  bis->add_option("--norm", norm, "Normalization")->check(CLI::IsMember({"rms", "magsum"}));
  bis->add_flag("--bias-correct", bp.bias_correct, "Subtract the null bias (magsum only)");
  bis->add_option("--range", range1, "Axis-1 range lo,hi in Hz (default 0 to Nyquist)");
  bis->add_option("--range2", range2, "Axis-2 range lo,hi in Hz (default: --range)");
  bis->add_option("--order", bp.order, "k of the k-mode product (bbb only)")->check(CLI::PositiveNumber);
  add_common(bis, common);

  auto* pac = app.add_subcommand("pac", "Phase-power coherence grid");
  cli::PacParams pp;
  std::string theta_range = "2,14", gamma_range = "20,100";
  bool no_bias = false;
  add_signal(pac, sig);
  pac->add_option("--theta-bw", pp.theta_bw, "Phase band bandwidth (Hz)")->capture_default_str();
  auto* gbw = pac->add_option("--gamma-bw", pp.gamma_bw, "Amplitude band bandwidth (Hz)")->capture_default_str();
  pac->add_option("--proportional", pp.proportional, "Amplitude bandwidth = ratio * phase frequency")
      ->excludes(gbw);
  pac->add_option("--theta-range", theta_range, "Phase frequencies lo,hi (Hz)")->capture_default_str();
  pac->add_option("--gamma-range", gamma_range, "Amplitude frequencies lo,hi (Hz)")->capture_default_str();
  pac->add_option("--gamma-step", pp.gamma_step, "Amplitude frequency step (Hz)")->capture_default_str();
  pac->add_flag("--no-bias-correct", no_bias, "Keep the uncorrected coherence");
  pac->add_option("--hop", pp.hop, "Frame step in samples");
  add_common(pac, common);

  auto* feat = app.add_subcommand("features", "Region scores, verdicts and impulse response");
  cli::FeaturesParams fp;
  std::string so, fo, thresholds;
  feat->add_option("bicoherence", fp.input, "Bicoherence file written by bispec")->required();
  feat->add_option("--so-range", so, "Slow oscillation range lo,hi (Hz)");
  feat->add_option("--fo-range", fo, "Fast oscillation range lo,hi (Hz)");
  feat->add_option("--fundamental", fp.fundamental, "Lattice fundamental (Hz, default SO centre)");
  feat->add_option("--thresholds", thresholds, "Threshold JSON overriding the defaults");
  feat->add_option("--impulse-out", fp.impulse_output, "Impulse response path (default OUTPUT.impulse)");
  add_common(feat, common);

  auto* runcmd = app.add_subcommand("run", "Execute a saved run configuration");
  std::string config_path;
  runcmd->add_option("config", config_path, "Run configuration JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return finish(cli::SimulateParams{read_json_file(recipe_path)}, common, seed);
    }
    if (bis->parsed()) {
      bp.input = signal_input(sig);
      bp.kind = bispec::estimator_variant_from_string(kind);
      bp.window = bispec::window_kind_from_string(window);
      bp.norm = norm == "rms" ? bispec::Normalization::rms : bispec::Normalization::magnitude_sum;
      bp.range1 = opt_range(range1, "--range");
      bp.range2 = opt_range(range2, "--range2");
      return finish(bp, common);
    }
    if (pac->parsed()) {
      pp.input = signal_input(sig);
      pp.theta_range = parse_range(theta_range, "--theta-range");
      pp.gamma_range = parse_range(gamma_range, "--gamma-range");
      pp.bias_correct = !no_bias;
      return finish(pp, common);
    }
    if (feat->parsed()) {
      fp.so_range = opt_range(so, "--so-range");
      fp.fo_range = opt_range(fo, "--fo-range");
      if (!thresholds.empty()) fp.thresholds = bispec::thresholds_from_json(read_json_file(thresholds));
      return finish(fp, common);
    }
    if (runcmd->parsed()) {
      const auto config = cli::run_config_from_json(read_json_file(config_path));
      for (const auto& p : cli::execute(config)) std::cout << p.string() << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
