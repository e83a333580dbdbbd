#include "bispec/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "bispec/fft.hpp"

namespace bispec::sim {

using nlohmann::json;

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  has_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, const std::string& label, std::uint64_t occurrence) {
  return splitmix64(splitmix64(master) ^ fnv1a(label) ^ splitmix64(occurrence + 0x5bd1e995ULL));
}

std::string to_string(PhasePolicy p) {
  switch (p) {
    case PhasePolicy::locked: return "locked";
    case PhasePolicy::jittered: return "jittered";
    case PhasePolicy::random_per_event: return "random_per_event";
  }
  return "locked";
}

PhasePolicy phase_policy_from_string(const std::string& s) {
  if (s == "locked") return PhasePolicy::locked;
  if (s == "jittered") return PhasePolicy::jittered;
  if (s == "random_per_event") return PhasePolicy::random_per_event;
  throw Error("unknown phase policy '" + s + "'");
}

// ---------------------------------------------------------------- JSON helpers

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw Error(path + ": " + what);
}

const json& require(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double number(const json& obj, const std::string& key, const std::string& path, double fallback,
              bool required = false) {
  if (!obj.is_object()) fail(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) fail(path + "." + key, "missing required field");
    return fallback;
  }
  if (!it->is_number()) fail(path + "." + key, "expected a number");
  const double v = it->get<double>();
  if (!std::isfinite(v)) fail(path + "." + key, "expected a finite number");
  return v;
}

std::string text(const json& obj, const std::string& key, const std::string& path, const std::string& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  if (!it->is_string()) fail(path + "." + key, "expected a string");
  return it->get<std::string>();
}

std::pair<double, double> band(const json& obj, const std::string& key, const std::string& path,
                               std::pair<double, double> fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  const std::string p = path + "." + key;
  if (!it->is_array() || it->size() != 2 || !(*it)[0].is_number() || !(*it)[1].is_number()) {
    fail(p, "expected [low, high]");
  }
  const double lo = (*it)[0].get<double>(), hi = (*it)[1].get<double>();
  if (!(lo >= 0.0) || !(hi > lo)) fail(p, "expected 0 <= low < high");
  return {lo, hi};
}

void positive(double v, const std::string& path) {
  if (!(v > 0.0)) fail(path, "must be positive");
}

void below_nyquist(double f, double fs, const std::string& path) {
  if (f > fs / 2) fail(path, "component band exceeds Nyquist (" + std::to_string(fs / 2) + " Hz)");
}

}  // namespace

PointProcessSpec point_process_from_json(const json& doc, const std::string& path) {
  PointProcessSpec pp;
  const std::string kind = text(doc, "kind", path, "periodic");
  if (kind == "poisson") {
    pp.kind = ProcessKind::poisson;
    pp.rate = number(doc, "rate", path, 0, true);
    positive(pp.rate, path + ".rate");
  } else if (kind == "periodic" || kind == "periodic_jittered") {
    pp.kind = kind == "periodic" ? ProcessKind::periodic : ProcessKind::periodic_jittered;
    if (doc.contains("period")) {
      pp.period = number(doc, "period", path, 0);
    } else if (doc.contains("rate")) {
      pp.period = 1.0 / number(doc, "rate", path, 0);
    } else {
      fail(path + ".period", "missing required field");
    }
    positive(pp.period, path + ".period");
    pp.jitter_sd = number(doc, "jitter_sd", path, 0.0);
    if (pp.jitter_sd < 0) fail(path + ".jitter_sd", "must be non-negative");
    pp.offset = number(doc, "offset", path, 0.0);
  } else {
    fail(path + ".kind", "unknown point process kind '" + kind + "'");
  }
  return pp;
}

json to_json(const PointProcessSpec& pp) {
  json j;
  switch (pp.kind) {
    case ProcessKind::poisson:
      j["kind"] = "poisson";
      j["rate"] = pp.rate;
      break;
    case ProcessKind::periodic:
    case ProcessKind::periodic_jittered:
      j["kind"] = pp.kind == ProcessKind::periodic ? "periodic" : "periodic_jittered";
      j["period"] = pp.period;
      j["jitter_sd"] = pp.jitter_sd;
      j["offset"] = pp.offset;
      break;
  }
  return j;
}

FeatureSpec feature_from_json(const json& doc, const std::string& path) {
  FeatureSpec f;
  if (!doc.is_object()) fail(path, "expected an object");
  f.shape = text(doc, "shape", path, "so_fo");
  f.so_frequency = number(doc, "so_frequency", path, f.so_frequency);
  f.fo_frequency = number(doc, "fo_frequency", path, f.fo_frequency);
  f.width = number(doc, "width", path, f.width);
  f.fo_width = number(doc, "fo_width", path, f.fo_width);
  f.fo_delay = number(doc, "fo_delay", path, f.fo_delay);
  f.so_amplitude = number(doc, "so_amplitude", path, f.so_amplitude);
  f.fo_amplitude = number(doc, "fo_amplitude", path, f.fo_amplitude);
  f.tau = number(doc, "tau", path, f.tau);
  f.fo_phase_sd = number(doc, "fo_phase_sd", path, f.fo_phase_sd);
  if (f.shape == "samples") {
    const auto& s = require(doc, "samples", path);
    if (!s.is_array() || s.empty()) fail(path + ".samples", "expected a non-empty array");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_number()) fail(path + ".samples[" + std::to_string(i) + "]", "expected a number");
      f.samples.push_back(s[i].get<double>());
    }
    f.sample_center = static_cast<std::size_t>(number(doc, "sample_center", path, 0.0));
    if (f.sample_center >= f.samples.size()) fail(path + ".sample_center", "outside the sample array");
  } else if (f.shape == "gabor" || f.shape == "so_fo") {
    positive(f.width, path + ".width");
    if (f.shape == "so_fo") positive(f.fo_width, path + ".fo_width");
  } else if (f.shape == "spike") {
    positive(f.tau, path + ".tau");
  } else {
    fail(path + ".shape", "unknown feature shape '" + f.shape + "'");
  }
  return f;
}

json to_json(const FeatureSpec& f) {
  json j;
  j["shape"] = f.shape;
  j["so_frequency"] = f.so_frequency;
  j["fo_frequency"] = f.fo_frequency;
  j["width"] = f.width;
  j["fo_width"] = f.fo_width;
  j["fo_delay"] = f.fo_delay;
  j["fo_phase_sd"] = f.fo_phase_sd;
  j["so_amplitude"] = f.so_amplitude;
  j["fo_amplitude"] = f.fo_amplitude;
  j["tau"] = f.tau;
  if (f.shape == "samples") {
    j["samples"] = f.samples;
    j["sample_center"] = f.sample_center;
  }
  return j;
}

namespace {

// Checks the kind-specific fields without rendering.
void validate_component(const ComponentSpec& c, double fs, const std::string& path) {
  const auto& p = c.params;
  const std::string pp = path + ".params";
  if (!p.is_object()) fail(pp, "expected an object");
  if (c.kind == "sine_am_pac" || c.kind == "fm_pair") {
    const double theta = number(p, "theta", pp, 0, true);
    const double gamma = number(p, "gamma", pp, 0, true);
    positive(theta, pp + ".theta");
    if (!(gamma - theta > 0)) fail(pp + ".gamma", "gamma - theta must be positive");
    below_nyquist(gamma + theta, fs, pp + ".gamma");
    if (c.kind == "fm_pair") {
      const auto mod = text(p, "modulation", pp, "fm");
      if (mod != "fm" && mod != "am") fail(pp + ".modulation", "expected \"fm\" or \"am\"");
    }
  } else if (c.kind == "nested_noise") {
    const auto so = band(p, "so_band", pp, {6, 10});
    const auto fo = band(p, "fo_band", pp, {30, 80});
    below_nyquist(so.second, fs, pp + ".so_band");
    below_nyquist(fo.second, fs, pp + ".fo_band");
    const double k = number(p, "harmonic", pp, 1);
    if (!(k >= 1) || k != std::floor(k)) fail(pp + ".harmonic", "expected an integer >= 1");
    const double depth = number(p, "depth", pp, 1);
    if (depth < 0 || depth > 1) fail(pp + ".depth", "expected a value in [0, 1]");
  } else if (c.kind == "transient_train") {
    number(p, "kappa", pp, 10);
    if (p.contains("frequency")) {
      const double f = number(p, "frequency", pp, 0);
      positive(f, pp + ".frequency");
      below_nyquist(f, fs, pp + ".frequency");
    } else {
      below_nyquist(band(p, "so_band", pp, {6, 10}).second, fs, pp + ".so_band");
    }
  } else if (c.kind == "point_process_feature") {
    point_process_from_json(require(p, "process", pp), pp + ".process");
    const auto f = feature_from_json(require(p, "feature", pp), pp + ".feature");
    if (f.shape == "so_fo" || f.shape == "gabor") {
      below_nyquist(f.fo_frequency, fs, pp + ".feature.fo_frequency");
      below_nyquist(f.so_frequency, fs, pp + ".feature.so_frequency");
    }
    phase_policy_from_string(text(p, "phase_policy", pp, "locked"));
  } else if (c.kind == "qpc_triple") {
    const double f1 = number(p, "f1", pp, 0, true);
    const double f2 = number(p, "f2", pp, 0, true);
    positive(f1, pp + ".f1");
    positive(f2, pp + ".f2");
    below_nyquist(number(p, "f3", pp, f1 + f2), fs, pp + ".f3");
    const auto policy = text(p, "phase_policy", pp, "locked");
    if (policy != "locked" && policy != "random_segment") {
      fail(pp + ".phase_policy", "expected \"locked\" or \"random_segment\"");
    }
    positive(number(p, "segment", pp, 1.0), pp + ".segment");
  } else {
    fail(path + ".kind", "unknown component kind '" + c.kind + "'");
  }
}

}  // namespace

SimRecipe recipe_from_json(const json& doc) {
  const std::string root = "$";
  if (!doc.is_object()) fail(root, "expected an object");
  SimRecipe r;
  r.duration = number(doc, "duration", root, 0, true);
  r.fs = number(doc, "fs", root, 0, true);
  positive(r.duration, "$.duration");
  positive(r.fs, "$.fs");
  if (r.duration * r.fs < 2) fail("$.duration", "duration * fs must be at least 2 samples");
  const auto& seed = require(doc, "seed", root);
  if (!seed.is_number_integer() || (seed.is_number_integer() && !seed.is_number_unsigned() && seed.get<std::int64_t>() < 0)) {
    fail("$.seed", "expected a non-negative integer");
  }
  r.seed = seed.get<std::uint64_t>();
  if (doc.contains("components")) {
    const auto& comps = doc["components"];
    if (!comps.is_array()) fail("$.components", "expected an array");
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string path = "$.components[" + std::to_string(i) + "]";
      const auto& c = comps[i];
      if (!c.is_object()) fail(path, "expected an object");
      ComponentSpec spec;
      const auto& kind = require(c, "kind", path);
      if (!kind.is_string()) fail(path + ".kind", "expected a string");
      spec.kind = kind.get<std::string>();
      if (c.contains("params")) spec.params = c["params"];
      validate_component(spec, r.fs, path);
      r.components.push_back(std::move(spec));
    }
  }
  if (doc.contains("noise")) {
    const auto& n = doc["noise"];
    if (!n.is_object()) fail("$.noise", "expected an object");
    const auto kind = text(n, "kind", "$.noise", "none");
    if (kind == "none") r.noise.kind = NoiseKind::none;
    else if (kind == "white") r.noise.kind = NoiseKind::white;
    else if (kind == "one_over_f") r.noise.kind = NoiseKind::one_over_f;
    else fail("$.noise.kind", "unknown noise kind '" + kind + "'");
    r.noise.level_db = number(n, "level_db", "$.noise", 0.0);
    r.noise.exponent = number(n, "exponent", "$.noise", 1.0);
  }
  return r;
}

json to_json(const SimRecipe& r) {
  json j;
  j["duration"] = r.duration;
  j["fs"] = r.fs;
  j["seed"] = r.seed;
  j["components"] = json::array();
  for (const auto& c : r.components) j["components"].push_back({{"kind", c.kind}, {"params", c.params}});
  const char* kinds[] = {"none", "white", "one_over_f"};
  j["noise"] = {{"kind", kinds[static_cast<int>(r.noise.kind)]},
                {"level_db", r.noise.level_db},
                {"exponent", r.noise.exponent}};
  return j;
}

// ---------------------------------------------------------------- generators

std::vector<double> bandpassed_noise(std::size_t n, double fs, double lo, double hi, Rng& rng) {
  std::vector<cdouble> x(n);
  for (auto& v : x) v = rng.normal();
  auto X = fft::forward(x);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) * fs / static_cast<double>(n);
    if (f < lo || f > hi) X[k] = 0.0;
  }
  const auto y = fft::inverse(X);
  std::vector<double> out(n);
  double power = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = y[i].real();
    power += out[i] * out[i];
  }
  power /= static_cast<double>(n);
  if (power > 0) {
    const double s = 1.0 / std::sqrt(power);
    for (auto& v : out) v *= s;
  }
  return out;
}

std::vector<double> analytic_phase(const std::vector<double>& x) {
  const auto z = fft::analytic(x);
  std::vector<double> phi(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) phi[i] = std::arg(z[i]);
  return phi;
}

Signal gen_one_over_f(double duration, double fs, std::uint64_t seed, double exponent) {
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  if (n < 2) throw Error("gen_one_over_f: duration * fs must be at least 2");
  Rng rng(seed);
  std::vector<cdouble> x(n);
  for (auto& v : x) v = rng.normal();
  auto X = fft::forward(x);
  const double df = fs / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t kk = std::max<std::size_t>(1, std::min(k, n - k));
    X[k] *= std::pow(static_cast<double>(kk) * df, -exponent / 2);
  }
  const auto y = fft::inverse(X);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = y[i].real();
  const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(n);
  double var = 0.0;
  for (auto& v : out) {
    v -= mean;
    var += v * v;
  }
  var /= static_cast<double>(n);
  const double s = var > 0 ? 1.0 / std::sqrt(var) : 1.0;
  for (auto& v : out) v *= s;
  return make_signal(std::move(out), fs, "one_over_f");
}

std::vector<double> event_times(const PointProcessSpec& pp, double duration, Rng& rng) {
  std::vector<double> t;
  switch (pp.kind) {
    case ProcessKind::poisson: {
      double now = 0.0;
      while (true) {
        double u = rng.uniform();
        while (u <= 0.0) u = rng.uniform();
        now += -std::log(u) / pp.rate;
        if (now >= duration) break;
        t.push_back(now);
      }
      break;
    }
    case ProcessKind::periodic:
    case ProcessKind::periodic_jittered: {
      for (std::size_t k = 0;; ++k) {
        const double base = pp.offset + static_cast<double>(k) * pp.period;
        if (base >= duration) break;
        double e = base;
        if (pp.kind == ProcessKind::periodic_jittered) e += pp.jitter_sd * rng.normal();
        if (e >= 0.0 && e < duration) t.push_back(e);
      }
      break;
    }
  }
  return t;
}

namespace {

double gauss(double t, double sd) { return std::exp(-0.5 * (t / sd) * (t / sd)); }

// Half-extent (s) over which a feature is rendered around its event.
std::pair<double, double> feature_support(const FeatureSpec& f, double fs) {
  if (f.shape == "spike") return {0.0, 12.0 * f.tau};
  if (f.shape == "samples") {
    return {-static_cast<double>(f.sample_center) / fs,
            static_cast<double>(f.samples.size() - 1 - f.sample_center) / fs};
  }
  double ext = 5.0 * f.width;
  if (f.shape == "so_fo") ext = std::max(ext, std::abs(f.fo_delay) + 5.0 * f.fo_width);
  return {-ext, ext};
}

double feature_value(const FeatureSpec& f, double t, double fo_phase) {
  if (f.shape == "gabor") {
    return f.fo_amplitude * gauss(t, f.width) * std::cos(kTwoPi * f.fo_frequency * t + fo_phase);
  }
  if (f.shape == "so_fo") {
    const double so = f.so_amplitude * gauss(t, f.width) * std::cos(kTwoPi * f.so_frequency * t);
    const double fo = f.fo_amplitude * gauss(t - f.fo_delay, f.fo_width) *
                      std::cos(kTwoPi * f.fo_frequency * t + fo_phase);
    return so + fo;
  }
  if (f.shape == "spike") return t >= 0.0 ? f.so_amplitude * std::exp(-t / f.tau) : 0.0;
  return 0.0;
}

}  // namespace

Signal gen_point_process_signal(const PointProcessSpec& pp, const FeatureSpec& feature,
                                PhasePolicy policy, double duration, double fs, std::uint64_t seed,
                                std::vector<std::string>* warnings) {
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  if (n < 2) throw Error("gen_point_process_signal: duration * fs must be at least 2");
  Rng rng(seed);
  const auto events = event_times(pp, duration, rng);
  if (events.empty()) throw Error("gen_point_process_signal: the point process produced no events");

  const auto [lo, hi] = feature_support(feature, fs);
  const double mean_interval = pp.kind == ProcessKind::poisson ? 1.0 / pp.rate : pp.period;
  if (warnings && hi - lo > mean_interval) {
    warnings->push_back("feature support (" + std::to_string(hi - lo) +
                        " s) exceeds the mean inter-event interval (" + std::to_string(mean_interval) + " s)");
  }

  std::vector<double> x(n, 0.0);
  for (double tau : events) {
    double psi = 0.0;
    if (policy == PhasePolicy::random_per_event) psi = kTwoPi * rng.uniform();
    if (policy == PhasePolicy::jittered) psi = feature.fo_phase_sd * rng.normal();
    if (feature.shape == "samples") {
      const auto at = static_cast<std::int64_t>(std::llround(tau * fs)) - static_cast<std::int64_t>(feature.sample_center);
      for (std::size_t i = 0; i < feature.samples.size(); ++i) {
        const std::int64_t idx = at + static_cast<std::int64_t>(i);
        if (idx >= 0 && idx < static_cast<std::int64_t>(n)) x[static_cast<std::size_t>(idx)] += feature.samples[i];
      }
      continue;
    }
    const auto i0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((tau + lo) * fs)));
    const auto i1 = std::min<std::int64_t>(static_cast<std::int64_t>(n) - 1,
                                           static_cast<std::int64_t>(std::floor((tau + hi) * fs)));
    for (std::int64_t i = i0; i <= i1; ++i) {
      x[static_cast<std::size_t>(i)] += feature_value(feature, static_cast<double>(i) / fs - tau, psi);
    }
  }
  return make_signal(std::move(x), fs, "point_process");
}

std::vector<double> render_component(const ComponentSpec& c, double duration, double fs,
                                     std::uint64_t stream_seed) {
  validate_component(c, fs, "$.component");
  const auto n = static_cast<std::size_t>(std::llround(duration * fs));
  const auto& p = c.params;
  const std::string pp = "$.component.params";
  Rng rng(stream_seed);
  std::vector<double> x(n, 0.0);
  auto time = [fs](std::size_t i) { return static_cast<double>(i) / fs; };

  if (c.kind == "sine_am_pac") {
    const double th = number(p, "theta", pp, 0), ga = number(p, "gamma", pp, 0);
    const double a = number(p, "amplitude", pp, 1.0), delay = number(p, "delay", pp, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = time(i);
      x[i] = a * (std::cos(kTwoPi * th * t) +
                  (1.0 - std::cos(kTwoPi * th * (t - delay))) * std::cos(kTwoPi * ga * t));
    }
  } else if (c.kind == "fm_pair") {
    const double th = number(p, "theta", pp, 0), ga = number(p, "gamma", pp, 0);
    const double a = number(p, "amplitude", pp, 1.0), so = number(p, "so_amplitude", pp, 1.0);
    const double upper = text(p, "modulation", pp, "fm") == "fm" ? -0.5 : 0.5;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = time(i);
      x[i] = so * std::cos(kTwoPi * th * t) +
             a * (std::cos(kTwoPi * ga * t) + 0.5 * std::cos(kTwoPi * (ga - th) * t) +
                  upper * std::cos(kTwoPi * (ga + th) * t));
    }
  } else if (c.kind == "nested_noise") {
    const auto so_band = band(p, "so_band", pp, {6, 10});
    const auto fo_band = band(p, "fo_band", pp, {30, 80});
    const double so_amp = number(p, "so_amplitude", pp, 1.0);
    const double fo_amp = number(p, "fo_amplitude", pp, 1.0);
    const double depth = number(p, "depth", pp, 1.0);
    const double k = number(p, "harmonic", pp, 1.0);
    // fractional delays interpolate the envelope between samples
    const double d = number(p, "delay", pp, 0.0) * fs;
    const auto pad = static_cast<std::size_t>(std::ceil(std::abs(d))) + 1;
    const auto so = bandpassed_noise(n + pad, fs, so_band.first, so_band.second, rng);
    const auto fo = bandpassed_noise(n, fs, fo_band.first, fo_band.second, rng);
    const auto phi = analytic_phase(so);
    std::vector<double> env(phi.size());
    for (std::size_t j = 0; j < phi.size(); ++j) env[j] = 1.0 - depth * (1.0 - std::cos(k * phi[j])) / 2.0;
    const std::size_t a = d > 0.0 ? pad : 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double pos = static_cast<double>(i + a) - d;
      const auto j = std::min(static_cast<std::size_t>(std::floor(pos)), env.size() - 2);
      const double frac = pos - static_cast<double>(j);
      x[i] = so_amp * so[i + a] + fo_amp * ((1.0 - frac) * env[j] + frac * env[j + 1]) * fo[i];
    }
  } else if (c.kind == "transient_train") {
    const double kappa = number(p, "kappa", pp, 10.0), a = number(p, "amplitude", pp, 1.0);
    std::vector<double> phi(n);
    if (p.contains("frequency")) {
      const double f = number(p, "frequency", pp, 0);
      for (std::size_t i = 0; i < n; ++i) phi[i] = kTwoPi * f * time(i);
    } else {
      const auto b = band(p, "so_band", pp, {6, 10});
      phi = analytic_phase(bandpassed_noise(n, fs, b.first, b.second, rng));
    }
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::exp(kappa * std::cos(phi[i]));
      peak = std::max(peak, x[i]);
    }
    for (auto& v : x) v *= a / peak;
  } else if (c.kind == "point_process_feature") {
    const auto proc = point_process_from_json(p["process"], pp + ".process");
    const auto feat = feature_from_json(p["feature"], pp + ".feature");
    const auto policy = phase_policy_from_string(text(p, "phase_policy", pp, "locked"));
    x = gen_point_process_signal(proc, feat, policy, duration, fs, rng.next()).samples;
  } else if (c.kind == "qpc_triple") {
    const double f1 = number(p, "f1", pp, 0), f2 = number(p, "f2", pp, 0);
    const double f3 = number(p, "f3", pp, f1 + f2);
    const bool random = text(p, "phase_policy", pp, "locked") == "random_segment";
    const auto seg = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(number(p, "segment", pp, 1.0) * fs)));
    const double p1 = kTwoPi * rng.uniform(), p2 = kTwoPi * rng.uniform();
    double psi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (random && i % seg == 0) psi = kTwoPi * rng.uniform();
      const double t = time(i);
      x[i] = std::cos(kTwoPi * f1 * t + p1) + std::cos(kTwoPi * f2 * t + p2) +
             std::cos(kTwoPi * f3 * t + p1 + p2 + psi);
    }
  }
  return x;
}

Signal gen(const SimRecipe& recipe) {
  if (!(recipe.fs > 0.0) || !(recipe.duration > 0.0)) throw Error("gen: duration and fs must be positive");
  const auto n = static_cast<std::size_t>(std::llround(recipe.duration * recipe.fs));
  if (n < 2) throw Error("gen: duration * fs must be at least 2");
  std::vector<double> x(n, 0.0);
  std::map<std::string, std::uint64_t> seen;
  for (const auto& c : recipe.components) {
    const std::string canonical = json{{"kind", c.kind}, {"params", c.params}}.dump();
    const auto occurrence = seen[canonical]++;
    const auto part = render_component(c, recipe.duration, recipe.fs,
                                       derive_seed(recipe.seed, canonical, occurrence));
    for (std::size_t i = 0; i < n; ++i) x[i] += part[i];
  }
  if (recipe.noise.kind != NoiseKind::none) {
    const auto nseed = derive_seed(recipe.seed, "noise");
    std::vector<double> noise;
    if (recipe.noise.kind == NoiseKind::white) {
      Rng rng(nseed);
      noise.resize(n);
      for (auto& v : noise) v = rng.normal();
    } else {
      noise = gen_one_over_f(recipe.duration, recipe.fs, nseed, recipe.noise.exponent).samples;
    }
    double ps = 0.0, pn = 0.0;
    for (std::size_t i = 0; i < n; ++i) ps += x[i] * x[i], pn += noise[i] * noise[i];
    ps /= static_cast<double>(n);
    pn /= static_cast<double>(n);
    // with no signal, the noise is left at unit variance
    const double target = ps > 0 ? ps * std::pow(10.0, recipe.noise.level_db / 10.0) : 1.0;
    const double s = pn > 0 ? std::sqrt(target / pn) : 0.0;
    for (std::size_t i = 0; i < n; ++i) x[i] += s * noise[i];
  }
  return make_signal(std::move(x), recipe.fs, "sim");
}

}  // namespace bispec::sim
