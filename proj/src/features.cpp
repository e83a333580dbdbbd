#include "bispec/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bispec/demod.hpp"
#include "feature_defaults.hpp"

namespace bispec {

namespace {

constexpr double kTol = 1e-9;

double require_number(const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key) || !doc[key].is_number()) {
    throw Error(std::string("feature thresholds: missing number '") + key + "'");
  }
  return doc[key].get<double>();
}

double grid_step(const std::vector<double>& f) {
  double step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double d = std::abs(f[i] - f[i - 1]);
    if (d > kTol) step = std::min(step, d);
  }
  return step;
}

// Distance from f to the nearest multiple of f0, and that multiple.
std::pair<double, long> harmonic_offset(double f, double f0) {
  const long n = std::lround(f / f0);
  return {std::abs(f - static_cast<double>(n) * f0), n};
}

// Time-domain transform of the SO-frequency smoothing kernel of a cell, as a
// function of lag, normalized to 1 at zero lag. The SO leg enters once and the
// other two legs through their product.
std::vector<double> kernel_lag_profile(const BandSpec& so_leg, const BandSpec& a, const BandSpec& b, double rate,
                                       std::size_t max_lag) {
  const double top = std::max({so_leg.bandwidth, a.bandwidth, b.bandwidth});
  const double fs = std::max(rate, 40.0 * top);
  const auto w1 = window_samples(so_leg.window, so_leg.bandwidth, fs);
  const auto w2 = window_samples(a.window, a.bandwidth, fs);
  const auto w3 = window_samples(b.window, b.bandwidth, fs);
  const auto h1 = static_cast<long>(w1.size() / 2);
  const auto h2 = static_cast<long>(std::min(w2.size(), w3.size()) / 2);
  const auto at = [](const std::vector<double>& w, long o) {
    const long i = o + static_cast<long>(w.size() / 2);
    return i < 0 || i >= static_cast<long>(w.size()) ? 0.0 : w[static_cast<std::size_t>(i)];
  };
  const auto corr = [&](long m) {
    double acc = 0.0;
    for (long o = -h1; o <= h1; ++o) acc += at(w1, o) * at(w2, o + m) * at(w3, o + m);
    return acc;
  };
  const double zero = corr(0);
  std::vector<double> out(max_lag + 1, 0.0);
  const double scale = fs / rate;  // kernel samples per output lag step
  for (std::size_t k = 0; k <= max_lag; ++k) {
    const double x = static_cast<double>(k) * scale;
    const auto m = static_cast<long>(std::floor(x));
    if (m > h1 + h2) break;
    const double frac = x - static_cast<double>(m);
    out[k] = ((1.0 - frac) * corr(m) + frac * corr(m + 1)) / zero;
  }
  return out;
}

}  // namespace

std::string to_string(Region r) {
  switch (r) {
    case Region::unassigned: return "unassigned";
    case Region::outside: return "outside";
    case Region::inside_so: return "inside_so";
    case Region::inside_fo: return "inside_fo";
    case Region::transition: return "transition";
  }
  return "unassigned";
}

std::size_t RegionPartition::count(Region r) const {
  return static_cast<std::size_t>(std::count(labels.data().begin(), labels.data().end(), r));
}

FeatureThresholds FeatureThresholds::defaults() {
  static const FeatureThresholds t = thresholds_from_json(nlohmann::json::parse(detail::kFeatureDefaultsJson));
  return t;
}

FeatureThresholds thresholds_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw Error("feature thresholds: expected an object");
  FeatureThresholds t;
  t.version = static_cast<int>(require_number(doc, "version"));
  t.outside_min = require_number(doc, "outside_min");
  t.transition_ratio_max = require_number(doc, "transition_ratio_max");
  t.transient_match = require_number(doc, "transient_match");
  t.lattice_min = require_number(doc, "lattice_min");
  t.inside_fo_min = require_number(doc, "inside_fo_min");
  t.phase_gate = require_number(doc, "phase_gate");
  t.isolation_margin = require_number(doc, "isolation_margin");
  return t;
}

nlohmann::json to_json(const FeatureThresholds& t) {
  return {{"version", t.version},
          {"outside_min", t.outside_min},
          {"transition_ratio_max", t.transition_ratio_max},
          {"transient_match", t.transient_match},
          {"lattice_min", t.lattice_min},
          {"inside_fo_min", t.inside_fo_min},
          {"phase_gate", t.phase_gate},
          {"isolation_margin", t.isolation_margin}};
}

nlohmann::json to_json(const FeatureReport& r) {
  const auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["outside_score"] = opt(r.outside_score);
  j["inside_so_score"] = opt(r.inside_so_score);
  j["inside_fo_score"] = opt(r.inside_fo_score);
  j["transition_score"] = opt(r.transition_score);
  j["lattice_score"] = opt(r.lattice_score);
  if (r.delay) {
    j["delay_tau"] = {{"value", r.delay->tau}, {"uncertainty", r.delay->uncertainty}};
  } else {
    j["delay_tau"] = nullptr;
  }
  auto flags = nlohmann::json::array();
  if (r.pac_like) flags.push_back("pac_like");
  if (r.transient_like) flags.push_back("transient_like");
  if (r.fo_self_consistent) flags.push_back("fo_self_consistent");
  j["verdict_flags"] = flags;
  j["concurrent"] = r.concurrent;
  return j;
}

RegionPartition partition(const Bicoherence& bic, FreqRange so_range, FreqRange fo_range) {
  if (!(so_range.lo < so_range.hi) || !(fo_range.lo < fo_range.hi)) {
    throw Error("partition: ranges must have lo < hi");
  }
  if (!(so_range.hi < fo_range.lo)) throw Error("partition: so_range must lie below fo_range without overlap");

  RegionPartition p;
  p.so = so_range;
  p.fo = fo_range;
  p.freq1 = bic.freq1;
  p.freq2 = bic.freq2;
  p.labels = Grid2<Region>(bic.freq1.size(), bic.freq2.size(), Region::unassigned);

  const double width = so_range.hi - so_range.lo;
  const auto so = [&](double f) { return so_range.contains(f); };
  const auto fo = [&](double f) { return fo_range.contains(f); };
  // between the two ranges, no further than one SO bandwidth above the SO range
  const auto gap = [&](double f) {
    return f > so_range.hi + kTol && f < fo_range.lo - kTol && f <= so_range.hi + width + kTol;
  };

  for (std::size_t r = 0; r < p.freq1.size(); ++r) {
    const double a = p.freq1[r];
    for (std::size_t c = 0; c < p.freq2.size(); ++c) {
      const double b = p.freq2[c];
      if (a < -kTol || b < -kTol) continue;
      Region label = Region::unassigned;
      if ((so(a) && fo(b)) || (fo(a) && so(b))) {
        label = Region::outside;
      } else if (so(a) && so(b)) {
        label = Region::inside_so;
      } else if (fo(a) && fo(b)) {
        label = Region::inside_fo;
      } else if ((gap(a) && fo(b)) || (fo(a) && gap(b))) {
        label = Region::transition;
      }
      p.labels(r, c) = label;
    }
  }
  return p;
}

FeatureReport score_regions(const Bicoherence& bic, const RegionPartition& part,
                            const FeatureThresholds& thresholds) {
  if (part.labels.rows() != bic.magnitude.rows() || part.labels.cols() != bic.magnitude.cols()) {
    throw Error("score_regions: partition does not match the grid");
  }
  const double f0 = 0.5 * (part.so.lo + part.so.hi);
  const auto near_harmonic = [&](double f) {
    if (!(thresholds.isolation_margin > 0.0)) return false;
    const auto [d, n] = harmonic_offset(f, f0);
    return n >= 1 && d <= thresholds.isolation_margin;
  };

  double sum[5] = {}, count[5] = {};
  for (std::size_t r = 0; r < part.labels.rows(); ++r) {
    for (std::size_t c = 0; c < part.labels.cols(); ++c) {
      const Region label = part.labels(r, c);
      if (label == Region::unassigned || !bic.valid(r, c)) continue;
      if (label == Region::inside_fo && (near_harmonic(part.freq1[r]) || near_harmonic(part.freq2[c]))) continue;
      const auto i = static_cast<std::size_t>(label);
      sum[i] += bic.magnitude(r, c);
      count[i] += 1.0;
    }
  }
  const auto mean = [&](Region label) -> std::optional<double> {
    const auto i = static_cast<std::size_t>(label);
    if (count[i] == 0.0) return std::nullopt;
    return sum[i] / count[i];
  };

  FeatureReport report;
  report.outside_score = mean(Region::outside);
  report.inside_so_score = mean(Region::inside_so);
  report.inside_fo_score = mean(Region::inside_fo);
  report.transition_score = mean(Region::transition);
  apply_verdicts(report, part, thresholds);
  return report;
}

void apply_verdicts(FeatureReport& report, const RegionPartition& part, const FeatureThresholds& thresholds) {
  const double so_period = 2.0 / (part.so.lo + part.so.hi);
  report.concurrent = !report.delay || std::abs(report.delay->tau) < 0.5 * so_period;

  report.fo_self_consistent = report.inside_fo_score && *report.inside_fo_score >= thresholds.inside_fo_min;

  const bool strong = report.outside_score && *report.outside_score >= thresholds.outside_min;
  const bool contained = !report.transition_score ||
                         *report.transition_score <= thresholds.transition_ratio_max * *report.outside_score;
  report.pac_like = strong && contained && report.concurrent;

  report.transient_like = false;
  if (report.outside_score && report.transition_score && report.lattice_score) {
    const double o = *report.outside_score, t = *report.transition_score;
    const bool matched = o > 0.0 && t > 0.0 && std::abs(t - o) <= thresholds.transient_match * std::max(o, t);
    report.transient_like = matched && *report.lattice_score >= thresholds.lattice_min;
  }
}

double lattice_score(const Bicoherence& bic, double fundamental) {
  const double step = std::max(grid_step(bic.freq1), grid_step(bic.freq2));
  if (!(fundamental > 0.0) || !std::isfinite(step) || step > fundamental / 2 + kTol) {
    throw Error("lattice_score: fundamental below grid resolution");
  }
  const double s1 = grid_step(bic.freq1), s2 = grid_step(bic.freq2);

  struct Cell { double radius, value; };
  std::vector<Cell> on, off;
  for (std::size_t r = 0; r < bic.freq1.size(); ++r) {
    const double a = bic.freq1[r];
    if (a <= kTol) continue;
    const auto [d1, n1] = harmonic_offset(a, fundamental);
    for (std::size_t c = 0; c < bic.freq2.size(); ++c) {
      const double b = bic.freq2[c];
      if (b <= kTol || !bic.valid(r, c)) continue;
      const auto [d2, n2] = harmonic_offset(b, fundamental);
      const Cell cell{std::hypot(a, b), bic.uncorrected_magnitude(r, c)};
      if (n1 >= 1 && n2 >= 1 && d1 <= s1 / 2 + kTol && d2 <= s2 / 2 + kTol) {
        on.push_back(cell);
      } else if (d1 >= fundamental / 4 - kTol || d2 >= fundamental / 4 - kTol) {
        off.push_back(cell);
      }
    }
  }
  if (on.empty()) throw Error("lattice_score: no lattice cell is valid");

  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0, on_sum = 0.0;
  for (const auto& c : on) {
    rmin = std::min(rmin, c.radius);
    rmax = std::max(rmax, c.radius);
    on_sum += c.value;
  }
  double off_sum = 0.0;
  std::size_t off_n = 0;
  for (const auto& c : off) {
    if (c.radius < rmin - kTol || c.radius > rmax + kTol) continue;
    off_sum += c.value;
    ++off_n;
  }
  if (off_n == 0) throw Error("lattice_score: no off-lattice cell in the annulus");
  const double off_mean = std::max(off_sum / static_cast<double>(off_n), 1e-12);
  return on_sum / static_cast<double>(on.size()) / off_mean;
}

ImpulseResponse impulse_response(const BispecGrid& grid, const RegionPartition& part) {
  if (part.labels.rows() != grid.B.rows() || part.labels.cols() != grid.B.cols()) {
    throw Error("impulse_response: partition does not match the grid");
  }
  // SO on axis 1 when the grid has it there, otherwise the transposed block
  std::vector<std::size_t> so_idx, fo_idx;
  bool transposed = false;
  // cells whose smoothing kernel reaches the SO range also carry SO power
  const auto collect = [&](const std::vector<double>& fs, const std::vector<double>& ff,
                           const std::vector<BandSpec>& legs) {
    so_idx.clear();
    fo_idx.clear();
    const double reach = legs.empty() ? 0.0 : legs.front().bandwidth;
    const FreqRange so{std::max(0.0, part.so.lo - reach), part.so.hi + reach};
    for (std::size_t i = 0; i < fs.size(); ++i) if (so.contains(fs[i])) so_idx.push_back(i);
    for (std::size_t i = 0; i < ff.size(); ++i) if (part.fo.contains(ff[i])) fo_idx.push_back(i);
  };
  const auto usable = [&]() {
    for (auto i : so_idx) {
      for (auto j : fo_idx) {
        const std::size_t r = transposed ? j : i, c = transposed ? i : j;
        if (grid.valid(r, c) && part.labels(r, c) == Region::outside) return true;
      }
    }
    return false;
  };
  collect(grid.freq1, grid.freq2, grid.bands1);
  if (!usable()) {
    transposed = true;
    collect(grid.freq2, grid.freq1, grid.bands2);
    if (!usable()) throw Error("impulse_response: SO support is empty or fully masked");
  }
  const auto& so_freq = transposed ? grid.freq2 : grid.freq1;
  const auto& fo_freq = transposed ? grid.freq1 : grid.freq2;
  const auto value = [&](std::size_t i, std::size_t j) -> cdouble {
    const std::size_t r = transposed ? j : i, c = transposed ? i : j;
    if (!grid.valid(r, c)) return {};
    return grid.B(r, c);
  };

  std::vector<double> so_f;
  for (auto i : so_idx) so_f.push_back(so_freq[i]);
  double dw = grid_step(so_f);
  if (!std::isfinite(dw)) dw = 1.0;
  const double frame = grid.frame_rate > 0.0 ? 1.0 / grid.frame_rate : 1e-3;
  const double step = std::min(frame, 1e-3);
  const double span = 0.5 / dw;  // unambiguous for the SO grid spacing
  const auto n_tau = static_cast<std::size_t>(std::floor(span / step));

  ImpulseResponse out;
  for (auto j : fo_idx) out.fo_freq.push_back(fo_freq[j]);
  for (std::size_t t = 0; t <= 2 * n_tau; ++t) {
    out.tau.push_back((static_cast<double>(t) - static_cast<double>(n_tau)) * step);
  }
  out.I = Grid2<cdouble>(out.tau.size(), fo_idx.size());
  out.profile.assign(out.tau.size(), 0.0);
  for (std::size_t t = 0; t < out.tau.size(); ++t) {
    double acc = 0.0;
    for (std::size_t j = 0; j < fo_idx.size(); ++j) {
      cdouble sum{};
      for (auto i : so_idx) {
        sum += value(i, fo_idx[j]) * std::polar(1.0, 2 * M_PI * so_freq[i] * out.tau[t]);
      }
      out.I(t, j) = sum * dw;
      acc += std::abs(out.I(t, j));
    }
    out.profile[t] = acc / static_cast<double>(fo_idx.size());
  }

  // |I| carries the lag transform of the smoothing kernel, which pulls the
  // peak toward zero; divide it out where it is not too small
  const auto& bs = transposed ? grid.bands2 : grid.bands1;
  const auto& bo = transposed ? grid.bands1 : grid.bands2;
  if (bs.empty() || bo.empty() || grid.bands3.empty()) throw Error("impulse_response: grid has no band metadata");
  const auto kern = kernel_lag_profile(bs.front(), bo.front(), grid.bands3.front(), 1.0 / step, n_tau);
  std::size_t peak = n_tau;
  double best = -1.0;
  for (std::size_t t = 0; t < out.tau.size(); ++t) {
    const std::size_t lag = t > n_tau ? t - n_tau : n_tau - t;
    if (kern[lag] < 0.25) {
      out.profile[t] = 0.0;
      continue;
    }
    out.profile[t] /= kern[lag];
    if (out.profile[t] > best) best = out.profile[t], peak = t;
  }
  double tau = out.tau[peak];
  if (peak > 0 && peak + 1 < out.profile.size() && out.profile[peak - 1] > 0.0 && out.profile[peak + 1] > 0.0) {
    const double ym = out.profile[peak - 1], y0 = out.profile[peak], yp = out.profile[peak + 1];
    const double den = ym - 2 * y0 + yp;
    if (den < 0.0) tau += 0.5 * (ym - yp) / den * step;
  }
  // B carries exp(+i w1 d) when the FO envelope lags by d, so I peaks at -d
  out.delay = {-tau, frame};
  return out;
}

PhaseContrast peak_phase_contrast(const Bicoherence& bic, double theta, double gamma,
                                  const FeatureThresholds& thresholds) {
  const auto nearest = [](const std::vector<double>& f, double x, const char* what) {
    const double half = grid_step(f) / 2;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (std::abs(f[i] - x) <= (std::isfinite(half) ? half : 0.0) + kTol) return i;
    }
    throw Error(std::string("peak_phase_contrast: ") + what + " is not on the grid");
  };
  const auto r = nearest(bic.freq1, theta, "theta");
  const auto lower = nearest(bic.freq2, gamma - theta, "gamma - theta");
  const auto centre = nearest(bic.freq2, gamma, "gamma");
  if (!bic.valid(r, lower) || !bic.valid(r, centre)) throw Error("peak_phase_contrast: peak cell is masked");
  PhaseContrast out;
  out.radians = std::abs(std::arg(bic.beta(r, lower) * std::conj(bic.beta(r, centre))));
  out.reliable = bic.magnitude(r, lower) >= thresholds.phase_gate && bic.magnitude(r, centre) >= thresholds.phase_gate;
  return out;
}

Analysis analyze(const Bicoherence& bic, const BispecGrid* grid, FreqRange so_range, FreqRange fo_range,
                 const AnalyzeOptions& options) {
  Analysis out;
  out.partition = partition(bic, so_range, fo_range);
  out.report = score_regions(bic, out.partition, options.thresholds);
  const double f0 = options.fundamental.value_or(0.5 * (so_range.lo + so_range.hi));
  try {
    out.report.lattice_score = lattice_score(bic, f0);
  } catch (const Error&) {
    out.report.lattice_score.reset();
  }
  const auto& o = out.report.outside_score;
  if (grid && o && *o >= options.thresholds.outside_min) {
    out.impulse = impulse_response(*grid, out.partition);
    out.report.delay = out.impulse->delay;
  }
  apply_verdicts(out.report, out.partition, options.thresholds);
  return out;
}

}  // namespace bispec
