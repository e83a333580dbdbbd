#include "bispec/demod.hpp"

#include <algorithm>
#include <cmath>

#include "bispec/fft.hpp"

namespace bispec {

void Signal::validate() const {
  if (!(fs > 0.0) || !std::isfinite(fs)) throw Error("signal: sampling rate must be positive");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i])) {
      throw Error("signal: non-finite sample at index " + std::to_string(i));
    }
  }
}

Signal make_signal(std::vector<double> samples, double fs, std::string id) {
  Signal s{std::move(samples), fs, std::move(id)};
  s.validate();
  return s;
}

std::string to_string(WindowKind kind) {
  switch (kind) {
    case WindowKind::gaussian: return "gaussian";
    case WindowKind::hann: return "hann";
  }
  throw Error("unsupported window kind");
}

WindowKind window_kind_from_string(const std::string& name) {
  if (name == "gaussian") return WindowKind::gaussian;
  if (name == "hann") return WindowKind::hann;
  throw Error("unsupported window kind '" + name + "'");
}

cdouble Decomposition::baseband(std::size_t band, std::size_t frame) const {
  const double t = static_cast<double>(center_sample(frame)) / source_fs;
  return values(band, frame) * std::polar(1.0, -kTwoPi * bands[band].center * t);
}

std::vector<BandSpec> design_bank(double fs, double f_min, double f_max, double bandwidth,
                                  WindowKind kind) {
  if (!(fs > 0.0)) throw Error("design_bank: fs must be positive");
  if (!(bandwidth > 0.0)) throw Error("design_bank: bandwidth must be positive");
  if (bandwidth >= fs) throw Error("design_bank: bandwidth >= fs is degenerate");
  if (!(f_min >= 0.0) || !(f_max > f_min)) throw Error("design_bank: empty frequency range");
  if (f_max > fs / 2 + 1e-12) throw Error("design_bank: band exceeds Nyquist");

  const double spacing = bandwidth / 2;
  const double nyquist = fs / 2;
  std::vector<BandSpec> bank;
  // integer stepping avoids accumulated drift in the centres
  const auto count = static_cast<std::size_t>(std::floor((f_max - f_min) / spacing + 1e-9)) + 1;
  for (std::size_t i = 0; i < count; ++i) {
    const double c = f_min + static_cast<double>(i) * spacing;
    if (c + bandwidth / 2 > nyquist + 1e-12) break;
    bank.push_back({c, bandwidth, kind, static_cast<int>(bank.size())});
  }
  if (bank.empty()) throw Error("design_bank: band exceeds Nyquist");
  return bank;
}

std::vector<double> window_samples(WindowKind kind, double bandwidth, double fs) {
  if (!(bandwidth > 0.0) || !(fs > 0.0)) {
    throw Error("window_samples: bandwidth and fs must be positive");
  }
  std::vector<double> w;
  switch (kind) {
    case WindowKind::gaussian: {
      // amplitude response exp(-f^2 / (2 sigma_f^2)) with FWHM == bandwidth
      const double sigma_f = bandwidth / (2.0 * std::sqrt(2.0 * std::log(2.0)));
      const double sigma_t = fs / (kTwoPi * sigma_f);  // samples
      const double sigma_u = sigma_t / std::sqrt(2.0);
      const auto hu = std::max<std::int64_t>(1, std::llround(2.0 * sigma_t));
      std::vector<double> u(static_cast<std::size_t>(2 * hu + 1));
      for (std::int64_t n = -hu; n <= hu; ++n) {
        const double z = static_cast<double>(n) / sigma_u;
        u[static_cast<std::size_t>(n + hu)] = std::exp(-0.5 * z * z);
      }
      // w = u (*) u has a transform |U|^2 >= 0
      const std::size_t lu = u.size();
      w.assign(2 * lu - 1, 0.0);
      for (std::size_t i = 0; i < lu; ++i) {
        for (std::size_t j = 0; j < lu; ++j) w[i + j] += u[i] * u[lu - 1 - j];
      }
      break;
    }
    case WindowKind::hann: {
      const auto half = std::max<std::int64_t>(1, std::llround(fs / bandwidth));
      const std::size_t len = static_cast<std::size_t>(2 * half + 1);
      w.resize(len);
      for (std::size_t n = 0; n < len; ++n) {
        const double s = std::sin(kPi * static_cast<double>(n) / static_cast<double>(len - 1));
        w[n] = s * s;
      }
      break;
    }
    default:
      throw Error("window_samples: unsupported window kind");
  }
  double energy = 0.0;
  for (double v : w) energy += v * v;
  const double scale = 1.0 / std::sqrt(energy);
  for (double& v : w) v *= scale;
  // enforce exact symmetry
  for (std::size_t i = 0, j = w.size() - 1; i < j; ++i, --j) w[j] = w[i];
  return w;
}

std::vector<double> window_lag_correlation(const BandSpec& band, double fs, std::size_t hop) {
  if (hop < 1) throw Error("window_lag_correlation: hop must be >= 1");
  const auto w = window_samples(band.window, band.bandwidth, fs);
  std::vector<double> out;
  for (std::size_t lag = 0; lag < w.size(); lag += hop) {
    double acc = 0.0;
    for (std::size_t n = 0; n + lag < w.size(); ++n) acc += w[n] * w[n + lag];
    out.push_back(acc);  // unit energy, so acc(0) == 1
  }
  return out;
}

std::size_t default_hop(double fs, double f_top, double oversample) {
  if (!(f_top > 0.0) || !(oversample > 0.0)) return 1;
  const auto hop = static_cast<std::size_t>(std::floor(fs / (oversample * f_top)));
  return std::max<std::size_t>(1, hop);
}

Decomposition demodulate(const Signal& signal, std::span<const BandSpec> bands, std::size_t hop) {
  signal.validate();
  if (hop < 1) throw Error("demodulate: hop must be >= 1");
  if (bands.empty()) throw Error("demodulate: empty band list");

  const double fs = signal.fs;
  const auto n = static_cast<std::int64_t>(signal.samples.size());

  std::vector<std::vector<double>> windows;
  windows.reserve(bands.size());
  std::int64_t max_half = 0;
  for (const auto& b : bands) {
    windows.push_back(window_samples(b.window, b.bandwidth, fs));
    max_half = std::max<std::int64_t>(max_half, static_cast<std::int64_t>(windows.back().size() / 2));
  }
  const std::int64_t longest = 2 * max_half + 1;
  if (n < 2 * longest) {
    throw Error("demodulate: signal shorter than twice the analysis window (" + std::to_string(n) +
                " < " + std::to_string(2 * longest) + " samples)");
  }

  const auto h = static_cast<std::int64_t>(hop);
  const std::int64_t first = ((max_half + h - 1) / h) * h;
  const std::int64_t last_allowed = n - 1 - max_half;
  const std::size_t frames = static_cast<std::size_t>((last_allowed - first) / h + 1);

  Decomposition out;
  out.values = Grid2<cdouble>(bands.size(), frames);
  out.bands.assign(bands.begin(), bands.end());
  out.hop = hop;
  out.source_fs = fs;
  out.first_center = first;

  const std::size_t p = fft::good_size(static_cast<std::size_t>(n + longest));
  std::vector<cdouble> xpad(p, 0.0);
  std::copy(signal.samples.begin(), signal.samples.end(), xpad.begin());
  const auto X = fft::forward(xpad);

  std::vector<cdouble> kernel(p);
  std::vector<cdouble> prod(p);
  for (std::size_t k = 0; k < bands.size(); ++k) {
    const auto& w = windows[k];
    const auto half = static_cast<std::int64_t>(w.size() / 2);
    // y[c] = sum_j K[j] x[c + h - j] with K[j] = w[j] exp(+2 pi i f (j - h)/fs)
    std::fill(kernel.begin(), kernel.end(), cdouble{});
    for (std::int64_t j = 0; j < static_cast<std::int64_t>(w.size()); ++j) {
      const double phase = kTwoPi * bands[k].center * static_cast<double>(j - half) / fs;
      kernel[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] * std::polar(1.0, phase);
    }
    const auto K = fft::forward(kernel);
    for (std::size_t i = 0; i < p; ++i) prod[i] = X[i] * K[i];
    const auto z = fft::inverse(prod);
    cdouble* row = out.values.row(k);
    for (std::size_t m = 0; m < frames; ++m) {
      const std::int64_t c = first + static_cast<std::int64_t>(m) * h;
      row[m] = z[static_cast<std::size_t>(c + half)];
    }
  }
  return out;
}

cdouble demodulate_direct(const Signal& signal, const BandSpec& band, std::int64_t center) {
  const auto w = window_samples(band.window, band.bandwidth, signal.fs);
  const auto half = static_cast<std::int64_t>(w.size() / 2);
  cdouble acc{};
  for (std::int64_t j = -half; j <= half; ++j) {
    const std::int64_t idx = center + j;
    if (idx < 0 || idx >= static_cast<std::int64_t>(signal.samples.size())) continue;
    const double phase = -kTwoPi * band.center * static_cast<double>(j) / signal.fs;
    acc += w[static_cast<std::size_t>(j + half)] * signal.samples[static_cast<std::size_t>(idx)] *
           std::polar(1.0, phase);
  }
  return acc;
}

}  // namespace bispec
