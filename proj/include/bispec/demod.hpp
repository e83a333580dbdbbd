#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bispec/common.hpp"

namespace bispec {

/// Uniformly sampled real time series.
struct Signal {
  std::vector<double> samples;
  double fs = 0.0;
  std::string id;

  double duration() const { return fs > 0 ? static_cast<double>(samples.size()) / fs : 0.0; }
  /// Throws Error on a non-positive rate or non-finite samples.
  void validate() const;
};

/// Builds a validated Signal.
Signal make_signal(std::vector<double> samples, double fs, std::string id = {});

enum class WindowKind { gaussian, hann };

std::string to_string(WindowKind kind);
WindowKind window_kind_from_string(const std::string& name);

/// One analysis band. `bandwidth` is the full width at half maximum of the
/// window's amplitude response.
struct BandSpec {
  double center = 0.0;
  double bandwidth = 0.0;
  WindowKind window = WindowKind::gaussian;
  int index = 0;

  double lower_edge() const { return center - bandwidth / 2; }
  double upper_edge() const { return center + bandwidth / 2; }
};

/// Band-by-frame complex demodulates of one signal.
///
/// values(k, m) = sum_{n=-h}^{h} w_k[n] x[c_m + n] exp(-2 pi i f_k n / fs), where
/// c_m = first_center + m * hop is the window's centre sample. The phase is
/// referenced to the window centre, so a component exp(2 pi i f t) appears as
/// exp(2 pi i f c_m / fs) times the window gain: the carrier is retained and
/// cancels from matched triple products.
struct Decomposition {
  Grid2<cdouble> values;
  std::vector<BandSpec> bands;
  std::size_t hop = 1;
  double source_fs = 0.0;
  std::int64_t first_center = 0;

  std::size_t n_bands() const { return values.rows(); }
  std::size_t n_frames() const { return values.cols(); }
  double frame_rate() const { return source_fs / static_cast<double>(hop); }
  std::int64_t center_sample(std::size_t m) const {
    return first_center + static_cast<std::int64_t>(m * hop);
  }
  /// Value with the band's carrier removed, i.e. referenced to absolute time.
  cdouble baseband(std::size_t band, std::size_t frame) const;
};

/// Bands at f_min, f_min + bw/2, ... up to f_max. Bands whose upper edge
/// would pass Nyquist are dropped.
std::vector<BandSpec> design_bank(double fs, double f_min, double f_max, double bandwidth,
                                  WindowKind kind = WindowKind::gaussian);

/// Symmetric unit-energy analysis window of odd length.
///
/// gaussian: the autocorrelation of a truncated gaussian, so the transform is
/// non-negative; support +-4 sigma_t. hann: 2*round(fs/bw)+1 samples.
std::vector<double> window_samples(WindowKind kind, double bandwidth, double fs);

/// Normalized autocorrelation of a band's window at lags 0, hop, 2*hop, ...
/// (entry 0 is 1). Used to count effectively independent frames.
std::vector<double> window_lag_correlation(const BandSpec& band, double fs, std::size_t hop);

/// Frame step honouring the anti-aliasing contract frame_rate >= oversample * f_top.
std::size_t default_hop(double fs, double f_top, double oversample = 4.0);

Decomposition demodulate(const Signal& signal, std::span<const BandSpec> bands, std::size_t hop);

/// Direct (non-FFT) evaluation of a single demodulate value, for checking.
cdouble demodulate_direct(const Signal& signal, const BandSpec& band, std::int64_t center);

}  // namespace bispec
