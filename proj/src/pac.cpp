#include "bispec/pac.hpp"

#include <algorithm>
#include <cmath>

namespace bispec {

namespace {

BispecGrid empty_grid(std::size_t nr, std::size_t nc) {
  BispecGrid g;
  g.B = Grid2<cdouble>(nr, nc);
  g.A = Grid2<double>(nr, nc);
  g.eps = Grid2<double>(nr, nc, 1.0);
  g.norm12 = Grid2<double>(nr, nc);
  g.norm3 = Grid2<double>(nr, nc);
  g.state = Grid2<CellState>(nr, nc, CellState::outside_domain);
  g.leg3 = Grid2<std::int32_t>(nr, nc, -1);
  g.domain = Domain::full_quadrant;
  return g;
}

double max_bandwidth(std::span<const BandSpec> bands) {
  double m = 0.0;
  for (const auto& b : bands) m = std::max(m, b.bandwidth);
  return m;
}

double min_bandwidth(std::span<const BandSpec> bands) {
  double m = bands.empty() ? 0.0 : bands.front().bandwidth;
  for (const auto& b : bands) m = std::min(m, b.bandwidth);
  return m;
}

void check_regime(std::span<const BandSpec> theta, std::span<const BandSpec> gamma) {
  if (theta.empty() || gamma.empty()) throw Error("pac: empty theta or gamma band list");
  if (!(max_bandwidth(theta) < min_bandwidth(gamma))) {
    throw Error("pac: every theta bandwidth must be below every gamma bandwidth");
  }
}

std::size_t pac_hop(const Signal& signal, std::span<const BandSpec> theta, double gamma_top,
                    const PacOptions& options) {
  if (options.hop) {
    if (*options.hop < 1) throw Error("pac: hop must be >= 1");
    return *options.hop;
  }
  double theta_top = 0.0;
  for (const auto& b : theta) theta_top = std::max(theta_top, std::abs(b.center));
  return default_hop(signal.fs, gamma_top + theta_top / 2, options.oversample > 0 ? options.oversample : 4.0);
}

// Fills the cells (rows[i], col) of `grid` with phase-power sums for one
// gamma band. G holds the theta demodulates of the signal.
void phpc_column(const Signal& signal, const Decomposition& G, std::span<const std::size_t> rows,
                 const BandSpec& gamma, std::size_t col, bool use_power, BispecGrid& grid) {
  const auto dg = demodulate(signal, std::span(&gamma, 1), G.hop);
  std::vector<double> env(dg.n_frames());
  for (std::size_t m = 0; m < env.size(); ++m) {
    const double a = std::abs(dg.values(0, m));
    env[m] = use_power ? a * a : a;
  }
  const double frame_rate = dg.frame_rate();
  Signal envelope{std::move(env), frame_rate, "envelope"};

  std::vector<BandSpec> thetas;
  for (auto r : rows) thetas.push_back(G.bands[r]);
  // Q frame q sits at envelope index Q.first_center + q, i.e. signal sample
  // dg.first_center + (Q.first_center + q) * hop, so its phase is already
  // referenced to absolute time like G.
  const auto Q = demodulate(envelope, thetas, 1);

  const auto hop = static_cast<std::int64_t>(G.hop);
  const std::int64_t q_first = dg.first_center + Q.first_center * hop;
  const std::int64_t q_last = q_first + static_cast<std::int64_t>(Q.n_frames() - 1) * hop;
  const std::int64_t g_last = G.center_sample(G.n_frames() - 1);
  const std::int64_t start = std::max(q_first, G.first_center);
  const std::int64_t stop = std::min(q_last, g_last);
  if (stop < start) throw Error("pac: signal too short for the theta window at this frame rate");
  const auto count = static_cast<std::size_t>((stop - start) / hop + 1);
  const auto g_off = static_cast<std::size_t>((start - G.first_center) / hop);
  const auto q_off = static_cast<std::size_t>((start - q_first) / hop);

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::size_t r = rows[i];
    const cdouble* gv = G.values.row(r) + g_off;
    const cdouble* qv = Q.values.row(i) + q_off;
    CellSums sums;
    for (std::size_t m = 0; m < count; ++m) sums.add(gv[m], qv[m]);
    const auto ag = window_lag_correlation(G.bands[r], G.source_fs, G.hop);
    const auto aq = window_lag_correlation(thetas[i], frame_rate, 1);
    const std::vector<double>* acfs[] = {&ag, &aq};
    store_cell(grid, r, col, sums, correlated_frames(acfs));
    grid.n_frames = grid.n_frames == 0 ? count : std::min(grid.n_frames, count);
  }
}

void finish(PacGrid& out, const PacOptions& options) {
  out.coherence = normalize(out.sums, options.normalization);
  if (options.bias_correct && options.normalization == Normalization::magnitude_sum) {
    out.coherence = bias_correct(out.coherence, out.sums);
  }
}

}  // namespace

PacGrid phase_power_coherence(const Signal& signal, std::span<const BandSpec> theta_bands,
                              std::span<const BandSpec> gamma_bands, const PacOptions& options) {
  signal.validate();
  check_regime(theta_bands, gamma_bands);
  double gamma_top = 0.0;
  for (const auto& b : gamma_bands) {
    if (b.upper_edge() > signal.fs / 2 + 1e-9) throw Error("pac: gamma band exceeds Nyquist");
    gamma_top = std::max(gamma_top, b.upper_edge());
  }
  const auto hop = pac_hop(signal, theta_bands, gamma_top, options);
  const auto G = demodulate(signal, theta_bands, hop);

  PacGrid out;
  out.theta_bands.assign(theta_bands.begin(), theta_bands.end());
  out.gamma_bands.assign(gamma_bands.begin(), gamma_bands.end());
  out.scaling = PacScaling::fixed;
  out.sums = empty_grid(theta_bands.size(), gamma_bands.size());
  auto& g = out.sums;
  for (const auto& b : theta_bands) g.freq1.push_back(b.center);
  for (const auto& b : gamma_bands) g.freq2.push_back(b.center);
  g.bands1 = out.theta_bands;
  g.bands2 = out.gamma_bands;
  g.frame_rate = G.frame_rate();
  g.kind = {EstimatorVariant::NBB, max_bandwidth(theta_bands), min_bandwidth(gamma_bands), theta_bands.front().window};

  std::vector<std::size_t> rows(theta_bands.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  for (std::size_t c = 0; c < gamma_bands.size(); ++c) {
    phpc_column(signal, G, rows, gamma_bands[c], c, options.use_power, g);
  }
  finish(out, options);
  return out;
}

BispecGrid pac_as_nbb(const Signal& signal, std::span<const BandSpec> theta_bands,
                      std::span<const BandSpec> gamma_bands, const PacOptions& options) {
  signal.validate();
  check_regime(theta_bands, gamma_bands);
  const double bw_gamma = gamma_bands.front().bandwidth;
  const double bw_theta = theta_bands.front().bandwidth;
  for (const auto& b : gamma_bands) {
    if (std::abs(b.bandwidth - bw_gamma) > 1e-9) throw Error("pac_as_nbb: gamma bands must share one bandwidth");
  }
  for (const auto& b : theta_bands) {
    if (std::abs(b.bandwidth - bw_theta) > 1e-9) throw Error("pac_as_nbb: theta bands must share one bandwidth");
  }
  double theta_top = 0.0, gamma_top = 0.0;
  for (const auto& b : theta_bands) theta_top = std::max(theta_top, std::abs(b.center));
  for (const auto& b : gamma_bands) gamma_top = std::max(gamma_top, b.upper_edge());
  const auto hop = pac_hop(signal, theta_bands, gamma_top, options);

  const double bw1 = bw_theta / std::sqrt(2.0);
  std::vector<BandSpec> leg1;
  for (const auto& b : theta_bands) leg1.push_back({b.center, bw1, b.window, b.index});
  const auto d1 = demodulate(signal, leg1, hop);
  const EstimatorKind kind{EstimatorVariant::NBB, bw1, bw_gamma, theta_bands.front().window};

  BispecGrid out = empty_grid(theta_bands.size(), gamma_bands.size());
  for (const auto& b : theta_bands) out.freq1.push_back(b.center);
  for (const auto& b : gamma_bands) out.freq2.push_back(b.center);
  out.bands1 = leg1;
  out.kind = kind;
  out.frame_rate = d1.frame_rate();

  // PhPC weighs the sideband pair with h(w - gamma) h(w - gamma + theta), which is
  // |h(w - gamma + theta/2)|^2 times the overlap of two gamma windows theta apart.
  const auto wg = window_samples(gamma_bands.front().window, bw_gamma, signal.fs);
  const auto half = static_cast<double>(wg.size() / 2);
  double energy = 0.0;
  for (double v : wg) energy += v * v;
  const auto overlap = [&](double th) {
    double acc = 0.0;
    for (std::size_t n = 0; n < wg.size(); ++n) {
      acc += wg[n] * wg[n] * std::cos(2 * M_PI * th * (static_cast<double>(n) - half) / signal.fs);
    }
    return acc / energy;
  };

  const double nyquist = signal.fs / 2;
  for (std::size_t r = 0; r < theta_bands.size(); ++r) {
    const double th = theta_bands[r].center;
    const double rho = overlap(th);
    std::vector<BandSpec> b2, b3;
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < gamma_bands.size(); ++c) {
      const auto& gb = gamma_bands[c];
      if (gb.center + th / 2 + bw_gamma / 2 > nyquist + 1e-9) continue;
      b2.push_back({gb.center - th / 2, bw_gamma, gb.window, static_cast<int>(b2.size())});
      b3.push_back({gb.center + th / 2, bw_gamma, gb.window, static_cast<int>(b3.size())});
      cols.push_back(c);
    }
    if (cols.empty()) continue;
    const auto d2 = demodulate(signal, b2, hop);
    const auto d3 = demodulate(signal, b3, hop);
    EstimateOptions eo;
    eo.domain = Domain::full_plane;
    eo.oversample = options.oversample;
    const auto row = estimate_bispectrum(d1, d2, d3, kind, {th, th},
                                         {b2.front().center, b2.back().center}, eo);
    if (row.B.rows() != 1 || row.B.cols() != cols.size()) throw Error("pac_as_nbb: internal grid mismatch");
    for (std::size_t j = 0; j < cols.size(); ++j) {
      const std::size_t c = cols[j];
      out.B(r, c) = rho * row.B(0, j);
      out.A(r, c) = std::abs(rho) * row.A(0, j);
      out.eps(r, c) = row.eps(0, j);
      out.norm12(r, c) = rho * rho * row.norm12(0, j);
      out.norm3(r, c) = row.norm3(0, j);
      out.state(r, c) = row.state(0, j);
      out.leg3(r, c) = static_cast<std::int32_t>(c);
    }
    out.n_frames = out.n_frames == 0 ? row.n_frames : std::min(out.n_frames, row.n_frames);
  }
  for (const auto& gb : gamma_bands) {
    out.bands2.push_back(gb);
    out.bands3.push_back(gb);
  }
  return out;
}

PacGrid variable_bandwidth_pac(const Signal& signal, std::span<const BandSpec> theta_bands,
                               std::span<const double> gamma_centers, double ratio,
                               const PacOptions& options) {
  signal.validate();
  if (!(ratio > 1.0)) throw Error("variable_bandwidth_pac: ratio must exceed 1");
  if (theta_bands.empty() || gamma_centers.empty()) throw Error("variable_bandwidth_pac: empty band list");
  const double nyquist = signal.fs / 2;

  PacGrid out;
  out.theta_bands.assign(theta_bands.begin(), theta_bands.end());
  out.scaling = PacScaling::proportional;
  out.ratio = ratio;
  out.sums = empty_grid(theta_bands.size(), gamma_centers.size());
  auto& g = out.sums;
  for (const auto& b : theta_bands) g.freq1.push_back(b.center);
  g.freq2.assign(gamma_centers.begin(), gamma_centers.end());
  g.bands1 = out.theta_bands;
  for (double c : gamma_centers) out.gamma_bands.push_back({c, 0.0, theta_bands.front().window, 0});

  double gamma_top = 0.0;
  for (const auto& t : theta_bands) {
    const double bw = ratio * t.center;
    for (double c : gamma_centers) {
      if (c + bw / 2 <= nyquist) gamma_top = std::max(gamma_top, c + bw / 2);
    }
  }
  const auto hop = pac_hop(signal, theta_bands, gamma_top, options);
  const auto G = demodulate(signal, theta_bands, hop);
  g.frame_rate = G.frame_rate();
  g.kind = {EstimatorVariant::NBB, max_bandwidth(theta_bands), ratio * theta_bands.front().center,
            theta_bands.front().window};

  for (std::size_t r = 0; r < theta_bands.size(); ++r) {
    const auto& t = theta_bands[r];
    const double bw = ratio * t.center;
    if (!(bw > t.bandwidth)) continue;  // regime violated: row stays masked
    const std::size_t rows[] = {r};
    for (std::size_t c = 0; c < gamma_centers.size(); ++c) {
      const BandSpec gb{gamma_centers[c], bw, t.window, static_cast<int>(c)};
      if (gb.upper_edge() > nyquist + 1e-9) continue;
      phpc_column(signal, G, rows, gb, c, options.use_power, g);
    }
  }
  finish(out, options);
  return out;
}

cdouble complex_correlation(const Bicoherence& a, const Bicoherence& b) {
  if (a.beta.rows() != b.beta.rows() || a.beta.cols() != b.beta.cols()) {
    throw Error("complex_correlation: grid shapes differ");
  }
  cdouble num{};
  double na = 0.0, nb = 0.0;
  for (std::size_t r = 0; r < a.beta.rows(); ++r) {
    for (std::size_t c = 0; c < a.beta.cols(); ++c) {
      if (!a.valid(r, c) || !b.valid(r, c)) continue;
      num += a.beta(r, c) * std::conj(b.beta(r, c));
      na += std::norm(a.beta(r, c));
      nb += std::norm(b.beta(r, c));
    }
  }
  if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
  return num / std::sqrt(na * nb);
}

}  // namespace bispec
