#include "bispec/polyspec.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include "bispec/fft.hpp"
#include "parallel.hpp"

namespace bispec {

std::string to_string(EstimatorVariant v) {
  switch (v) {
    case EstimatorVariant::BBB: return "bbb";
    case EstimatorVariant::NNB: return "nnb";
    case EstimatorVariant::BBN: return "bbn";
    case EstimatorVariant::NBB: return "nbb";
  }
  throw Error("unknown estimator variant");
}

EstimatorVariant estimator_variant_from_string(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "bbb") return EstimatorVariant::BBB;
  if (s == "nnb") return EstimatorVariant::NNB;
  if (s == "bbn") return EstimatorVariant::BBN;
  if (s == "nbb") return EstimatorVariant::NBB;
  throw Error("unknown estimator kind '" + name + "'");
}

std::string to_string(Domain d) {
  switch (d) {
    case Domain::principal_triangle: return "principal_triangle";
    case Domain::full_quadrant: return "full_quadrant";
    case Domain::full_plane: return "full_plane";
  }
  throw Error("unknown domain");
}

std::string to_string(Normalization n) {
  return n == Normalization::rms ? "rms" : "magnitude_sum";
}

void EstimatorKind::validate() const {
  if (!(bw_broad > 0.0)) throw Error("estimator: broad bandwidth must be positive");
  if (variant != EstimatorVariant::BBB) {
    if (!(bw_narrow > 0.0)) throw Error("estimator: narrow bandwidth must be positive");
    if (!(bw_narrow < bw_broad)) throw Error("estimator: narrow bandwidth must be below broad bandwidth");
  }
}

double EstimatorKind::leg_bandwidth(int leg) const {
  // N/B letters per frequency-ordered leg
  const char* pattern = "BBB";
  switch (variant) {
    case EstimatorVariant::BBB: pattern = "BBB"; break;
    case EstimatorVariant::NNB: pattern = "NNB"; break;
    case EstimatorVariant::BBN: pattern = "BBN"; break;
    case EstimatorVariant::NBB: pattern = "NBB"; break;
  }
  if (leg < 0 || leg > 2) throw Error("estimator: leg index out of range");
  return pattern[leg] == 'N' ? bw_narrow : bw_broad;
}

void CellSums::add(cdouble a, cdouble b) {
  const double ar = a.real(), ai = a.imag(), br = b.real(), bi = b.imag();
  // a * conj(b) without the NaN-handling slow path of operator*
  const double pr = ar * br + ai * bi;
  const double pi = ai * br - ar * bi;
  sum += cdouble(pr, pi);
  const double na = ar * ar + ai * ai;
  const double nb = br * br + bi * bi;
  const double p2 = na * nb;
  abs_sum += std::sqrt(p2);
  abs2_sum += p2;
  norm_a += na;
  norm_b += nb;
}

void store_cell(BispecGrid& grid, std::size_t r, std::size_t c, const CellSums& sums, double kappa) {
  grid.B(r, c) = sums.sum;
  grid.A(r, c) = sums.abs_sum;
  grid.norm12(r, c) = sums.norm_a;
  grid.norm3(r, c) = sums.norm_b;
  if (sums.abs_sum > 0.0) {
    const double e = std::sqrt(std::max(1.0, kappa) * sums.abs2_sum) / sums.abs_sum;
    grid.eps(r, c) = std::min(1.0, e);
    grid.state(r, c) = CellState::valid;
  } else {
    grid.eps(r, c) = 1.0;
    grid.state(r, c) = CellState::empty;
  }
}

double correlated_frames(std::span<const std::vector<double>* const> leg_acfs) {
  if (leg_acfs.empty()) return 1.0;
  std::size_t lags = leg_acfs.front()->size();
  for (const auto* a : leg_acfs) lags = std::min(lags, a->size());
  double total = 0.0;
  for (std::size_t l = 0; l < lags; ++l) {
    double prod = 1.0;
    for (const auto* a : leg_acfs) prod *= (*a)[l];
    total += (l == 0 ? 1.0 : 2.0) * prod;
  }
  return std::max(1.0, total);
}

double Bicoherence::uncorrected_magnitude(std::size_t r, std::size_t c) const {
  if (!bias_corrected) return std::abs(magnitude(r, c));
  const double e = eps(r, c);
  return magnitude(r, c) * (1.0 - e) + e;
}

namespace {

struct FrameAlignment {
  std::size_t count = 0;
  std::vector<std::size_t> offsets;
};

FrameAlignment align_frames(std::span<const Decomposition* const> legs) {
  const auto* ref = legs.front();
  std::int64_t start = ref->first_center;
  std::int64_t stop = ref->center_sample(ref->n_frames() - 1);
  for (const auto* d : legs) {
    if (d->hop != ref->hop || d->source_fs != ref->source_fs) {
      throw Error("estimator: decompositions do not share a frame grid (hop or rate differ)");
    }
    if (d->n_frames() == 0) throw Error("estimator: decomposition has no frames");
    if ((d->first_center - ref->first_center) % static_cast<std::int64_t>(ref->hop) != 0) {
      throw Error("estimator: decompositions do not share a frame grid (misaligned centres)");
    }
    start = std::max(start, d->first_center);
    stop = std::min(stop, d->center_sample(d->n_frames() - 1));
  }
  if (stop < start) throw Error("estimator: decompositions have no frames in common");
  FrameAlignment out;
  const auto hop = static_cast<std::int64_t>(ref->hop);
  out.count = static_cast<std::size_t>((stop - start) / hop + 1);
  for (const auto* d : legs) out.offsets.push_back(static_cast<std::size_t>((start - d->first_center) / hop));
  return out;
}

// Nearest band to `target`; ties go to the lower centre. -1 when the nearest
// centre misses by half its bandwidth or more.
int match_band(const std::vector<BandSpec>& bands, double target) {
  int best = -1;
  double best_dist = 0.0;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const double d = std::abs(bands[i].center - target);
    if (best < 0 || d < best_dist - 1e-12 ||
        (std::abs(d - best_dist) <= 1e-12 && bands[i].center < bands[best].center)) {
      best = static_cast<int>(i);
      best_dist = d;
    }
  }
  if (best < 0) return -1;
  if (!(best_dist < bands[best].bandwidth / 2 - 1e-12)) return -1;
  return best;
}

std::vector<std::size_t> select_bands(const std::vector<BandSpec>& bands, FreqRange range,
                                      const char* what) {
  if (range.hi < range.lo) throw Error(std::string("estimator: empty ") + what + " range");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    if (range.contains(bands[i].center)) idx.push_back(i);
  }
  if (idx.empty()) throw Error(std::string("estimator: no ") + what + " bands inside the requested range");
  return idx;
}

void check_bandwidth(const Decomposition& d, std::span<const std::size_t> idx, double expected,
                     const char* leg) {
  for (auto i : idx) {
    if (std::abs(d.bands[i].bandwidth - expected) > 1e-9 * std::max(1.0, expected)) {
      throw Error(std::string("estimator: ") + leg + " band bandwidth does not match estimator kind");
    }
  }
}

bool in_domain(Domain domain, double f1, double f2, int k, double nyquist) {
  constexpr double tol = 1e-9;
  switch (domain) {
    case Domain::principal_triangle:
      return f1 >= -tol && f1 <= f2 + tol && k * f1 + f2 <= nyquist + tol;
    case Domain::full_quadrant:
      return f1 >= -tol && f2 >= -tol;
    case Domain::full_plane:
      return true;
  }
  return false;
}

using AcfCache = std::map<std::pair<const Decomposition*, std::size_t>, std::vector<double>>;

const std::vector<double>& acf_for(AcfCache& cache, const Decomposition& d, std::size_t band) {
  auto key = std::make_pair(&d, band);
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache.emplace(key, window_lag_correlation(d.bands[band], d.source_fs, d.hop)).first;
  }
  return it->second;
}

struct LegChoice {
  int leg2 = -1;
  int leg3 = -1;
};

// Shared estimator core. `resolve(row_band, col_band)` picks the leg-2 and
// leg-3 bands for a cell (or -1 to mark it unmatched).
BispecGrid run_estimator(const Decomposition& d1, const Decomposition& d2, const Decomposition& d3,
                         const EstimatorKind& kind, const std::vector<std::size_t>& rows,
                         const std::vector<std::size_t>& cols, int k, Domain domain,
                         double oversample,
                         const std::function<LegChoice(std::size_t, std::size_t)>& resolve) {
  const Decomposition* legs[] = {&d1, &d2, &d3};
  const auto align = align_frames(legs);
  const double nyquist = d1.source_fs / 2;

  BispecGrid g;
  const std::size_t nr = rows.size(), nc = cols.size();
  g.B = Grid2<cdouble>(nr, nc);
  g.A = Grid2<double>(nr, nc);
  g.eps = Grid2<double>(nr, nc, 1.0);
  g.norm12 = Grid2<double>(nr, nc);
  g.norm3 = Grid2<double>(nr, nc);
  g.state = Grid2<CellState>(nr, nc, CellState::outside_domain);
  g.leg3 = Grid2<std::int32_t>(nr, nc, -1);
  for (auto r : rows) {
    g.freq1.push_back(d1.bands[r].center);
    g.bands1.push_back(d1.bands[r]);
  }
  for (auto c : cols) g.freq2.push_back(d2.bands[c].center);
  g.bands2 = d2.bands;
  g.bands3 = d3.bands;
  g.n_frames = align.count;
  g.frame_rate = d1.frame_rate();
  g.domain = domain;
  g.kind = kind;
  g.order = k;

  // resolve cells serially so the anti-aliasing check and caches stay simple
  Grid2<std::int32_t> leg2(nr, nc, -1);
  double top_edge = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      const double f1 = d1.bands[rows[r]].center;
      const double f2 = d2.bands[cols[c]].center;
      if (!in_domain(domain, f1, f2, k, nyquist)) continue;
      const auto choice = resolve(rows[r], cols[c]);
      if (choice.leg2 < 0 || choice.leg3 < 0) {
        g.state(r, c) = CellState::unmatched;
        continue;
      }
      leg2(r, c) = choice.leg2;
      g.leg3(r, c) = choice.leg3;
      g.state(r, c) = CellState::empty;
      const auto& b3 = d3.bands[static_cast<std::size_t>(choice.leg3)];
      top_edge = std::max(top_edge, std::abs(b3.center) + b3.bandwidth / 2);
    }
  }
  // hop 1 keeps every sample, so nothing is decimated
  if (oversample > 0.0 && d1.hop > 1 && top_edge > 0.0 && g.frame_rate < oversample * top_edge - 1e-9) {
    throw Error("estimator: frame rate " + std::to_string(g.frame_rate) +
                " Hz is below the anti-aliasing requirement of " +
                std::to_string(oversample * top_edge) + " Hz; reduce the hop");
  }

  AcfCache cache;
  Grid2<double> kappa(nr, nc, 1.0);
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      if (g.state(r, c) != CellState::empty) continue;
      std::vector<const std::vector<double>*> acfs;
      const auto& a1 = acf_for(cache, d1, rows[r]);
      for (int i = 0; i < k; ++i) acfs.push_back(&a1);
      acfs.push_back(&acf_for(cache, d2, static_cast<std::size_t>(leg2(r, c))));
      acfs.push_back(&acf_for(cache, d3, static_cast<std::size_t>(g.leg3(r, c))));
      kappa(r, c) = correlated_frames(acfs);
    }
  }

  const std::size_t m_count = align.count;
  detail::parallel_for(nr, [&](std::size_t r) {
    const cdouble* s1 = d1.values.row(rows[r]) + align.offsets[0];
    std::vector<cdouble> lead(m_count);
    for (std::size_t m = 0; m < m_count; ++m) {
      cdouble v = s1[m];
      for (int i = 1; i < k; ++i) v *= s1[m];
      lead[m] = v;
    }
    for (std::size_t c = 0; c < nc; ++c) {
      if (g.state(r, c) != CellState::empty) continue;
      const cdouble* s2 = d2.values.row(static_cast<std::size_t>(leg2(r, c))) + align.offsets[1];
      const cdouble* s3 = d3.values.row(static_cast<std::size_t>(g.leg3(r, c))) + align.offsets[2];
      CellSums sums;
      for (std::size_t m = 0; m < m_count; ++m) {
        const double ar = lead[m].real(), ai = lead[m].imag();
        const double br = s2[m].real(), bi = s2[m].imag();
        sums.add(cdouble(ar * br - ai * bi, ar * bi + ai * br), s3[m]);
      }
      store_cell(g, r, c, sums, kappa(r, c));
    }
  });
  return g;
}

Domain default_domain(const EstimatorKind& kind, int k) {
  return (kind.symmetric() && k == 1) ? Domain::principal_triangle : Domain::full_quadrant;
}

}  // namespace

BispecGrid estimate_bispectrum(const Decomposition& leg1, const Decomposition& leg2,
                               const Decomposition& leg3, const EstimatorKind& kind,
                               FreqRange range1, FreqRange range2, const EstimateOptions& options) {
  kind.validate();
  const auto rows = select_bands(leg1.bands, range1, "axis-1");
  const auto cols = select_bands(leg2.bands, range2, "axis-2");
  check_bandwidth(leg1, rows, kind.leg_bandwidth(0), "leg-1");
  check_bandwidth(leg2, cols, kind.leg_bandwidth(1), "leg-2");
  std::vector<std::size_t> all3(leg3.bands.size());
  for (std::size_t i = 0; i < all3.size(); ++i) all3[i] = i;
  check_bandwidth(leg3, all3, kind.leg_bandwidth(2), "leg-3");
  const Domain domain = options.domain.value_or(default_domain(kind, 1));
  return run_estimator(leg1, leg2, leg3, kind, rows, cols, 1, domain, options.oversample,
                       [&](std::size_t r, std::size_t c) {
                         const double target = leg1.bands[r].center + leg2.bands[c].center;
                         return LegChoice{static_cast<int>(c), match_band(leg3.bands, target)};
                       });
}

BispecGrid estimate_bispectrum(const Decomposition& decomp, const EstimatorKind& kind,
                               FreqRange range1, FreqRange range2, const EstimateOptions& options) {
  if (kind.variant != EstimatorVariant::BBB) {
    throw Error("estimator: a single decomposition supports only the BBB kind");
  }
  return estimate_bispectrum(decomp, decomp, decomp, kind, range1, range2, options);
}

namespace {

double snap_down(double f, double spacing) { return std::floor(f / spacing + 1e-9) * spacing; }

std::vector<BandSpec> bank_for(double fs, FreqRange r, double bw, WindowKind kind) {
  const double spacing = bw / 2;
  const double lo = std::max(0.0, snap_down(r.lo, spacing));
  double hi = std::min(r.hi, fs / 2);
  if (hi <= lo) hi = lo + spacing;
  return design_bank(fs, lo, hi, bw, kind);
}

}  // namespace

BispecGrid estimate_bispectrum(const Signal& signal, const EstimatorKind& kind, FreqRange range1,
                               FreqRange range2, const EstimateOptions& options) {
  kind.validate();
  const double fs = signal.fs;
  const FreqRange r3{range1.lo + range2.lo, range1.hi + range2.hi};
  if (kind.variant == EstimatorVariant::BBB) {
    const FreqRange all{std::min({range1.lo, range2.lo, r3.lo}), std::max({range1.hi, range2.hi, r3.hi})};
    const auto bank = bank_for(fs, all, kind.bw_broad, kind.window);
    const double top = bank.back().upper_edge();
    const auto d = demodulate(signal, bank, default_hop(fs, top, options.oversample > 0 ? options.oversample : 4.0));
    return estimate_bispectrum(d, kind, range1, range2, options);
  }
  const auto b1 = bank_for(fs, range1, kind.leg_bandwidth(0), kind.window);
  const auto b2 = bank_for(fs, range2, kind.leg_bandwidth(1), kind.window);
  const auto b3 = bank_for(fs, r3, kind.leg_bandwidth(2), kind.window);
  const double top = std::max({b1.back().upper_edge(), b2.back().upper_edge(), b3.back().upper_edge()});
  const auto hop = default_hop(fs, top, options.oversample > 0 ? options.oversample : 4.0);
  const auto d1 = demodulate(signal, b1, hop);
  const auto d2 = demodulate(signal, b2, hop);
  const auto d3 = demodulate(signal, b3, hop);
  return estimate_bispectrum(d1, d2, d3, kind, range1, range2, options);
}

BispecGrid kmode_coupling(const Decomposition& decomp, int k, FreqRange range1, FreqRange range2,
                          const EstimateOptions& options) {
  if (k < 1) throw Error("kmode_coupling: k must be >= 1");
  if (decomp.bands.empty()) throw Error("kmode_coupling: empty decomposition");
  const auto kind = EstimatorKind::bbb(decomp.bands.front().bandwidth, decomp.bands.front().window);
  if (k == 1) return estimate_bispectrum(decomp, kind, range1, range2, options);
  const auto rows = select_bands(decomp.bands, range1, "axis-1");
  const auto cols = select_bands(decomp.bands, range2, "axis-2");
  std::vector<std::size_t> all(decomp.bands.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  check_bandwidth(decomp, all, kind.bw_broad, "k-mode");
  const Domain domain = options.domain.value_or(default_domain(kind, k));
  return run_estimator(decomp, decomp, decomp, kind, rows, cols, k, domain, options.oversample,
                       [&](std::size_t r, std::size_t c) {
                         const double target = k * decomp.bands[r].center + decomp.bands[c].center;
                         return LegChoice{static_cast<int>(c), match_band(decomp.bands, target)};
                       });
}

BispecGrid kmode_coupling(const Signal& signal, int k, double bandwidth, FreqRange range1,
                          FreqRange range2, const EstimateOptions& options) {
  if (k < 1) throw Error("kmode_coupling: k must be >= 1");
  const FreqRange all{0.0, std::max(range2.hi, k * range1.hi + range2.hi)};
  if (all.hi > signal.fs / 2) throw Error("kmode_coupling: k*f1 + f2 exceeds the band-bank top");
  const auto bank = bank_for(signal.fs, all, bandwidth, WindowKind::gaussian);
  const auto d = demodulate(signal, bank,
                            default_hop(signal.fs, bank.back().upper_edge(),
                                        options.oversample > 0 ? options.oversample : 4.0));
  return kmode_coupling(d, k, range1, range2, options);
}

BispecGrid cross_bispectrum(const Decomposition& decomp_i, const Decomposition& decomp_j,
                            const EstimatorKind& kind, FreqRange range1, FreqRange range2,
                            const EstimateOptions& options) {
  kind.validate();
  const auto rows = select_bands(decomp_i.bands, range1, "axis-1");
  const auto cols = select_bands(decomp_j.bands, range2, "axis-2");
  check_bandwidth(decomp_i, rows, kind.leg_bandwidth(0), "leg-1");
  const Domain domain = options.domain.value_or(Domain::full_quadrant);
  auto grid = run_estimator(
      decomp_i, decomp_j, decomp_j, kind, rows, cols, 1, domain, options.oversample,
      [&](std::size_t r, std::size_t c) {
        const double f1 = decomp_i.bands[r].center;
        const int l2 = match_band(decomp_j.bands, decomp_j.bands[c].center - f1 / 2);
        if (l2 < 0) return LegChoice{};
        if (std::abs(decomp_j.bands[static_cast<std::size_t>(l2)].bandwidth - kind.leg_bandwidth(1)) > 1e-9) {
          throw Error("cross_bispectrum: leg-2 bandwidth does not match estimator kind");
        }
        const int l3 = match_band(decomp_j.bands, f1 + decomp_j.bands[static_cast<std::size_t>(l2)].center);
        if (l3 >= 0 &&
            std::abs(decomp_j.bands[static_cast<std::size_t>(l3)].bandwidth - kind.leg_bandwidth(2)) > 1e-9) {
          throw Error("cross_bispectrum: leg-3 bandwidth does not match estimator kind");
        }
        return LegChoice{l2, l3};
      });
  return grid;
}

Bicoherence normalize(const BispecGrid& grid, Normalization normalization) {
  if (grid.n_frames < 1) throw Error("normalize: grid has no frames");
  Bicoherence out;
  const std::size_t nr = grid.B.rows(), nc = grid.B.cols();
  out.beta = Grid2<cdouble>(nr, nc);
  out.magnitude = Grid2<double>(nr, nc);
  out.eps = grid.eps;
  out.mask = Grid2<std::uint8_t>(nr, nc, 0);
  out.freq1 = grid.freq1;
  out.freq2 = grid.freq2;
  out.normalization = normalization;
  out.domain = grid.domain;
  out.variant = grid.kind.variant;
  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      if (!grid.valid(r, c)) continue;
      double den = 0.0;
      if (normalization == Normalization::magnitude_sum) {
        den = grid.A(r, c);
      } else {
        den = std::sqrt(grid.norm12(r, c)) * std::sqrt(grid.norm3(r, c));
      }
      if (!(den > 0.0)) continue;
      out.beta(r, c) = grid.B(r, c) / den;
      out.magnitude(r, c) = std::abs(out.beta(r, c));
      out.mask(r, c) = 1;
    }
  }
  return out;
}

Bicoherence bias_correct(const Bicoherence& bic, const BispecGrid& grid) {
  if (bic.normalization != Normalization::magnitude_sum) {
    throw Error("bias_correct: defined only for magnitude-sum normalization");
  }
  if (bic.bias_corrected) throw Error("bias_correct: input is already bias corrected");
  if (grid.eps.rows() != bic.beta.rows() || grid.eps.cols() != bic.beta.cols()) {
    throw Error("bias_correct: grid and bicoherence shapes differ");
  }
  Bicoherence out = bic;
  out.bias_corrected = true;
  out.eps = grid.eps;
  for (std::size_t r = 0; r < bic.beta.rows(); ++r) {
    for (std::size_t c = 0; c < bic.beta.cols(); ++c) {
      if (!bic.valid(r, c)) continue;
      const double e = grid.eps(r, c);
      if (!(e < 1.0)) {
        out.mask(r, c) = 0;
        out.beta(r, c) = 0.0;
        out.magnitude(r, c) = 0.0;
        continue;
      }
      const double mag = std::abs(bic.beta(r, c));
      const double corrected = (mag - e) / (1.0 - e);
      const cdouble unit = mag > 0.0 ? bic.beta(r, c) / mag : cdouble(1.0, 0.0);
      out.beta(r, c) = corrected * unit;
      out.magnitude(r, c) = corrected;
    }
  }
  return out;
}

namespace {

struct PlaneAxis {
  double spacing = 0.0;
  long n = 0;  // coordinates -n..n
  std::vector<double> coords;
  long index_of(double f) const { return std::lround(f / spacing); }
};

PlaneAxis plane_axis(const std::vector<double>& f1, const std::vector<double>& f2, double spacing) {
  PlaneAxis ax;
  ax.spacing = spacing;
  double top = 0.0;
  for (const auto* v : {&f1, &f2}) {
    for (double f : *v) {
      const double q = f / spacing;
      if (std::abs(q - std::round(q)) > 1e-6) {
        throw Error("expand_symmetry: axis frequencies are not on a uniform grid through 0");
      }
      top = std::max(top, std::abs(f));
    }
  }
  ax.n = std::lround(top / spacing);
  for (long i = -ax.n; i <= ax.n; ++i) ax.coords.push_back(static_cast<double>(i) * spacing);
  return ax;
}

template <typename Fn>
void for_each_image(long a, long b, Fn&& fn) {
  const long images[6][2] = {{a, b}, {b, a}, {-a - b, b}, {b, -a - b}, {a, -a - b}, {-a - b, a}};
  for (const auto& im : images) {
    fn(im[0], im[1], false);
    fn(-im[0], -im[1], true);
  }
}

double grid_spacing(const std::vector<double>& f1, const std::vector<double>& f2, double fallback) {
  double s = 0.0;
  for (const auto* v : {&f1, &f2}) {
    for (std::size_t i = 1; i < v->size(); ++i) {
      const double d = (*v)[i] - (*v)[i - 1];
      if (d > 1e-12 && (s == 0.0 || d < s)) s = d;
    }
  }
  return s > 0.0 ? s : fallback;
}

}  // namespace

BispecGrid expand_symmetry(const BispecGrid& grid) {
  if (grid.kind.variant != EstimatorVariant::BBB) {
    throw Error("expand_symmetry: only symmetric (BBB) estimates carry the bispectral symmetry");
  }
  if (grid.domain != Domain::principal_triangle || grid.order != 1) {
    throw Error("expand_symmetry: input must be a principal-triangle bispectrum");
  }
  const auto ax = plane_axis(grid.freq1, grid.freq2, grid_spacing(grid.freq1, grid.freq2, grid.kind.bw_broad / 2));
  const std::size_t n = ax.coords.size();
  BispecGrid out;
  out.B = Grid2<cdouble>(n, n);
  out.A = Grid2<double>(n, n);
  out.eps = Grid2<double>(n, n, 1.0);
  out.norm12 = Grid2<double>(n, n);
  out.norm3 = Grid2<double>(n, n);
  out.state = Grid2<CellState>(n, n, CellState::outside_domain);
  out.leg3 = Grid2<std::int32_t>(n, n, -1);
  out.freq1 = ax.coords;
  out.freq2 = ax.coords;
  out.n_frames = grid.n_frames;
  out.frame_rate = grid.frame_rate;
  out.domain = Domain::full_plane;
  out.kind = grid.kind;
  out.order = 1;
  for (std::size_t r = 0; r < grid.B.rows(); ++r) {
    for (std::size_t c = 0; c < grid.B.cols(); ++c) {
      if (grid.state(r, c) == CellState::outside_domain || grid.state(r, c) == CellState::unmatched) continue;
      for_each_image(ax.index_of(grid.freq1[r]), ax.index_of(grid.freq2[c]), [&](long x, long y, bool conj) {
        if (std::abs(x) > ax.n || std::abs(y) > ax.n) return;
        const auto i = static_cast<std::size_t>(x + ax.n);
        const auto j = static_cast<std::size_t>(y + ax.n);
        out.B(i, j) = conj ? std::conj(grid.B(r, c)) : grid.B(r, c);
        out.A(i, j) = grid.A(r, c);
        out.eps(i, j) = grid.eps(r, c);
        out.norm12(i, j) = grid.norm12(r, c);
        out.norm3(i, j) = grid.norm3(r, c);
        out.state(i, j) = grid.state(r, c);
      });
    }
  }
  return out;
}

Bicoherence expand_symmetry(const Bicoherence& bic) {
  if (bic.variant != EstimatorVariant::BBB) {
    throw Error("expand_symmetry: only symmetric (BBB) estimates carry the bispectral symmetry");
  }
  if (bic.domain != Domain::principal_triangle) {
    throw Error("expand_symmetry: input must be on the principal triangle");
  }
  const auto ax = plane_axis(bic.freq1, bic.freq2, grid_spacing(bic.freq1, bic.freq2, 1.0));
  const std::size_t n = ax.coords.size();
  Bicoherence out;
  out.beta = Grid2<cdouble>(n, n);
  out.magnitude = Grid2<double>(n, n);
  out.eps = Grid2<double>(n, n, 1.0);
  out.mask = Grid2<std::uint8_t>(n, n, 0);
  out.freq1 = ax.coords;
  out.freq2 = ax.coords;
  out.normalization = bic.normalization;
  out.bias_corrected = bic.bias_corrected;
  out.domain = Domain::full_plane;
  out.variant = bic.variant;
  for (std::size_t r = 0; r < bic.beta.rows(); ++r) {
    for (std::size_t c = 0; c < bic.beta.cols(); ++c) {
      if (!bic.valid(r, c)) continue;
      for_each_image(ax.index_of(bic.freq1[r]), ax.index_of(bic.freq2[c]), [&](long x, long y, bool conj) {
        if (std::abs(x) > ax.n || std::abs(y) > ax.n) return;
        const auto i = static_cast<std::size_t>(x + ax.n);
        const auto j = static_cast<std::size_t>(y + ax.n);
        out.beta(i, j) = conj ? std::conj(bic.beta(r, c)) : bic.beta(r, c);
        out.magnitude(i, j) = bic.magnitude(r, c);
        out.eps(i, j) = bic.eps(r, c);
        out.mask(i, j) = 1;
      });
    }
  }
  return out;
}

BispecGrid oracle_bispectrum(const Signal& signal, std::size_t segment_len,
                             std::span<const double> freqs1, std::span<const double> freqs2) {
  signal.validate();
  if (segment_len < 2) throw Error("oracle_bispectrum: segment too short");
  const std::size_t segments = signal.samples.size() / segment_len;
  if (segments < 4) throw Error("oracle_bispectrum: need at least 4 segments");
  const double fs = signal.fs;
  const auto len = static_cast<long>(segment_len);
  auto bin_of = [&](double f) { return std::lround(f * static_cast<double>(segment_len) / fs); };
  auto wrap = [&](long b) { return static_cast<std::size_t>(((b % len) + len) % len); };

  std::vector<std::vector<cdouble>> spectra;
  spectra.reserve(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    std::span<const double> seg(signal.samples.data() + s * segment_len, segment_len);
    spectra.push_back(fft::forward_real(seg));
  }

  BispecGrid g;
  const std::size_t nr = freqs1.size(), nc = freqs2.size();
  g.B = Grid2<cdouble>(nr, nc);
  g.A = Grid2<double>(nr, nc);
  g.eps = Grid2<double>(nr, nc, 1.0);
  g.norm12 = Grid2<double>(nr, nc);
  g.norm3 = Grid2<double>(nr, nc);
  g.state = Grid2<CellState>(nr, nc, CellState::empty);
  g.leg3 = Grid2<std::int32_t>(nr, nc, -1);
  for (double f : freqs1) g.freq1.push_back(static_cast<double>(bin_of(f)) * fs / static_cast<double>(segment_len));
  for (double f : freqs2) g.freq2.push_back(static_cast<double>(bin_of(f)) * fs / static_cast<double>(segment_len));
  g.n_frames = segments;
  g.frame_rate = fs / static_cast<double>(segment_len);
  g.domain = Domain::full_quadrant;
  g.kind = EstimatorKind::bbb(fs / static_cast<double>(segment_len));

  for (std::size_t r = 0; r < nr; ++r) {
    for (std::size_t c = 0; c < nc; ++c) {
      const long b1 = bin_of(freqs1[r]);
      const long b2 = bin_of(freqs2[c]);
      CellSums sums;
      for (const auto& X : spectra) sums.add(X[wrap(b1)] * X[wrap(b2)], X[wrap(b1 + b2)]);
      g.leg3(r, c) = static_cast<std::int32_t>(wrap(b1 + b2));
      store_cell(g, r, c, sums, 1.0);
    }
  }
  return g;
}

}  // namespace bispec
