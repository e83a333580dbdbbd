#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>
#include <random>

#include "bispec/polyspec.hpp"
#include "test_support.hpp"

using namespace bispec;

namespace {

Signal qpc_signal(bool random_third, std::uint64_t seed = 3) {
  const double fs = 500;
  const std::size_t n = 60 * 500;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2 * M_PI);
  const double p1 = u(rng), p2 = u(rng);
  std::vector<double> x(n);
  double psi = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (random_third && i % 500 == 0) psi = u(rng);
    const double t = static_cast<double>(i) / fs;
    x[i] = std::cos(2 * M_PI * 11 * t + p1) + std::cos(2 * M_PI * 19 * t + p2) +
           std::cos(2 * M_PI * 30 * t + p1 + p2 + psi);
  }
  return make_signal(x, fs);
}

std::size_t index_of(const std::vector<double>& axis, double f) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (std::abs(axis[i] - f) < std::abs(axis[best] - f)) best = i;
  }
  return best;
}

Decomposition manual_decomp(std::size_t frames, double fs, std::size_t hop) {
  Decomposition d;
  d.bands = design_bank(fs, 0, 20, 2);
  d.values = Grid2<cdouble>(d.bands.size(), frames);
  d.hop = hop;
  d.source_fs = fs;
  d.first_center = 0;
  return d;
}

}  // namespace

TEST_CASE("zero signal gives empty cells") {
  const auto sig = make_signal(std::vector<double>(5000, 0.0), 100);
  const auto g = estimate_bispectrum(sig, EstimatorKind::bbb(2), {0, 20}, {0, 20});
  std::size_t in_domain = 0;
  for (std::size_t r = 0; r < g.B.rows(); ++r) {
    for (std::size_t c = 0; c < g.B.cols(); ++c) {
      CHECK(g.B(r, c) == cdouble{});
      CHECK(g.A(r, c) == 0.0);
      if (g.state(r, c) != CellState::outside_domain) {
        ++in_domain;
        CHECK(g.state(r, c) == CellState::empty);
      }
    }
  }
  CHECK(in_domain > 0);
  const auto bic = normalize(g, Normalization::magnitude_sum);
  for (std::size_t i = 0; i < bic.mask.size(); ++i) {
    CHECK(bic.mask.data()[i] == 0);
    CHECK(bic.beta.data()[i] == cdouble{});
  }
}

TEST_CASE("QPC triple detected, randomized control suppressed") {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = estimate_bispectrum(qpc_signal(false), EstimatorKind::bbb(2), {0, 25}, {0, 25});
  const auto bic = normalize(g, Normalization::magnitude_sum);
  const auto r = index_of(bic.freq1, 11), c = index_of(bic.freq2, 19);
  REQUIRE(bic.valid(r, c));
  CHECK(std::abs(bic.beta(r, c)) >= 0.95);

  const auto gr = estimate_bispectrum(qpc_signal(true), EstimatorKind::bbb(2), {0, 25}, {0, 25});
  const auto bc = bias_correct(normalize(gr, Normalization::magnitude_sum), gr);
  CHECK(bc.magnitude(r, c) <= 0.1);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs <= 20.0);

  // oracle: segmented FFT peak sits at the same cell
  std::vector<double> f1, f2;
  for (int i = 0; i <= 25; ++i) f1.push_back(i), f2.push_back(i);
  const auto og = oracle_bispectrum(qpc_signal(false), 500, f1, f2);
  const auto ob = normalize(og, Normalization::magnitude_sum);
  std::size_t br = 0, bcol = 0;
  double best = -1;
  for (std::size_t i = 0; i < og.B.rows(); ++i) {
    for (std::size_t j = i; j < og.B.cols(); ++j) {
      if (f1[i] + f2[j] > 35 || f1[i] < 5) continue;  // skip DC / self terms
      if (std::abs(og.B(i, j)) > best) best = std::abs(og.B(i, j)), br = i, bcol = j;
    }
  }
  CHECK(std::abs(og.freq1[br] - 11) <= 1.0);
  CHECK(std::abs(og.freq2[bcol] - 19) <= 1.0);
  CHECK(std::abs(std::abs(ob.beta(br, bcol)) - std::abs(bic.beta(r, c))) <= 0.1);
}

TEST_CASE("grid invariants and exchange symmetry") {
  const auto sig = make_signal(testing::white_noise(6000, 9), 100);
  EstimateOptions opt;
  opt.domain = Domain::full_quadrant;
  const auto g = estimate_bispectrum(sig, EstimatorKind::bbb(2), {0, 20}, {0, 20}, opt);
  REQUIRE(g.freq1 == g.freq2);
  std::size_t valid = 0;
  for (std::size_t r = 0; r < g.B.rows(); ++r) {
    for (std::size_t c = 0; c < g.B.cols(); ++c) {
      if (g.state(r, c) != CellState::valid) continue;
      ++valid;
      CHECK(g.B(r, c) == g.B(c, r));
      CHECK(std::abs(g.B(r, c)) <= g.A(r, c) * (1 + 1e-12));
      CHECK(g.eps(r, c) > 0.0);
      CHECK(g.eps(r, c) <= 1.0);
      const auto& b3 = g.bands3[static_cast<std::size_t>(g.leg3(r, c))];
      CHECK(std::abs(g.freq1[r] + g.freq2[c] - b3.center) < b3.bandwidth / 2);
    }
  }
  CHECK(valid > 100);
}

TEST_CASE("scale equivariance") {
  auto x = testing::white_noise(5000, 4);
  const auto g1 = estimate_bispectrum(make_signal(x, 100), EstimatorKind::bbb(2), {0, 15}, {0, 15});
  for (auto& v : x) v *= 3.0;
  const auto g3 = estimate_bispectrum(make_signal(x, 100), EstimatorKind::bbb(2), {0, 15}, {0, 15});
  const auto b1 = bias_correct(normalize(g1, Normalization::magnitude_sum), g1);
  const auto b3 = bias_correct(normalize(g3, Normalization::magnitude_sum), g3);
  const auto r1 = normalize(g1, Normalization::rms);
  const auto r3 = normalize(g3, Normalization::rms);
  for (std::size_t i = 0; i < g1.B.size(); ++i) {
    if (g1.state.data()[i] != CellState::valid) continue;
    CHECK(testing::rel_err(g3.B.data()[i], 27.0 * g1.B.data()[i]) <= 1e-12);
    CHECK(g3.A.data()[i] == doctest::Approx(27.0 * g1.A.data()[i]).epsilon(1e-12));
    CHECK(std::abs(b3.beta.data()[i] - b1.beta.data()[i]) <= 1e-12);
    CHECK(std::abs(r3.beta.data()[i] - r1.beta.data()[i]) <= 1e-12);
  }
}

TEST_CASE("normalize and bias_correct on constructed grids") {
  // real positive values: every triple product has phase 0
  auto d = manual_decomp(50, 100, 1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  for (auto& v : d.values.data()) v = u(rng);
  EstimateOptions opt;
  opt.oversample = 0;
  const auto g = estimate_bispectrum(d, EstimatorKind::bbb(2), {0, 8}, {0, 8}, opt);
  const auto bic = normalize(g, Normalization::magnitude_sum);
  for (std::size_t i = 0; i < bic.mask.size(); ++i) {
    if (!bic.mask.data()[i]) continue;
    CHECK(std::abs(bic.beta.data()[i]) == doctest::Approx(1.0).epsilon(1e-14));
  }
  const auto bc = bias_correct(bic, g);
  for (std::size_t i = 0; i < bc.mask.size(); ++i) {
    if (!bc.mask.data()[i]) continue;
    CHECK(bc.magnitude.data()[i] == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(bias_correct(normalize(g, Normalization::rms), g), Error);

  // |beta| == eps gives 0
  Bicoherence probe = bic;
  probe.beta(0, 0) = std::polar(g.eps(0, 0), 0.7);
  probe.mask(0, 0) = 1;
  const auto pc = bias_correct(probe, g);
  CHECK(std::abs(pc.magnitude(0, 0)) <= 1e-12);
  CHECK(pc.uncorrected_magnitude(0, 0) == doctest::Approx(g.eps(0, 0)));

  // single frame: eps == 1, masked after correction
  auto d1 = manual_decomp(1, 100, 1);
  for (auto& v : d1.values.data()) v = u(rng);
  const auto g1 = estimate_bispectrum(d1, EstimatorKind::bbb(2), {0, 8}, {0, 8}, opt);
  const auto b1 = bias_correct(normalize(g1, Normalization::magnitude_sum), g1);
  for (std::size_t i = 0; i < b1.mask.size(); ++i) {
    if (g1.state.data()[i] == CellState::valid) CHECK(g1.eps.data()[i] == 1.0);
    CHECK(b1.mask.data()[i] == 0);
  }

  // A == 0 cell: zero and masked
  auto dz = manual_decomp(20, 100, 1);
  for (auto& v : dz.values.data()) v = u(rng);
  for (std::size_t m = 0; m < 20; ++m) dz.values(3, m) = 0.0;
  const auto gz = estimate_bispectrum(dz, EstimatorKind::bbb(2), {0, 8}, {0, 8}, opt);
  const auto bz = normalize(gz, Normalization::magnitude_sum);
  const auto r = index_of(gz.freq1, 1.5);
  const auto c = index_of(gz.freq2, 2.0);
  CHECK(gz.state(r, c) == CellState::empty);
  CHECK(bz.beta(r, c) == cdouble{});
  CHECK(bz.mask(r, c) == 0);
}

TEST_CASE("mismatched frame grids are rejected, missing leg-3 bands masked") {
  const auto sig = make_signal(testing::white_noise(6000, 2), 100);
  const auto nb = design_bank(100, 0, 20, 1);
  const auto bb = design_bank(100, 0, 12, 4);
  const auto dn = demodulate(sig, nb, 1);
  const auto db = demodulate(sig, bb, 1);
  const auto dn2 = demodulate(sig, nb, 2);
  EstimatorKind nnb{EstimatorVariant::NNB, 1, 4, WindowKind::gaussian};
  CHECK_THROWS_AS(estimate_bispectrum(dn, dn2, db, nnb, {0, 10}, {0, 10}), Error);
  const auto g = estimate_bispectrum(dn, dn, db, nnb, {0, 10}, {0, 10});
  std::size_t unmatched = 0, valid = 0;
  for (std::size_t i = 0; i < g.state.size(); ++i) {
    unmatched += g.state.data()[i] == CellState::unmatched;
    valid += g.state.data()[i] == CellState::valid;
  }
  CHECK(unmatched > 0);
  CHECK(valid > 0);
  const auto bic = normalize(g, Normalization::magnitude_sum);
  for (std::size_t i = 0; i < g.state.size(); ++i) {
    if (g.state.data()[i] == CellState::unmatched) CHECK(bic.mask.data()[i] == 0);
  }
  // kind/bandwidth mismatch
  CHECK_THROWS_AS(estimate_bispectrum(db, dn, db, nnb, {0, 10}, {0, 10}), Error);
  EstimatorKind bad{EstimatorVariant::NBB, 4, 2, WindowKind::gaussian};
  CHECK_THROWS_AS(bad.validate(), Error);
  // frame rate too low for the leg-3 edge
  CHECK_THROWS_AS(estimate_bispectrum(dn2, dn2, demodulate(sig, bb, 2), nnb, {0, 10}, {0, 10}), Error);
}

TEST_CASE("expand_symmetry populates twelve images") {
  const auto sig = make_signal(testing::white_noise(4000, 21), 100);
  const auto g = estimate_bispectrum(sig, EstimatorKind::bbb(2), {0, 20}, {0, 20});
  const auto full = expand_symmetry(g);
  CHECK(full.domain == Domain::full_plane);
  const auto r = index_of(g.freq1, 3), c = index_of(g.freq2, 7);
  REQUIRE(g.valid(r, c));
  const cdouble b = g.B(r, c);
  struct Img { double x, y; bool conj; };
  const Img imgs[] = {{3, 7, false}, {7, 3, false}, {-10, 7, false}, {7, -10, false}, {3, -10, false},
                      {-10, 3, false}, {-3, -7, true}, {-7, -3, true}, {10, -7, true}, {-7, 10, true},
                      {-3, 10, true}, {10, -3, true}};
  for (const auto& im : imgs) {
    const auto i = index_of(full.freq1, im.x), j = index_of(full.freq2, im.y);
    CHECK(full.freq1[i] == doctest::Approx(im.x));
    CHECK(full.freq2[j] == doctest::Approx(im.y));
    CHECK(full.valid(i, j));
    CHECK(full.B(i, j) == (im.conj ? std::conj(b) : b));
  }
  const auto bic = expand_symmetry(normalize(g, Normalization::magnitude_sum));
  CHECK(bic.domain == Domain::full_plane);

  EstimatorKind nbb{EstimatorVariant::NBB, 1, 4, WindowKind::gaussian};
  const auto gn = estimate_bispectrum(sig, nbb, {2, 6}, {4, 10});
  CHECK_THROWS_AS(expand_symmetry(gn), Error);
  CHECK_THROWS_AS(expand_symmetry(normalize(gn, Normalization::magnitude_sum)), Error);
}

TEST_CASE("expand_symmetry matches direct reflected estimates") {
  const double fs = 100;
  const auto sig = make_signal(testing::white_noise(3000, 8), fs);
  std::vector<BandSpec> bank;
  for (int i = -20; i <= 20; ++i) bank.push_back({static_cast<double>(i), 2.0, WindowKind::gaussian, i + 20});
  const auto d = demodulate(sig, bank, 1);
  EstimateOptions plane;
  plane.domain = Domain::full_plane;
  const auto direct = estimate_bispectrum(d, EstimatorKind::bbb(2), {-20, 20}, {-20, 20}, plane);
  const auto principal = estimate_bispectrum(d, EstimatorKind::bbb(2), {0, 20}, {0, 20});
  const auto full = expand_symmetry(principal);
  std::size_t compared = 0;
  for (std::size_t i = 0; i < full.B.rows(); ++i) {
    for (std::size_t j = 0; j < full.B.cols(); ++j) {
      if (!full.valid(i, j)) continue;
      const auto r = index_of(direct.freq1, full.freq1[i]);
      const auto c = index_of(direct.freq2, full.freq2[j]);
      if (!direct.valid(r, c)) continue;
      ++compared;
      CHECK(std::abs(full.B(i, j) - direct.B(r, c)) <= 1e-10 * std::max(1.0, std::abs(direct.B(r, c))));
    }
  }
  CHECK(compared > 500);
}

TEST_CASE("cross_bispectrum reduces to the symmetrized auto-bispectrum") {
  const double fs = 200;
  const auto sig = make_signal(testing::white_noise(8000, 13), fs);
  const auto bank = design_bank(fs, 0, 40, 2);
  const auto d = demodulate(sig, bank, 1);
  const auto g = cross_bispectrum(d, d, EstimatorKind::bbb(2), {2, 8}, {12, 25});
  std::size_t checked = 0;
  for (std::size_t r = 0; r < g.B.rows(); ++r) {
    for (std::size_t c = 0; c < g.B.cols(); ++c) {
      if (!g.valid(r, c)) continue;
      const double f1 = g.freq1[r], f2 = g.freq2[c];
      const std::size_t k1 = static_cast<std::size_t>(std::lround(f1 / 1.0));
      const std::size_t k2 = static_cast<std::size_t>(std::lround((f2 - f1 / 2) / 1.0));
      const std::size_t k3 = static_cast<std::size_t>(std::lround((f2 + f1 / 2) / 1.0));
      if (std::abs(bank[k2].center - (f2 - f1 / 2)) > 1e-9) continue;  // half-spacing offsets
      cdouble acc{};
      for (std::size_t m = 0; m < d.n_frames(); ++m) {
        acc += d.values(k1, m) * d.values(k2, m) * std::conj(d.values(k3, m));
      }
      CHECK(testing::rel_err(g.B(r, c), acc) <= 1e-12);
      ++checked;
    }
  }
  CHECK(checked > 10);
}

TEST_CASE("cross_bispectrum phase ramp follows an imposed delay") {
  const double fs = 250;
  const std::size_t n = 60 * 250;
  const std::size_t delay = 10;  // 40 ms
  std::vector<double> x(n + delay), xi(n), xj(n);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    x[i] = std::cos(2 * M_PI * 6 * t) + (1 - std::cos(2 * M_PI * 6 * t)) * std::cos(2 * M_PI * 60 * t);
  }
  for (std::size_t i = 0; i < n; ++i) xi[i] = x[i + delay], xj[i] = x[i];
  const auto bank = design_bank(fs, 0, 70, 2);
  const auto hop = default_hop(fs, 71);
  const auto di = demodulate(make_signal(xi, fs), bank, hop);
  const auto dj = demodulate(make_signal(xj, fs), bank, hop);
  const auto self = cross_bispectrum(di, di, EstimatorKind::bbb(2), {6, 6}, {56, 64});
  const auto cross = cross_bispectrum(di, dj, EstimatorKind::bbb(2), {6, 6}, {56, 64});
  const auto c = index_of(self.freq2, 57);  // the (6, 54) peak in symmetrized coordinates
  REQUIRE(self.valid(0, c));
  const double ramp = std::arg(cross.B(0, c) / self.B(0, c));
  const double expect = 2 * M_PI * 6 * static_cast<double>(delay) / fs;
  CHECK(std::abs(std::remainder(ramp - expect, 2 * M_PI)) <= 0.05);
  CHECK(std::abs(cross.B(0, c)) == doctest::Approx(std::abs(self.B(0, c))).epsilon(0.05));
}

TEST_CASE("k-mode reduces to the bispectrum at k = 1") {
  const auto sig = make_signal(testing::white_noise(5000, 30), 100);
  const auto bank = design_bank(100, 0, 40, 2);
  const auto d = demodulate(sig, bank, 1);
  const auto b = estimate_bispectrum(d, EstimatorKind::bbb(2), {0, 15}, {0, 20});
  const auto k1 = kmode_coupling(d, 1, {0, 15}, {0, 20});
  REQUIRE(b.B.size() == k1.B.size());
  for (std::size_t i = 0; i < b.B.size(); ++i) {
    CHECK(std::abs(b.B.data()[i] - k1.B.data()[i]) <= 1e-12 * std::max(1.0, std::abs(b.B.data()[i])));
  }
  const auto k2 = kmode_coupling(d, 2, {0, 8}, {0, 20});
  CHECK(k2.order == 2);
  for (std::size_t r = 0; r < k2.B.rows(); ++r) {
    for (std::size_t c = 0; c < k2.B.cols(); ++c) {
      if (!k2.valid(r, c)) continue;
      const auto& b3 = k2.bands3[static_cast<std::size_t>(k2.leg3(r, c))];
      CHECK(std::abs(2 * k2.freq1[r] + k2.freq2[c] - b3.center) < 1.0);
    }
  }
  const auto zero = make_signal(std::vector<double>(5000, 0.0), 100);
  const auto kz = kmode_coupling(zero, 2, 2.0, {0, 8}, {0, 20});
  for (const auto& v : kz.B.data()) CHECK(v == cdouble{});
  CHECK_THROWS_AS(kmode_coupling(d, 0, {0, 8}, {0, 20}), Error);
}

TEST_CASE("oracle bispectrum sanity") {
  const std::vector<double> fr{0, 1, 2};
  const auto cg = oracle_bispectrum(make_signal(std::vector<double>(400, 2.0), 100), 100, fr, fr);
  CHECK(std::abs(cg.B(0, 0) - cdouble(std::pow(2.0 * 100, 3) * 4)) <= 1e-6);
  for (std::size_t i = 0; i < cg.B.size(); ++i) {
    if (i != 0) CHECK(std::abs(cg.B.data()[i]) <= 1e-6);
  }

  // white noise: mean |B|/M halves when the segment count grows four-fold
  const std::vector<double> f1{5, 10, 15}, f2{12, 20, 25};
  auto mean_mag = [&](std::size_t segs) {
    double acc = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto g = oracle_bispectrum(make_signal(testing::white_noise(segs * 100, 100 + s), 100), 100, f1, f2);
      for (const auto& v : g.B.data()) acc += std::abs(v) / static_cast<double>(segs);
    }
    return acc;
  };
  const double ratio = mean_mag(64) / mean_mag(256);
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.25));
  CHECK_THROWS_AS(oracle_bispectrum(make_signal(std::vector<double>(300, 0.0), 100), 100, f1, f2), Error);
}

TEST_CASE("time shift by whole hops leaves |B| nearly unchanged") {
  const double fs = 100;
  const auto x = testing::white_noise(4002, 17);
  const std::size_t hop = 2;
  std::vector<double> a(x.begin(), x.end() - hop), b(x.begin() + hop, x.end());
  const auto bank = design_bank(fs, 0, 20, 2);
  const auto da = demodulate(make_signal(a, fs), bank, hop);
  const auto db = demodulate(make_signal(b, fs), bank, hop);
  EstimateOptions opt;
  opt.oversample = 0;
  const auto ga = estimate_bispectrum(da, EstimatorKind::bbb(2), {0, 10}, {0, 10}, opt);
  const auto gb = estimate_bispectrum(db, EstimatorKind::bbb(2), {0, 10}, {0, 10}, opt);
  for (std::size_t r = 0; r < ga.B.rows(); ++r) {
    for (std::size_t c = 0; c < ga.B.cols(); ++c) {
      if (!ga.valid(r, c)) continue;
      const auto l = static_cast<std::size_t>(ga.leg3(r, c));
      const auto k1 = static_cast<std::size_t>(std::lround(ga.freq1[r] * 2));
      const auto k2 = static_cast<std::size_t>(std::lround(ga.freq2[c] * 2));
      double worst = 0.0;
      for (std::size_t m = 0; m < da.n_frames(); ++m) {
        worst = std::max(worst, std::abs(da.values(k1, m) * da.values(k2, m) * da.values(l, m)));
      }
      CHECK(std::abs(std::abs(ga.B(r, c)) - std::abs(gb.B(r, c))) <= 2 * worst + 1e-12);
    }
  }
}

TEST_CASE("Gaussian null, small scale") {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto sig = make_signal(testing::white_noise(100 * 200, 1000 + seed), 100);
    const auto g = estimate_bispectrum(sig, EstimatorKind::bbb(2), {0, 25}, {0, 25});
    const auto bc = bias_correct(normalize(g, Normalization::magnitude_sum), g);
    for (std::size_t i = 0; i < bc.mask.size(); ++i) {
      if (!bc.mask.data()[i]) continue;
      sum += bc.magnitude.data()[i];
      ++count;
    }
  }
  REQUIRE(count > 0);
  CHECK(std::abs(sum / static_cast<double>(count)) <= 0.02);
}
