#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>

#include "bispec/fft.hpp"
#include "bispec/polyspec.hpp"
#include "bispec/simgen.hpp"

using namespace bispec;
using nlohmann::json;

namespace {

sim::SimRecipe recipe(const json& doc) { return sim::recipe_from_json(doc); }

double power(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  return p / static_cast<double>(x.size());
}

std::string error_of(const json& doc) {
  try {
    sim::recipe_from_json(doc);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("identical recipes give bit-identical signals") {
  const json doc = {{"duration", 5}, {"fs", 500}, {"seed", 7},
                    {"components", {{{"kind", "nested_noise"}, {"params", json::object()}},
                                    {{"kind", "qpc_triple"}, {"params", {{"f1", 11}, {"f2", 19}}}}}},
                    {"noise", {{"kind", "one_over_f"}, {"level_db", 0}}}};
  const auto a = sim::gen(recipe(doc));
  const auto b = sim::gen(recipe(doc));
  REQUIRE(a.samples.size() == 2500);
  CHECK(std::memcmp(a.samples.data(), b.samples.data(), a.samples.size() * sizeof(double)) == 0);

  json other = doc;
  other["seed"] = 8;
  CHECK(sim::gen(recipe(other)).samples != a.samples);

  // component streams follow their content, not their position
  json swapped = doc;
  std::swap(swapped["components"][0], swapped["components"][1]);
  const auto c = sim::gen(recipe(swapped));
  for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(c.samples[i] == doctest::Approx(a.samples[i]).epsilon(1e-12));

  // JSON round trip
  const auto back = sim::to_json(recipe(doc));
  CHECK(sim::gen(recipe(back)).samples == a.samples);
}

TEST_CASE("sine_am_pac has four lines with 1 : 1/2 : 1 : 1/2 amplitudes") {
  const json doc = {{"duration", 10}, {"fs", 500}, {"seed", 1},
                    {"components", {{{"kind", "sine_am_pac"}, {"params", {{"theta", 6}, {"gamma", 60}}}}}}};
  const auto s = sim::gen(recipe(doc));
  const auto X = fft::forward_real(s.samples);
  const double n = static_cast<double>(s.samples.size());
  auto amp = [&](double f) { return 2.0 * std::abs(X[static_cast<std::size_t>(std::lround(f * 10))]) / n; };
  CHECK(amp(6) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(amp(54) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(amp(60) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(amp(66) == doctest::Approx(0.5).epsilon(1e-9));
  std::size_t lines = 0;
  for (std::size_t k = 1; k < X.size() / 2; ++k) lines += 2.0 * std::abs(X[k]) / n > 1e-6;
  CHECK(lines == 4);
}

TEST_CASE("fm_pair envelope spans [1, sqrt 2], am option spans [0, 2]") {
  for (const std::string mod : {"fm", "am"}) {
    sim::ComponentSpec c{"fm_pair", {{"theta", 1}, {"gamma", 10}, {"so_amplitude", 0}, {"modulation", mod}}};
    const auto x = sim::render_component(c, 20, 500, 0);
    const auto z = fft::analytic(x);
    double lo = 1e9, hi = 0;
    for (std::size_t i = 1000; i + 1000 < z.size(); ++i) {
      lo = std::min(lo, std::abs(z[i]));
      hi = std::max(hi, std::abs(z[i]));
    }
    if (mod == "fm") {
      CHECK(lo == doctest::Approx(1.0).epsilon(0.01));
      CHECK(hi == doctest::Approx(std::sqrt(2.0)).epsilon(0.01));
    } else {
      CHECK(lo <= 0.01);
      CHECK(hi == doctest::Approx(2.0).epsilon(0.01));
    }
  }
}

TEST_CASE("transient train is non-negative and peak-normalized") {
  sim::ComponentSpec c{"transient_train", {{"kappa", 10}, {"so_band", {6, 10}}}};
  const auto x = sim::render_component(c, 20, 500, 3);
  CHECK(*std::min_element(x.begin(), x.end()) >= 0.0);
  CHECK(*std::max_element(x.begin(), x.end()) == doctest::Approx(1.0));
  const json doc = {{"duration", 20}, {"fs", 500}, {"seed", 3},
                    {"components", {{{"kind", "transient_train"}, {"params", {{"kappa", 10}}}}}},
                    {"noise", {{"kind", "one_over_f"}, {"level_db", 0}}}};
  const auto s = sim::gen(recipe(doc));
  CHECK(s.samples.size() == 10000);
}

TEST_CASE("one_over_f spectrum") {
  const double fs = 200, dur = 100;
  const std::size_t n = 20000;
  SUBCASE("same seed is identical, unit variance") {
    const auto a = sim::gen_one_over_f(dur, fs, 5);
    const auto b = sim::gen_one_over_f(dur, fs, 5);
    CHECK(a.samples == b.samples);
    CHECK(power(a.samples) == doctest::Approx(1.0).epsilon(1e-9));
  }
  // averaged periodogram in log-spaced bins
  auto slope = [&](double exponent) {
    std::vector<double> psd(n / 2, 0.0);
    for (std::uint64_t s = 0; s < 20; ++s) {
      const auto x = sim::gen_one_over_f(dur, fs, 100 + s, exponent);
      const auto X = fft::forward_real(x.samples);
      for (std::size_t k = 0; k < n / 2; ++k) psd[k] += std::norm(X[k]);
    }
    // regression of log P on log f over 2..20 Hz
    double sx = 0, sy = 0, sxx = 0, sxy = 0, m = 0;
    for (std::size_t k = 1; k < n / 2; ++k) {
      const double f = static_cast<double>(k) * fs / static_cast<double>(n);
      if (f < 2 || f > 20) continue;
      const double lx = std::log10(f), ly = std::log10(psd[k]);
      sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly, m += 1;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
  };
  CHECK(std::abs(slope(1.0) + 1.0) <= 0.1);
  CHECK(std::abs(slope(0.0)) <= 0.1);
}

TEST_CASE("noise level calibration") {
  for (double db : {-10.0, 0.0, 6.0}) {
    for (const char* kind : {"white", "one_over_f"}) {
      const json clean = {{"duration", 20}, {"fs", 500}, {"seed", 11},
                          {"components", {{{"kind", "sine_am_pac"}, {"params", {{"theta", 6}, {"gamma", 60}}}}}}};
      json noisy = clean;
      noisy["noise"] = {{"kind", kind}, {"level_db", db}};
      const auto s = sim::gen(recipe(clean));
      const auto y = sim::gen(recipe(noisy));
      std::vector<double> noise(s.samples.size());
      for (std::size_t i = 0; i < noise.size(); ++i) noise[i] = y.samples[i] - s.samples[i];
      const double measured = 10 * std::log10(power(noise) / power(s.samples));
      CHECK(std::abs(measured - db) <= 0.5);
    }
  }
}

TEST_CASE("recipe validation reports JSON paths") {
  CHECK(error_of({{"fs", 500}, {"seed", 1}}).find("$.duration") != std::string::npos);
  CHECK(error_of({{"duration", 1}, {"fs", 500}, {"seed", -3}}).find("$.seed") != std::string::npos);
  const json bad_kind = {{"duration", 1}, {"fs", 500}, {"seed", 1}, {"components", {{{"kind", "nope"}}}}};
  CHECK(error_of(bad_kind).find("$.components[0].kind") != std::string::npos);
  const json bad_gamma = {{"duration", 1}, {"fs", 500}, {"seed", 1},
                          {"components", {{{"kind", "sine_am_pac"}, {"params", {{"theta", 6}, {"gamma", 4}}}}}}};
  CHECK(error_of(bad_gamma).find("$.components[0].params.gamma") != std::string::npos);
  const json nyq = {{"duration", 1}, {"fs", 100}, {"seed", 1},
                    {"components", {{{"kind", "nested_noise"}, {"params", {{"fo_band", {30, 80}}}}}}}};
  CHECK(error_of(nyq).find("Nyquist") != std::string::npos);
  const json pp = {{"duration", 1}, {"fs", 500}, {"seed", 1},
                   {"components", {{{"kind", "point_process_feature"},
                                    {"params", {{"process", {{"kind", "poisson"}}}, {"feature", {{"shape", "gabor"}}}}}}}}};
  CHECK(error_of(pp).find("$.components[0].params.process.rate") != std::string::npos);
}

TEST_CASE("point process placement and phase policy") {
  sim::PointProcessSpec pp;
  pp.kind = sim::ProcessKind::periodic;
  pp.period = 0.125;
  pp.offset = 0.0625;
  sim::Rng rng(1);
  const auto t = sim::event_times(pp, 10, rng);
  CHECK(t.size() == 80);
  CHECK(t[1] - t[0] == doctest::Approx(0.125));

  sim::PointProcessSpec poisson;
  poisson.kind = sim::ProcessKind::poisson;
  poisson.rate = 5;
  sim::Rng r2(2);
  const auto tp = sim::event_times(poisson, 200, r2);
  CHECK(static_cast<double>(tp.size()) == doctest::Approx(1000).epsilon(0.1));

  sim::FeatureSpec f;
  f.shape = "so_fo";
  f.so_frequency = 8;
  f.fo_frequency = 40;
  const auto locked = sim::gen_point_process_signal(pp, f, sim::PhasePolicy::locked, 10, 500, 4);
  const auto random = sim::gen_point_process_signal(pp, f, sim::PhasePolicy::random_per_event, 10, 500, 4);
  // SO part identical, so the difference is pure FO
  double diff = 0.0;
  for (std::size_t i = 0; i < locked.samples.size(); ++i) diff += std::abs(locked.samples[i] - random.samples[i]);
  CHECK(diff > 1.0);

  std::vector<std::string> warnings;
  f.width = 0.2;
  sim::gen_point_process_signal(pp, f, sim::PhasePolicy::locked, 10, 500, 4, &warnings);
  CHECK(warnings.size() == 1);

  sim::PointProcessSpec late = pp;
  late.offset = 20;
  CHECK_THROWS_AS(sim::gen_point_process_signal(late, f, sim::PhasePolicy::locked, 10, 500, 4), Error);
}

TEST_CASE("zero-mean narrowband features stay at the null, edged features do not") {
  const double fs = 200, dur = 200;
  sim::PointProcessSpec pp;
  pp.kind = sim::ProcessKind::poisson;
  pp.rate = 5;
  auto peak_bc = [&](const sim::FeatureSpec& f, FreqRange r1, FreqRange r2) {
    const auto s = sim::gen_point_process_signal(pp, f, sim::PhasePolicy::locked, dur, fs, 9);
    const auto g = estimate_bispectrum(s, EstimatorKind::bbb(2), r1, r2);
    const auto bc = bias_correct(normalize(g, Normalization::magnitude_sum), g);
    double best = -1.0, mean = 0.0, count = 0.0;
    for (std::size_t i = 0; i < bc.mask.size(); ++i) {
      if (!bc.mask.data()[i]) continue;
      best = std::max(best, bc.magnitude.data()[i]);
      mean += bc.magnitude.data()[i];
      count += 1;
    }
    return std::make_pair(best, mean / count);
  };
  sim::FeatureSpec gabor;
  gabor.shape = "gabor";
  gabor.fo_frequency = 30;
  gabor.width = 0.08;  // ~2 Hz spectral sd, no DC
  const auto [gpeak, gmean] = peak_bc(gabor, {20, 40}, {20, 40});
  CHECK(std::abs(gmean) <= 0.05);
  CHECK(gpeak <= 0.3);

  sim::FeatureSpec spike;
  spike.shape = "spike";
  spike.tau = 0.01;
  const auto [speak, smean] = peak_bc(spike, {2, 40}, {2, 40});
  CHECK(speak > 0.3);
  (void)smean;
}
