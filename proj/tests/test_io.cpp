#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>
#include <limits>

#include "bispec/io.hpp"
#include "test_support.hpp"

using namespace bispec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "bispec_test_io";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

io::ArrayFile complex_grid() {
  io::ArrayFile a;
  a.dtype = io::DType::c128;
  a.shape = {3, 4};
  io::Axis f1{"freq1", "Hz", {1, 2, 3}, 0, 0};
  io::Axis f2{"freq2", "Hz", {0.5, 1.0, 1.5, 2.0}, 0, 0};
  a.axes = {f1, f2};
  a.provenance = "0123456789abcdef";
  a.attrs = {{"kind", "test"}};
  for (std::size_t i = 0; i < 12; ++i) {
    a.real.push_back(std::sin(1.0 + static_cast<double>(i)) * 1e-3);
    a.imag.push_back(-1.0 / (1.0 + static_cast<double>(i)));
  }
  a.real[5] = std::numeric_limits<double>::denorm_min();
  a.imag[7] = -0.0;
  a.mask = {1, 0, 1, 1, 0, 0, 0, 1, 1, 1, 1, 0};
  return a;
}

}  // namespace

TEST_CASE("complex array round trips bit for bit") {
  const auto a = complex_grid();
  const auto path = scratch("grid.c128");
  io::write_array(path, a);
  CHECK(fs::file_size(path) == a.payload_bytes());
  CHECK(a.payload_bytes() == 12 * 8 * 2);
  const auto b = io::read_array(path);
  CHECK(b.shape == a.shape);
  CHECK(b.dtype == a.dtype);
  CHECK(b.provenance == a.provenance);
  CHECK(b.mask == a.mask);
  CHECK(b.attrs == a.attrs);
  REQUIRE(b.real.size() == a.real.size());
  for (std::size_t i = 0; i < a.real.size(); ++i) {
    CHECK(std::bit_cast<std::uint64_t>(b.real[i]) == std::bit_cast<std::uint64_t>(a.real[i]));
    CHECK(std::bit_cast<std::uint64_t>(b.imag[i]) == std::bit_cast<std::uint64_t>(a.imag[i]));
  }
  CHECK(b.axes[0].values == a.axes[0].values);
  CHECK(b.axes[1].name == "freq2");
  // rewriting what was read gives the same bytes
  const auto again = scratch("grid2.c128");
  io::write_array(again, b);
  CHECK(slurp(again) == slurp(path));
  CHECK(slurp(io::sidecar_path(again)) == slurp(io::sidecar_path(path)));
  CHECK_FALSE(fs::exists(scratch("grid.c128.tmp")));
}

TEST_CASE("payload layout is little-endian interleaved") {
  io::ArrayFile a;
  a.dtype = io::DType::c64;
  a.shape = {1};
  a.real = {1.0};
  a.imag = {-2.0};
  const auto bytes = io::encode_payload(a);
  REQUIRE(bytes.size() == 8);
  // 1.0f = 0x3f800000, -2.0f = 0xc0000000
  const unsigned char want[] = {0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0xc0};
  for (int i = 0; i < 8; ++i) CHECK(static_cast<unsigned char>(bytes[i]) == want[i]);

  a.dtype = io::DType::f64;
  a.imag.clear();
  const auto b = io::encode_payload(a);
  REQUIRE(b.size() == 8);
  CHECK(static_cast<unsigned char>(b[7]) == 0x3f);
  CHECK(static_cast<unsigned char>(b[6]) == 0xf0);
}

TEST_CASE("f32 storage rounds once and is then stable") {
  io::ArrayFile a;
  a.dtype = io::DType::f32;
  a.shape = {4};
  a.real = {0.1, 1.0 / 3.0, -7.25, 1e-9};
  const auto path = scratch("v.f32");
  io::write_array(path, a);
  CHECK(fs::file_size(path) == 16);
  const auto b = io::read_array(path);
  for (std::size_t i = 0; i < 4; ++i) CHECK(b.real[i] == static_cast<double>(static_cast<float>(a.real[i])));
  const auto path2 = scratch("v2.f32");
  io::write_array(path2, b);
  CHECK(slurp(path2) == slurp(path));
}

TEST_CASE("mask bitmap packing") {
  const std::vector<std::uint8_t> m{1, 0, 0, 0, 0, 0, 0, 0, 1, 1};
  const auto hex = io::pack_mask(m);
  CHECK(hex == "0103");
  CHECK(io::unpack_mask(hex, m.size()) == m);
  CHECK_THROWS_AS(io::unpack_mask("01", 10), Error);
  CHECK_THROWS_AS(io::unpack_mask("zz03", 10), Error);
}

TEST_CASE("malformed files are rejected") {
  auto a = complex_grid();
  const auto path = scratch("bad.c128");
  io::write_array(path, a);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "x";
  }
  CHECK_THROWS_AS(io::read_array(path), Error);
  CHECK_THROWS_AS(io::read_array(scratch("missing.c128")), Error);

  a.real.pop_back();
  CHECK_THROWS_AS(io::write_array(path, a), Error);
  a = complex_grid();
  a.imag.clear();
  CHECK_THROWS_AS(a.validate(), Error);
  a = complex_grid();
  a.axes[0].values.pop_back();
  CHECK_THROWS_AS(a.validate(), Error);
  CHECK_THROWS_AS(io::dtype_from_string("i16"), Error);
}

TEST_CASE("read_signal: csv") {
  const auto path = scratch("sig.csv");
  {
    std::ofstream out(path);
    out << "t,value\n";
    for (int i = 0; i < 100; ++i) out << i * 0.004 << "," << std::sin(i * 0.1) << "\n";
  }
  const auto s = io::read_signal(path);
  CHECK(s.fs == doctest::Approx(250.0).epsilon(1e-9));
  REQUIRE(s.samples.size() == 100);
  CHECK(s.samples[10] == doctest::Approx(std::sin(1.0)));

  const auto jitter = scratch("jitter.csv");
  {
    std::ofstream out(jitter);
    for (int i = 0; i < 10; ++i) out << i * 0.004 + (i == 5 ? 1e-6 : 0.0) << "," << i << "\n";
  }
  CHECK_THROWS_AS(io::read_signal(jitter), Error);

  const auto tiny = scratch("tiny.csv");
  {
    std::ofstream out(tiny);
    for (int i = 0; i < 10; ++i) out << i * 0.004 * (1 + (i == 5 ? 1e-8 : 0.0)) << "," << i << "\n";
  }
  CHECK(io::read_signal(tiny).samples.size() == 10);

  const auto broken = scratch("broken.csv");
  {
    std::ofstream out(broken);
    out << "0,1\n0.1,2\n0.2\n";
  }
  CHECK_THROWS_AS(io::read_signal(broken), Error);
}

TEST_CASE("read_signal: raw float32 and array files") {
  const auto path = scratch("sig.raw");
  {
    io::ArrayFile a;
    a.dtype = io::DType::f32;
    a.shape = {6};
    a.real = {0, 0.5, 1, 1.5, 2, 2.5};
    std::ofstream out(path, std::ios::binary);
    out << io::encode_payload(a);
  }
  CHECK_THROWS_AS(io::read_signal(path), Error);  // needs fs
  const auto s = io::read_signal(path, io::SignalFormat::raw_f32, 500.0);
  CHECK(s.fs == 500.0);
  CHECK(s.samples == std::vector<double>{0, 0.5, 1, 1.5, 2, 2.5});

  const auto sig = make_signal(testing::white_noise(300, 4), 200.0, "w");
  const auto apath = scratch("sig.f64");
  auto arr = io::signal_array(sig);
  io::write_array(apath, arr);
  const auto back = io::read_signal(apath);
  CHECK(back.fs == 200.0);
  CHECK(back.samples == sig.samples);
  CHECK(io::read_array(apath).axes[0].unit == "s");
}
