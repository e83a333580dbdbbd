#include "bispec/io.hpp"

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace bispec::io {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(DType d) {
  switch (d) {
    case DType::f32: return "f32";
    case DType::f64: return "f64";
    case DType::c64: return "c64";
    case DType::c128: return "c128";
  }
  return "f64";
}

DType dtype_from_string(const std::string& name) {
  if (name == "f32") return DType::f32;
  if (name == "f64") return DType::f64;
  if (name == "c64") return DType::c64;
  if (name == "c128") return DType::c128;
  throw Error("unknown dtype \"" + name + "\"");
}

bool is_complex(DType d) { return d == DType::c64 || d == DType::c128; }

std::size_t scalar_size(DType d) { return d == DType::f32 || d == DType::c64 ? 4 : 8; }

std::size_t ArrayFile::element_count() const {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return shape.empty() ? 0 : n;
}

std::size_t ArrayFile::payload_bytes() const {
  return element_count() * scalar_size(dtype) * (is_complex(dtype) ? 2 : 1);
}

void ArrayFile::validate() const {
  const auto n = element_count();
  if (shape.empty()) throw Error("array: empty shape");
  if (real.size() != n) throw Error("array: value count does not match the shape");
  if (is_complex(dtype) ? imag.size() != n : !imag.empty()) {
    throw Error("array: imaginary part does not match the dtype");
  }
  if (!axes.empty() && axes.size() != shape.size()) throw Error("array: one axis per dimension required");
  for (std::size_t i = 0; i < axes.size(); ++i) {
    if (!axes[i].uniform() && axes[i].values.size() != shape[i]) {
      throw Error("array: axis \"" + axes[i].name + "\" has the wrong number of coordinates");
    }
  }
  if (!mask.empty() && mask.size() != n) throw Error("array: mask size does not match the shape");
}

fs::path sidecar_path(const fs::path& payload) {
  fs::path p = payload;
  p += ".json";
  return p;
}

void write_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

namespace {

template <typename U>
void put_le(std::string& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

void put_scalar(std::string& out, double v, DType d) {
  if (scalar_size(d) == 4) {
    put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    put_le(out, std::bit_cast<std::uint64_t>(v));
  }
}

double get_scalar(const unsigned char* p, DType d) {
  if (scalar_size(d) == 4) return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
  return std::bit_cast<double>(get_le<std::uint64_t>(p));
}

json axis_json(const Axis& a, std::size_t count) {
  json j = {{"name", a.name}, {"unit", a.unit}};
  if (a.uniform()) {
    j["start"] = a.start;
    j["step"] = a.step;
    j["count"] = count;
  } else {
    j["values"] = a.values;
  }
  return j;
}

Axis axis_from_json(const json& j, const std::string& path) {
  if (!j.is_object()) throw Error(path + ": expected an object");
  Axis a;
  a.name = j.value("name", "");
  a.unit = j.value("unit", "");
  if (j.contains("values")) {
    a.values = j["values"].get<std::vector<double>>();
  } else {
    if (!j.contains("start") || !j.contains("step")) throw Error(path + ": needs values or start and step");
    a.start = j["start"].get<double>();
    a.step = j["step"].get<double>();
  }
  return a;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string pack_mask(const std::vector<std::uint8_t>& mask) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve((mask.size() + 7) / 8 * 2);
  for (std::size_t i = 0; i < mask.size(); i += 8) {
    unsigned byte = 0;
    for (std::size_t b = 0; b < 8 && i + b < mask.size(); ++b) {
      if (mask[i + b]) byte |= 1u << b;
    }
    out.push_back(kHex[byte >> 4]);
    out.push_back(kHex[byte & 0xf]);
  }
  return out;
}

std::vector<std::uint8_t> unpack_mask(const std::string& hex, std::size_t count) {
  if (hex.size() != (count + 7) / 8 * 2) throw Error("mask: bitmap length does not match the shape");
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    throw Error("mask: bitmap is not lowercase hex");
  };
  std::vector<std::uint8_t> out(count, 0);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned byte = nibble(hex[i / 8 * 2]) << 4 | nibble(hex[i / 8 * 2 + 1]);
    out[i] = static_cast<std::uint8_t>((byte >> (i % 8)) & 1u);
  }
  return out;
}

std::string encode_payload(const ArrayFile& a) {
  a.validate();
  std::string out;
  out.reserve(a.payload_bytes());
  const bool cplx = is_complex(a.dtype);
  for (std::size_t i = 0; i < a.real.size(); ++i) {
    put_scalar(out, a.real[i], a.dtype);
    if (cplx) put_scalar(out, a.imag[i], a.dtype);
  }
  return out;
}

json sidecar_json(const ArrayFile& a) {
  a.validate();
  json j;
  j["format"] = "bispec-array";
  j["version"] = 1;
  j["dtype"] = to_string(a.dtype);
  j["shape"] = a.shape;
  j["endianness"] = "little";
  j["payload_bytes"] = a.payload_bytes();
  j["axes"] = json::array();
  for (std::size_t i = 0; i < a.axes.size(); ++i) j["axes"].push_back(axis_json(a.axes[i], a.shape[i]));
  j["provenance"] = a.provenance;
  if (!a.mask.empty()) {
    std::size_t valid = 0;
    for (auto m : a.mask) valid += m ? 1 : 0;
    j["mask"] = {{"encoding", "bits-lsb-hex"}, {"valid", valid}, {"bits", pack_mask(a.mask)}};
  }
  j["attrs"] = a.attrs;
  return j;
}

void write_array(const fs::path& path, const ArrayFile& a) {
  const auto payload = encode_payload(a);
  const auto side = sidecar_json(a).dump(2) + "\n";
  write_atomic(path, payload);
  write_atomic(sidecar_path(path), side);
}

ArrayFile read_array(const fs::path& path) {
  const auto side_path = sidecar_path(path);
  json j;
  try {
    j = json::parse(read_file(side_path));
  } catch (const json::exception& e) {
    throw Error(side_path.string() + ": " + e.what());
  }
  const std::string where = side_path.string();
  if (j.value("format", "") != "bispec-array") throw Error(where + ": $.format is not \"bispec-array\"");
  if (j.value("endianness", "") != "little") throw Error(where + ": $.endianness must be \"little\"");
  ArrayFile a;
  try {
    a.dtype = dtype_from_string(j.at("dtype").get<std::string>());
    a.shape = j.at("shape").get<std::vector<std::size_t>>();
    a.provenance = j.value("provenance", "");
    if (j.contains("attrs")) a.attrs = j["attrs"];
    const auto& axes = j.value("axes", json::array());
    for (std::size_t i = 0; i < axes.size(); ++i) {
      a.axes.push_back(axis_from_json(axes[i], where + ": $.axes[" + std::to_string(i) + "]"));
    }
  } catch (const json::exception& e) {
    throw Error(where + ": " + e.what());
  }
  const auto bytes = read_file(path);
  if (bytes.size() != a.payload_bytes()) {
    throw Error(path.string() + ": payload has " + std::to_string(bytes.size()) + " bytes, sidecar implies " +
                std::to_string(a.payload_bytes()));
  }
  const auto n = a.element_count();
  const bool cplx = is_complex(a.dtype);
  const auto sz = scalar_size(a.dtype);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  a.real.resize(n);
  if (cplx) a.imag.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    a.real[i] = get_scalar(p, a.dtype);
    p += sz;
    if (cplx) {
      a.imag[i] = get_scalar(p, a.dtype);
      p += sz;
    }
  }
  if (j.contains("mask")) {
    a.mask = unpack_mask(j["mask"].at("bits").get<std::string>(), n);
  }
  a.validate();
  return a;
}

std::string to_string(SignalFormat f) {
  switch (f) {
    case SignalFormat::automatic: return "auto";
    case SignalFormat::csv: return "csv";
    case SignalFormat::raw_f32: return "raw";
    case SignalFormat::array: return "array";
  }
  return "auto";
}

SignalFormat signal_format_from_string(const std::string& name) {
  if (name == "auto") return SignalFormat::automatic;
  if (name == "csv") return SignalFormat::csv;
  if (name == "raw") return SignalFormat::raw_f32;
  if (name == "array") return SignalFormat::array;
  throw Error("unknown signal format \"" + name + "\" (expected auto, csv, raw or array)");
}

ArrayFile signal_array(const Signal& signal, DType dtype) {
  if (is_complex(dtype)) throw Error("signal_array: signals are real");
  ArrayFile a;
  a.dtype = dtype;
  a.shape = {signal.samples.size()};
  Axis t;
  t.name = "time";
  t.unit = "s";
  t.start = 0.0;
  t.step = 1.0 / signal.fs;
  a.axes = {t};
  a.attrs = {{"kind", "signal"}, {"fs", signal.fs}, {"id", signal.id}};
  a.real = signal.samples;
  return a;
}

Signal signal_from_array(const ArrayFile& a) {
  if (a.shape.size() != 1 || is_complex(a.dtype)) throw Error("signal file must hold a real 1-D array");
  double fs = 0.0;
  if (a.attrs.contains("fs")) {
    fs = a.attrs["fs"].get<double>();
  } else if (!a.axes.empty() && a.axes[0].uniform() && a.axes[0].step > 0) {
    fs = 1.0 / a.axes[0].step;
  } else {
    throw Error("signal file has no sampling rate");
  }
  return make_signal(a.real, fs, a.attrs.value("id", std::string{}));
}

namespace {

bool parse_double(const std::string& field, double& out) {
  const char* begin = field.c_str();
  while (*begin == ' ' || *begin == '\t') ++begin;
  if (*begin == '\0') return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

Signal read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<double> t, x;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto comma = line.find(',');
    double a = 0.0, b = 0.0;
    const bool ok = comma != std::string::npos && line.find(',', comma + 1) == std::string::npos &&
                    parse_double(line.substr(0, comma), a) && parse_double(line.substr(comma + 1), b);
    if (!ok) {
      if (t.empty() && lineno == 1) continue;  // header
      throw Error(path.string() + ":" + std::to_string(lineno) + ": expected two numeric columns (t, value)");
    }
    t.push_back(a);
    x.push_back(b);
  }
  if (t.size() < 2) throw Error(path.string() + ": need at least two samples");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(dt > 0)) throw Error(path.string() + ": time column must increase");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt) {
      throw Error(path.string() + ": non-uniform sampling at row " + std::to_string(i + 1));
    }
  }
  return make_signal(std::move(x), 1.0 / dt, path.filename().string());
}

Signal read_raw_f32(const fs::path& path, std::optional<double> fs) {
  if (!fs || !(*fs > 0)) throw Error(path.string() + ": raw float32 input needs a positive --fs");
  const auto bytes = read_file(path);
  if (bytes.size() % 4 != 0) throw Error(path.string() + ": raw float32 size is not a multiple of 4 bytes");
  std::vector<double> x(bytes.size() / 4);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = get_scalar(p + 4 * i, DType::f32);
  return make_signal(std::move(x), *fs, path.filename().string());
}

}  // namespace

Signal read_signal(const fs::path& path, SignalFormat format, std::optional<double> fs) {
  if (format == SignalFormat::automatic) {
    if (fs::exists(sidecar_path(path))) {
      format = SignalFormat::array;
    } else if (path.extension() == ".csv") {
      format = SignalFormat::csv;
    } else {
      format = SignalFormat::raw_f32;
    }
  }
  switch (format) {
    case SignalFormat::csv: return read_csv(path);
    case SignalFormat::raw_f32: return read_raw_f32(path, fs);
    case SignalFormat::array: return signal_from_array(read_array(path));
    case SignalFormat::automatic: break;
  }
  throw Error("read_signal: unreachable format");
}

}  // namespace bispec::io
