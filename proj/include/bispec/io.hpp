#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "bispec/demod.hpp"

namespace bispec::io {

/// Payload element type. Complex types are stored as interleaved (real, imag).
enum class DType { f32, f64, c64, c128 };

std::string to_string(DType d);
DType dtype_from_string(const std::string& name);
bool is_complex(DType d);
/// Bytes per stored scalar (one component of a complex value).
std::size_t scalar_size(DType d);

/// Coordinates along one array dimension. Either explicit `values` or a
/// uniform `start` + i * `step`.
struct Axis {
  std::string name;
  std::string unit;  // "Hz" or "s"
  std::vector<double> values;
  double start = 0.0;
  double step = 0.0;

  bool uniform() const { return values.empty(); }
};

/// Raw little-endian payload plus a JSON sidecar at `path` + ".json".
struct ArrayFile {
  DType dtype = DType::f64;
  std::vector<std::size_t> shape;
  std::vector<Axis> axes;
  std::string provenance;  // hash of the RunConfig that produced the file
  nlohmann::json attrs = nlohmann::json::object();
  std::vector<std::uint8_t> mask;  // optional, one entry per element, 1 = valid
  std::vector<double> real;
  std::vector<double> imag;  // empty unless complex

  std::size_t element_count() const;
  /// product(shape) * scalar size * (2 if complex)
  std::size_t payload_bytes() const;
  void validate() const;
};

std::filesystem::path sidecar_path(const std::filesystem::path& payload);

/// Writes `bytes` to a temporary sibling and renames it over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string encode_payload(const ArrayFile& a);
nlohmann::json sidecar_json(const ArrayFile& a);

void write_array(const std::filesystem::path& path, const ArrayFile& a);
ArrayFile read_array(const std::filesystem::path& path);

/// Packs a 0/1 mask into bits, least significant bit first, as lowercase hex.
std::string pack_mask(const std::vector<std::uint8_t>& mask);
std::vector<std::uint8_t> unpack_mask(const std::string& hex, std::size_t count);

enum class SignalFormat { automatic, csv, raw_f32, array };

std::string to_string(SignalFormat f);
SignalFormat signal_format_from_string(const std::string& name);

/// csv: two columns (t, value), optional header line, uniform dt within 1e-6
/// relative jitter. raw_f32: little-endian float32 samples, needs `fs`.
/// array: an ArrayFile with one time axis. automatic picks array when a
/// sidecar exists, csv for a .csv extension, raw_f32 otherwise.
Signal read_signal(const std::filesystem::path& path, SignalFormat format = SignalFormat::automatic,
                   std::optional<double> fs = std::nullopt);

ArrayFile signal_array(const Signal& signal, DType dtype = DType::f64);
Signal signal_from_array(const ArrayFile& a);

}  // namespace bispec::io
