#include "bispec/cli.hpp"

#include <cstdio>

#include "bispec/pac.hpp"
#include "bispec/simgen.hpp"

namespace bispec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision precision_from_string(const std::string& name) {
  if (name == "f32") return Precision::f32;
  if (name == "f64") return Precision::f64;
  throw Error("unknown precision \"" + name + "\" (expected f32 or f64)");
}

std::string RunConfig::command() const {
  switch (params.index()) {
    case 0: return "simulate";
    case 1: return "bispec";
    case 2: return "pac";
    case 3: return "features";
  }
  return "";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw Error(path + ": " + what); }

const json& field(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) fail(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path + "." + key, "missing required field");
  return *it;
}

double number(const json& obj, const std::string& key, const std::string& path, double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj[key];
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

std::optional<double> opt_number(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return number(obj, key, path, 0.0);
}

bool boolean(const json& obj, const std::string& key, const std::string& path, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) fail(path + "." + key, "expected true or false");
  return obj[key].get<bool>();
}

std::string text(const json& obj, const std::string& key, const std::string& path, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) fail(path + "." + key, "expected a string");
  return obj[key].get<std::string>();
}

template <typename F>
auto converted(const json& obj, const std::string& key, const std::string& path, const std::string& fallback, F f) {
  const auto s = text(obj, key, path, fallback);
  try {
    return f(s);
  } catch (const Error& e) {
    fail(path + "." + key, e.what());
  }
}

json range_json(const FreqRange& r) { return json::array({r.lo, r.hi}); }

FreqRange range_from(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    fail(path, "expected [lo, hi]");
  }
  const FreqRange r{v[0].get<double>(), v[1].get<double>()};
  if (!(r.hi > r.lo)) fail(path, "hi must exceed lo");
  return r;
}

std::optional<FreqRange> opt_range(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return range_from(obj[key], path + "." + key);
}

std::string norm_name(Normalization n) { return n == Normalization::rms ? "rms" : "magsum"; }

Normalization norm_from(const std::string& s) {
  if (s == "rms") return Normalization::rms;
  if (s == "magsum") return Normalization::magnitude_sum;
  throw Error("unknown normalization \"" + s + "\" (expected rms or magsum)");
}

json input_json(const SignalInput& in) {
  json j = {{"path", in.path}, {"format", io::to_string(in.format)}};
  if (in.fs) j["fs"] = *in.fs;
  return j;
}

SignalInput input_from(const json& v, const std::string& path) {
  SignalInput in;
  const auto& p = field(v, "path", path);
  if (!p.is_string()) fail(path + ".path", "expected a string");
  in.path = p.get<std::string>();
  in.format = converted(v, "format", path, "auto", io::signal_format_from_string);
  in.fs = opt_number(v, "fs", path);
  return in;
}

template <typename T>
void put_opt(json& j, const std::string& key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

json params_json(const SimulateParams& p) { return {{"recipe", p.recipe}}; }

json params_json(const BispecParams& p) {
  json j = {{"input", input_json(p.input)},
            {"kind", to_string(p.kind)},
            {"bw_narrow", p.bw_narrow},
            {"bw_broad", p.bw_broad},
            {"window", to_string(p.window)},
            {"norm", norm_name(p.norm)},
            {"bias_correct", p.bias_correct},
            {"order", p.order}};
  if (p.range1) j["range1"] = range_json(*p.range1);
  if (p.range2) j["range2"] = range_json(*p.range2);
  return j;
}

json params_json(const PacParams& p) {
  json j = {{"input", input_json(p.input)},
            {"theta_bw", p.theta_bw},
            {"gamma_bw", p.gamma_bw},
            {"theta_range", range_json(p.theta_range)},
            {"gamma_range", range_json(p.gamma_range)},
            {"gamma_step", p.gamma_step},
            {"bias_correct", p.bias_correct}};
  put_opt(j, "proportional", p.proportional);
  put_opt(j, "hop", p.hop);
  return j;
}

json params_json(const FeaturesParams& p) {
  json j = {{"input", p.input}, {"thresholds", to_json(p.thresholds)}, {"impulse_output", p.impulse_output}};
  if (p.so_range) j["so_range"] = range_json(*p.so_range);
  if (p.fo_range) j["fo_range"] = range_json(*p.fo_range);
  put_opt(j, "fundamental", p.fundamental);
  return j;
}

BispecParams bispec_from(const json& v, const std::string& path) {
  BispecParams p;
  p.input = input_from(field(v, "input", path), path + ".input");
  p.kind = converted(v, "kind", path, "bbb", estimator_variant_from_string);
  p.bw_narrow = number(v, "bw_narrow", path, p.bw_narrow);
  p.bw_broad = number(v, "bw_broad", path, p.bw_broad);
  p.window = converted(v, "window", path, "gaussian", window_kind_from_string);
  p.norm = converted(v, "norm", path, "magsum", norm_from);
  p.bias_correct = boolean(v, "bias_correct", path, p.bias_correct);
  p.range1 = opt_range(v, "range1", path);
  p.range2 = opt_range(v, "range2", path);
  const double order = number(v, "order", path, 1.0);
  if (order < 1 || order != static_cast<int>(order)) fail(path + ".order", "expected an integer >= 1");
  p.order = static_cast<int>(order);
  return p;
}

PacParams pac_from(const json& v, const std::string& path) {
  PacParams p;
  p.input = input_from(field(v, "input", path), path + ".input");
  p.theta_bw = number(v, "theta_bw", path, p.theta_bw);
  p.gamma_bw = number(v, "gamma_bw", path, p.gamma_bw);
  p.proportional = opt_number(v, "proportional", path);
  if (auto r = opt_range(v, "theta_range", path)) p.theta_range = *r;
  if (auto r = opt_range(v, "gamma_range", path)) p.gamma_range = *r;
  p.gamma_step = number(v, "gamma_step", path, p.gamma_step);
  p.bias_correct = boolean(v, "bias_correct", path, p.bias_correct);
  if (const auto hop = opt_number(v, "hop", path)) {
    if (*hop < 1 || *hop != static_cast<double>(static_cast<std::size_t>(*hop))) {
      fail(path + ".hop", "expected an integer >= 1");
    }
    p.hop = static_cast<std::size_t>(*hop);
  }
  return p;
}

FeaturesParams features_from(const json& v, const std::string& path) {
  FeaturesParams p;
  const auto& in = field(v, "input", path);
  if (!in.is_string()) fail(path + ".input", "expected a string");
  p.input = in.get<std::string>();
  p.so_range = opt_range(v, "so_range", path);
  p.fo_range = opt_range(v, "fo_range", path);
  p.fundamental = opt_number(v, "fundamental", path);
  if (v.contains("thresholds")) {
    try {
      p.thresholds = thresholds_from_json(v["thresholds"]);
    } catch (const Error& e) {
      fail(path + ".thresholds", e.what());
    }
  }
  p.impulse_output = text(v, "impulse_output", path, "");
  return p;
}

}  // namespace

json to_json(const RunConfig& config) {
  json j;
  j["command"] = config.command();
  j["output"] = config.output;
  j["precision"] = to_string(config.precision);
  if (config.seed) j["seed"] = *config.seed;
  j["params"] = std::visit([](const auto& p) { return params_json(p); }, config.params);
  return j;
}

RunConfig run_config_from_json(const json& doc) {
  if (!doc.is_object()) fail("$", "expected an object");
  RunConfig c;
  const auto command = text(doc, "command", "$", "");
  const auto& params = field(doc, "params", "$");
  if (command == "simulate") {
    c.params = SimulateParams{field(params, "recipe", "$.params")};
  } else if (command == "bispec") {
    c.params = bispec_from(params, "$.params");
  } else if (command == "pac") {
    c.params = pac_from(params, "$.params");
  } else if (command == "features") {
    c.params = features_from(params, "$.params");
  } else {
    fail("$.command", "expected simulate, bispec, pac or features");
  }
  c.output = text(doc, "output", "$", "");
  if (c.output.empty()) fail("$.output", "missing required field");
  c.precision = converted(doc, "precision", "$", "f64", precision_from_string);
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) fail("$.seed", "expected a non-negative integer");
    c.seed = doc["seed"].get<std::uint64_t>();
  }
  return c;
}

std::string provenance_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(sim::fnv1a(to_json(config).dump())));
  return buf;
}

GridFiles GridFiles::at(const fs::path& beta) {
  auto with = [&](const char* suffix) {
    fs::path p = beta;
    p += suffix;
    return p;
  };
  return {beta, with(".magnitude"), with(".eps"), with(".sums")};
}

namespace {

io::DType real_type(Precision p) { return p == Precision::f32 ? io::DType::f32 : io::DType::f64; }
io::DType complex_type(Precision p) { return p == Precision::f32 ? io::DType::c64 : io::DType::c128; }

io::Axis axis(const std::string& name, const std::string& unit, const std::vector<double>& values) {
  io::Axis a;
  a.name = name;
  a.unit = unit;
  a.values = values;
  return a;
}

io::ArrayFile array_2d(std::size_t rows, std::size_t cols, const std::vector<double>& f1,
                       const std::vector<double>& f2, const std::string& provenance) {
  io::ArrayFile a;
  a.shape = {rows, cols};
  a.axes = {axis("freq1", "Hz", f1), axis("freq2", "Hz", f2)};
  a.provenance = provenance;
  return a;
}

void put_complex(io::ArrayFile& a, const Grid2<cdouble>& g) {
  a.real.resize(g.size());
  a.imag.resize(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    a.real[i] = g.data()[i].real();
    a.imag[i] = g.data()[i].imag();
  }
}

Grid2<cdouble> get_complex(const io::ArrayFile& a) {
  Grid2<cdouble> g(a.shape[0], a.shape[1]);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = {a.real[i], a.imag[i]};
  return g;
}

Grid2<double> get_real(const io::ArrayFile& a) {
  Grid2<double> g(a.shape[0], a.shape[1]);
  g.data() = a.real;
  return g;
}

std::string hex_bytes(const Grid2<CellState>& s) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * s.size());
  for (auto v : s.data()) {
    const auto b = static_cast<unsigned>(v);
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

Grid2<CellState> states_from_hex(const std::string& hex, std::size_t rows, std::size_t cols) {
  if (hex.size() != 2 * rows * cols) throw Error("sums file: cell state string has the wrong length");
  Grid2<CellState> s(rows, cols);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto v = std::stoul(hex.substr(2 * i, 2), nullptr, 16);
    if (v > static_cast<unsigned>(CellState::outside_domain)) throw Error("sums file: unknown cell state");
    s.data()[i] = static_cast<CellState>(v);
  }
  return s;
}

json bands_json(const std::vector<BandSpec>& bands) {
  json j = json::array();
  for (const auto& b : bands) j.push_back({b.center, b.bandwidth, to_string(b.window)});
  return j;
}

std::vector<BandSpec> bands_from(const json& j) {
  std::vector<BandSpec> out;
  for (const auto& b : j) {
    out.push_back({b.at(0).get<double>(), b.at(1).get<double>(), window_kind_from_string(b.at(2).get<std::string>()),
                   static_cast<int>(out.size())});
  }
  return out;
}

Domain domain_from(const std::string& s) {
  if (s == "principal_triangle") return Domain::principal_triangle;
  if (s == "full_quadrant") return Domain::full_quadrant;
  if (s == "full_plane") return Domain::full_plane;
  throw Error("unknown domain \"" + s + "\"");
}

std::vector<fs::path> with_sidecars(std::initializer_list<fs::path> paths) {
  std::vector<fs::path> out;
  for (const auto& p : paths) {
    out.push_back(p);
    out.push_back(io::sidecar_path(p));
  }
  return out;
}

}  // namespace

std::vector<fs::path> write_grid(const fs::path& beta, const Bicoherence& bic, const BispecGrid& grid,
                                 const std::string& provenance, Precision precision, const json& attrs) {
  const auto files = GridFiles::at(beta);
  const auto rows = bic.beta.rows(), cols = bic.beta.cols();
  if (grid.B.rows() != rows || grid.B.cols() != cols) throw Error("write_grid: grid and bicoherence shapes differ");

  auto b = array_2d(rows, cols, bic.freq1, bic.freq2, provenance);
  b.dtype = complex_type(precision);
  put_complex(b, bic.beta);
  b.mask = bic.mask.data();
  b.attrs = attrs;
  b.attrs["kind"] = "bicoherence";
  b.attrs["normalization"] = to_string(bic.normalization);
  b.attrs["bias_corrected"] = bic.bias_corrected;
  b.attrs["domain"] = to_string(bic.domain);
  b.attrs["variant"] = to_string(bic.variant);
  b.attrs["companions"] = {{"magnitude", files.magnitude.filename().string()},
                           {"eps", files.eps.filename().string()},
                           {"sums", files.sums.filename().string()}};

  auto m = array_2d(rows, cols, bic.freq1, bic.freq2, provenance);
  m.dtype = real_type(precision);
  m.real = bic.magnitude.data();
  m.mask = b.mask;
  m.attrs = {{"kind", "bicoherence_magnitude"}, {"signed", bic.bias_corrected}};

  auto e = array_2d(rows, cols, bic.freq1, bic.freq2, provenance);
  e.dtype = real_type(precision);
  e.real = bic.eps.empty() ? grid.eps.data() : bic.eps.data();
  e.attrs = {{"kind", "bias_epsilon"}};

  auto s = array_2d(rows, cols, grid.freq1, grid.freq2, provenance);
  s.dtype = complex_type(precision);
  put_complex(s, grid.B);
  s.mask.resize(rows * cols);
  for (std::size_t i = 0; i < s.mask.size(); ++i) s.mask[i] = grid.state.data()[i] == CellState::valid ? 1 : 0;
  s.attrs = {{"kind", "bispectral_sums"},
             {"state", hex_bytes(grid.state)},
             {"n_frames", grid.n_frames},
             {"frame_rate", grid.frame_rate},
             {"domain", to_string(grid.domain)},
             {"order", grid.order},
             {"estimator",
              {{"variant", to_string(grid.kind.variant)},
               {"bw_narrow", grid.kind.bw_narrow},
               {"bw_broad", grid.kind.bw_broad},
               {"window", to_string(grid.kind.window)}}},
             {"bands1", bands_json(grid.bands1)},
             {"bands2", bands_json(grid.bands2)},
             {"bands3", bands_json(grid.bands3)}};

  io::write_array(files.magnitude, m);
  io::write_array(files.eps, e);
  io::write_array(files.sums, s);
  io::write_array(files.beta, b);
  return with_sidecars({files.beta, files.magnitude, files.eps, files.sums});
}

LoadedGrid load_grid(const fs::path& beta) {
  const auto b = io::read_array(beta);
  const std::string where = beta.string();
  if (b.attrs.value("kind", "") != "bicoherence") throw Error(where + ": not a bicoherence file");
  if (b.shape.size() != 2 || !io::is_complex(b.dtype) || b.axes.size() != 2) {
    throw Error(where + ": expected a complex 2-D array with two axes");
  }
  const auto dir = beta.parent_path();
  const auto& comp = b.attrs.at("companions");
  const auto m = io::read_array(dir / comp.at("magnitude").get<std::string>());
  const auto e = io::read_array(dir / comp.at("eps").get<std::string>());
  const auto s = io::read_array(dir / comp.at("sums").get<std::string>());
  for (const auto* a : {&m, &e, &s}) {
    if (a->shape != b.shape) throw Error(where + ": companion shape differs from the bicoherence");
  }
  const auto rows = b.shape[0], cols = b.shape[1];

  LoadedGrid out;
  out.provenance = b.provenance;
  auto& bic = out.bic;
  bic.beta = get_complex(b);
  bic.magnitude = get_real(m);
  bic.eps = get_real(e);
  bic.mask = Grid2<std::uint8_t>(rows, cols);
  if (!b.mask.empty()) bic.mask.data() = b.mask;
  bic.freq1 = b.axes[0].values;
  bic.freq2 = b.axes[1].values;
  bic.normalization = b.attrs.value("normalization", "") == "rms" ? Normalization::rms : Normalization::magnitude_sum;
  bic.bias_corrected = b.attrs.value("bias_corrected", false);
  bic.domain = domain_from(b.attrs.value("domain", "principal_triangle"));
  bic.variant = estimator_variant_from_string(b.attrs.value("variant", "bbb"));

  auto& g = out.grid;
  const auto& sa = s.attrs;
  g.B = get_complex(s);
  g.A = Grid2<double>(rows, cols);
  g.eps = bic.eps;
  g.norm12 = Grid2<double>(rows, cols);
  g.norm3 = Grid2<double>(rows, cols);
  g.state = states_from_hex(sa.at("state").get<std::string>(), rows, cols);
  g.leg3 = Grid2<std::int32_t>(rows, cols, -1);
  g.freq1 = s.axes.at(0).values;
  g.freq2 = s.axes.at(1).values;
  g.bands1 = bands_from(sa.at("bands1"));
  g.bands2 = bands_from(sa.at("bands2"));
  g.bands3 = bands_from(sa.at("bands3"));
  g.n_frames = sa.at("n_frames").get<std::size_t>();
  g.frame_rate = sa.at("frame_rate").get<double>();
  g.domain = domain_from(sa.at("domain").get<std::string>());
  g.order = sa.at("order").get<int>();
  const auto& est = sa.at("estimator");
  g.kind.variant = estimator_variant_from_string(est.at("variant").get<std::string>());
  g.kind.bw_narrow = est.at("bw_narrow").get<double>();
  g.kind.bw_broad = est.at("bw_broad").get<double>();
  g.kind.window = window_kind_from_string(est.at("window").get<std::string>());
  return out;
}

namespace {

Signal read_input(const SignalInput& in) {
  if (in.path.empty()) throw Error("no input signal given");
  return io::read_signal(in.path, in.format, in.fs);
}

std::vector<fs::path> run(const SimulateParams& p, const RunConfig& config, const std::string& hash) {
  json doc = p.recipe;
  if (config.seed && doc.is_object()) doc["seed"] = *config.seed;
  const auto recipe = sim::recipe_from_json(doc);
  const auto signal = sim::gen(recipe);
  auto a = io::signal_array(signal, real_type(config.precision));
  a.provenance = hash;
  a.attrs["seed"] = recipe.seed;
  io::write_array(config.output, a);
  return with_sidecars({config.output});
}

std::vector<fs::path> run(const BispecParams& p, const RunConfig& config, const std::string& hash) {
  const EstimatorKind kind{p.kind, p.kind == EstimatorVariant::BBB ? 0.0 : p.bw_narrow, p.bw_broad, p.window};
  kind.validate();
  if (p.bias_correct && p.norm != Normalization::magnitude_sum) {
    throw Error("--bias-correct requires --norm magsum");
  }
  if (p.order > 1 && p.kind != EstimatorVariant::BBB) throw Error("--order above 1 requires --kind bbb");
  if (p.order > 1 && p.window != WindowKind::gaussian) throw Error("--order above 1 uses gaussian windows only");
  const auto signal = read_input(p.input);
  const FreqRange r1 = p.range1.value_or(FreqRange{0.0, signal.fs / 2});
  const FreqRange r2 = p.range2.value_or(r1);
  const auto grid =
      p.order > 1 ? kmode_coupling(signal, p.order, p.bw_broad, r1, r2) : estimate_bispectrum(signal, kind, r1, r2);
  auto bic = normalize(grid, p.norm);
  if (p.bias_correct) bic = bias_correct(bic, grid);
  return write_grid(config.output, bic, grid, hash, config.precision, {{"fs", signal.fs}});
}

std::vector<fs::path> run(const PacParams& p, const RunConfig& config, const std::string& hash) {
  if (!p.proportional && p.theta_bw > p.gamma_bw) throw Error("--theta-bw must not exceed --gamma-bw");
  if (p.proportional && !(*p.proportional > 0)) throw Error("--proportional ratio must be positive");
  if (!(p.gamma_step > 0)) throw Error("--gamma-step must be positive");
  const auto signal = read_input(p.input);
  const auto theta = design_bank(signal.fs, p.theta_range.lo, p.theta_range.hi, p.theta_bw);
  std::vector<double> centers;
  for (double c = p.gamma_range.lo; c <= p.gamma_range.hi + 1e-9; c += p.gamma_step) centers.push_back(c);
  PacOptions options;
  options.bias_correct = p.bias_correct;
  options.hop = p.hop;
  PacGrid pac;
  if (p.proportional) {
    pac = variable_bandwidth_pac(signal, theta, centers, *p.proportional, options);
  } else {
    std::vector<BandSpec> gamma;
    for (double c : centers) gamma.push_back({c, p.gamma_bw, WindowKind::gaussian, static_cast<int>(gamma.size())});
    pac = phase_power_coherence(signal, theta, gamma, options);
  }
  json attrs = {{"fs", signal.fs},
                {"pac", {{"scaling", pac.scaling == PacScaling::proportional ? "proportional" : "fixed"},
                         {"ratio", pac.ratio},
                         {"theta_bw", p.theta_bw},
                         {"gamma_bw", p.gamma_bw}}}};
  return write_grid(config.output, pac.coherence, pac.sums, hash, config.precision, attrs);
}

std::vector<fs::path> run(const FeaturesParams& p, const RunConfig& config, const std::string& hash) {
  if (!p.so_range || !p.fo_range) throw Error("features needs both --so-range and --fo-range");
  const auto loaded = load_grid(p.input);
  AnalyzeOptions options;
  options.fundamental = p.fundamental;
  options.thresholds = p.thresholds;
  const auto analysis = analyze(loaded.bic, &loaded.grid, *p.so_range, *p.fo_range, options);

  // The impulse response is a data product even when no delay is reported.
  std::optional<ImpulseResponse> impulse = analysis.impulse;
  std::string impulse_error;
  if (!impulse) {
    try {
      impulse = impulse_response(loaded.grid, analysis.partition);
    } catch (const Error& e) {
      impulse_error = e.what();
    }
  }
  const fs::path impulse_path = p.impulse_output.empty() ? fs::path(config.output + ".impulse") : fs::path(p.impulse_output);

  json doc;
  doc["provenance"] = hash;
  doc["source"] = {{"path", p.input}, {"provenance", loaded.provenance}};
  doc["bias_corrected"] = loaded.bic.bias_corrected;
  doc["so_range"] = range_json(*p.so_range);
  doc["fo_range"] = range_json(*p.fo_range);
  doc["thresholds"] = to_json(p.thresholds);
  doc["regions"] = json::object();
  for (auto r : {Region::outside, Region::inside_so, Region::inside_fo, Region::transition}) {
    doc["regions"][to_string(r)] = analysis.partition.count(r);
  }
  doc["report"] = to_json(analysis.report);
  doc["impulse_output"] = impulse ? json(impulse_path.string()) : json(nullptr);
  if (!impulse) doc["impulse_error"] = impulse_error;

  std::vector<fs::path> written;
  if (impulse) {
    io::ArrayFile a;
    a.dtype = complex_type(config.precision);
    a.shape = {impulse->I.rows(), impulse->I.cols()};
    a.axes = {axis("tau", "s", impulse->tau), axis("fo_freq", "Hz", impulse->fo_freq)};
    a.provenance = hash;
    put_complex(a, impulse->I);
    a.attrs = {{"kind", "impulse_response"},
               {"profile", impulse->profile},
               {"delay", {{"tau", impulse->delay.tau}, {"uncertainty", impulse->delay.uncertainty}}}};
    io::write_array(impulse_path, a);
    written = with_sidecars({impulse_path});
  }
  io::write_atomic(config.output, doc.dump(2) + "\n");
  written.insert(written.begin(), fs::path(config.output));
  return written;
}

}  // namespace

std::vector<fs::path> execute(const RunConfig& config) {
  if (config.output.empty()) throw Error("no output path given");
  const auto hash = provenance_hash(config);
  return std::visit([&](const auto& p) { return run(p, config, hash); }, config.params);
}

}  // namespace bispec::cli
