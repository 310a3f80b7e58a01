// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "aecref/features.hpp"
#include "aecref/metrics.hpp"
#include "aecref/nonlinearity.hpp"
#include "aecref/purifier.hpp"
#include "aecref/random.hpp"
#include "aecref/room_sim.hpp"
#include "aecref/stft.hpp"
#include "aecref/wav.hpp"
#include "aecref/wiener.hpp"

namespace aecref::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Bad or missing user input (maps to a usage exit code in the CLI).
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  StftConfig stft;
  wiener::WienerConfig wiener_main;  // K = 20, W = 200, eps = 1e-3
  wiener::WienerConfig wiener_ref;   // taps taken from mask.ref_taps
  purifier::MaskConfig mask;         // m = 1/6, ref_taps = 1
  std::uint64_t seed = 0;

  RunConfig() { wiener_ref.taps = mask.ref_taps; }

  void validate() const {
    stft.validate();
    wiener_main.validate();
    wiener_ref.validate();
    mask.validate();
  }

  /// Applies one `key = value` setting; keys follow the field paths.
  void set(std::string_view key, std::string_view value);

  /// Flat listing of every key, in the same syntax `set` accepts.
  std::string to_text() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  // Accept simple fractions such as "1/6".
  if (const auto slash = s.find('/'); slash != std::string::npos)
    return parse_double(key, s.substr(0, slash)) /
           parse_double(key, s.substr(slash + 1));
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError("config: bad number for " + std::string(key) + ": '" + s + "'");
}

inline int parse_int(std::string_view key, std::string_view text) {
  const std::string s = trim(text);
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw UsageError("config: bad integer for " + std::string(key) + ": '" + s + "'");
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline bool set_wiener(wiener::WienerConfig& w, std::string_view field,
                       std::string_view key, std::string_view value) {
  if (field == "K" || field == "taps") {
    w.taps = parse_int(key, value);
  } else if (field == "W" || field == "window") {
    w.window = parse_int(key, value);
  } else if (field == "epsilon") {
    w.epsilon = parse_double(key, value);
  } else if (field == "diag_load") {
    w.diag_load = parse_double(key, value);
  } else if (field == "variant") {
    const std::string v = trim(value);
    if (v == "wstws") w.weighted = true;
    else if (v == "stws") w.weighted = false;
    else throw UsageError("config: " + std::string(key) + " must be wstws or stws");
  } else if (field == "placement") {
    const std::string v = trim(value);
    if (v == "per_summand") w.placement = wiener::WeightPlacement::PerSummand;
    else if (v == "frozen") w.placement = wiener::WeightPlacement::Frozen;
    else throw UsageError("config: " + std::string(key) + " must be per_summand or frozen");
  } else {
    return false;
  }
  return true;
}

inline std::string wiener_text(const std::string& prefix,
                               const wiener::WienerConfig& w, bool with_taps) {
  std::string s;
  if (with_taps) s += prefix + ".K = " + std::to_string(w.taps) + "\n";
  s += prefix + ".W = " + std::to_string(w.window) + "\n";
  s += prefix + ".epsilon = " + format_double(w.epsilon) + "\n";
  s += prefix + ".diag_load = " + format_double(w.diag_load) + "\n";
  s += prefix + ".variant = " + std::string(w.weighted ? "wstws" : "stws") + "\n";
  s += prefix + ".placement = " +
       std::string(w.placement == wiener::WeightPlacement::PerSummand ? "per_summand"
                                                                      : "frozen") +
       "\n";
  return s;
}

}  // namespace detail

inline void RunConfig::set(std::string_view key, std::string_view value) {
  const auto dot = key.find('.');
  const std::string_view group = dot == std::string_view::npos ? key : key.substr(0, dot);
  const std::string_view field =
      dot == std::string_view::npos ? std::string_view{} : key.substr(dot + 1);
  if (key == "seed") {
    const std::string s = detail::trim(value);
    try {
      std::size_t used = 0;
      seed = std::stoull(s, &used);
      if (used == s.size()) return;
    } catch (const std::exception&) {
    }
    throw UsageError("config: bad seed '" + s + "'");
  }
  if (group == "stft") {
    if (field == "window_len") return void(stft.window_len = detail::parse_int(key, value));
    if (field == "hop") return void(stft.hop = detail::parse_int(key, value));
    if (field == "window") {
      const std::string v = detail::trim(value);
      if (v == "hamming") return void(stft.window = WindowKind::Hamming);
      if (v == "hann") return void(stft.window = WindowKind::Hann);
      if (v == "rectangular") return void(stft.window = WindowKind::Rectangular);
      throw UsageError("config: unknown window '" + v + "'");
    }
  } else if (group == "wiener_main") {
    if (detail::set_wiener(wiener_main, field, key, value)) return;
  } else if (group == "wiener_ref") {
    if (field == "K" || field == "taps") {
      mask.ref_taps = detail::parse_int(key, value);
      wiener_ref.taps = mask.ref_taps;
      return;
    }
    if (detail::set_wiener(wiener_ref, field, key, value)) return;
  } else if (group == "mask") {
    if (field == "m") return void(mask.m = detail::parse_double(key, value));
    if (field == "ref_taps") {
      mask.ref_taps = detail::parse_int(key, value);
      wiener_ref.taps = mask.ref_taps;
      return;
    }
  }
  throw UsageError("config: unknown key '" + std::string(key) + "'");
}

inline std::string RunConfig::to_text() const {
  std::string s;
  s += "stft.window_len = " + std::to_string(stft.window_len) + "\n";
  s += "stft.hop = " + std::to_string(stft.hop) + "\n";
  s += std::string("stft.window = ") +
       (stft.window == WindowKind::Hamming ? "hamming"
        : stft.window == WindowKind::Hann  ? "hann"
                                           : "rectangular") +
       "\n";
  s += detail::wiener_text("wiener_main", wiener_main, true);
  s += detail::wiener_text("wiener_ref", wiener_ref, false);
  s += "mask.m = " + detail::format_double(mask.m) + "\n";
  s += "mask.ref_taps = " + std::to_string(mask.ref_taps) + "\n";
  s += "seed = " + std::to_string(seed) + "\n";
  return s;
}

/// Applies a flat `key = value` text (one setting per line, '#' comments).
inline void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    cfg.set(detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
  }
}

inline RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str());
  return cfg;
}

enum Signal : std::size_t {
  kFarEnd = 0,      // X
  kMixture,         // Y
  kReference,       // R
  kPurified,        // R_m
  kCancelFarEnd,    // F(Y, X)
  kCancelRef,       // F(Y, R)
  kCancelPurified,  // F(Y, R_m)
};

inline constexpr std::array<std::string_view, 7> kSignalNames = {
    "X", "Y", "R", "R_m", "F(Y,X)", "F(Y,R)", "F(Y,R_m)"};

struct FeatureBundle {
  std::array<Spectrogram, 7> signals;
  StftConfig stft;
  std::string scene_id;
  std::size_t degenerate_units = 0;

  const Spectrogram& operator[](Signal s) const { return signals[s]; }
};

/// Linear stage on spectrograms: purify R, then cancel Y against X, R and R_m.
inline FeatureBundle run_linear_stage(const Spectrogram& X, const Spectrogram& Y,
                                      const Spectrogram& R, const RunConfig& cfg) {
  cfg.validate();
  require_same_shape(Y, X, "run_linear_stage");
  require_same_shape(Y, R, "run_linear_stage");
  FeatureBundle b;
  b.stft = Y.config;
  b.signals[kFarEnd] = X;
  b.signals[kMixture] = Y;
  b.signals[kReference] = R;

  auto ref_cfg = cfg.wiener_ref;
  ref_cfg.taps = cfg.mask.ref_taps;
  const auto near_est = wiener::wstws_cancel(R, X, ref_cfg, false);
  const auto mask = purifier::mask_from_residual(R, near_est.residual);
  b.signals[kPurified] = purifier::apply_mask(R, mask, cfg.mask.m);
  b.degenerate_units += near_est.report.count;

  const std::array<std::pair<Signal, Signal>, 3> pairs = {
      std::pair{kCancelFarEnd, kFarEnd}, std::pair{kCancelRef, kReference},
      std::pair{kCancelPurified, kPurified}};
  for (const auto& [dst, src] : pairs) {
    auto res = wiener::wstws_cancel(Y, b.signals[src], cfg.wiener_main, false);
    b.degenerate_units += res.report.count;
    b.signals[dst] = std::move(res.residual);
  }
  return b;
}

inline FeatureBundle run_linear_stage(const TimeSignal& y, const TimeSignal& x,
                                      const TimeSignal& r, const RunConfig& cfg) {
  if (y.size() != x.size() || y.size() != r.size())
    throw ShapeError("run_linear_stage: signal lengths differ");
  if (y.sample_rate != x.sample_rate || y.sample_rate != r.sample_rate)
    throw ShapeError("run_linear_stage: sample rates differ");
  return run_linear_stage(stft_forward(x, cfg.stft), stft_forward(y, cfg.stft),
                          stft_forward(r, cfg.stft), cfg);
}

inline std::vector<std::uint8_t> encode_features(const FeatureBundle& b) {
  std::array<const Spectrogram*, 7> ptrs;
  for (std::size_t i = 0; i < 7; ++i) ptrs[i] = &b.signals[i];
  return features::encode(ptrs);
}

inline void export_features(const FeatureBundle& b, const fs::path& path) {
  features::write_file(path, encode_features(b));
}

/// Time-domain waveform of one bundle signal, fitted to `length` samples.
inline TimeSignal to_waveform(const FeatureBundle& b, Signal which,
                              std::size_t length, double fs = 16000.0) {
  return fit_length(stft_inverse(b.signals[which], fs), length);
}

// ---------------------------------------------------------------------------
// Dataset synthesis

struct ManifestEntry {
  std::string scene_id;
  std::uint64_t seed = 0;
  std::string y, x, r, sd, meta;  // paths relative to the manifest directory
};

inline json to_json(const ManifestEntry& e) {
  return json{{"scene_id", e.scene_id}, {"seed", e.seed}, {"y", e.y},
              {"x", e.x}, {"r", e.r}, {"sd", e.sd}, {"meta", e.meta}};
}

inline ManifestEntry manifest_entry_from_json(const json& j) {
  ManifestEntry e;
  try {
    e.scene_id = j.at("scene_id").get<std::string>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.y = j.at("y").get<std::string>();
    e.x = j.at("x").get<std::string>();
    e.r = j.at("r").get<std::string>();
    e.sd = j.at("sd").get<std::string>();
    e.meta = j.at("meta").get<std::string>();
  } catch (const json::exception& ex) {
    throw FormatError(std::string("manifest: ") + ex.what());
  }
  return e;
}

struct Manifest {
  fs::path dir;
  std::vector<ManifestEntry> entries;

  fs::path resolve(const std::string& rel) const { return dir / rel; }
};

inline void write_jsonl(const fs::path& path, const std::vector<json>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  for (const auto& r : rows) os << r.dump() << '\n';
  if (!os) throw Error("write failed for " + path.string());
}

inline std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open " + path.string());
  std::vector<json> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (detail::trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& ex) {
      throw FormatError(path.string() + ": " + ex.what());
    }
  }
  return rows;
}

inline Manifest load_manifest(const fs::path& path) {
  Manifest m;
  m.dir = path.parent_path();
  for (const auto& row : read_jsonl(path)) m.entries.push_back(manifest_entry_from_json(row));
  return m;
}

enum class SceneMode { DoubleTalk, NearEndOnly, FarEndOnly };

inline std::optional<SceneMode> scene_mode_from_string(std::string_view s) {
  if (s == "dt") return SceneMode::DoubleTalk;
  if (s == "st_ne") return SceneMode::NearEndOnly;
  if (s == "st_fe") return SceneMode::FarEndOnly;
  return std::nullopt;
}

struct SynthOptions {
  std::size_t count = 10;
  bool matched = true;
  fs::path corpus_near;
  fs::path corpus_far;
  fs::path out_dir;
  std::uint64_t seed = 0;
  SceneMode mode = SceneMode::DoubleTalk;
  std::size_t length = 96000;  // 6 s at 16 kHz
  double far_peak = 0.9;       // far-end peak level entering the loudspeaker
  double near_peak = 0.9;
  double split_ms = 50.0;
};

/// Sorted list of .wav files directly inside `dir`.
inline std::vector<fs::path> list_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("corpus directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw UsageError("corpus is empty: " + dir.string());
  return files;
}

/// Random crop (or zero-pad) to `length`, then peak-normalize.
inline TimeSignal draw_utterance(const std::vector<fs::path>& corpus, Rng& rng,
                                 std::size_t length, double peak,
                                 std::string& chosen) {
  const auto idx = static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<std::int64_t>(corpus.size()) - 1));
  chosen = corpus[idx].filename().string();
  TimeSignal raw = wav::read(corpus[idx]);
  if (raw.sample_rate != 16000.0)
    throw UsageError("corpus file is not 16 kHz: " + corpus[idx].string());
  raw.validate();
  std::size_t offset = 0;
  if (raw.size() > length)
    offset = static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<std::int64_t>(raw.size() - length)));
  TimeSignal out = TimeSignal::zeros(length, raw.sample_rate);
  for (std::size_t i = 0; i < length && offset + i < raw.size(); ++i)
    out.samples[i] = raw.samples[offset + i];
  double mx = 0.0;
  for (double v : out.samples) mx = std::max(mx, std::abs(v));
  if (mx > 0.0)
    for (double& v : out.samples) v *= peak / mx;
  return out;
}

inline json scene_metadata(const std::string& id, const room::Scene& sc,
                           const std::string& near_file, const std::string& far_file) {
  auto pt = [](const room::Point& p) { return json::array({p.x(), p.y(), p.z()}); };
  json nl{{"variant", std::string(nonlinear::to_string(sc.nonlinearity.variant))}};
  if (nonlinear::is_matched(sc.nonlinearity.variant)) nl["b"] = sc.nonlinearity.b;
  return json{
      {"scene_id", id},
      {"seed", sc.seed},
      {"room",
       {{"length", sc.room.length},
        {"width", sc.room.width},
        {"height", sc.room.height},
        {"t60", sc.room.t60}}},
      {"geometry",
       {{"loudspeaker", pt(sc.geometry.loudspeaker)},
        {"talker", pt(sc.geometry.talker)},
        {"main_mic", pt(sc.geometry.main_mic)},
        {"ref_mic", pt(sc.geometry.ref_mic)}}},
      {"ser_db", sc.ser_db},
      {"gain", sc.gain},
      {"nonlinearity", nl},
      {"scenario",
       std::string(metrics::to_string(
           metrics::infer_scenario(sc.talker_active(), sc.far_end_active())))},
      {"near_source", near_file},
      {"far_source", far_file},
      {"sample_rate", sc.y.sample_rate},
      {"length", sc.y.size()}};
}

/// Synthesizes one scene from its own seed.
inline room::Scene synth_scene(std::uint64_t scene_seed,
                               const std::vector<fs::path>& near_corpus,
                               const std::vector<fs::path>& far_corpus,
                               const SynthOptions& opt, std::string& near_file,
                               std::string& far_file) {
  Rng rng(scene_seed);
  const auto room_spec = room::sample_room(rng);
  const auto geom = room::sample_geometry(room_spec, rng);
  const auto kind = nonlinear::sample_kind(rng, opt.matched);
  const double ser = static_cast<double>(uniform_int(rng, -10, 10));
  TimeSignal v = draw_utterance(near_corpus, rng, opt.length, opt.near_peak, near_file);
  TimeSignal x = draw_utterance(far_corpus, rng, opt.length, opt.far_peak, far_file);
  if (opt.mode == SceneMode::FarEndOnly) {
    v = TimeSignal::zeros(opt.length, v.sample_rate);
    near_file.clear();
  } else if (opt.mode == SceneMode::NearEndOnly) {
    x = TimeSignal::zeros(opt.length, x.sample_rate);
    far_file.clear();
  }
  room::SceneOptions so;
  so.length = opt.length;
  so.split_ms = opt.split_ms;
  return room::synthesize_scene(room_spec, geom, v, x, kind, ser, scene_seed, so);
}

inline std::string scene_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%05zu", i);
  return buf;
}

/// Writes <out>/<scene_id>/{y,x,r,sd}.wav + meta.json per scene and
/// <out>/manifest.jsonl; returns the manifest entries.
inline std::vector<ManifestEntry> synth_dataset(const SynthOptions& opt) {
  const auto near_corpus = list_corpus(opt.corpus_near);
  const auto far_corpus = list_corpus(opt.corpus_far);
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec || !fs::is_directory(opt.out_dir))
    throw Error("cannot create output directory " + opt.out_dir.string());

  std::vector<ManifestEntry> entries;
  std::vector<json> rows;
  for (std::size_t i = 0; i < opt.count; ++i) {
    ManifestEntry e;
    e.scene_id = scene_name(i);
    e.seed = derive_seed(opt.seed, i);
    std::string near_file, far_file;
    const auto sc = synth_scene(e.seed, near_corpus, far_corpus, opt, near_file, far_file);
    const fs::path dir = opt.out_dir / e.scene_id;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create " + dir.string());
    e.y = e.scene_id + "/y.wav";
    e.x = e.scene_id + "/x.wav";
    e.r = e.scene_id + "/r.wav";
    e.sd = e.scene_id + "/sd.wav";
    e.meta = e.scene_id + "/meta.json";
    wav::write(opt.out_dir / e.y, sc.y);
    wav::write(opt.out_dir / e.x, sc.x);
    wav::write(opt.out_dir / e.r, sc.r);
    wav::write(opt.out_dir / e.sd, sc.s_direct);
    std::ofstream meta(opt.out_dir / e.meta, std::ios::binary);
    meta << scene_metadata(e.scene_id, sc, near_file, far_file).dump(2) << '\n';
    if (!meta) throw Error("cannot write " + (opt.out_dir / e.meta).string());
    rows.push_back(to_json(e));
    entries.push_back(std::move(e));
  }
  write_jsonl(opt.out_dir / "manifest.jsonl", rows);
  return entries;
}

// ---------------------------------------------------------------------------
// Evaluation records

inline json report_to_json(const std::string& scene_id, const metrics::MetricReport& r) {
  auto opt = [](const std::optional<double>& v) -> json {
    return v ? json(*v) : json(nullptr);
  };
  return json{{"scene_id", scene_id},
              {"scenario", std::string(metrics::to_string(r.scenario))},
              {"erle_db", opt(r.erle_db)},
              {"sdr_db", opt(r.sdr_db)},
              {"s_sisnr_db", opt(r.s_sisnr_db)},
              {"ri_mag_loss", opt(r.ri_mag_loss)},
              {"pesq", "unavailable"}};
}

inline metrics::Scenario scenario_of(const fs::path& meta_path) {
  std::ifstream is(meta_path);
  if (!is) throw UsageError("cannot open " + meta_path.string());
  json meta;
  try {
    meta = json::parse(is);
    const auto s = metrics::scenario_from_string(meta.at("scenario").get<std::string>());
    if (!s) throw FormatError("unknown scenario in " + meta_path.string());
    return *s;
  } catch (const json::exception& ex) {
    throw FormatError(meta_path.string() + ": " + ex.what());
  }
}

}  // namespace aecref::pipeline
