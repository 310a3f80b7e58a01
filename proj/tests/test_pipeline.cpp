// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "aecref/cli.hpp"
#include "aecref/speech_like.hpp"
#include "oracles.hpp"

using namespace aecref;
using namespace aecref::pipeline;
using Catch::Approx;

namespace {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("aecref_test_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

void write_corpus(const fs::path& dir, std::uint64_t seed, int files, std::size_t len) {
  fs::create_directories(dir);
  for (int i = 0; i < files; ++i)
    wav::write(dir / ("utt" + std::to_string(i) + ".wav"),
               speech_like::generate(seed + static_cast<std::uint64_t>(i), len));
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Relative path -> contents for every regular file under `root`.
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  return out;
}

// Bit patterns, not a double -> float -> double round trip: GCC 11 at -O3
// folds such round trips away when it vectorizes them in pairs.
std::uint32_t f32_bits(double v) { return std::bit_cast<std::uint32_t>(static_cast<float>(v)); }

bool exactly_f32(double v) {
  return static_cast<double>(std::bit_cast<float>(f32_bits(v))) == v &&
         std::abs(v) < 3.4e38;
}

int run_cli(std::vector<std::string> args) { return cli::cli_main(args); }

double energy_db_ratio(const Spectrogram& a, const Spectrogram& b) {
  return 10.0 * std::log10(a.data.squaredNorm() / b.data.squaredNorm());
}

}  // namespace

TEST_CASE("default run config and config text", "[pipeline]") {
  RunConfig cfg;
  CHECK(cfg.stft.window_len == 320);
  CHECK(cfg.stft.hop == 160);
  CHECK(cfg.wiener_main.taps == 20);
  CHECK(cfg.wiener_main.window == 200);
  CHECK(cfg.wiener_main.epsilon == 1e-3);
  CHECK(cfg.wiener_ref.taps == 1);
  CHECK(cfg.mask.m == Approx(1.0 / 6.0).epsilon(1e-15));

  apply_config_text(cfg, "# comment\n wiener_main.K = 8 \nmask.m = 1/4\n\nwiener_ref.variant = stws\n"
                         "wiener_main.placement = frozen\nseed = 42\nstft.window = hann\n");
  CHECK(cfg.wiener_main.taps == 8);
  CHECK(cfg.mask.m == 0.25);
  CHECK_FALSE(cfg.wiener_ref.weighted);
  CHECK(cfg.wiener_main.placement == wiener::WeightPlacement::Frozen);
  CHECK(cfg.seed == 42);
  CHECK(cfg.stft.window == WindowKind::Hann);

  // to_text is a fixed point of apply_config_text.
  RunConfig back;
  apply_config_text(back, cfg.to_text());
  CHECK(back.to_text() == cfg.to_text());

  CHECK_THROWS_AS(apply_config_text(cfg, "nope.K = 1"), UsageError);
  CHECK_THROWS_AS(apply_config_text(cfg, "wiener_main.K = eight"), UsageError);
  CHECK_THROWS_AS(apply_config_text(cfg, "wiener_main.K"), UsageError);
  CHECK_THROWS_AS(apply_config_text(cfg, "wiener_main.variant = lms"), UsageError);
}

TEST_CASE("wav round trip is exact for float32 samples", "[pipeline][wav]") {
  TempDir tmp("wav");
  Rng rng(1);
  TimeSignal s = TimeSignal::zeros(1234);
  for (double& v : s.samples) v = static_cast<float>(uniform(rng, -1.0, 1.0));
  wav::write(tmp.path / "a.wav", s);
  const auto back = wav::read(tmp.path / "a.wav");
  CHECK(back.sample_rate == 16000.0);
  CHECK(back.samples == s.samples);
  CHECK(fs::file_size(tmp.path / "a.wav") == 44 + 4 * 1234);
  CHECK_THROWS_AS(wav::decode(std::vector<std::uint8_t>{'R', 'I', 'F', 'X'}), FormatError);
}

TEST_CASE("feature file layout", "[pipeline][features]") {
  Rng rng(2);
  StftConfig cfg;
  const Eigen::Index T = 9;
  FeatureBundle b;
  for (auto& s : b.signals) s = oracle::random_spectrogram(rng, T, cfg);
  const auto bytes = encode_features(b);
  CHECK(bytes.size() == 28 + 7 * static_cast<std::size_t>(T) * 161 * 8);

  const auto ff = features::decode(bytes);
  CHECK(ff.header.version == 1);
  CHECK(ff.header.n_frames == T);
  CHECK(ff.header.n_bins == 161);
  CHECK(ff.header.n_signals == 7);
  CHECK(ff.header.window_len == 320);
  CHECK(ff.header.hop == 160);
  REQUIRE(ff.signals.size() == 7);
  for (std::size_t i = 0; i < 7; ++i)
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index f = 0; f < 161; ++f) {
        const cplx v = b.signals[i](t, f), w = ff.signals[i](t, f);
        REQUIRE(f32_bits(w.real()) == f32_bits(v.real()));
        REQUIRE(f32_bits(w.imag()) == f32_bits(v.imag()));
        REQUIRE(exactly_f32(w.real()));
        REQUIRE(exactly_f32(w.imag()));
      }

  // Little-endian header fields at fixed offsets.
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "ECF1");
  CHECK(bytes[8] == T);
  CHECK(bytes[12] == 161);
  CHECK(bytes[16] == 7);
  CHECK((bytes[20] | bytes[21] << 8) == 320);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(features::decode(bad), FormatError);
  auto truncated = bytes;
  truncated.pop_back();
  CHECK_THROWS_AS(features::decode(truncated), FormatError);
  CHECK_THROWS_AS(features::decode_header({'E', 'C'}), FormatError);

  TempDir tmp("ecf");
  export_features(b, tmp.path / "b.ecf");
  CHECK(features::read_file(tmp.path / "b.ecf") == bytes);
}

TEST_CASE("zero excitation chain", "[pipeline]") {
  const std::size_t n = 16000;
  const auto v = speech_like::generate(3, n);
  const auto r = scaled(v, 0.3);
  const auto y = added(v, scaled(speech_like::generate(4, n), 0.1));
  const auto b = run_linear_stage(y, TimeSignal::zeros(n), r, RunConfig{});
  CHECK(b[kCancelFarEnd].data == b[kMixture].data);
  CHECK(b[kPurified].data.isZero());
  CHECK(b[kCancelPurified].data == b[kMixture].data);
  for (const auto& s : b.signals) {
    CHECK(s.n_frames() == b[kMixture].n_frames());
    CHECK(s.n_bins() == 161);
  }
}

TEST_CASE("close-mic linear reference cancels as well as the far end", "[pipeline]") {
  Rng rng(5);
  room::RoomSpec rs;
  rs.t60 = 0.25;
  const auto geom = room::sample_geometry(rs, rng);
  const std::size_t n = 48000;
  const auto x = speech_like::generate(6, n);
  const auto h = room::image_method_rir(rs, geom.loudspeaker, geom.main_mic);
  const auto y = fit_length(room::convolve(x, h), n);
  // r is x delayed by two samples.
  TimeSignal r = TimeSignal::zeros(n);
  for (std::size_t i = 2; i < n; ++i) r[i] = x[i - 2];
  const auto b = run_linear_stage(y, x, r, RunConfig{});
  const double e5 = energy_db_ratio(b[kCancelFarEnd], b[kMixture]);
  const double e7 = energy_db_ratio(b[kCancelPurified], b[kMixture]);
  INFO("F(Y,X) " << e5 << " dB, F(Y,R_m) " << e7 << " dB");
  CHECK(e7 <= e5 + 1.0);
  CHECK(e5 < -10.0);
}

TEST_CASE("linear stage is deterministic and bundles re-derive from exports",
          "[pipeline][property]") {
  const std::size_t n = 24000;
  Rng rng(7);
  const auto x = speech_like::generate(8, n);
  const auto v = speech_like::generate(9, n);
  room::RoomSpec rs;
  const auto geom = room::sample_geometry(rs, rng);
  room::SceneOptions so;
  so.length = n;
  const auto sc = room::synthesize_scene(rs, geom, v, x,
                                         nonlinear::NonlinearityKind::of(nonlinear::Variant::HardClipSigmoid),
                                         0.0, 1, so);
  RunConfig cfg;
  const auto b1 = run_linear_stage(sc.y, sc.x, sc.r, cfg);
  const auto b2 = run_linear_stage(sc.y, sc.x, sc.r, cfg);
  CHECK(encode_features(b1) == encode_features(b2));

  // Re-run from the f32 copies of X, Y, R.
  const auto ff = features::decode(encode_features(b1));
  const auto b3 = run_linear_stage(ff.signals[kFarEnd], ff.signals[kMixture],
                                   ff.signals[kReference], cfg);
  for (Signal s : {kPurified, kCancelFarEnd, kCancelRef, kCancelPurified}) {
    const double err = (b3[s].data - ff.signals[s].data).norm() / ff.signals[s].data.norm();
    INFO(kSignalNames[s] << " relative error " << err);
    CHECK(err <= 1e-5);
  }
  CHECK_THROWS_AS(run_linear_stage(sc.y, fit_length(sc.x, n - 1), sc.r, cfg), ShapeError);
}

TEST_CASE("cli usage errors exit with code 2", "[pipeline][cli]") {
  TempDir tmp("usage");
  const std::string out = (tmp.path / "o").string();
  CHECK(run_cli({}) == 2);
  CHECK(run_cli({"bogus"}) == 2);
  CHECK(run_cli({"run", "--out", out, "--frobnicate"}) == 2);
  CHECK(run_cli({"run", "--out", out}) == 2);
  CHECK(run_cli({"run", "--y", "/nonexistent/y.wav", "--x", "/nonexistent/x.wav", "--r",
                 "/nonexistent/r.wav", "--out", out}) == 2);
  CHECK(run_cli({"run", "--manifest", "/nonexistent/m.jsonl", "--out", out,
                 "--set", "wiener_main.Q=1"}) == 2);
  CHECK(run_cli({"synth", "--count", "1", "--matched", "--corpus-near", "/nonexistent",
                 "--corpus-far", "/nonexistent", "--out", out}) == 2);
  CHECK(run_cli({"synth", "--count", "1", "--corpus-near", "/nonexistent",
                 "--corpus-far", "/nonexistent", "--out", out}) == 2);
  CHECK(run_cli({"eval", "--manifest", "/nonexistent/m.jsonl", "--estimates", out,
                 "--report", out + "/r.jsonl"}) == 2);
  CHECK(run_cli({"rir", "--room", "3", "4", "2.5", "--t60", "0.3", "--src", "9", "1", "1",
                 "--mic", "1", "1", "1", "--out", out + ".wav"}) == 2);
}

TEST_CASE("cli rir writes an impulse response", "[pipeline][cli]") {
  TempDir tmp("rir");
  const auto path = tmp.path / "h.wav";
  REQUIRE(run_cli({"rir", "--room", "4", "5", "3", "--t60", "0.3", "--src", "1", "1", "1.5",
                   "--mic", "3", "4", "1.5", "--out", path.string()}) == 0);
  const auto h = wav::read(path);
  room::RoomSpec rs;
  rs.length = 4;
  rs.width = 5;
  rs.height = 3;
  rs.t60 = 0.3;
  const auto ref = room::image_method_rir(rs, {1, 1, 1.5}, {3, 4, 1.5});
  REQUIRE(h.size() == ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i)
    REQUIRE(h[i] == static_cast<double>(static_cast<float>(ref[i])));
}

TEST_CASE("cli synth, run and eval end to end", "[pipeline][cli]") {
  TempDir tmp("e2e");
  write_corpus(tmp.path / "near", 100, 3, 112000);
  write_corpus(tmp.path / "far", 200, 3, 80000);
  const std::string near = (tmp.path / "near").string(), far = (tmp.path / "far").string();

  const auto data = tmp.path / "data";
  REQUIRE(run_cli({"synth", "--count", "3", "--mismatched", "--corpus-near", near,
                   "--corpus-far", far, "--out", data.string(), "--seed", "7"}) == 0);
  const auto m = load_manifest(data / "manifest.jsonl");
  REQUIRE(m.entries.size() == 3);
  std::set<std::string> ids;
  for (const auto& e : m.entries) {
    ids.insert(e.scene_id);
    for (const auto* p : {&e.y, &e.x, &e.r, &e.sd, &e.meta}) REQUIRE(fs::exists(m.resolve(*p)));
    REQUIRE(wav::read(m.resolve(e.y)).size() == 96000);
    const auto meta = json::parse(slurp(m.resolve(e.meta)));
    const auto variant = meta["nonlinearity"]["variant"].get<std::string>();
    CHECK((variant == "hard_clip_sigmoid" || variant == "soft_clip_sigmoid"));
    const int ser = meta["ser_db"].get<int>();
    CHECK(ser >= -10);
    CHECK(ser <= 10);
    CHECK(meta["scenario"] == "DT");
  }
  CHECK(ids.size() == 3);

  // Same seed, second directory: identical bytes.
  const auto data2 = tmp.path / "data2";
  REQUIRE(run_cli({"synth", "--count", "3", "--mismatched", "--corpus-near", near,
                   "--corpus-far", far, "--out", data2.string(), "--seed", "7"}) == 0);
  CHECK(tree(data) == tree(data2));

  const auto est = tmp.path / "est";
  REQUIRE(run_cli({"run", "--manifest", (data / "manifest.jsonl").string(), "--out",
                   est.string(), "--export-features"}) == 0);
  for (const auto& e : m.entries) {
    CHECK(fs::exists(est / (e.scene_id + ".wav")));
    const auto bytes = features::read_file(est / (e.scene_id + ".ecf"));
    const auto h = features::decode_header(bytes);
    CHECK(bytes.size() == features::file_size(h));
    CHECK(h.n_frames == 599);
  }
  const auto report = tmp.path / "report.jsonl";
  REQUIRE(run_cli({"eval", "--manifest", (data / "manifest.jsonl").string(), "--estimates",
                   est.string(), "--report", report.string()}) == 0);
  const auto rows = read_jsonl(report);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i]["scene_id"] == m.entries[i].scene_id);
    CHECK(rows[i]["sdr_db"].is_number());
    CHECK(rows[i]["erle_db"].is_null());
  }

  // A far-end single-talk set reports ERLE only.
  const auto fe = tmp.path / "fe";
  REQUIRE(run_cli({"synth", "--count", "1", "--matched", "--corpus-near", near, "--corpus-far",
                   far, "--out", fe.string(), "--scenario", "st_fe"}) == 0);
  REQUIRE(run_cli({"run", "--manifest", (fe / "manifest.jsonl").string(), "--out",
                   (fe / "est").string(), "--set", "wiener_main.K=4"}) == 0);
  CHECK(slurp(fe / "est" / "config.txt").find("wiener_main.K = 4") != std::string::npos);
  REQUIRE(run_cli({"eval", "--manifest", (fe / "manifest.jsonl").string(), "--estimates",
                   (fe / "est").string(), "--report", (fe / "r.jsonl").string()}) == 0);
  const auto fe_rows = read_jsonl(fe / "r.jsonl");
  REQUIRE(fe_rows.size() == 1);
  CHECK(fe_rows[0]["scenario"] == "ST_FE");
  CHECK(fe_rows[0]["erle_db"].get<double>() > 0.0);
  CHECK(fe_rows[0]["sdr_db"].is_null());
}
