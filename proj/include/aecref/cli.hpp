// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end:
//
//   aecref synth --count N (--matched | --mismatched) --corpus-near DIR
//                --corpus-far DIR --out DIR [--seed S] [--scenario dt|st_ne|st_fe]
//   aecref run   (--manifest FILE | --y WAV --x WAV --r WAV) [--config FILE]
//                [--set key=value ...] [--export-features] --out DIR
//   aecref eval  --manifest FILE --estimates DIR --report FILE
//   aecref rir   --room L W H --t60 T --src X Y Z --mic X Y Z --out WAV
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#pragma once

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "aecref/pipeline.hpp"

namespace aecref::cli {

namespace fs = std::filesystem;
using pipeline::UsageError;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p))
    throw UsageError(std::string(what) + " not found: " + p.string());
}

inline void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (!fs::is_directory(p)) throw Error("cannot create output directory " + p.string());
}

struct RunArgs {
  std::string manifest, y, x, r, config, out;
  std::vector<std::string> overrides;
  bool export_features = false;
};

inline pipeline::RunConfig resolve_config(const RunArgs& a) {
  pipeline::RunConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    cfg = pipeline::load_config(a.config);
  }
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    cfg.set(pipeline::detail::trim(kv.substr(0, eq)), pipeline::detail::trim(kv.substr(eq + 1)));
  }
  try {
    cfg.validate();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline void run_one(const std::string& id, const TimeSignal& y, const TimeSignal& x,
                    const TimeSignal& r, const pipeline::RunConfig& cfg,
                    const RunArgs& a) {
  auto bundle = pipeline::run_linear_stage(y, x, r, cfg);
  bundle.scene_id = id;
  const fs::path out(a.out);
  wav::write(out / (id + ".wav"),
             pipeline::to_waveform(bundle, pipeline::kCancelPurified, y.size(), y.sample_rate));
  if (a.export_features) pipeline::export_features(bundle, out / (id + ".ecf"));
  if (bundle.degenerate_units > 0)
    std::cerr << id << ": " << bundle.degenerate_units
              << " degenerate T-F units (zero filter used)\n";
}

inline int cmd_run(const RunArgs& a) {
  const bool direct = !a.y.empty() || !a.x.empty() || !a.r.empty();
  if (a.manifest.empty() == !direct)
    throw UsageError("run: give either --manifest or all of --y/--x/--r");
  const auto cfg = resolve_config(a);
  ensure_dir(a.out);
  {
    std::ofstream os(fs::path(a.out) / "config.txt", std::ios::binary);
    os << cfg.to_text();
  }
  if (direct) {
    for (const auto* p : {&a.y, &a.x, &a.r}) require_file(*p, "input wav");
    const auto y = wav::read(a.y), x = wav::read(a.x), r = wav::read(a.r);
    run_one(fs::path(a.y).stem().string(), y, x, r, cfg, a);
    return kExitOk;
  }
  require_file(a.manifest, "manifest");
  const auto m = pipeline::load_manifest(a.manifest);
  for (const auto& e : m.entries) {
    for (const auto* p : {&e.y, &e.x, &e.r}) require_file(m.resolve(*p), "scene wav");
    run_one(e.scene_id, wav::read(m.resolve(e.y)), wav::read(m.resolve(e.x)),
            wav::read(m.resolve(e.r)), cfg, a);
  }
  return kExitOk;
}

inline int cmd_eval(const std::string& manifest, const std::string& estimates,
                    const std::string& report) {
  require_file(manifest, "manifest");
  if (!fs::is_directory(estimates))
    throw UsageError("estimates directory not found: " + estimates);
  const auto m = pipeline::load_manifest(manifest);
  std::vector<pipeline::json> rows;
  double erle_sum = 0.0, sdr_sum = 0.0;
  int erle_n = 0, sdr_n = 0;
  for (const auto& e : m.entries) {
    const fs::path est_path = fs::path(estimates) / (e.scene_id + ".wav");
    require_file(est_path, "estimate");
    require_file(m.resolve(e.meta), "scene metadata");
    const auto scenario = pipeline::scenario_of(m.resolve(e.meta));
    const auto y = wav::read(m.resolve(e.y));
    const auto sd = wav::read(m.resolve(e.sd));
    const auto est = fit_length(wav::read(est_path), y.size());
    const auto rep = metrics::evaluate(scenario, y, sd, est);
    if (rep.erle_db) erle_sum += *rep.erle_db, ++erle_n;
    if (rep.sdr_db) sdr_sum += *rep.sdr_db, ++sdr_n;
    rows.push_back(pipeline::report_to_json(e.scene_id, rep));
  }
  pipeline::write_jsonl(report, rows);
  std::printf("scenes: %zu", rows.size());
  if (erle_n) std::printf("  mean ERLE: %.2f dB", erle_sum / erle_n);
  if (sdr_n) std::printf("  mean SDR: %.2f dB", sdr_sum / sdr_n);
  std::printf("\n");
  return kExitOk;
}

inline int cmd_rir(const std::vector<double>& dims, double t60,
                   const std::vector<double>& src, const std::vector<double>& mic,
                   int max_order, const std::string& out) {
  room::RoomSpec r;
  r.length = dims[0];
  r.width = dims[1];
  r.height = dims[2];
  r.t60 = t60;
  r.max_order = max_order;
  std::vector<double> h;
  try {
    h = room::image_method_rir(r, {src[0], src[1], src[2]}, {mic[0], mic[1], mic[2]});
  } catch (const GeometryError& e) {
    throw UsageError(e.what());
  }
  wav::write(out, TimeSignal(std::move(h), r.sample_rate));
  return kExitOk;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv) {
  CLI::App app{"Dual-microphone linear acoustic echo cancellation toolkit", "aecref"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Synthesize a dataset of dual-microphone scenes");
  pipeline::SynthOptions so;
  std::string corpus_near, corpus_far, synth_out, scenario = "dt";
  bool matched = false, mismatched = false;
  synth->add_option("--count", so.count, "Number of scenes")->required();
  auto* m_opt = synth->add_flag("--matched", matched, "Use the matched nonlinearities");
  auto* mm_opt = synth->add_flag("--mismatched", mismatched, "Use the mismatched nonlinearities");
  m_opt->excludes(mm_opt);
  synth->add_option("--corpus-near", corpus_near, "Directory of near-end 16 kHz wavs")->required();
  synth->add_option("--corpus-far", corpus_far, "Directory of far-end 16 kHz wavs")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", so.seed, "Random seed");
  synth->add_option("--scenario", scenario, "dt, st_ne or st_fe")
      ->check(CLI::IsMember({"dt", "st_ne", "st_fe"}));

  // run
  auto* run = app.add_subcommand("run", "Run the linear stage and write residual estimates");
  detail::RunArgs ra;
  run->add_option("--manifest", ra.manifest, "Scene manifest (jsonl)");
  run->add_option("--y", ra.y, "Main microphone wav");
  run->add_option("--x", ra.x, "Far-end wav");
  run->add_option("--r", ra.r, "Reference microphone wav");
  run->add_option("--config", ra.config, "Flat key = value config file");
  run->add_option("--set", ra.overrides, "Config override key=value (repeatable)");
  run->add_flag("--export-features", ra.export_features, "Write the 7-signal feature file");
  run->add_option("--out", ra.out, "Output directory")->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate estimates against a manifest");
  std::string ev_manifest, ev_estimates, ev_report;
  eval->add_option("--manifest", ev_manifest, "Scene manifest (jsonl)")->required();
  eval->add_option("--estimates", ev_estimates, "Directory of <scene_id>.wav estimates")->required();
  eval->add_option("--report", ev_report, "Output report (jsonl)")->required();

  // rir
  auto* rir = app.add_subcommand("rir", "Generate one image-method room impulse response");
  std::vector<double> dims, src, mic;
  double t60 = 0.3;
  int max_order = -1;
  std::string rir_out;
  rir->add_option("--room", dims, "Room length width height (m)")->expected(3)->required();
  rir->add_option("--t60", t60, "Reverberation time (s)")->required();
  rir->add_option("--src", src, "Source position (m)")->expected(3)->required();
  rir->add_option("--mic", mic, "Microphone position (m)")->expected(3)->required();
  rir->add_option("--max-order", max_order, "Reflection order cap (default: full length)");
  rir->add_option("--out", rir_out, "Output wav")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "aecref: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth) {
      if (!matched && !mismatched)
        throw UsageError("synth: one of --matched or --mismatched is required");
      so.matched = matched;
      so.corpus_near = corpus_near;
      so.corpus_far = corpus_far;
      so.out_dir = synth_out;
      so.mode = *pipeline::scene_mode_from_string(scenario);
      const auto entries = pipeline::synth_dataset(so);
      std::printf("wrote %zu scenes to %s\n", entries.size(), synth_out.c_str());
      return kExitOk;
    }
    if (*run) return detail::cmd_run(ra);
    if (*eval) return detail::cmd_eval(ev_manifest, ev_estimates, ev_report);
    if (*rir) return detail::cmd_rir(dims, t60, src, mic, max_order, rir_out);
  } catch (const UsageError& e) {
    std::cerr << "aecref: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "aecref: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

inline int cli_main(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("aecref");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace aecref::cli
