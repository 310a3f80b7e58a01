// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "aecref/room_sim.hpp"
#include "aecref/signal.hpp"
#include "aecref/stft.hpp"

namespace aecref::metrics {

inline constexpr double kEnergyFloor = 1e-12;
inline constexpr double kCapDb = 100.0;

namespace detail {

inline void require_same_length(const TimeSignal& a, const TimeSignal& b,
                                const char* what) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": length mismatch");
}

inline double capped_db(double num, double den) {
  return std::min(kCapDb, 10.0 * std::log10((num + kEnergyFloor) /
                                            (den + kEnergyFloor)));
}

}  // namespace detail

/// Echo return loss enhancement of residual e against microphone signal y.
inline double erle(const TimeSignal& y, const TimeSignal& e) {
  detail::require_same_length(y, e, "erle");
  return detail::capped_db(y.energy(), e.energy());
}

/// Plain signal-to-distortion ratio (no projection, no distortion filter).
inline double sdr(const TimeSignal& target, const TimeSignal& estimate) {
  detail::require_same_length(target, estimate, "sdr");
  double distortion = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const double d = target[i] - estimate[i];
    distortion += d * d;
  }
  return detail::capped_db(target.energy(), distortion);
}

/// Stretched SI-SNR: 10 log10((1 + cos b) / (1 - cos b)) with cos b the
/// cosine similarity of the zero-mean signals, clamped to [-100, 100] dB.
inline double s_sisnr(const TimeSignal& target, const TimeSignal& estimate) {
  detail::require_same_length(target, estimate, "s_sisnr");
  const std::size_t n = target.size();
  if (n == 0) throw LengthError("s_sisnr: empty signals");
  double mt = 0.0, me = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mt += target[i];
    me += estimate[i];
  }
  mt /= static_cast<double>(n);
  me /= static_cast<double>(n);
  double dot = 0.0, tt = 0.0, ee = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = target[i] - mt;
    const double b = estimate[i] - me;
    dot += a * b;
    tt += a * a;
    ee += b * b;
  }
  if (!(tt > 0.0) || !(ee > 0.0))
    throw Error("s_sisnr: target and estimate must be nonzero");
  const double cosb = std::clamp(dot / std::sqrt(tt * ee), -1.0, 1.0);
  const double lim = std::pow(10.0, kCapDb / 10.0);
  const double num = 1.0 + cosb;
  const double den = 1.0 - cosb;
  if (num >= lim * den) return kCapDb;
  if (den >= lim * num) return -kCapDb;
  return 10.0 * std::log10(num / den);
}

/// Compressed real/imaginary plus compressed magnitude loss, summed over all
/// T-F units: |S|^p e^{j arg S} against the same for the estimate.
inline double ri_mag_loss(const Spectrogram& S, const Spectrogram& S_hat,
                          double p = 0.5) {
  require_same_shape(S, S_hat, "ri_mag_loss");
  if (!(p > 0.0 && p <= 1.0)) throw Error("ri_mag_loss: p must be in (0, 1]");
  auto compress = [p](cplx z) {
    const double mag = std::abs(z);
    if (mag == 0.0) return cplx{};
    return z * (std::pow(mag, p) / mag);
  };
  double ri = 0.0, mag = 0.0;
  for (Eigen::Index f = 0; f < S.n_bins(); ++f) {
    for (Eigen::Index t = 0; t < S.n_frames(); ++t) {
      const cplx a = compress(S(t, f));
      const cplx b = compress(S_hat(t, f));
      ri += std::norm(a - b);
      const double dm = std::abs(a) - std::abs(b);
      mag += dm * dm;
    }
  }
  return ri + mag;
}

/// ri_mag_loss + alpha * (-s_sisnr).
inline double combined_loss(const Spectrogram& S, const Spectrogram& S_hat,
                            const TimeSignal& s, const TimeSignal& s_hat,
                            double alpha = 0.01, double p = 0.5) {
  return ri_mag_loss(S, S_hat, p) - alpha * s_sisnr(s, s_hat);
}

enum class Scenario { DoubleTalk, NearEndSingleTalk, FarEndSingleTalk };

inline std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::DoubleTalk: return "DT";
    case Scenario::NearEndSingleTalk: return "ST_NE";
    case Scenario::FarEndSingleTalk: return "ST_FE";
  }
  return "DT";
}

inline std::optional<Scenario> scenario_from_string(std::string_view s) {
  if (s == "DT") return Scenario::DoubleTalk;
  if (s == "ST_NE") return Scenario::NearEndSingleTalk;
  if (s == "ST_FE") return Scenario::FarEndSingleTalk;
  return std::nullopt;
}

inline Scenario infer_scenario(bool talker_active, bool far_end_active) {
  if (talker_active && far_end_active) return Scenario::DoubleTalk;
  if (talker_active) return Scenario::NearEndSingleTalk;
  if (far_end_active) return Scenario::FarEndSingleTalk;
  throw Error("evaluate: scenario undeterminable (both talkers silent)");
}

struct MetricReport {
  Scenario scenario = Scenario::DoubleTalk;
  std::optional<double> erle_db;
  std::optional<double> sdr_db;
  std::optional<double> s_sisnr_db;
  std::optional<double> ri_mag_loss;
};

/// Scenario-dependent metrics. ST_FE: ERLE of the estimate as residual.
/// DT and ST_NE: SDR, S-SISNR and RI+Mag loss against the direct-path target.
inline MetricReport evaluate(Scenario scenario, const TimeSignal& y,
                             const TimeSignal& target,
                             const TimeSignal& estimate,
                             const StftConfig& stft = {}) {
  MetricReport rep;
  rep.scenario = scenario;
  if (scenario == Scenario::FarEndSingleTalk) {
    rep.erle_db = erle(y, estimate);
    return rep;
  }
  rep.sdr_db = sdr(target, estimate);
  if (estimate.energy() > 0.0 && target.energy() > 0.0)
    rep.s_sisnr_db = s_sisnr(target, estimate);
  if (target.size() >= static_cast<std::size_t>(stft.window_len))
    rep.ri_mag_loss =
        ri_mag_loss(stft_forward(target, stft), stft_forward(estimate, stft));
  return rep;
}

inline MetricReport evaluate_scene(const room::Scene& scene,
                                   const TimeSignal& estimate) {
  return evaluate(infer_scenario(scene.talker_active(), scene.far_end_active()),
                  scene.y, scene.s_direct, estimate);
}

}  // namespace aecref::metrics
