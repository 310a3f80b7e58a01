// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Shoebox image-method RIRs and dual-microphone scene synthesis.
//
// Paths: h1 talker -> main mic, h2 loudspeaker -> main mic,
//        h3 talker -> reference mic, h4 loudspeaker -> reference mic.

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "aecref/nonlinearity.hpp"
#include "aecref/random.hpp"
#include "aecref/signal.hpp"

namespace aecref::room {

using Point = Eigen::Vector3d;

inline constexpr double kWallMargin = 0.1;
inline constexpr double kMinPathLength = 0.01;
inline constexpr double kRefShellMin = 0.05;
inline constexpr double kRefShellMax = 0.2;

struct RoomSpec {
  double length = 6.0;
  double width = 5.0;
  double height = 3.0;
  double t60 = 0.3;
  double speed_of_sound = 343.0;
  double sample_rate = 16000.0;
  int max_order = -1;  // < 0: cover the whole RIR length
  int rir_len = 0;     // <= 0: t60 * fs * 1.2
  double highpass_hz = 100.0;     // <= 0: raw image sum
  bool diffuse_correction = true;  // false: plain Eyring reflectance

  double volume() const { return length * width * height; }
  double surface() const {
    return 2.0 * (length * width + length * height + width * height);
  }
  Point dims() const { return {length, width, height}; }

  int effective_rir_len() const {
    if (rir_len > 0) return rir_len;
    return std::max(1, static_cast<int>(std::ceil(t60 * sample_rate * 1.2)));
  }

  void validate() const {
    if (length < 4.0 || length > 8.0) throw GeometryError("room length outside [4, 8] m");
    if (width < 3.0 || width > 7.0) throw GeometryError("room width outside [3, 7] m");
    if (height < 3.0 || height > 5.0) throw GeometryError("room height outside [3, 5] m");
    if (!(t60 > 0.0)) throw GeometryError("t60 must be positive");
    if (!(speed_of_sound > 0.0) || !(sample_rate > 0.0))
      throw GeometryError("speed of sound and sample rate must be positive");
  }
};

/// Pressure reflection coefficient shared by all six walls, from Eyring's
/// reverberation formula with uniform absorption.
inline double reflection_coefficient(const RoomSpec& room) {
  const double k = 24.0 * std::numbers::ln10 / room.speed_of_sound;
  const double reflectance =
      std::exp(-k * room.volume() / (room.surface() * room.t60));
  return std::sqrt(std::clamp(reflectance, 0.0, 1.0));
}

/// Allen-Berkley DC-removal high-pass applied in place. The image sum
/// is all-positive, so coincident images add coherently at low frequency and
/// would otherwise inflate the late tail.
inline void highpass_in_place(std::vector<double>& h, double cutoff_hz, double fs) {
  const double w = 2.0 * std::numbers::pi * cutoff_hz / fs;
  const double r1 = std::exp(-w);
  const double b1 = 2.0 * r1 * std::cos(w);
  const double b2 = -r1 * r1;
  const double a1 = -(1.0 + r1);
  double y0 = 0.0, y1 = 0.0, y2 = 0.0;
  for (double& v : h) {
    y2 = y1;
    y1 = y0;
    y0 = b1 * y1 + b2 * y2 + v;
    v = y0 + a1 * y1 + r1 * y2;
  }
}

namespace detail {

/// T20 (line fit of the backward-integrated energy between -5 and -25 dB)
/// of the direction-averaged image energy envelope, truncated at `end`
/// seconds. Along direction cosines c an image path meets walls at rate
/// speed * sum_i |c_i| / L_i and loses `log_reflectance` nepers per hit.
inline double image_model_t20(const RoomSpec& room, double log_reflectance, double end) {
  constexpr int kDirections = 512;
  constexpr int kSteps = 256;
  std::vector<double> rates(kDirections);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < kDirections; ++i) {
    const double z = 1.0 - (i + 0.5) / kDirections;  // hemisphere, by symmetry
    const double rho = std::sqrt(1.0 - z * z);
    const double phi = golden * i;
    rates[i] = -log_reflectance * room.speed_of_sound *
               (std::abs(rho * std::cos(phi)) / room.length +
                std::abs(rho * std::sin(phi)) / room.width + z / room.height);
  }
  std::vector<double> tail(rates.size());
  for (std::size_t i = 0; i < rates.size(); ++i) tail[i] = std::exp(-rates[i] * end);
  double sx = 0, sy = 0, sxx = 0, sxy = 0, edc0 = 0;
  int n = 0;
  for (int s = 0; s <= kSteps; ++s) {
    const double t = end * s / kSteps;
    double edc = 0.0;
    for (std::size_t i = 0; i < rates.size(); ++i)
      edc += (std::exp(-rates[i] * t) - tail[i]) / rates[i];
    if (s == 0) edc0 = edc;
    const double db = 10.0 * std::log10(edc / edc0);
    if (db > -5.0) continue;
    if (db < -25.0) break;
    sx += t, sy += db, sxx += t * t, sxy += t * db, ++n;
  }
  if (n < 2) return 0.0;
  return -60.0 * (n * sxx - sx * sx) / (n * sxy - sx * sy);
}

}  // namespace detail

/// Reflection coefficient used by the image model. Eyring assumes a diffuse
/// field; a shoebox with uniform absorption is not diffuse (paths near an
/// axis meet few walls and dominate the tail), so the Eyring log-reflectance
/// is rescaled until the direction-averaged image energy has T20 = t60.
inline double image_reflection_coefficient(const RoomSpec& room) {
  const double eyring = reflection_coefficient(room);
  if (!room.diffuse_correction || eyring <= 0.0 || eyring >= 1.0) return eyring;
  const double base = 2.0 * std::log(eyring);
  const double end = room.effective_rir_len() / room.sample_rate;
  double scale = 1.0;
  for (int iter = 0; iter < 4; ++iter) {
    const double t20 = detail::image_model_t20(room, scale * base, end);
    if (!(t20 > 0.0)) break;
    scale *= t20 / room.t60;
  }
  return std::exp(0.5 * scale * base);
}

inline bool inside(const RoomSpec& room, const Point& p, double margin) {
  const Point d = room.dims();
  for (int i = 0; i < 3; ++i)
    if (p[i] < margin || p[i] > d[i] - margin) return false;
  return true;
}

inline std::vector<double> image_method_rir(const RoomSpec& room,
                                            const Point& src, const Point& mic) {
  room.validate();
  if (!inside(room, src, 0.0) || !inside(room, mic, 0.0))
    throw GeometryError("image_method_rir: source or microphone outside room");
  if ((src - mic).norm() < kMinPathLength)
    throw GeometryError("image_method_rir: source and microphone closer than 1 cm");

  const int len = room.effective_rir_len();
  std::vector<double> rir(static_cast<std::size_t>(len), 0.0);
  const double beta = image_reflection_coefficient(room);
  const double samples_per_meter = room.sample_rate / room.speed_of_sound;
  const double max_dist = len / samples_per_meter;
  const Point dims = room.dims();

  // Per axis: squared offset and wall-hit count of every image in range.
  struct AxisImage {
    double offset2;
    int hits;
  };
  std::vector<AxisImage> axis[3];
  int max_hits = 0;
  for (int a = 0; a < 3; ++a) {
    const double two_l = 2.0 * dims[a];
    for (int parity = 0; parity < 2; ++parity) {
      const double base = (1 - 2 * parity) * src[a] - mic[a];
      const auto lo = static_cast<long>(std::floor((-max_dist - base) / two_l)) - 1;
      const auto hi = static_cast<long>(std::ceil((max_dist - base) / two_l)) + 1;
      for (long n = lo; n <= hi; ++n) {
        const double off = base + n * two_l;
        if (std::abs(off) > max_dist) continue;
        const int hits = static_cast<int>(std::labs(n - parity) + std::labs(n));
        axis[a].push_back({off * off, hits});
        max_hits = std::max(max_hits, hits);
      }
    }
  }
  std::vector<double> beta_pow(static_cast<std::size_t>(3 * max_hits + 1));
  beta_pow[0] = 1.0;
  for (std::size_t i = 1; i < beta_pow.size(); ++i) beta_pow[i] = beta_pow[i - 1] * beta;

  const double max_d2 = max_dist * max_dist;
  const double inv_4pi = 1.0 / (4.0 * std::numbers::pi);
  for (const auto& ix : axis[0]) {
    for (const auto& iy : axis[1]) {
      const double dxy = ix.offset2 + iy.offset2;
      if (dxy > max_d2) continue;
      for (const auto& iz : axis[2]) {
        const double d2 = dxy + iz.offset2;
        if (d2 > max_d2) continue;
        const int hits = ix.hits + iy.hits + iz.hits;
        if (room.max_order >= 0 && hits > room.max_order) continue;
        const double d = std::sqrt(d2);
        const auto tap = static_cast<long>(std::lround(d * samples_per_meter));
        if (tap >= len) continue;
        rir[static_cast<std::size_t>(tap)] += beta_pow[hits] * inv_4pi / d;
      }
    }
  }
  if (room.highpass_hz > 0.0) highpass_in_place(rir, room.highpass_hz, room.sample_rate);
  return rir;
}

/// Linear convolution truncated to out_len samples, via FFT.
inline std::vector<double> fft_convolve(std::span<const double> a,
                                        std::span<const double> b,
                                        std::size_t out_len) {
  std::vector<double> out(out_len, 0.0);
  if (a.empty() || b.empty() || out_len == 0) return out;
  // Samples of either operand past out_len cannot reach the kept output.
  const std::size_t la = std::min(a.size(), out_len);
  const std::size_t lb = std::min(b.size(), out_len);
  std::size_t n = 1;
  while (n < la + lb - 1) n <<= 1;
  std::vector<double> pa(n, 0.0), pb(n, 0.0);
  std::copy_n(a.begin(), la, pa.begin());
  std::copy_n(b.begin(), lb, pb.begin());
  Eigen::FFT<double> fft;
  std::vector<cplx> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t i = 0; i < fa.size(); ++i) fa[i] *= fb[i];
  std::vector<double> res;
  fft.inv(res, fa);
  std::copy_n(res.begin(), std::min(out_len, res.size()), out.begin());
  return out;
}

inline TimeSignal convolve(const TimeSignal& sig, std::span<const double> rir) {
  return TimeSignal(fft_convolve(sig.samples, rir, sig.size()), sig.sample_rate);
}

/// Index of the direct-path peak: first tap reaching half the RIR maximum.
inline std::size_t direct_onset(std::span<const double> rir) {
  double peak = 0.0;
  for (double v : rir) peak = std::max(peak, std::abs(v));
  if (peak == 0.0) return 0;
  for (std::size_t i = 0; i < rir.size(); ++i)
    if (std::abs(rir[i]) >= 0.5 * peak) return i;
  return 0;
}

struct DirectSplit {
  TimeSignal direct;
  TimeSignal reverb;
};

/// Partitions h1 at onset + split_ms; the early part (inclusive) gives the
/// direct-path component, the rest the reverberant component.
inline DirectSplit split_direct(const TimeSignal& v, std::span<const double> h1,
                                double split_ms = 50.0) {
  if (split_ms < 0.0) throw Error("split_direct: split_ms must be >= 0");
  const std::size_t cut = std::min(
      h1.size(),
      direct_onset(h1) +
          static_cast<std::size_t>(std::lround(split_ms * v.sample_rate / 1000.0)) + 1);
  std::vector<double> early(h1.begin(), h1.end()), late(h1.size(), 0.0);
  for (std::size_t i = cut; i < h1.size(); ++i) {
    late[i] = early[i];
    early[i] = 0.0;
  }
  DirectSplit out;
  out.direct = convolve(v, early);
  out.reverb = convolve(v, late);
  return out;
}

/// Echo gain g with 10 log10(|s|^2 / |g d|^2) = ser_db.
inline double ser_gain(const TimeSignal& s, const TimeSignal& d, double ser_db) {
  const double es = s.energy();
  const double ed = d.energy();
  if (!(es > 0.0)) throw MixingError("mix_at_ser: near-end signal has zero energy");
  if (!(ed > 0.0)) throw MixingError("mix_at_ser: echo signal has zero energy");
  return std::sqrt(es / (ed * std::pow(10.0, ser_db / 10.0)));
}

struct Mixture {
  TimeSignal y;
  double gain = 1.0;
};

inline Mixture mix_at_ser(const TimeSignal& s, const TimeSignal& d, double ser_db) {
  if (s.size() != d.size()) throw ShapeError("mix_at_ser: length mismatch");
  Mixture out;
  out.gain = ser_gain(s, d, ser_db);
  out.y = added(s, scaled(d, out.gain));
  return out;
}

struct SceneGeometry {
  Point loudspeaker{1.0, 1.0, 1.0};
  Point talker{2.0, 2.0, 1.5};
  Point main_mic{3.0, 2.0, 1.5};
  Point ref_mic{1.1, 1.0, 1.0};

  void validate(const RoomSpec& room) const {
    room.validate();
    for (const Point* p : {&loudspeaker, &talker, &main_mic, &ref_mic})
      if (!inside(room, *p, kWallMargin - 1e-12))
        throw GeometryError("scene point closer than 0.1 m to a wall");
    const double l = room.length, w = room.width, h = room.height;
    const double eps = 1e-12;
    if (main_mic.x() < l / 10 - eps || main_mic.x() > l - l / 10 + eps ||
        main_mic.y() < w / 10 - eps || main_mic.y() > w - w / 10 + eps ||
        main_mic.z() < 1.0 - eps || main_mic.z() > std::min(h - 1.0, 3.0) + eps)
      throw GeometryError("main microphone outside its placement box");
    const double shell = (ref_mic - loudspeaker).norm();
    if (shell < kRefShellMin - eps || shell > kRefShellMax + eps)
      throw GeometryError("reference microphone not on the 0.05-0.2 m shell");
    for (const Point* mic : {&main_mic, &ref_mic})
      for (const Point* src : {&loudspeaker, &talker})
        if ((*mic - *src).norm() < kMinPathLength)
          throw GeometryError("source and microphone closer than 1 cm");
  }
};

inline RoomSpec sample_room(Rng& rng) {
  RoomSpec r;
  r.length = uniform(rng, 4.0, 8.0);
  r.width = uniform(rng, 3.0, 7.0);
  r.height = uniform(rng, 3.0, 5.0);
  r.t60 = uniform(rng, 0.1, 0.8);
  return r;
}

inline Point sample_in_box(Rng& rng, const Point& lo, const Point& hi) {
  return {uniform(rng, lo.x(), hi.x()), uniform(rng, lo.y(), hi.y()),
          uniform(rng, lo.z(), hi.z())};
}

/// Random placement. Sources anywhere inside the wall margin; the main mic in
/// its box; the reference mic on a shell of random radius around the
/// loudspeaker. `min_separation` applies between each source and the main
/// microphone and between the two sources.
inline SceneGeometry sample_geometry(const RoomSpec& room, Rng& rng,
                                     double min_separation = 0.5) {
  const Point lo = Point::Constant(kWallMargin);
  const Point hi = room.dims() - Point::Constant(kWallMargin);
  const double l = room.length, w = room.width, h = room.height;
  const Point mic_lo{l / 10, w / 10, 1.0};
  const Point mic_hi{l - l / 10, w - w / 10, std::min(h - 1.0, 3.0)};
  SceneGeometry g;
  for (int attempt = 0; attempt < 10000; ++attempt) {
    g.loudspeaker = sample_in_box(rng, lo, hi);
    g.talker = sample_in_box(rng, lo, hi);
    g.main_mic = sample_in_box(rng, mic_lo, mic_hi);
    const double radius = uniform(rng, kRefShellMin, kRefShellMax);
    Point dir{gaussian(rng), gaussian(rng), gaussian(rng)};
    if (dir.norm() == 0.0) continue;
    g.ref_mic = g.loudspeaker + radius * dir.normalized();
    if (!inside(room, g.ref_mic, kWallMargin)) continue;
    if ((g.talker - g.loudspeaker).norm() < min_separation) continue;
    if ((g.main_mic - g.loudspeaker).norm() < min_separation) continue;
    if ((g.main_mic - g.talker).norm() < min_separation) continue;
    if ((g.ref_mic - g.talker).norm() < min_separation) continue;
    return g;
  }
  throw GeometryError("sample_geometry: no valid placement found");
}

struct SceneOptions {
  std::size_t length = 96000;  // 6 s at 16 kHz
  double split_ms = 50.0;
};

/// Every signal of one dual-microphone scene. The SER gain is folded into
/// d and r_far, so y = s + d and r = r_near + r_far hold as stored.
struct Scene {
  TimeSignal x, x_nl, v;
  TimeSignal s, s_direct, s_reverb, d, y;
  TimeSignal r, r_far, r_near;
  std::vector<double> h1, h2, h3, h4;
  RoomSpec room;
  SceneGeometry geometry;
  nonlinear::NonlinearityKind nonlinearity;
  double ser_db = 0.0;
  double gain = 1.0;
  std::uint64_t seed = 0;

  bool talker_active() const { return v.energy() > 0.0; }
  bool far_end_active() const { return x.energy() > 0.0; }
};

inline Scene synthesize_scene(const RoomSpec& room, const SceneGeometry& geom,
                              const TimeSignal& v, const TimeSignal& x,
                              const nonlinear::NonlinearityKind& kind,
                              double ser_db, std::uint64_t seed,
                              const SceneOptions& opts = {}) {
  geom.validate(room);
  v.validate();
  x.validate();
  if (v.sample_rate != x.sample_rate || v.sample_rate != room.sample_rate)
    throw Error("synthesize_scene: sample rates differ");

  Scene sc;
  sc.room = room;
  sc.geometry = geom;
  sc.nonlinearity = kind;
  sc.ser_db = ser_db;
  sc.seed = seed;
  sc.v = fit_length(v, opts.length);
  sc.x = fit_length(x, opts.length);
  sc.x_nl = nonlinear::apply_nonlinearity(sc.x, kind);

  sc.h1 = image_method_rir(room, geom.talker, geom.main_mic);
  sc.h2 = image_method_rir(room, geom.loudspeaker, geom.main_mic);
  sc.h3 = image_method_rir(room, geom.talker, geom.ref_mic);
  sc.h4 = image_method_rir(room, geom.loudspeaker, geom.ref_mic);

  auto split = split_direct(sc.v, sc.h1, opts.split_ms);
  sc.s_direct = std::move(split.direct);
  sc.s_reverb = std::move(split.reverb);
  sc.s = added(sc.s_direct, sc.s_reverb);
  const TimeSignal echo = convolve(sc.x_nl, sc.h2);
  const TimeSignal ref_far = convolve(sc.x_nl, sc.h4);
  sc.r_near = convolve(sc.v, sc.h3);

  // With one side silent there is no SER to meet; the echo stays at unit gain.
  sc.gain = (sc.s.energy() > 0.0 && echo.energy() > 0.0)
                ? ser_gain(sc.s, echo, ser_db)
                : 1.0;
  sc.d = scaled(echo, sc.gain);
  sc.r_far = scaled(ref_far, sc.gain);
  sc.y = added(sc.s, sc.d);
  sc.r = added(sc.r_near, sc.r_far);
  return sc;
}

}  // namespace aecref::room
