// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Seeded speech-like test material: voiced syllables (harmonic source with a
// drifting pitch through three formant resonators), fricative noise bursts
// and pauses. Used where no speech corpus is at hand.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "aecref/random.hpp"
#include "aecref/signal.hpp"

namespace aecref::speech_like {

namespace detail {

/// Two-pole resonator normalized to unit peak gain.
class Resonator {
 public:
  Resonator(double freq, double bandwidth, double fs) {
    const double r = std::exp(-std::numbers::pi * bandwidth / fs);
    a1_ = 2.0 * r * std::cos(2.0 * std::numbers::pi * freq / fs);
    a2_ = -r * r;
    gain_ = (1.0 - r);
  }
  double operator()(double x) {
    const double y = gain_ * x + a1_ * y1_ + a2_ * y2_;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

 private:
  double a1_ = 0.0, a2_ = 0.0, gain_ = 1.0, y1_ = 0.0, y2_ = 0.0;
};

}  // namespace detail

inline TimeSignal generate(std::uint64_t seed, std::size_t length,
                           double fs = 16000.0, double peak = 0.9) {
  Rng rng(seed);
  std::vector<double> out(length, 0.0);
  const double f0_base = uniform(rng, 90.0, 240.0);
  double phase = 0.0;

  std::size_t pos = static_cast<std::size_t>(uniform(rng, 0.0, 0.2) * fs);
  while (pos < length) {
    const int syllables = static_cast<int>(uniform_int(rng, 2, 7));
    for (int s = 0; s < syllables && pos < length; ++s) {
      const auto dur = static_cast<std::size_t>(uniform(rng, 0.12, 0.3) * fs);
      const bool voiced = uniform01(rng) < 0.8;
      const double level = uniform(rng, 0.3, 1.0);
      if (voiced) {
        detail::Resonator f1(uniform(rng, 300, 800), uniform(rng, 60, 120), fs);
        detail::Resonator f2(uniform(rng, 900, 2300), uniform(rng, 80, 150), fs);
        detail::Resonator f3(uniform(rng, 2300, 3300), uniform(rng, 100, 200), fs);
        const double f0_start = f0_base * uniform(rng, 0.85, 1.2);
        const double f0_end = f0_base * uniform(rng, 0.8, 1.15);
        for (std::size_t i = 0; i < dur && pos + i < length; ++i) {
          const double u = static_cast<double>(i) / static_cast<double>(dur);
          const double f0 = f0_start + (f0_end - f0_start) * u;
          phase += 2.0 * std::numbers::pi * f0 / fs;
          if (phase > 2.0 * std::numbers::pi) phase -= 2.0 * std::numbers::pi;
          double src = 0.0;
          const int harmonics = std::min(40, static_cast<int>(4000.0 / f0));
          for (int k = 1; k <= harmonics; ++k) src += std::sin(k * phase) / k;
          src += 0.02 * gaussian(rng);
          const double env = std::pow(std::sin(std::numbers::pi * u), 2.0);
          out[pos + i] += level * env * (f1(src) + 0.7 * f2(src) + 0.4 * f3(src));
        }
      } else {
        detail::Resonator fr(uniform(rng, 3000, 6000), uniform(rng, 800, 2000), fs);
        for (std::size_t i = 0; i < dur && pos + i < length; ++i) {
          const double u = static_cast<double>(i) / static_cast<double>(dur);
          const double env = std::pow(std::sin(std::numbers::pi * u), 2.0);
          out[pos + i] += 0.3 * level * env * fr(gaussian(rng));
        }
      }
      pos += dur;
    }
    pos += static_cast<std::size_t>(uniform(rng, 0.05, 0.35) * fs);
  }

  double mx = 0.0;
  for (double v : out) mx = std::max(mx, std::abs(v));
  if (mx > 0.0)
    for (double& v : out) v *= peak / mx;
  return TimeSignal(std::move(out), fs);
}

}  // namespace aecref::speech_like
