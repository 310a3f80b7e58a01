// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aecref {

using cplx = std::complex<double>;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input is too short for the requested operation.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Operands have inconsistent dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid room / source / microphone placement.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Signal-to-echo mixing is undefined (zero-energy operand).
class MixingError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Mono sampled waveform.
struct TimeSignal {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  TimeSignal() = default;
  explicit TimeSignal(std::vector<double> s, double fs = 16000.0)
      : samples(std::move(s)), sample_rate(fs) {}

  static TimeSignal zeros(std::size_t n, double fs = 16000.0) {
    return TimeSignal(std::vector<double>(n, 0.0), fs);
  }

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double operator[](std::size_t i) const { return samples[i]; }
  double& operator[](std::size_t i) { return samples[i]; }
  std::span<const double> view() const { return samples; }

  double energy() const {
    return std::inner_product(samples.begin(), samples.end(), samples.begin(),
                              0.0);
  }

  /// Throws if the sample rate is not positive or a sample is not finite.
  void validate() const {
    if (!(sample_rate > 0.0))
      throw Error("TimeSignal: sample_rate must be positive");
    for (double v : samples)
      if (!std::isfinite(v)) throw Error("TimeSignal: non-finite sample");
  }
};

/// Truncates or zero-pads to exactly n samples.
inline TimeSignal fit_length(const TimeSignal& sig, std::size_t n) {
  TimeSignal out = sig;
  out.samples.resize(n, 0.0);
  return out;
}

inline TimeSignal scaled(const TimeSignal& sig, double gain) {
  TimeSignal out = sig;
  for (double& v : out.samples) v *= gain;
  return out;
}

inline TimeSignal added(const TimeSignal& a, const TimeSignal& b) {
  if (a.size() != b.size()) throw ShapeError("added: length mismatch");
  TimeSignal out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.samples[i] += b.samples[i];
  return out;
}

}  // namespace aecref
