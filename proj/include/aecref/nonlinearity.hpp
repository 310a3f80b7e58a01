// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Memoryless loudspeaker distortion models.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

#include "aecref/random.hpp"
#include "aecref/signal.hpp"

namespace aecref::nonlinear {

inline constexpr double kClipThreshold = 0.7;
inline constexpr double kSoftClipShape = 2.0;
inline constexpr double kSigmoidGain = 2.0;

/// Logarithm used to map b to the polynomial coefficient.
enum class PolyLog { Natural, Base10 };

inline double saturating(double x, double b) {
  const double a = 5.0 / b;
  return a * x / std::sqrt(a * a + x * x);
}

inline double exponential(double x, double b) {
  const double a = b / 10.0;
  return 1.0 - std::exp(-a * x);
}

inline double polynomial_coefficient(double b, PolyLog base = PolyLog::Natural) {
  const double ratio = b / 10.0;
  return (base == PolyLog::Natural ? std::log(ratio) : std::log10(ratio)) + 0.1;
}

/// 2a x + a x^2 + x^3 for an explicit coefficient.
inline double polynomial_with_coefficient(double x, double a) {
  return 2.0 * a * x + a * x * x + x * x * x;
}

inline double polynomial(double x, double b, PolyLog base = PolyLog::Natural) {
  return polynomial_with_coefficient(x, polynomial_coefficient(b, base));
}

inline double hard_clip(double x, double x_max = kClipThreshold) {
  return std::clamp(x, -x_max, x_max);
}

/// x * x_max / sqrt(|x_max|^rho + |x|^rho).
inline double soft_clip(double x, double x_max = kClipThreshold,
                        double rho = kSoftClipShape) {
  return x * x_max /
         std::sqrt(std::pow(std::abs(x_max), rho) + std::pow(std::abs(x), rho));
}

/// Asymmetric sigmoid: slope 4 for positive drive, 0.5 otherwise.
inline double sigmoid_stage(double x, double gain = kSigmoidGain) {
  const double z = 1.5 * x - 0.3 * x * x;
  const double nu = z > 0.0 ? 4.0 : 0.5;
  return gain * (1.0 / (1.0 + std::exp(-nu * z)) - 0.5);
}

enum class Variant {
  Identity,
  Saturating,
  Exponential,
  Polynomial,
  HardClipSigmoid,
  SoftClipSigmoid,
};

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Identity: return "identity";
    case Variant::Saturating: return "saturating";
    case Variant::Exponential: return "exponential";
    case Variant::Polynomial: return "polynomial";
    case Variant::HardClipSigmoid: return "hard_clip_sigmoid";
    case Variant::SoftClipSigmoid: return "soft_clip_sigmoid";
  }
  return "identity";
}

inline std::optional<Variant> variant_from_string(std::string_view s) {
  for (Variant v : {Variant::Identity, Variant::Saturating, Variant::Exponential,
                    Variant::Polynomial, Variant::HardClipSigmoid,
                    Variant::SoftClipSigmoid})
    if (to_string(v) == s) return v;
  return std::nullopt;
}

inline bool is_matched(Variant v) {
  return v == Variant::Saturating || v == Variant::Exponential ||
         v == Variant::Polynomial;
}

struct NonlinearityKind {
  Variant variant = Variant::Identity;
  double b = 0.0;  // only meaningful for the matched families
  PolyLog poly_log = PolyLog::Natural;

  static NonlinearityKind identity() { return {}; }
  static NonlinearityKind of(Variant v, double b = 0.0) {
    NonlinearityKind k;
    k.variant = v;
    k.b = b;
    return k;
  }

  void validate() const {
    if (is_matched(variant) && !(b >= 2.0 && b <= 5.0))
      throw Error("NonlinearityKind: b must be in [2, 5]");
  }

  double operator()(double x) const {
    switch (variant) {
      case Variant::Identity: return x;
      case Variant::Saturating: return saturating(x, b);
      case Variant::Exponential: return exponential(x, b);
      case Variant::Polynomial: return polynomial(x, b, poly_log);
      case Variant::HardClipSigmoid: return sigmoid_stage(hard_clip(x));
      case Variant::SoftClipSigmoid: return sigmoid_stage(soft_clip(x));
    }
    return x;
  }

  bool operator==(const NonlinearityKind&) const = default;
};

inline TimeSignal apply_nonlinearity(const TimeSignal& sig,
                                     const NonlinearityKind& kind) {
  kind.validate();
  TimeSignal out = sig;
  if (kind.variant == Variant::Identity) return out;
  for (double& v : out.samples) v = kind(v);
  return out;
}

/// One draw per utterance: matched -> one of the three parametric families
/// with b ~ U[2, 5]; mismatched -> one of the two clip+sigmoid composites.
inline NonlinearityKind sample_kind(Rng& rng, bool matched) {
  if (matched) {
    static constexpr Variant kFamilies[] = {
        Variant::Saturating, Variant::Exponential, Variant::Polynomial};
    const auto idx = uniform_int(rng, 0, 2);
    return NonlinearityKind::of(kFamilies[idx], uniform(rng, 2.0, 5.0));
  }
  return NonlinearityKind::of(uniform_int(rng, 0, 1) == 0
                                  ? Variant::HardClipSigmoid
                                  : Variant::SoftClipSigmoid);
}

}  // namespace aecref::nonlinear
