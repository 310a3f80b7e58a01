// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "aecref/stft.hpp"
#include "aecref/wiener.hpp"

namespace aecref::purifier {

struct MaskConfig {
  double m = 1.0 / 6.0;  // compression exponent
  int ref_taps = 1;      // taps for the reference-vs-far-end solve

  void validate() const {
    if (!(m >= 0.0 && m <= 1.0)) throw Error("MaskConfig: m must be in [0, 1]");
    if (ref_taps < 1) throw Error("MaskConfig: ref_taps must be >= 1");
  }
};

/// Real T-F gain, every entry in [0, 1].
struct RatioMask {
  Eigen::ArrayXXd values;  // [frames x bins]
};

/// Mask from the far-end estimate E = R - F and the near-end estimate F,
/// where F is the cancellation residual of R against X.
inline RatioMask mask_from_residual(const Spectrogram& R,
                                    const Spectrogram& F) {
  require_same_shape(R, F, "mask_from_residual");
  RatioMask mask;
  mask.values.resize(R.n_frames(), R.n_bins());
  for (Eigen::Index f = 0; f < R.n_bins(); ++f) {
    for (Eigen::Index t = 0; t < R.n_frames(); ++t) {
      const double far = std::abs(R(t, f) - F(t, f));
      const double near = std::abs(F(t, f));
      const double den = far + near;
      mask.values(t, f) = den > 0.0 ? far / den : 0.0;
    }
  }
  return mask;
}

inline RatioMask compute_mask(const Spectrogram& R, const Spectrogram& X,
                              const MaskConfig& cfg,
                              wiener::WienerConfig wiener_cfg = {}) {
  cfg.validate();
  require_same_shape(R, X, "compute_mask");
  wiener_cfg.taps = cfg.ref_taps;
  const auto near_est = wiener::wstws_cancel(R, X, wiener_cfg, false);
  return mask_from_residual(R, near_est.residual);
}

/// R_m = mask^m * R, with 0^0 = 1.
inline Spectrogram apply_mask(const Spectrogram& R, const RatioMask& mask,
                              double m) {
  if (!(m >= 0.0 && m <= 1.0)) throw Error("apply_mask: m must be in [0, 1]");
  if (mask.values.rows() != R.n_frames() || mask.values.cols() != R.n_bins())
    throw ShapeError("apply_mask: mask shape differs from spectrogram");
  Spectrogram out = R;
  if (m == 0.0) return out;
  for (Eigen::Index f = 0; f < R.n_bins(); ++f)
    for (Eigen::Index t = 0; t < R.n_frames(); ++t)
      out(t, f) *= std::pow(mask.values(t, f), m);
  return out;
}

inline Spectrogram purify_reference(const Spectrogram& R, const Spectrogram& X,
                                    const MaskConfig& cfg,
                                    const wiener::WienerConfig& wiener_cfg = {}) {
  return apply_mask(R, compute_mask(R, X, cfg, wiener_cfg), cfg.m);
}

}  // namespace aecref::purifier
