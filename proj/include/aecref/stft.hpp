// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "aecref/signal.hpp"

namespace aecref {

enum class WindowKind { Hamming, Hann, Rectangular };

struct StftConfig {
  int window_len = 320;  // 20 ms at 16 kHz
  int hop = 160;         // 10 ms
  WindowKind window = WindowKind::Hamming;

  int n_bins() const { return window_len / 2 + 1; }

  void validate() const {
    if (window_len <= 0 || window_len % 2 != 0)
      throw Error("StftConfig: window_len must be positive and even");
    if (hop <= 0 || hop > window_len)
      throw Error("StftConfig: hop must be in [1, window_len]");
  }

  bool operator==(const StftConfig&) const = default;
};

/// Periodic analysis window of length n.
inline std::vector<double> make_window(WindowKind kind, int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  const double step = 2.0 * std::numbers::pi / n;
  for (int i = 0; i < n; ++i) {
    switch (kind) {
      case WindowKind::Hamming:
        w[i] = 0.54 - 0.46 * std::cos(step * i);
        break;
      case WindowKind::Hann:
        w[i] = 0.5 - 0.5 * std::cos(step * i);
        break;
      case WindowKind::Rectangular:
        w[i] = 1.0;
        break;
    }
  }
  return w;
}

using ComplexMatrix =
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;

/// Complex T-F matrix, rows are frames and columns one-sided frequency bins.
struct Spectrogram {
  ComplexMatrix data;
  StftConfig config;

  Spectrogram() = default;
  Spectrogram(Eigen::Index frames, const StftConfig& cfg)
      : data(ComplexMatrix::Zero(frames, cfg.n_bins())), config(cfg) {}

  Eigen::Index n_frames() const { return data.rows(); }
  Eigen::Index n_bins() const { return data.cols(); }

  cplx operator()(Eigen::Index t, Eigen::Index f) const { return data(t, f); }
  cplx& operator()(Eigen::Index t, Eigen::Index f) { return data(t, f); }

  bool same_shape(const Spectrogram& o) const {
    return n_frames() == o.n_frames() && n_bins() == o.n_bins();
  }

  double energy() const { return data.squaredNorm(); }

  void validate() const {
    config.validate();
    if (n_bins() != config.n_bins())
      throw ShapeError("Spectrogram: bin count does not match config");
    if (!data.allFinite()) throw Error("Spectrogram: non-finite entry");
  }
};

inline void require_same_shape(const Spectrogram& a, const Spectrogram& b,
                               const char* what) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(what) + ": spectrogram shapes differ");
}

/// Number of full frames that fit in n samples; no implicit padding.
inline Eigen::Index frame_count(std::size_t n, const StftConfig& cfg) {
  if (n < static_cast<std::size_t>(cfg.window_len)) return 0;
  return 1 + static_cast<Eigen::Index>((n - cfg.window_len) / cfg.hop);
}

inline Spectrogram stft_forward(const TimeSignal& sig,
                                const StftConfig& cfg = {}) {
  cfg.validate();
  if (sig.size() < static_cast<std::size_t>(cfg.window_len))
    throw LengthError("stft_forward: signal shorter than one window (" +
                      std::to_string(sig.size()) + " < " +
                      std::to_string(cfg.window_len) + ")");
  const Eigen::Index frames = frame_count(sig.size(), cfg);
  const auto win = make_window(cfg.window, cfg.window_len);
  Spectrogram spec(frames, cfg);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> frame(static_cast<std::size_t>(cfg.window_len));
  std::vector<cplx> bins;
  for (Eigen::Index t = 0; t < frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n)
      frame[n] = win[n] * sig.samples[start + n];
    fft.fwd(bins, frame);
    for (Eigen::Index f = 0; f < spec.n_bins(); ++f) spec(t, f) = bins[f];
  }
  return spec;
}

/// Least-squares overlap-add synthesis. Each output sample is normalized by
/// the summed squared analysis window of the frames covering it, so any
/// sample covered by at least one frame is reconstructed exactly.
inline TimeSignal stft_inverse(const Spectrogram& spec,
                               double sample_rate = 16000.0) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.n_bins() != cfg.n_bins())
    throw ShapeError("stft_inverse: bin count does not match config");
  const Eigen::Index frames = spec.n_frames();
  if (frames == 0) return TimeSignal({}, sample_rate);

  const auto win = make_window(cfg.window, cfg.window_len);
  const std::size_t out_len =
      static_cast<std::size_t>(frames - 1) * cfg.hop + cfg.window_len;
  std::vector<double> acc(out_len, 0.0), norm(out_len, 0.0);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<cplx> bins(static_cast<std::size_t>(spec.n_bins()));
  std::vector<double> frame;
  for (Eigen::Index t = 0; t < frames; ++t) {
    for (Eigen::Index f = 0; f < spec.n_bins(); ++f) bins[f] = spec(t, f);
    fft.inv(frame, bins, cfg.window_len);
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop;
    for (int n = 0; n < cfg.window_len; ++n) {
      acc[start + n] += win[n] * frame[n];
      norm[start + n] += win[n] * win[n];
    }
  }
  for (std::size_t i = 0; i < out_len; ++i)
    acc[i] = norm[i] > 0.0 ? acc[i] / norm[i] : 0.0;
  return TimeSignal(std::move(acc), sample_rate);
}

/// [X(t,f), X(t-1,f), ..., X(t-K+1,f)]; frames before 0 read as zero.
inline Eigen::VectorXcd delay_stack(const Spectrogram& spec, Eigen::Index t,
                                    Eigen::Index f, int taps) {
  if (taps < 1) throw Error("delay_stack: tap count must be >= 1");
  Eigen::VectorXcd v = Eigen::VectorXcd::Zero(taps);
  for (int k = 0; k < taps && t - k >= 0; ++k)
    if (t - k < spec.n_frames()) v[k] = spec(t - k, f);
  return v;
}

}  // namespace aecref
