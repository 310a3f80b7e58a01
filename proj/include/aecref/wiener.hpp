// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Frame-online, per-frequency K-tap echo-path estimation.
//
// For every T-F unit (t, f) the filter h minimizes the weighted squared
// prediction error of Y from the delay stack of X over the frames
// [t - W, t]:
//
//     sum_{t'} w(t') |Y(t', f) - h^H X(t', f)|^2
//
// The weight is w = 1 (STWS) or w = 1 / lambda (WSTWS), where
//
//     lambda(t, f) = eps * max_{t'' in [t - W, t]} |Y(t'', f)|^2 + |Y(t, f)|^2
//
// The normal equations (A + delta * tr(A) / K * I) h = b are solved by a
// Cholesky factorization per unit. Window sums are formed from block prefix
// and suffix sums, so no term is ever subtracted back out of an
// accumulator.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "aecref/signal.hpp"
#include "aecref/stft.hpp"

namespace aecref::wiener {

/// Where the WSTWS weight is evaluated.
enum class WeightPlacement {
  /// w(t') = 1 / lambda(t', f) for each summand.
  PerSummand,
  /// w = 1 / lambda(t, f) for every summand of the frame-t solve.
  Frozen,
};

struct WienerConfig {
  int taps = 20;           // K
  int window = 200;        // W, frames
  double epsilon = 1e-3;   // weighting floor
  double diag_load = 1e-6; // relative diagonal loading
  bool weighted = true;    // WSTWS when true, STWS otherwise
  WeightPlacement placement = WeightPlacement::PerSummand;

  static WienerConfig stws(int taps = 20) {
    WienerConfig c;
    c.taps = taps;
    c.weighted = false;
    return c;
  }

  void validate() const {
    if (taps < 1) throw Error("WienerConfig: taps must be >= 1");
    if (window < 0) throw Error("WienerConfig: window must be >= 0");
    if (!(epsilon > 0.0)) throw Error("WienerConfig: epsilon must be > 0");
    if (!(diag_load >= 0.0)) throw Error("WienerConfig: diag_load must be >= 0");
  }
};

/// Returned in place of lambda when the whole window is silent.
inline constexpr double kLambdaFloor = 1e-12;

inline double lambda_weight(const Spectrogram& Y, Eigen::Index t,
                            Eigen::Index f, int window, double epsilon) {
  double peak = 0.0;
  for (Eigen::Index u = std::max<Eigen::Index>(0, t - window); u <= t; ++u)
    peak = std::max(peak, std::norm(Y(u, f)));
  const double lambda = epsilon * peak + std::norm(Y(t, f));
  return lambda > 0.0 ? lambda : kLambdaFloor;
}

/// lambda(t, f) for every frame of one bin, via a monotone sliding maximum.
inline std::vector<double> lambda_track(const Spectrogram& Y, Eigen::Index f,
                                        int window, double epsilon) {
  const Eigen::Index frames = Y.n_frames();
  std::vector<double> power(static_cast<std::size_t>(frames));
  for (Eigen::Index t = 0; t < frames; ++t) power[t] = std::norm(Y(t, f));
  std::vector<double> out(power.size());
  std::deque<Eigen::Index> maxq;
  for (Eigen::Index t = 0; t < frames; ++t) {
    while (!maxq.empty() && power[maxq.back()] <= power[t]) maxq.pop_back();
    maxq.push_back(t);
    while (maxq.front() < t - window) maxq.pop_front();
    const double lambda = epsilon * power[maxq.front()] + power[t];
    out[t] = lambda > 0.0 ? lambda : kLambdaFloor;
  }
  return out;
}

/// Per-summand weights w(t') for one bin under `cfg`. For the frozen
/// placement the solve-time scale is applied separately.
inline std::vector<double> summand_weights(const Spectrogram& Y, Eigen::Index f,
                                           const WienerConfig& cfg) {
  if (cfg.weighted && cfg.placement == WeightPlacement::PerSummand) {
    auto w = lambda_track(Y, f, cfg.window, cfg.epsilon);
    for (double& v : w) v = 1.0 / v;
    return w;
  }
  return std::vector<double>(static_cast<std::size_t>(Y.n_frames()), 1.0);
}

namespace detail {

// The solver kernels are compiled for baseline x86-64 and for AVX2,
// selected at load time. Builds use -ffp-contract=off, so both clones round
// identically.
#if defined(__x86_64__) && defined(__GNUC__) && !defined(__clang__)
#define AECREF_KERNEL_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define AECREF_KERNEL_CLONES
#endif

/// Number of frequency bins solved side by side in wstws_cancel.
inline constexpr int kLanes = 8;

/// L independent Hermitian K x K systems (A, b), one per lane. A is kept in
/// packed row-major lower-triangular form with split real and imaginary
/// planes; entry (i, j), j <= i, of lane l lives at (i (i + 1) / 2 + j) L + l.
template <int L>
struct PackedSystem {
  int n = 0;
  std::vector<double> a_re, a_im, b_re, b_im;

  PackedSystem() = default;
  explicit PackedSystem(int size)
      : n(size),
        a_re(packed_size(size) * L, 0.0), a_im(packed_size(size) * L, 0.0),
        b_re(static_cast<std::size_t>(size) * L, 0.0),
        b_im(static_cast<std::size_t>(size) * L, 0.0) {}

  static std::size_t packed_size(int size) {
    return static_cast<std::size_t>(size) * (size + 1) / 2;
  }

  void set_zero() {
    for (auto* v : {&a_re, &a_im, &b_re, &b_im}) std::fill(v->begin(), v->end(), 0.0);
  }

  /// A += w x x^H, b += w x y^* in every lane. `x_*` are [n][L], the rest [L].
  AECREF_KERNEL_CLONES void accumulate(const double* __restrict x_re, const double* __restrict x_im,
                  const double* __restrict w, const double* __restrict y_re,
                  const double* __restrict y_im) {
    double* __restrict re = a_re.data();
    double* __restrict im = a_im.data();
    for (int i = 0; i < n; ++i) {
      double xr[L], xi[L];
      for (int l = 0; l < L; ++l) {
        xr[l] = w[l] * x_re[i * L + l];
        xi[l] = w[l] * x_im[i * L + l];
      }
      for (int j = 0; j <= i; ++j, re += L, im += L)
        for (int l = 0; l < L; ++l) {
          re[l] += xr[l] * x_re[j * L + l] + xi[l] * x_im[j * L + l];
          im[l] += xi[l] * x_re[j * L + l] - xr[l] * x_im[j * L + l];
        }
      for (int l = 0; l < L; ++l) {
        b_re[i * L + l] += xr[l] * y_re[l] + xi[l] * y_im[l];
        b_im[i * L + l] += xi[l] * y_re[l] - xr[l] * y_im[l];
      }
    }
  }

  /// *this = p + q.
  void assign_sum(const PackedSystem& p, const PackedSystem& q) {
    for (std::size_t i = 0; i < a_re.size(); ++i) {
      a_re[i] = p.a_re[i] + q.a_re[i];
      a_im[i] = p.a_im[i] + q.a_im[i];
    }
    for (std::size_t i = 0; i < b_re.size(); ++i) {
      b_re[i] = p.b_re[i] + q.b_re[i];
      b_im[i] = p.b_im[i] + q.b_im[i];
    }
  }

  /// Multiplies lane l by s[l].
  void scale(const double* s) {
    for (auto* v : {&a_re, &a_im, &b_re, &b_im})
      for (std::size_t i = 0; i < v->size(); i += L)
        for (int l = 0; l < L; ++l) (*v)[i + l] *= s[l];
  }
};

/// Per-lane Cholesky solve of (A + mu I) h = b, mu = load * tr(A) / n.
/// Lanes that are not numerically positive definite get h = 0 and ok = false;
/// they never influence other lanes.
template <int L>
struct PackedSolver {
  int n = 0;
  std::vector<double> l_re, l_im, col_re, col_im, h_re, h_im;
  bool ok[L];

  explicit PackedSolver(int size)
      : n(size),
        col_re(static_cast<std::size_t>(size) * L, 0.0),
        col_im(static_cast<std::size_t>(size) * L, 0.0),
        h_re(static_cast<std::size_t>(size) * L, 0.0),
        h_im(static_cast<std::size_t>(size) * L, 0.0) {}

  /// row(k) -= a conj(col(k)) lane-wise for k in [0, count).
  AECREF_KERNEL_CLONES static void trailing_update(double* __restrict row_re, double* __restrict row_im,
                              const double* __restrict a_re,
                              const double* __restrict a_im,
                              const double* __restrict c_re,
                              const double* __restrict c_im, int count) {
    for (int k = 0; k < count; ++k)
      for (int l = 0; l < L; ++l) {
        row_re[k * L + l] -= a_re[l] * c_re[k * L + l] + a_im[l] * c_im[k * L + l];
        row_im[k * L + l] -= a_im[l] * c_re[k * L + l] - a_re[l] * c_im[k * L + l];
      }
  }

  AECREF_KERNEL_CLONES void solve(const PackedSystem<L>& sys, double load) {
    double trace[L] = {}, mu[L], tiny[L];
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < L; ++l) trace[l] += sys.a_re[(i * (i + 3) / 2) * L + l];
    for (int l = 0; l < L; ++l) {
      ok[l] = trace[l] > 0.0 && std::isfinite(trace[l]);
      mu[l] = load * trace[l] / n;
      tiny[l] = 1e-13 * trace[l] / n;
    }

    // Right-looking factorization in place. Column j is staged in col_* so
    // the trailing update of each row is a plain lane-wise axpy.
    l_re = sys.a_re;
    l_im = sys.a_im;
    for (int i = 0; i < n; ++i)
      for (int l = 0; l < L; ++l) l_re[(i * (i + 3) / 2) * L + l] += mu[l];
    for (int j = 0; j < n; ++j) {
      double* djr = &l_re[(j * (j + 3) / 2) * L];
      double* dji = &l_im[(j * (j + 3) / 2) * L];
      double inv[L];
      for (int l = 0; l < L; ++l) {
        ok[l] = ok[l] && djr[l] > tiny[l];
        const double ljj = std::sqrt(ok[l] ? djr[l] : 1.0);
        djr[l] = ljj;
        dji[l] = 0.0;
        inv[l] = 1.0 / ljj;
      }
      for (int i = j + 1; i < n; ++i) {
        double* __restrict pr = &l_re[(i * (i + 1) / 2 + j) * L];
        double* __restrict pi = &l_im[(i * (i + 1) / 2 + j) * L];
        for (int l = 0; l < L; ++l) {
          pr[l] *= inv[l];
          pi[l] *= inv[l];
          col_re[i * L + l] = pr[l];
          col_im[i * L + l] = pi[l];
        }
      }
      for (int i = j + 1; i < n; ++i) {
        const double* ar = &col_re[i * L];
        const double* ai = &col_im[i * L];
        double* row_re = &l_re[(i * (i + 1) / 2) * L];
        double* row_im = &l_im[(i * (i + 1) / 2) * L];
        // A(i,k) -= L(i,j) conj(L(k,j)), k in (j, i]
        trailing_update(row_re + (j + 1) * L, row_im + (j + 1) * L, ar, ai,
                        &col_re[(j + 1) * L], &col_im[(j + 1) * L], i - j);
      }
    }

    // L z = b, with z stored in h.
    for (int i = 0; i < n; ++i) {
      const std::size_t ri = static_cast<std::size_t>(i) * (i + 1) / 2;
      double s_re[L], s_im[L];
      for (int l = 0; l < L; ++l) {
        s_re[l] = sys.b_re[i * L + l];
        s_im[l] = sys.b_im[i * L + l];
      }
      for (int k = 0; k < i; ++k)
        for (int l = 0; l < L; ++l) {
          const double lr = l_re[(ri + k) * L + l], li = l_im[(ri + k) * L + l];
          s_re[l] -= lr * h_re[k * L + l] - li * h_im[k * L + l];
          s_im[l] -= lr * h_im[k * L + l] + li * h_re[k * L + l];
        }
      for (int l = 0; l < L; ++l) {
        const double inv = 1.0 / l_re[(ri + i) * L + l];
        h_re[i * L + l] = s_re[l] * inv;
        h_im[i * L + l] = s_im[l] * inv;
      }
    }
    // L^H h = z, sweeping rows of L from the bottom.
    for (int i = n - 1; i >= 0; --i) {
      const std::size_t ri = static_cast<std::size_t>(i) * (i + 1) / 2;
      double hr[L], hi[L];
      for (int l = 0; l < L; ++l) {
        const double inv = 1.0 / l_re[(ri + i) * L + l];
        hr[l] = h_re[i * L + l] *= inv;
        hi[l] = h_im[i * L + l] *= inv;
      }
      for (int k = 0; k < i; ++k)
        for (int l = 0; l < L; ++l) {
          const double lr = l_re[(ri + k) * L + l], li = l_im[(ri + k) * L + l];
          // z_k -= conj(L(i,k)) h_i
          h_re[k * L + l] -= lr * hr[l] + li * hi[l];
          h_im[k * L + l] -= lr * hi[l] - li * hr[l];
        }
    }

    for (int l = 0; l < L; ++l) {
      for (int k = 0; k < n && ok[l]; ++k)
        ok[l] = std::isfinite(h_re[k * L + l]) && std::isfinite(h_im[k * L + l]);
      if (!ok[l])
        for (int k = 0; k < n; ++k) h_re[k * L + l] = h_im[k * L + l] = 0.0;
    }
  }

  cplx tap(int k, int l) const { return {h_re[k * L + l], h_im[k * L + l]}; }

  /// h^H x in lane l, for a [n][L] stack.
  cplx prediction(const double* x_re, const double* x_im, int l) const {
    double re = 0.0, im = 0.0;
    for (int k = 0; k < n; ++k) {
      const double hr = h_re[k * L + l], hi = h_im[k * L + l];
      re += hr * x_re[k * L + l] + hi * x_im[k * L + l];
      im += hr * x_im[k * L + l] - hi * x_re[k * L + l];
    }
    return {re, im};
  }
};

/// Loads the delay stacks X(u - k, f0 + l) into [taps][L] planes; lanes past
/// the last bin and frames before the first read zero.
template <int L>
void load_stacks(const Spectrogram& X, Eigen::Index u, Eigen::Index f0, int taps,
                 double* x_re, double* x_im) {
  for (int k = 0; k < taps; ++k)
    for (int l = 0; l < L; ++l) {
      const Eigen::Index f = f0 + l;
      const cplx v = (u - k >= 0 && f < X.n_bins()) ? X(u - k, f) : cplx{};
      x_re[k * L + l] = v.real();
      x_im[k * L + l] = v.imag();
    }
}

}  // namespace detail

struct FrameSolution {
  Eigen::VectorXcd taps;
  bool degenerate = false;
};

/// Direct solve of the windowed weighted least-squares problem at (t, f).
inline FrameSolution solve_frame(const Spectrogram& Y, const Spectrogram& X,
                                 Eigen::Index t, Eigen::Index f,
                                 const WienerConfig& cfg) {
  cfg.validate();
  require_same_shape(Y, X, "solve_frame");
  const int K = cfg.taps;
  detail::PackedSystem<1> sys(K);
  std::vector<double> x_re(K), x_im(K);
  for (Eigen::Index u = std::max<Eigen::Index>(0, t - cfg.window); u <= t; ++u) {
    double w = 1.0;
    if (cfg.weighted)
      w = 1.0 / lambda_weight(
                    Y, cfg.placement == WeightPlacement::PerSummand ? u : t, f,
                    cfg.window, cfg.epsilon);
    detail::load_stacks<1>(X, u, f, K, x_re.data(), x_im.data());
    const double y_re = Y(u, f).real(), y_im = Y(u, f).imag();
    sys.accumulate(x_re.data(), x_im.data(), &w, &y_re, &y_im);
  }
  detail::PackedSolver<1> solver(K);
  solver.solve(sys, cfg.diag_load);
  FrameSolution out;
  out.degenerate = !solver.ok[0];
  out.taps.resize(K);
  for (int k = 0; k < K; ++k) out.taps[k] = solver.tap(k, 0);
  return out;
}

/// Filter estimates for every unit, [frames x bins x taps].
class FilterBank {
 public:
  FilterBank() = default;
  FilterBank(Eigen::Index frames, Eigen::Index bins, int taps)
      : frames_(frames), bins_(bins), taps_(taps),
        data_(static_cast<std::size_t>(frames * bins * taps), cplx{}) {}

  Eigen::Index n_frames() const { return frames_; }
  Eigen::Index n_bins() const { return bins_; }
  int taps() const { return taps_; }
  bool empty() const { return data_.empty(); }

  Eigen::Map<Eigen::VectorXcd> at(Eigen::Index t, Eigen::Index f) {
    return Eigen::Map<Eigen::VectorXcd>(data_.data() + offset(t, f), taps_);
  }
  Eigen::Map<const Eigen::VectorXcd> at(Eigen::Index t, Eigen::Index f) const {
    return Eigen::Map<const Eigen::VectorXcd>(data_.data() + offset(t, f),
                                              taps_);
  }

 private:
  std::size_t offset(Eigen::Index t, Eigen::Index f) const {
    return static_cast<std::size_t>((t * bins_ + f) * taps_);
  }

  Eigen::Index frames_ = 0, bins_ = 0;
  int taps_ = 0;
  std::vector<cplx> data_;
};

/// Units whose loaded system could not be factored; their filter is zero.
struct DegeneracyReport {
  std::size_t count = 0;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> flags;
};

struct CancelResult {
  Spectrogram residual;
  FilterBank filters;  // empty when not requested
  DegeneracyReport report;
};

/// residual(t, f) = Y(t, f) - h(t, f)^H X(t, f), frame-online.
inline CancelResult wstws_cancel(const Spectrogram& Y, const Spectrogram& X,
                                 const WienerConfig& cfg,
                                 bool keep_filters = true) {
  cfg.validate();
  require_same_shape(Y, X, "wstws_cancel");
  const Eigen::Index frames = Y.n_frames();
  const Eigen::Index bins = Y.n_bins();
  const int K = cfg.taps;
  const Eigen::Index block = cfg.window + 1;

  CancelResult out;
  out.residual = Y;
  if (keep_filters) out.filters = FilterBank(frames, bins, K);
  out.report.flags.setConstant(frames, bins, false);

  constexpr int L = detail::kLanes;
  // suffix[j] holds the sum of the previous block's terms j..block-1;
  // suffix[block] is the empty sum.
  std::vector<detail::PackedSystem<L>> suffix(static_cast<std::size_t>(block + 1),
                                              detail::PackedSystem<L>(K));
  detail::PackedSystem<L> prefix(K), window_sum(K);
  detail::PackedSolver<L> solver(K);
  std::vector<double> x_re(static_cast<std::size_t>(K) * L), x_im(x_re.size());
  // Per-frame lane data: weights, frozen scales, and Y.
  const std::size_t lane_len = static_cast<std::size_t>(frames) * L;
  std::vector<double> w(lane_len), scale(lane_len), y_re(lane_len), y_im(lane_len);
  const bool frozen = cfg.weighted && cfg.placement == WeightPlacement::Frozen;

  for (Eigen::Index f0 = 0; f0 < bins; f0 += L) {
    const int lanes = static_cast<int>(std::min<Eigen::Index>(L, bins - f0));
    std::fill(w.begin(), w.end(), 1.0);
    std::fill(scale.begin(), scale.end(), 1.0);
    std::fill(y_re.begin(), y_re.end(), 0.0);
    std::fill(y_im.begin(), y_im.end(), 0.0);
    for (int l = 0; l < lanes; ++l) {
      const Eigen::Index f = f0 + l;
      const auto weights = summand_weights(Y, f, cfg);
      std::vector<double> lambda;
      if (frozen) lambda = lambda_track(Y, f, cfg.window, cfg.epsilon);
      for (Eigen::Index t = 0; t < frames; ++t) {
        w[t * L + l] = weights[t];
        if (frozen) scale[t * L + l] = 1.0 / lambda[t];
        y_re[t * L + l] = Y(t, f).real();
        y_im[t * L + l] = Y(t, f).imag();
      }
    }

    for (Eigen::Index t = 0; t < frames; ++t) {
      const Eigen::Index j = t % block;
      const Eigen::Index blk = t / block;
      if (j == 0) {
        if (blk > 0) {
          suffix[block].set_zero();
          const Eigen::Index base = (blk - 1) * block;
          for (Eigen::Index jj = block - 1; jj >= 0; --jj) {
            const Eigen::Index u = base + jj;
            suffix[jj] = suffix[jj + 1];
            detail::load_stacks<L>(X, u, f0, K, x_re.data(), x_im.data());
            suffix[jj].accumulate(x_re.data(), x_im.data(), &w[u * L], &y_re[u * L],
                                  &y_im[u * L]);
          }
        }
        prefix.set_zero();
      }
      detail::load_stacks<L>(X, t, f0, K, x_re.data(), x_im.data());
      prefix.accumulate(x_re.data(), x_im.data(), &w[t * L], &y_re[t * L], &y_im[t * L]);

      const detail::PackedSystem<L>* sys = &prefix;
      if (blk > 0) {
        window_sum.assign_sum(prefix, suffix[j + 1]);
        sys = &window_sum;
      }
      if (frozen) {
        if (sys != &window_sum) window_sum = prefix;
        window_sum.scale(&scale[t * L]);
        sys = &window_sum;
      }
      solver.solve(*sys, cfg.diag_load);
      for (int l = 0; l < lanes; ++l) {
        const Eigen::Index f = f0 + l;
        if (!solver.ok[l]) {
          ++out.report.count;
          out.report.flags(t, f) = true;
        }
        if (keep_filters)
          for (int k = 0; k < K; ++k) out.filters.at(t, f)[k] = solver.tap(k, l);
        out.residual(t, f) = Y(t, f) - solver.prediction(x_re.data(), x_im.data(), l);
      }
    }
  }
  return out;
}

}  // namespace aecref::wiener
