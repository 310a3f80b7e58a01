// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Feature file ("ECF1"), little-endian:
//
//   offset  size  field
//   0       4     magic "ECF1"
//   4       4     version (u32) = 1
//   8       4     n_frames (u32)
//   12      4     n_bins (u32)
//   16      4     n_signals (u32) = 7
//   20      4     window_len (u32)
//   24      4     hop (u32)
//   28      ...   n_signals blocks, each frame-major, each unit (re f32, im f32)

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aecref/stft.hpp"

namespace aecref::features {

inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::uint32_t kSignals = 7;
inline constexpr std::size_t kHeaderBytes = 28;

struct Header {
  std::uint32_t version = kVersion;
  std::uint32_t n_frames = 0;
  std::uint32_t n_bins = 0;
  std::uint32_t n_signals = kSignals;
  std::uint32_t window_len = 0;
  std::uint32_t hop = 0;

  bool operator==(const Header&) const = default;
};

inline std::size_t file_size(const Header& h) {
  return kHeaderBytes + static_cast<std::size_t>(h.n_signals) * h.n_frames *
                            h.n_bins * 8;
}

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::vector<std::uint8_t>& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  put_u32(out, u);
}

inline float get_f32(const std::uint8_t* p) {
  const std::uint32_t u = get_u32(p);
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

}  // namespace detail

/// Serializes signals in the given order; all must share one shape.
inline std::vector<std::uint8_t> encode(std::span<const Spectrogram* const> signals) {
  if (signals.empty()) throw ShapeError("features: no signals");
  const Spectrogram& first = *signals.front();
  for (const Spectrogram* s : signals) require_same_shape(first, *s, "features");
  Header h;
  h.n_frames = static_cast<std::uint32_t>(first.n_frames());
  h.n_bins = static_cast<std::uint32_t>(first.n_bins());
  h.n_signals = static_cast<std::uint32_t>(signals.size());
  h.window_len = static_cast<std::uint32_t>(first.config.window_len);
  h.hop = static_cast<std::uint32_t>(first.config.hop);

  std::vector<std::uint8_t> out;
  out.reserve(file_size(h));
  for (char c : {'E', 'C', 'F', '1'}) out.push_back(static_cast<std::uint8_t>(c));
  for (std::uint32_t v : {h.version, h.n_frames, h.n_bins, h.n_signals,
                          h.window_len, h.hop})
    detail::put_u32(out, v);
  for (const Spectrogram* s : signals)
    for (Eigen::Index t = 0; t < s->n_frames(); ++t)
      for (Eigen::Index f = 0; f < s->n_bins(); ++f) {
        detail::put_f32(out, (*s)(t, f).real());
        detail::put_f32(out, (*s)(t, f).imag());
      }
  return out;
}

inline Header decode_header(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kHeaderBytes) throw FormatError("features: truncated header");
  if (std::memcmp(bytes.data(), "ECF1", 4) != 0)
    throw FormatError("features: bad magic");
  Header h;
  h.version = detail::get_u32(bytes.data() + 4);
  h.n_frames = detail::get_u32(bytes.data() + 8);
  h.n_bins = detail::get_u32(bytes.data() + 12);
  h.n_signals = detail::get_u32(bytes.data() + 16);
  h.window_len = detail::get_u32(bytes.data() + 20);
  h.hop = detail::get_u32(bytes.data() + 24);
  if (h.version != kVersion) throw FormatError("features: unsupported version");
  return h;
}

struct FeatureFile {
  Header header;
  std::vector<Spectrogram> signals;
};

inline FeatureFile decode(const std::vector<std::uint8_t>& bytes) {
  FeatureFile ff;
  ff.header = decode_header(bytes);
  const Header& h = ff.header;
  if (bytes.size() != file_size(h)) throw FormatError("features: size mismatch");
  StftConfig cfg;
  cfg.window_len = static_cast<int>(h.window_len);
  cfg.hop = static_cast<int>(h.hop);
  if (cfg.n_bins() != static_cast<int>(h.n_bins))
    throw FormatError("features: n_bins inconsistent with window_len");
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  for (std::uint32_t s = 0; s < h.n_signals; ++s) {
    Spectrogram spec(h.n_frames, cfg);
    for (std::uint32_t t = 0; t < h.n_frames; ++t)
      for (std::uint32_t f = 0; f < h.n_bins; ++f, p += 8)
        spec(t, f) = cplx(detail::get_f32(p), detail::get_f32(p + 4));
    ff.signals.push_back(std::move(spec));
  }
  return ff;
}

inline void write_file(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("write failed for " + path.string());
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

}  // namespace aecref::features
