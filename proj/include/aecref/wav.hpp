// Copyright 2026 The aecref Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Minimal RIFF/WAVE reader and writer. Writes mono IEEE float32; reads
// 16-bit PCM or 32-bit float, keeping the first channel.

#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "aecref/signal.hpp"

namespace aecref::wav {

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint32_t float_bits(float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, sizeof u);
  return u;
}

inline float bits_float(std::uint32_t u) {
  float f;
  std::memcpy(&f, &u, sizeof f);
  return f;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const TimeSignal& sig) {
  const auto n = static_cast<std::uint32_t>(sig.size());
  const auto fs = static_cast<std::uint32_t>(sig.sample_rate);
  std::vector<std::uint8_t> out;
  out.reserve(44 + 4 * static_cast<std::size_t>(n));
  auto tag = [&out](const char* t) { out.insert(out.end(), t, t + 4); };
  tag("RIFF");
  detail::put_u32(out, 36 + 4 * n);
  tag("WAVE");
  tag("fmt ");
  detail::put_u32(out, 16);
  detail::put_u16(out, 3);  // IEEE float
  detail::put_u16(out, 1);
  detail::put_u32(out, fs);
  detail::put_u32(out, fs * 4);
  detail::put_u16(out, 4);
  detail::put_u16(out, 32);
  tag("data");
  detail::put_u32(out, 4 * n);
  for (double v : sig.samples)
    detail::put_u32(out, detail::float_bits(static_cast<float>(v)));
  return out;
}

inline TimeSignal decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw FormatError("wav: not a RIFF/WAVE file");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::get_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) throw FormatError("wav: truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw FormatError("wav: short fmt chunk");
      format = detail::get_u16(bytes.data() + body);
      channels = detail::get_u16(bytes.data() + body + 2);
      rate = detail::get_u32(bytes.data() + body + 4);
      bits = detail::get_u16(bytes.data() + body + 14);
      if (format == 0xfffe && size >= 26)  // WAVE_FORMAT_EXTENSIBLE
        format = detail::get_u16(bytes.data() + body + 24);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt || channels == 0) throw FormatError("wav: data before fmt");
      const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
      if (frame_bytes == 0) throw FormatError("wav: zero frame size");
      const std::size_t frames = size / frame_bytes;
      TimeSignal sig;
      sig.sample_rate = rate;
      sig.samples.resize(frames);
      const std::uint8_t* p = bytes.data() + body;
      for (std::size_t i = 0; i < frames; ++i, p += frame_bytes) {
        if (format == 3 && bits == 32)
          sig.samples[i] = detail::bits_float(detail::get_u32(p));
        else if (format == 1 && bits == 16)
          sig.samples[i] = static_cast<std::int16_t>(detail::get_u16(p)) / 32768.0;
        else
          throw FormatError("wav: only 16-bit PCM and 32-bit float are supported");
      }
      return sig;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("wav: no data chunk");
}

inline void write(const std::filesystem::path& path, const TimeSignal& sig) {
  const auto bytes = encode(sig);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("wav: cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("wav: write failed for " + path.string());
}

inline TimeSignal read(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("wav: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                                  std::istreambuf_iterator<char>());
  return decode(bytes);
}

}  // namespace aecref::wav
