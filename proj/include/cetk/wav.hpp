// wav.hpp
// Minimal RIFF/WAVE reader and writer. Accepts 16-bit PCM and 32-bit float
// input; always writes 32-bit float. Samples are stored planar, one vector
// per channel, scaled to [-1, 1] for PCM input.

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cetk {

struct WavData {
  double sample_rate = 16000.0;
  std::vector<std::vector<double>> channels;

  int num_channels() const { return static_cast<int>(channels.size()); }
  size_t num_samples() const { return channels.empty() ? 0 : channels[0].size(); }
};

namespace detail {

inline uint32_t read_u32(std::istream& s) {
  unsigned char b[4];
  s.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

inline uint16_t read_u16(std::istream& s) {
  unsigned char b[2];
  s.read(reinterpret_cast<char*>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

inline void write_u32(std::ostream& s, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  s.write(b, 4);
}

inline void write_u16(std::ostream& s, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  s.write(b, 2);
}

}  // namespace detail

inline WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open WAV file: " + path);

  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0)
    throw std::runtime_error("not a RIFF file: " + path);
  detail::read_u32(f);  // riff size, unused
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0)
    throw std::runtime_error("not a WAVE file: " + path);

  uint16_t format = 0, num_channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  std::vector<char> data;
  bool have_fmt = false, have_data = false;

  while (f.read(tag, 4)) {
    uint32_t chunk_size = detail::read_u32(f);
    if (!f) break;
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = detail::read_u16(f);
      num_channels = detail::read_u16(f);
      sample_rate = detail::read_u32(f);
      detail::read_u32(f);  // byte rate
      detail::read_u16(f);  // block align
      bits = detail::read_u16(f);
      if (chunk_size > 16) f.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data.resize(chunk_size);
      f.read(data.data(), chunk_size);
      have_data = true;
    } else {
      f.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data)
    throw std::runtime_error("WAV file missing fmt or data chunk: " + path);
  if (num_channels == 0) throw std::runtime_error("WAV file has zero channels: " + path);

  WavData wav;
  wav.sample_rate = sample_rate;
  wav.channels.resize(num_channels);

  if (format == 1 && bits == 16) {
    const size_t frames = data.size() / (2 * num_channels);
    for (auto& ch : wav.channels) ch.resize(frames);
    const char* p = data.data();
    for (size_t i = 0; i < frames; ++i) {
      for (int c = 0; c < num_channels; ++c) {
        int16_t v;
        std::memcpy(&v, p, 2);
        p += 2;
        wav.channels[c][i] = v / 32768.0;
      }
    }
  } else if (format == 3 && bits == 32) {
    const size_t frames = data.size() / (4 * num_channels);
    for (auto& ch : wav.channels) ch.resize(frames);
    const char* p = data.data();
    for (size_t i = 0; i < frames; ++i) {
      for (int c = 0; c < num_channels; ++c) {
        float v;
        std::memcpy(&v, p, 4);
        p += 4;
        wav.channels[c][i] = v;
      }
    }
  } else {
    throw std::runtime_error("unsupported WAV format (want PCM16 or float32): " + path);
  }
  return wav;
}

inline void write_wav(const std::string& path, const WavData& wav) {
  if (wav.channels.empty()) throw std::invalid_argument("write_wav: no channels");
  const size_t frames = wav.num_samples();
  for (const auto& ch : wav.channels)
    if (ch.size() != frames) throw std::invalid_argument("write_wav: channel length mismatch");

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot create WAV file: " + path);

  const uint16_t nch = static_cast<uint16_t>(wav.channels.size());
  const uint32_t data_bytes = static_cast<uint32_t>(frames * nch * 4);

  f.write("RIFF", 4);
  detail::write_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  detail::write_u32(f, 16);
  detail::write_u16(f, 3);  // IEEE float
  detail::write_u16(f, nch);
  detail::write_u32(f, static_cast<uint32_t>(wav.sample_rate));
  detail::write_u32(f, static_cast<uint32_t>(wav.sample_rate) * nch * 4);
  detail::write_u16(f, static_cast<uint16_t>(nch * 4));
  detail::write_u16(f, 32);
  f.write("data", 4);
  detail::write_u32(f, data_bytes);

  for (size_t i = 0; i < frames; ++i) {
    for (int c = 0; c < nch; ++c) {
      float v = static_cast<float>(wav.channels[c][i]);
      f.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  if (!f) throw std::runtime_error("failed writing WAV file: " + path);
}

}  // namespace cetk
