// Copyright 2026 The FPETS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "fpets/audiofeat/audio.h"
#include "fpets/numcore/errors.h"

namespace fpets::audio {

namespace {

std::atomic<std::size_t> g_clipped{0};

std::uint32_t u32(const std::string& b, std::size_t pos) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + 3])) << 24;
}

std::uint16_t u16(const std::string& b, std::size_t pos) {
  return static_cast<std::uint16_t>(
      static_cast<unsigned char>(b[pos]) |
      static_cast<unsigned char>(b[pos + 1]) << 8);
}

void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioClip load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  const std::string b((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  if (b.size() < 12 || b.compare(0, 4, "RIFF") != 0 || b.compare(8, 4, "WAVE") != 0) {
    throw FormatError(path + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  int rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const std::string id = b.substr(pos, 4);
    const std::size_t size = u32(b, pos + 4);
    const std::size_t body = pos + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > b.size()) {
        throw FormatError(path + ": truncated fmt chunk");
      }
      const std::uint16_t format = u16(b, body);
      const std::uint16_t channels = u16(b, body + 2);
      rate = static_cast<int>(u32(b, body + 4));
      const std::uint16_t bits = u16(b, body + 14);
      if (format != 1 || bits != 16) {
        throw FormatError(path + ": unsupported encoding (format " +
                          std::to_string(format) + ", " + std::to_string(bits) +
                          " bits); only 16-bit PCM is read");
      }
      if (channels != 1) {
        throw FormatError(path + ": unsupported encoding (" +
                          std::to_string(channels) +
                          " channels); only mono is read");
      }
      if (rate <= 0) throw FormatError(path + ": sample rate must be positive");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError(path + ": data chunk before fmt chunk");
      if (body + size > b.size()) throw FormatError(path + ": truncated data chunk");
      AudioClip clip;
      clip.sample_rate = rate;
      clip.samples.resize(size / 2);
      for (std::size_t i = 0; i < clip.samples.size(); ++i) {
        const auto s = static_cast<std::int16_t>(u16(b, body + 2 * i));
        clip.samples[i] = static_cast<double>(s) / 32768.0;
      }
      return clip;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError(path + ": no data chunk");
}

std::size_t save_wav(const AudioClip& clip, const std::string& path) {
  if (clip.sample_rate <= 0) throw DomainError("sample rate must be positive");
  std::size_t clipped = 0;
  std::string data;
  data.reserve(clip.samples.size() * 2);
  for (double x : clip.samples) {
    if (!std::isfinite(x)) throw DomainError("non-finite sample in " + path);
    if (x > 1.0 || x < -1.0) ++clipped;
    const double v = std::round(std::clamp(x, -1.0, 1.0) * 32768.0);
    const auto s = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
    put16(data, static_cast<std::uint16_t>(s));
  }
  std::string out = "RIFF";
  put32(out, static_cast<std::uint32_t>(36 + data.size()));
  out += "WAVEfmt ";
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate * 2));
  put16(out, 2);
  put16(out, 16);
  out += "data";
  put32(out, static_cast<std::uint32_t>(data.size()));
  out += data;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path);
  g_clipped += clipped;
  return clipped;
}

std::size_t clipped_sample_count() { return g_clipped.load(); }

}  // namespace fpets::audio
