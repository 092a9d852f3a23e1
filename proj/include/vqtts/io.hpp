// include/vqtts/io.hpp

// Copyright 2026  vqtts authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vqtts/common.hpp"

namespace vqtts {

using Mat = Eigen::MatrixXd;

// ---------------------------------------------------------------- raw bytes

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("unexpected end of stream");
  return v;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is) {
  const auto n = get<std::uint32_t>(is);
  std::string s(n, '\0');
  is.read(s.data(), n);
  if (!is) throw IoError("unexpected end of stream");
  return s;
}

}  // namespace detail

// ------------------------------------------------------------- WAV (mono)

struct WavData {
  std::vector<double> samples;  // [-1, 1]
  int sample_rate = 0;
};

// Mono RIFF/WAVE, PCM 16-bit or IEEE float32.
inline WavData read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open wav file: " + path);

  char tag[4];
  auto read_tag = [&](const char* want) {
    f.read(tag, 4);
    if (!f || std::memcmp(tag, want, 4) != 0)
      throw IoError("bad wav header in " + path);
  };
  read_tag("RIFF");
  detail::get<std::uint32_t>(f);
  read_tag("WAVE");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  WavData out;

  while (f.read(tag, 4)) {
    const auto size = detail::get<std::uint32_t>(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = detail::get<std::uint16_t>(f);
      channels = detail::get<std::uint16_t>(f);
      rate = detail::get<std::uint32_t>(f);
      detail::get<std::uint32_t>(f);  // byte rate
      detail::get<std::uint16_t>(f);  // block align
      bits = detail::get<std::uint16_t>(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError("wav data chunk before fmt in " + path);
      if (channels != 1) throw InvalidInput("only mono wav supported: " + path);
      if (format == 1 && bits == 16) {
        const std::size_t n = size / 2;
        std::vector<std::int16_t> raw(n);
        f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
        if (!f) throw IoError("truncated wav data in " + path);
        out.samples.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.samples[i] = raw[i] / 32767.0;
      } else if (format == 3 && bits == 32) {
        const std::size_t n = size / 4;
        std::vector<float> raw(n);
        f.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(size));
        if (!f) throw IoError("truncated wav data in " + path);
        out.samples.assign(raw.begin(), raw.end());
      } else {
        throw InvalidInput("unsupported wav encoding (need PCM16 or float32): " + path);
      }
      out.sample_rate = static_cast<int>(rate);
      return out;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw IoError("wav file has no data chunk: " + path);
}

// Header-only probe: sample count / rate without decoding the payload.
inline double wav_duration_seconds(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open wav file: " + path);
  char tag[4];
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "RIFF", 4) != 0) throw IoError("bad wav header in " + path);
  detail::get<std::uint32_t>(f);
  f.read(tag, 4);
  if (!f || std::memcmp(tag, "WAVE", 4) != 0) throw IoError("bad wav header in " + path);

  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  while (f.read(tag, 4)) {
    const auto size = detail::get<std::uint32_t>(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      detail::get<std::uint16_t>(f);
      channels = detail::get<std::uint16_t>(f);
      rate = detail::get<std::uint32_t>(f);
      detail::get<std::uint32_t>(f);
      detail::get<std::uint16_t>(f);
      bits = detail::get<std::uint16_t>(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (rate == 0 || bits == 0 || channels == 0)
        throw IoError("wav data chunk before fmt in " + path);
      const double frames = static_cast<double>(size) / (channels * bits / 8);
      return frames / rate;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  throw IoError("wav file has no data chunk: " + path);
}

inline void write_wav(const std::string& path, const std::vector<double>& samples,
                      int sample_rate) {
  VQTTS_REQUIRE(sample_rate > 0, "sample_rate must be positive");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write wav file: " + path);
  const auto n = static_cast<std::uint32_t>(samples.size());
  const std::uint32_t data_size = n * 2;
  f.write("RIFF", 4);
  detail::put<std::uint32_t>(f, 36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  detail::put<std::uint32_t>(f, 16);
  detail::put<std::uint16_t>(f, 1);  // PCM
  detail::put<std::uint16_t>(f, 1);  // mono
  detail::put<std::uint32_t>(f, static_cast<std::uint32_t>(sample_rate));
  detail::put<std::uint32_t>(f, static_cast<std::uint32_t>(sample_rate * 2));
  detail::put<std::uint16_t>(f, 2);
  detail::put<std::uint16_t>(f, 16);
  f.write("data", 4);
  detail::put<std::uint32_t>(f, data_size);
  for (double s : samples) {
    double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
    auto v = static_cast<std::int16_t>(std::lround(c * 32767.0));
    detail::put<std::int16_t>(f, v);
  }
  if (!f) throw IoError("short write to " + path);
}

// --------------------------------------------- versioned matrix container
//
// Layout: magic "VQTFEAT\0" | u32 version | u32 dtype | u64 rows | u64 cols |
// row-major payload. dtype 1 = f32, 2 = f64.

inline constexpr char kMatrixMagic[8] = {'V', 'Q', 'T', 'F', 'E', 'A', 'T', '\0'};
inline constexpr std::uint32_t kMatrixVersion = 1;

inline void save_matrix(const std::string& path, const Mat& m, bool as_f32 = false) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write matrix file: " + path);
  f.write(kMatrixMagic, 8);
  detail::put<std::uint32_t>(f, kMatrixVersion);
  detail::put<std::uint32_t>(f, as_f32 ? 1u : 2u);
  detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(m.rows()));
  detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (as_f32)
        detail::put<float>(f, static_cast<float>(m(r, c)));
      else
        detail::put<double>(f, m(r, c));
    }
  if (!f) throw IoError("short write to " + path);
}

inline Mat load_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open matrix file: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMatrixMagic, 8) != 0)
    throw IoError("bad matrix magic in " + path);
  const auto version = detail::get<std::uint32_t>(f);
  if (version != kMatrixVersion) throw IoError("unsupported matrix version in " + path);
  const auto dtype = detail::get<std::uint32_t>(f);
  const auto rows = static_cast<Eigen::Index>(detail::get<std::uint64_t>(f));
  const auto cols = static_cast<Eigen::Index>(detail::get<std::uint64_t>(f));
  Mat m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      m(r, c) = (dtype == 1) ? detail::get<float>(f) : detail::get<double>(f);
  return m;
}

// ------------------------------------------------------ checkpoint container
//
// magic "VQTCKPT\0" | u32 version | meta json (string) | u32 count |
// count * (name | u64 rows | u64 cols | f64 row-major payload).
// std::map keeps tensor order deterministic.

inline constexpr char kCkptMagic[8] = {'V', 'Q', 'T', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCkptVersion = 1;

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Mat> tensors;
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(kCkptMagic, 8);
  detail::put<std::uint32_t>(f, kCkptVersion);
  detail::put_string(f, ck.meta.dump());
  detail::put<std::uint32_t>(f, static_cast<std::uint32_t>(ck.tensors.size()));
  for (const auto& [name, m] : ck.tensors) {
    detail::put_string(f, name);
    detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(m.rows()));
    detail::put<std::uint64_t>(f, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put<double>(f, m(r, c));
  }
  if (!f) throw IoError("short write to " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kCkptMagic, 8) != 0)
    throw IoError("bad checkpoint magic in " + path);
  const auto version = detail::get<std::uint32_t>(f);
  if (version != kCkptVersion) throw IoError("unsupported checkpoint version in " + path);
  Checkpoint ck;
  ck.meta = nlohmann::json::parse(detail::get_string(f));
  const auto count = detail::get<std::uint32_t>(f);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name = detail::get_string(f);
    const auto rows = static_cast<Eigen::Index>(detail::get<std::uint64_t>(f));
    const auto cols = static_cast<Eigen::Index>(detail::get<std::uint64_t>(f));
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = detail::get<double>(f);
    ck.tensors.emplace(name, std::move(m));
  }
  return ck;
}

// Names of tensors whose contents (or shape) differ between two checkpoints.
inline std::vector<std::string> diff_checkpoints(const Checkpoint& a, const Checkpoint& b) {
  std::vector<std::string> out;
  for (const auto& [name, m] : a.tensors) {
    auto it = b.tensors.find(name);
    if (it == b.tensors.end() || it->second.rows() != m.rows() ||
        it->second.cols() != m.cols() || it->second != m) {
      out.push_back(name);
    }
  }
  for (const auto& [name, m] : b.tensors)
    if (!a.tensors.count(name)) out.push_back(name);
  return out;
}

}  // namespace vqtts
