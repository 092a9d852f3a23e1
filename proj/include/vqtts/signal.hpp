// include/vqtts/signal.hpp

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
#include <unsupported/Eigen/FFT>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "vqtts/common.hpp"
#include "vqtts/io.hpp"

namespace vqtts {

using Spectrogram = Eigen::MatrixXcd;  // n_frames x (fft_size/2 + 1)

inline constexpr double kLogFloor = 1e-5;

struct Waveform {
  std::vector<double> samples;  // amplitude in [-1, 1]
  int sample_rate = 16000;

  void validate() const {
    VQTTS_REQUIRE(sample_rate > 0, "sample_rate must be positive");
    VQTTS_REQUIRE(!samples.empty(), "waveform must be non-empty");
    for (double s : samples)
      VQTTS_REQUIRE(std::isfinite(s), "waveform contains non-finite sample");
  }
};

enum class WindowKind { kHann, kHamming, kRect };

inline std::string window_name(WindowKind k) {
  switch (k) {
    case WindowKind::kHann: return "hann";
    case WindowKind::kHamming: return "hamming";
    case WindowKind::kRect: return "rect";
  }
  return "?";
}

inline WindowKind window_from_name(const std::string& s) {
  if (s == "hann") return WindowKind::kHann;
  if (s == "hamming") return WindowKind::kHamming;
  if (s == "rect") return WindowKind::kRect;
  throw InvalidInput("unknown window: " + s);
}

// 16 kHz / 50 ms window / 12.5 ms hop defaults.
struct FrameConfig {
  int fft_size = 1024;
  int hop = 200;
  int window_len = 800;
  WindowKind window = WindowKind::kHann;

  void validate() const {
    VQTTS_REQUIRE(hop > 0, "hop must be positive");
    VQTTS_REQUIRE(hop <= window_len, "hop must not exceed window_len");
    VQTTS_REQUIRE(window_len <= fft_size, "window_len must not exceed fft_size");
  }

  int bins() const { return fft_size / 2 + 1; }

  std::uint64_t hash() const {
    std::string s = std::to_string(fft_size) + "/" + std::to_string(hop) + "/" +
                    std::to_string(window_len) + "/" + window_name(window);
    return fnv1a64(s);
  }
};

// Periodic taper (cola-friendly at hop = window_len / 4 for hann).
inline std::vector<double> make_window(WindowKind kind, int n) {
  std::vector<double> w(static_cast<std::size_t>(n), 1.0);
  for (int i = 0; i < n; ++i) {
    switch (kind) {
      case WindowKind::kHann:
        w[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
        break;
      case WindowKind::kHamming:
        w[static_cast<std::size_t>(i)] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / n);
        break;
      case WindowKind::kRect:
        break;
    }
  }
  return w;
}

// --------------------------------------------------------------------- STFT

// Center-padded analysis: frame t covers samples [t*hop - window_len/2,
// t*hop + window_len/2), zero padding outside the waveform, so
// n_frames = floor(len / hop) + 1.
inline Spectrogram stft(const Waveform& w, const FrameConfig& cfg) {
  cfg.validate();
  w.validate();
  const auto len = static_cast<long>(w.samples.size());
  const int n_frames = static_cast<int>(len / cfg.hop) + 1;
  const int pad = cfg.window_len / 2;
  const auto win = make_window(cfg.window, cfg.window_len);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(cfg.fft_size));
  std::vector<std::complex<double>> freq;

  Spectrogram out(n_frames, cfg.bins());
  for (int t = 0; t < n_frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop - pad;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int n = 0; n < cfg.window_len; ++n) {
      const long idx = start + n;
      if (idx >= 0 && idx < len)
        buf[static_cast<std::size_t>(n)] = w.samples[static_cast<std::size_t>(idx)] *
                                           win[static_cast<std::size_t>(n)];
    }
    fft.fwd(freq, buf);
    for (int k = 0; k < cfg.bins(); ++k) out(t, k) = freq[static_cast<std::size_t>(k)];
  }
  return out;
}

// Weighted overlap-add inverse, normalized by the summed squared window.
// `length` restores the exact sample count the spectrogram was taken from.
inline Waveform istft(const Spectrogram& spec, const FrameConfig& cfg, long length,
                      int sample_rate) {
  cfg.validate();
  VQTTS_REQUIRE(spec.rows() > 0, "empty spectrogram");
  VQTTS_REQUIRE(spec.cols() == cfg.bins(), "spectrogram width does not match fft_size");
  VQTTS_REQUIRE(length > 0, "istft length must be positive");
  const int pad = cfg.window_len / 2;
  const auto win = make_window(cfg.window, cfg.window_len);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<std::complex<double>> freq(static_cast<std::size_t>(cfg.bins()));
  std::vector<double> buf;

  std::vector<double> acc(static_cast<std::size_t>(length), 0.0);
  std::vector<double> wsum(static_cast<std::size_t>(length), 0.0);
  for (int t = 0; t < spec.rows(); ++t) {
    for (int k = 0; k < cfg.bins(); ++k) freq[static_cast<std::size_t>(k)] = spec(t, k);
    fft.inv(buf, freq, cfg.fft_size);
    const long start = static_cast<long>(t) * cfg.hop - pad;
    for (int n = 0; n < cfg.window_len; ++n) {
      const long idx = start + n;
      if (idx >= 0 && idx < length) {
        acc[static_cast<std::size_t>(idx)] +=
            buf[static_cast<std::size_t>(n)] * win[static_cast<std::size_t>(n)];
        wsum[static_cast<std::size_t>(idx)] +=
            win[static_cast<std::size_t>(n)] * win[static_cast<std::size_t>(n)];
      }
    }
  }
  Waveform out;
  out.sample_rate = sample_rate;
  out.samples.resize(static_cast<std::size_t>(length));
  for (long i = 0; i < length; ++i) {
    const double d = wsum[static_cast<std::size_t>(i)];
    out.samples[static_cast<std::size_t>(i)] = d > 1e-10 ? acc[static_cast<std::size_t>(i)] / d : 0.0;
  }
  return out;
}

// ---------------------------------------------------------------------- mel

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Triangular filters evaluated at bin centers (continuous edges, so no filter
// comes out empty). Rows: n_mels x bins.
inline Mat mel_filterbank(int n_mels, int fft_size, int sample_rate, double fmin = 0.0,
                          double fmax = -1.0) {
  VQTTS_REQUIRE(n_mels >= 1, "n_mels must be >= 1");
  if (fmax <= 0.0) fmax = sample_rate / 2.0;
  const int bins = fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> centers(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < centers.size(); ++i)
    centers[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                        (n_mels + 1));

  Mat fb = Mat::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = centers[static_cast<std::size_t>(m)];
    const double mid = centers[static_cast<std::size_t>(m) + 1];
    const double hi = centers[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate / fft_size;
      double v = 0.0;
      if (f > lo && f < hi) v = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      fb(m, k) = v;
    }
    VQTTS_REQUIRE(fb.row(m).sum() > 0.0,
                  "empty mel filter " + std::to_string(m) + "; raise fft_size or lower n_mels");
  }
  return fb;
}

struct MelSpectrogram {
  Mat frames;  // n_frames x n_mels, natural-log magnitude
  int n_mels = 0;
  FrameConfig config;
  int sample_rate = 0;

  std::uint64_t config_hash() const {
    return fnv1a64(std::to_string(n_mels) + "@" + std::to_string(sample_rate),
                   config.hash());
  }
};

inline MelSpectrogram mel_spectrogram(const Waveform& w, const FrameConfig& cfg, int n_mels) {
  const Spectrogram s = stft(w, cfg);
  const Mat fb = mel_filterbank(n_mels, cfg.fft_size, w.sample_rate);
  MelSpectrogram out;
  out.n_mels = n_mels;
  out.config = cfg;
  out.sample_rate = w.sample_rate;
  out.frames = (s.cwiseAbs() * fb.transpose()).cwiseMax(kLogFloor).array().log().matrix();
  return out;
}

// --------------------------------------------------------------------- MFCC

struct MfccFrames {
  Mat frames;  // n_frames x 39: 13 cepstra (c0..c12) | 13 delta | 13 delta-delta
};

inline constexpr int kMfccBase = 13;
inline constexpr int kMfccDim = 39;
inline constexpr int kMfccFilters = 26;
inline constexpr int kDeltaHalfWindow = 2;

namespace detail {

// DCT-II with orthonormal scaling, n_out x n_in.
inline Mat dct_matrix(int n_out, int n_in) {
  Mat d(n_out, n_in);
  for (int i = 0; i < n_out; ++i)
    for (int j = 0; j < n_in; ++j)
      d(i, j) = std::sqrt((i == 0 ? 1.0 : 2.0) / n_in) *
                std::cos(M_PI * i * (j + 0.5) / n_in);
  return d;
}

// Regression slope over +-kDeltaHalfWindow frames, edges replicated.
inline Mat delta(const Mat& x) {
  const auto T = x.rows();
  Mat d = Mat::Zero(T, x.cols());
  double denom = 0.0;
  for (int n = 1; n <= kDeltaHalfWindow; ++n) denom += 2.0 * n * n;
  for (Eigen::Index t = 0; t < T; ++t) {
    for (int n = 1; n <= kDeltaHalfWindow; ++n) {
      const Eigen::Index hi = std::min(t + n, T - 1);
      const Eigen::Index lo = std::max(t - n, Eigen::Index{0});
      d.row(t) += n * (x.row(hi) - x.row(lo));
    }
    d.row(t) /= denom;
  }
  return d;
}

}  // namespace detail

// 39-dim MFCCs: 13 base cepstra including c0, plus regression delta and
// delta-delta. Frames are valid-aligned (no center padding), so a stationary
// signal yields identical frames end to end.
inline MfccFrames mfcc(const Waveform& w, const FrameConfig& cfg) {
  cfg.validate();
  w.validate();
  const auto len = static_cast<long>(w.samples.size());
  VQTTS_REQUIRE(len >= cfg.window_len, "waveform shorter than one analysis window");
  const int n_frames = 1 + static_cast<int>((len - cfg.window_len) / cfg.hop);
  const auto win = make_window(cfg.window, cfg.window_len);
  const Mat fb = mel_filterbank(kMfccFilters, cfg.fft_size, w.sample_rate);
  const Mat dct = detail::dct_matrix(kMfccBase, kMfccFilters);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(cfg.fft_size));
  std::vector<std::complex<double>> freq;

  Mat cep(n_frames, kMfccBase);
  Eigen::VectorXd mag(cfg.bins());
  for (int t = 0; t < n_frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int n = 0; n < cfg.window_len; ++n)
      buf[static_cast<std::size_t>(n)] =
          w.samples[static_cast<std::size_t>(start + n)] * win[static_cast<std::size_t>(n)];
    fft.fwd(freq, buf);
    for (int k = 0; k < cfg.bins(); ++k) mag(k) = std::abs(freq[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd logmel = (fb * mag).cwiseMax(kLogFloor).array().log();
    cep.row(t) = (dct * logmel).transpose();
  }

  const Mat d1 = detail::delta(cep);
  const Mat d2 = detail::delta(d1);
  MfccFrames out;
  out.frames.resize(n_frames, kMfccDim);
  out.frames << cep, d1, d2;
  return out;
}

// --------------------------------------------------------------- Griffin-Lim

struct GriffinLimResult {
  Waveform waveform;
  // ||
  // |STFT(x_i)| - mag ||_F / ||mag||_F per iteration; non-increasing for the
  // plain alternating-projection update used here.
  std::vector<double> convergence;
};

// Classic Griffin-Lim (no momentum). Phase starts at zero unless `init`
// supplies a complex spectrogram whose phase should seed the iteration.
inline GriffinLimResult griffin_lim(const Mat& mag, const FrameConfig& cfg, int iters,
                                    int sample_rate, const Spectrogram* init = nullptr) {
  cfg.validate();
  VQTTS_REQUIRE(mag.rows() > 0, "empty magnitude spectrogram");
  VQTTS_REQUIRE(mag.cols() == cfg.bins(), "magnitude width does not match fft_size");
  VQTTS_REQUIRE(iters >= 0, "iters must be >= 0");
  VQTTS_REQUIRE((mag.array() >= 0.0).all() && mag.allFinite(),
                "magnitudes must be non-negative and finite");

  const long length = static_cast<long>(mag.rows() - 1) * cfg.hop;
  const double mag_norm = mag.norm();

  GriffinLimResult res;
  if (length <= 0 || mag_norm == 0.0) {
    res.waveform.sample_rate = sample_rate;
    res.waveform.samples.assign(static_cast<std::size_t>(std::max<long>(length, 1)), 0.0);
    res.convergence.assign(static_cast<std::size_t>(iters), 0.0);
    return res;
  }

  Spectrogram s(mag.rows(), mag.cols());
  if (init) {
    VQTTS_REQUIRE(init->rows() == mag.rows() && init->cols() == mag.cols(),
                  "phase init shape mismatch");
    for (Eigen::Index r = 0; r < mag.rows(); ++r)
      for (Eigen::Index c = 0; c < mag.cols(); ++c) {
        const double a = std::abs((*init)(r, c));
        s(r, c) = a > 0.0 ? mag(r, c) * (*init)(r, c) / a : std::complex<double>(mag(r, c), 0.0);
      }
  } else {
    s = mag.cast<std::complex<double>>();
  }

  res.convergence.reserve(static_cast<std::size_t>(iters));
  Waveform x;
  for (int it = 0; it < iters; ++it) {
    x = istft(s, cfg, length, sample_rate);
    const Spectrogram c = stft(x, cfg);
    res.convergence.push_back((c.cwiseAbs() - mag).norm() / mag_norm);
    for (Eigen::Index r = 0; r < mag.rows(); ++r)
      for (Eigen::Index k = 0; k < mag.cols(); ++k) {
        const double a = std::abs(c(r, k));
        s(r, k) = a > 0.0 ? mag(r, k) * c(r, k) / a : std::complex<double>(mag(r, k), 0.0);
      }
  }
  res.waveform = istft(s, cfg, length, sample_rate);
  return res;
}

// Moore-Penrose inverse of a mel filterbank, for approximate mel-to-linear
// magnitude recovery ahead of Griffin-Lim.
inline Mat mel_pseudo_inverse(const Mat& fb) {
  Eigen::JacobiSVD<Mat> svd(fb, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double tol = 1e-10 * svd.singularValues()(0);
  Eigen::VectorXd inv = svd.singularValues();
  for (Eigen::Index i = 0; i < inv.size(); ++i)
    inv(i) = inv(i) > tol ? 1.0 / inv(i) : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// log-mel frames -> non-negative linear magnitude frames.
inline Mat mel_to_magnitude(const Mat& log_mel, const Mat& fb_pinv) {
  return (log_mel.array().exp().matrix() * fb_pinv.transpose()).cwiseMax(0.0);
}

}  // namespace vqtts
