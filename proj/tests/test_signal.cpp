// tests/test_signal.cpp

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

#include <catch2/catch_amalgamated.hpp>
#include <complex>
#include <vector>

#include "vqtts/rng.hpp"
#include "vqtts/signal.hpp"

using namespace vqtts;

namespace {

Waveform sine(double freq, double seconds, int sr, double amp = 0.5) {
  Waveform w;
  w.sample_rate = sr;
  const auto n = static_cast<std::size_t>(seconds * sr);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / sr);
  return w;
}

Waveform noise(double seconds, int sr, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.sample_rate = sr;
  const auto n = static_cast<std::size_t>(seconds * sr);
  w.samples.resize(n);
  for (auto& s : w.samples) s = rng.uniform(-0.5, 0.5);
  return w;
}

// Oracle: frame extraction + O(N^2) DFT written straight from the framing
// convention, independent of the stft implementation.
Eigen::MatrixXcd naive_stft(const Waveform& w, const FrameConfig& cfg) {
  const auto len = static_cast<long>(w.samples.size());
  const int n_frames = static_cast<int>(len / cfg.hop) + 1;
  const int pad = cfg.window_len / 2;
  const auto win = make_window(cfg.window, cfg.window_len);
  Eigen::MatrixXcd out(n_frames, cfg.fft_size / 2 + 1);
  for (int t = 0; t < n_frames; ++t) {
    std::vector<double> frame(static_cast<std::size_t>(cfg.fft_size), 0.0);
    for (int n = 0; n < cfg.window_len; ++n) {
      const long idx = static_cast<long>(t) * cfg.hop - pad + n;
      if (idx >= 0 && idx < len)
        frame[static_cast<std::size_t>(n)] =
            w.samples[static_cast<std::size_t>(idx)] * win[static_cast<std::size_t>(n)];
    }
    for (int k = 0; k <= cfg.fft_size / 2; ++k) {
      std::complex<double> acc(0.0, 0.0);
      for (int n = 0; n < cfg.fft_size; ++n)
        acc += frame[static_cast<std::size_t>(n)] *
               std::exp(std::complex<double>(0.0, -2.0 * M_PI * k * n / cfg.fft_size));
      out(t, k) = acc;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("stft of silence is silent", "[signal]") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(4000, 0.0);
  FrameConfig cfg;
  const auto s = stft(w, cfg);
  REQUIRE(s.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("stft frame count follows center-padded formula", "[signal]") {
  Waveform w = noise(0.0, 16000, 1);
  w.samples.resize(1024, 0.1);
  FrameConfig cfg;
  cfg.fft_size = 512;
  cfg.window_len = 512;
  cfg.hop = 256;
  const auto s = stft(w, cfg);
  REQUIRE(s.rows() == 5);  // floor(1024/256) + 1
}

TEST_CASE("stft rejects empty waveform", "[signal]") {
  Waveform w;
  w.sample_rate = 16000;
  FrameConfig cfg;
  REQUIRE_THROWS_AS(stft(w, cfg), InvalidInput);
}

TEST_CASE("stft matches direct DFT oracle and concentrates sine energy", "[signal]") {
  FrameConfig cfg;
  cfg.fft_size = 1024;
  cfg.window_len = 1024;
  cfg.hop = 256;
  const int sr = 16000;
  const int bin = 16;
  Waveform w = sine(static_cast<double>(bin) * sr / cfg.fft_size, 0.3, sr);

  const auto fast = stft(w, cfg);
  const auto slow = naive_stft(w, cfg);
  REQUIRE(fast.rows() == slow.rows());
  REQUIRE((fast - slow).cwiseAbs().maxCoeff() < 1e-8);

  // Interior frames: window main lobe keeps the energy within bin +- 1.
  for (int t = 4; t < fast.rows() - 4; ++t) {
    double total = 0.0, local = 0.0;
    Eigen::Index peak = 0;
    fast.row(t).cwiseAbs().maxCoeff(&peak);
    REQUIRE(std::abs(static_cast<int>(peak) - bin) <= 1);
    for (int k = 0; k < fast.cols(); ++k) {
      const double e = std::norm(fast(t, k));
      total += e;
      if (std::abs(k - bin) <= 1) local += e;
    }
    REQUIRE(local / total > 0.99);
  }
}

TEST_CASE("istft inverts stft on the interior", "[signal]") {
  FrameConfig cfg;
  Waveform w = noise(0.35, 16000, 7);
  const auto s = stft(w, cfg);
  const auto r = istft(s, cfg, static_cast<long>(w.samples.size()), w.sample_rate);
  REQUIRE(r.samples.size() == w.samples.size());
  const std::size_t guard = static_cast<std::size_t>(cfg.window_len);
  for (std::size_t i = guard; i + guard < w.samples.size(); ++i)
    REQUIRE(std::abs(r.samples[i] - w.samples[i]) < 1e-6);
}

TEST_CASE("stft is pure", "[signal]") {
  FrameConfig cfg;
  Waveform w = noise(0.2, 16000, 3);
  const auto a = stft(w, cfg);
  const auto b = stft(w, cfg);
  REQUIRE(a == b);
}

TEST_CASE("mel filterbank rows are positive with compact support", "[signal]") {
  const Mat fb = mel_filterbank(40, 1024, 16000);
  REQUIRE(fb.rows() == 40);
  REQUIRE(fb.cols() == 513);
  for (int m = 0; m < fb.rows(); ++m) {
    REQUIRE(fb.row(m).sum() > 0.0);
    // compact support: nonzero bins form one contiguous run
    int first = -1, last = -1;
    for (int k = 0; k < fb.cols(); ++k)
      if (fb(m, k) > 0.0) {
        if (first < 0) first = k;
        last = k;
      }
    for (int k = first; k <= last; ++k) {
      // interior zeros would mean a torn filter; the peak bin may touch zero
      // only at the very edges
      if (k > first && k < last) REQUIRE(fb(m, k) > 0.0);
    }
    REQUIRE(static_cast<double>(last - first) < fb.cols() * 0.6);
  }
}

TEST_CASE("mel spectrogram of silence sits at the log floor", "[signal]") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(3200, 0.0);
  FrameConfig cfg;
  const auto m = mel_spectrogram(w, cfg, 40);
  REQUIRE(m.frames.rows() == 17);
  REQUIRE(m.frames.cols() == 40);
  REQUIRE((m.frames.array() == std::log(kLogFloor)).all());
}

TEST_CASE("mel filterbank application equals dense matmul oracle", "[signal]") {
  Rng rng(11);
  const Mat fb = mel_filterbank(24, 512, 16000);
  Mat mag(9, 257);
  for (Eigen::Index r = 0; r < mag.rows(); ++r)
    for (Eigen::Index c = 0; c < mag.cols(); ++c) mag(r, c) = rng.uniform(0.0, 2.0);

  const Mat fast = mag * fb.transpose();
  Mat slow = Mat::Zero(mag.rows(), fb.rows());
  for (Eigen::Index t = 0; t < mag.rows(); ++t)
    for (Eigen::Index m = 0; m < fb.rows(); ++m)
      for (Eigen::Index k = 0; k < mag.cols(); ++k) slow(t, m) += mag(t, k) * fb(m, k);
  REQUIRE((fast - slow).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mfcc output width is exactly 39", "[signal]") {
  FrameConfig cfg;
  const auto f1 = mfcc(sine(440.0, 0.4, 16000), cfg);
  REQUIRE(f1.frames.cols() == 39);
  const auto f2 = mfcc(noise(0.09, 16000, 5), cfg);
  REQUIRE(f2.frames.cols() == 39);
  REQUIRE(f2.frames.allFinite());
}

TEST_CASE("mfcc rejects waveform shorter than one window", "[signal]") {
  FrameConfig cfg;
  Waveform w = sine(440.0, 0.01, 16000);  // 160 samples < 800 window
  REQUIRE_THROWS_AS(mfcc(w, cfg), InvalidInput);
}

TEST_CASE("mfcc deltas vanish for a stationary signal", "[signal]") {
  FrameConfig cfg;
  // 400 Hz = 5 cycles per hop, so every frame sees an identical segment.
  const auto f = mfcc(sine(400.0, 0.5, 16000), cfg);
  const Mat deltas = f.frames.rightCols(26);
  REQUIRE(deltas.cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("mfcc deltas match a least-squares slope oracle", "[signal]") {
  FrameConfig cfg;
  const auto f = mfcc(noise(0.3, 16000, 13), cfg);
  const Mat cep = f.frames.leftCols(13);
  const Mat d1 = f.frames.middleCols(13, 13);
  const auto T = cep.rows();

  // Oracle: per coefficient, fit y = a + b*n over n in [-2, 2] (edges
  // replicated) by explicit normal equations; compare b to the delta column.
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index c = 0; c < 13; ++c) {
      Eigen::MatrixXd design(5, 2);
      Eigen::VectorXd y(5);
      for (int n = -2; n <= 2; ++n) {
        const Eigen::Index src = std::clamp<Eigen::Index>(t + n, 0, T - 1);
        design(n + 2, 0) = 1.0;
        design(n + 2, 1) = n;
        y(n + 2) = cep(src, c);
      }
      const Eigen::Vector2d sol =
          (design.transpose() * design).ldlt().solve(design.transpose() * y);
      REQUIRE(std::abs(d1(t, c) - sol(1)) < 1e-9);
    }
}

TEST_CASE("griffin-lim of zero magnitude is silence", "[signal]") {
  FrameConfig cfg;
  const Mat mag = Mat::Zero(9, cfg.bins());
  const auto res = griffin_lim(mag, cfg, 10, 16000);
  for (double s : res.waveform.samples) REQUIRE(s == 0.0);
}

TEST_CASE("griffin-lim rejects negative magnitudes", "[signal]") {
  FrameConfig cfg;
  Mat mag = Mat::Zero(5, cfg.bins());
  mag(2, 3) = -0.5;
  REQUIRE_THROWS_AS(griffin_lim(mag, cfg, 5, 16000), InvalidInput);
}

TEST_CASE("griffin-lim with true phase reproduces the waveform", "[signal]") {
  FrameConfig cfg;
  Waveform w = sine(523.0, 0.4, 16000);
  // exact length = (frames-1)*hop so the reconstruction grid lines up
  w.samples.resize((w.samples.size() / cfg.hop) * cfg.hop);
  const auto s = stft(w, cfg);
  const Mat mag = s.cwiseAbs();
  const auto res = griffin_lim(mag, cfg, 1, 16000, &s);
  const std::size_t guard = static_cast<std::size_t>(cfg.window_len);
  for (std::size_t i = guard; i + guard < res.waveform.samples.size(); ++i)
    REQUIRE(std::abs(res.waveform.samples[i] - w.samples[i]) < 1e-6);
}

TEST_CASE("griffin-lim converges on a sine magnitude", "[signal]") {
  FrameConfig cfg;
  Waveform w = sine(440.0, 0.3, 16000);
  const Mat mag = stft(w, cfg).cwiseAbs();
  const auto res = griffin_lim(mag, cfg, 60, 16000);

  // Independent recomputation of the convergence ratio from the output.
  const Mat out_mag = stft(res.waveform, cfg).cwiseAbs();
  const double ratio = (out_mag - mag).norm() / mag.norm();
  REQUIRE(ratio < 0.1);

  // Monitored trace is non-increasing (1e-7 slack).
  for (std::size_t i = 1; i < res.convergence.size(); ++i)
    REQUIRE(res.convergence[i] <= res.convergence[i - 1] + 1e-7);
  REQUIRE(res.convergence.back() < 0.1);
}

TEST_CASE("griffin-lim output length follows istft geometry", "[signal]") {
  FrameConfig cfg;
  const Mat mag = Mat::Constant(21, cfg.bins(), 0.01);
  const auto res = griffin_lim(mag, cfg, 2, 16000);
  REQUIRE(res.waveform.samples.size() == static_cast<std::size_t>(20 * cfg.hop));
}

TEST_CASE("mel pseudo-inverse roughly inverts the filterbank", "[signal]") {
  const Mat fb = mel_filterbank(80, 1024, 16000);
  const Mat pinv = mel_pseudo_inverse(fb);
  REQUIRE(pinv.rows() == 513);
  REQUIRE(pinv.cols() == 80);
  // fb * pinv should be close to identity on the mel space
  const Mat eye = fb * pinv;
  REQUIRE((eye - Mat::Identity(80, 80)).cwiseAbs().maxCoeff() < 0.35);
  REQUIRE(eye.diagonal().minCoeff() > 0.6);
}
