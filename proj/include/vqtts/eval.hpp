// include/vqtts/eval.hpp

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

#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "vqtts/data.hpp"
#include "vqtts/signal.hpp"

namespace vqtts::eval {

using vqtts::Mat;

inline constexpr int kCepstraDim = 13;  // c1..c13, energy coefficient excluded
inline constexpr double kMcdScale = 10.0 * M_SQRT2 / M_LN10;

struct CepstraFrames {
  Mat frames;  // n_frames x 13
};

// Fixed evaluation analysis front end, independent of any model's features.
struct EvalAnalysisConfig {
  FrameConfig frame;
  int sample_rate = 16000;
  int n_filters = 26;

  std::uint64_t hash() const {
    return fnv1a64(std::to_string(sample_rate) + "#" + std::to_string(n_filters),
                   frame.hash());
  }
};

// Mel cepstra c1..c13 via log mel filterbank energies and an orthonormal
// DCT; same valid framing as the feature front end.
inline CepstraFrames cepstra(const Waveform& w, const EvalAnalysisConfig& cfg) {
  cfg.frame.validate();
  w.validate();
  VQTTS_REQUIRE(w.sample_rate == cfg.sample_rate, "sample rate mismatch in evaluation");
  const auto len = static_cast<long>(w.samples.size());
  VQTTS_REQUIRE(len >= cfg.frame.window_len, "waveform shorter than one analysis window");
  const int n_frames = 1 + static_cast<int>((len - cfg.frame.window_len) / cfg.frame.hop);
  const auto win = make_window(cfg.frame.window, cfg.frame.window_len);
  const Mat fb = mel_filterbank(cfg.n_filters, cfg.frame.fft_size, cfg.sample_rate);
  const Mat dct = detail::dct_matrix(kCepstraDim + 1, cfg.n_filters);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  std::vector<double> buf(static_cast<std::size_t>(cfg.frame.fft_size));
  std::vector<std::complex<double>> freq;

  CepstraFrames out;
  out.frames.resize(n_frames, kCepstraDim);
  Eigen::VectorXd mag(cfg.frame.bins());
  for (int t = 0; t < n_frames; ++t) {
    const long start = static_cast<long>(t) * cfg.frame.hop;
    std::fill(buf.begin(), buf.end(), 0.0);
    for (int n = 0; n < cfg.frame.window_len; ++n)
      buf[static_cast<std::size_t>(n)] =
          w.samples[static_cast<std::size_t>(start + n)] * win[static_cast<std::size_t>(n)];
    fft.fwd(freq, buf);
    for (int k = 0; k < cfg.frame.bins(); ++k)
      mag(k) = std::abs(freq[static_cast<std::size_t>(k)]);
    const Eigen::VectorXd logmel = (fb * mag).cwiseMax(kLogFloor).array().log();
    const Eigen::VectorXd c = dct * logmel;
    out.frames.row(t) = c.segment(1, kCepstraDim).transpose();  // drop c0
  }
  return out;
}

// Frame distortion in dB: (10/ln 10) * sqrt(2 * sum of squared differences).
inline double mcd_frame(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
  VQTTS_REQUIRE(a.size() == kCepstraDim && b.size() == kCepstraDim,
                "mcd_frame expects 13 coefficients");
  return kMcdScale * std::sqrt((a - b).squaredNorm());
}

// Strip leading/trailing samples below 2% of the peak amplitude. Keeps the
// path-length normalization from being diluted by shared endpoint silence;
// an all-quiet waveform is returned unchanged.
inline Waveform trim_silence(const Waveform& w, double rel_threshold = 0.02) {
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::abs(s));
  const double thr = std::max(1e-6, rel_threshold * peak);
  std::size_t first = 0, last = w.samples.size();
  while (first < w.samples.size() && std::abs(w.samples[first]) < thr) ++first;
  while (last > first && std::abs(w.samples[last - 1]) < thr) --last;
  if (first >= last) return w;
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + static_cast<long>(first),
                     w.samples.begin() + static_cast<long>(last));
  return out;
}

// --------------------------------------------------------------------- DTW

struct DtwResult {
  std::vector<std::pair<int, int>> path;  // (0,0) .. (n-1, m-1), monotone
  double total_cost = 0.0;
};

// Unweighted dynamic time warping over steps {(1,0),(0,1),(1,1)}; node costs
// summed along the path, path recovered by backtracking (diagonal preferred
// on ties).
inline DtwResult dtw(const CepstraFrames& a, const CepstraFrames& b,
                     const std::function<double(const Eigen::RowVectorXd&,
                                                const Eigen::RowVectorXd&)>& cost = mcd_frame) {
  const auto n = a.frames.rows();
  const auto m = b.frames.rows();
  VQTTS_REQUIRE(n > 0 && m > 0, "dtw inputs must be non-empty");

  Mat c(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) c(i, j) = cost(a.frames.row(i), b.frames.row(j));

  Mat acc(n, m);
  Eigen::MatrixXi from(n, m);  // 0 diag, 1 up (i-1,j), 2 left (i,j-1)
  acc(0, 0) = c(0, 0);
  from(0, 0) = -1;
  for (Eigen::Index i = 1; i < n; ++i) {
    acc(i, 0) = c(i, 0) + acc(i - 1, 0);
    from(i, 0) = 1;
  }
  for (Eigen::Index j = 1; j < m; ++j) {
    acc(0, j) = c(0, j) + acc(0, j - 1);
    from(0, j) = 2;
  }
  for (Eigen::Index i = 1; i < n; ++i)
    for (Eigen::Index j = 1; j < m; ++j) {
      double best = acc(i - 1, j - 1);
      int dir = 0;
      if (acc(i - 1, j) < best) {
        best = acc(i - 1, j);
        dir = 1;
      }
      if (acc(i, j - 1) < best) {
        best = acc(i, j - 1);
        dir = 2;
      }
      acc(i, j) = c(i, j) + best;
      from(i, j) = dir;
    }

  DtwResult res;
  res.total_cost = acc(n - 1, m - 1);
  Eigen::Index i = n - 1, j = m - 1;
  while (true) {
    res.path.emplace_back(static_cast<int>(i), static_cast<int>(j));
    const int dir = from(i, j);
    if (dir < 0) break;
    if (dir == 0) {
      --i;
      --j;
    } else if (dir == 1) {
      --i;
    } else {
      --j;
    }
  }
  std::reverse(res.path.begin(), res.path.end());
  return res;
}

// --------------------------------------------------------------- MCD + DTW

struct McdResult {
  double mcd_db = 0.0;
  long path_length = 0;  // nodes on the alignment path
};

// Distortion between two cepstra sequences: DTW with mcd_frame as the node
// cost, normalized by the number of path nodes.
inline McdResult mcd_dtw_cepstra(const CepstraFrames& ref, const CepstraFrames& syn) {
  const DtwResult d = dtw(ref, syn, mcd_frame);
  McdResult r;
  r.path_length = static_cast<long>(d.path.size());
  r.mcd_db = d.total_cost / static_cast<double>(r.path_length);
  return r;
}

inline McdResult mcd_dtw(const Waveform& ref, const Waveform& syn,
                         const EvalAnalysisConfig& cfg = {}) {
  return mcd_dtw_cepstra(cepstra(trim_silence(ref), cfg), cepstra(trim_silence(syn), cfg));
}

// ------------------------------------------------------------ corpus level

struct UtteranceMcdRow {
  std::string utterance_id;
  double mcd_db = 0.0;
  long ref_frames = 0;
  long syn_frames = 0;
  long path_length = 0;
};

struct CorpusMcdResult {
  double corpus_mcd_db = 0.0;  // mean over evaluated utterances
  long n_utts = 0;
  std::vector<UtteranceMcdRow> rows;
  std::vector<std::string> failures;  // "id: reason", excluded with a warning
  EvalAnalysisConfig analysis;
};

// Synthesize every manifest utterance via `synth` and score it against the
// reference audio. Parallel across utterances with slot-assigned outputs, so
// aggregation order is independent of the worker count. Failures are
// recorded and excluded, never silently dropped.
inline CorpusMcdResult evaluate_corpus(
    const std::function<Waveform(const data::UtteranceRecord&)>& synth,
    const data::Manifest& eval_manifest, const EvalAnalysisConfig& cfg = {},
    int workers = 1) {
  VQTTS_REQUIRE(!eval_manifest.records.empty(), "evaluation manifest is empty");
  VQTTS_REQUIRE(workers >= 1, "workers must be >= 1");
  const auto n = eval_manifest.records.size();
  std::vector<UtteranceMcdRow> rows(n);
  std::vector<std::string> errors(n);

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& rec = eval_manifest.records[i];
      try {
        const WavData wav = read_wav(rec.audio_path);
        const Waveform ref = trim_silence(Waveform{wav.samples, wav.sample_rate});
        const Waveform hyp = trim_silence(synth(rec));
        const CepstraFrames cr = cepstra(ref, cfg);
        const CepstraFrames cs = cepstra(hyp, cfg);
        const McdResult m = mcd_dtw_cepstra(cr, cs);
        rows[i] = {rec.id, m.mcd_db, cr.frames.rows(), cs.frames.rows(), m.path_length};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) /
                              static_cast<std::size_t>(workers);
    for (int t = 0; t < workers; ++t) {
      const std::size_t b = static_cast<std::size_t>(t) * chunk;
      const std::size_t e = std::min(b + chunk, n);
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& th : pool) th.join();
  }

  CorpusMcdResult out;
  out.analysis = cfg;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      out.failures.push_back(eval_manifest.records[i].id + ": " + errors[i]);
      continue;
    }
    out.rows.push_back(rows[i]);
    sum += rows[i].mcd_db;
    ++out.n_utts;
  }
  VQTTS_REQUIRE(out.n_utts > 0, "every evaluation utterance failed");
  out.corpus_mcd_db = sum / static_cast<double>(out.n_utts);
  return out;
}

inline void write_mcd_csv(const std::string& path, const CorpusMcdResult& res) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write report csv: " + path);
  f << "utterance_id,mcd_db,ref_frames,syn_frames,path_length\n";
  f.precision(10);
  for (const auto& r : res.rows)
    f << r.utterance_id << ',' << r.mcd_db << ',' << r.ref_frames << ',' << r.syn_frames
      << ',' << r.path_length << '\n';
}

inline nlohmann::json mcd_report_json(const CorpusMcdResult& res) {
  return {{"corpus_mcd_db", res.corpus_mcd_db},
          {"n_utts", res.n_utts},
          {"config_hash", hash_hex(res.analysis.hash())},
          {"failures", res.failures}};
}

}  // namespace vqtts::eval
