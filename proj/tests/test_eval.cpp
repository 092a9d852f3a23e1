// tests/test_eval.cpp

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
#include <filesystem>
#include <limits>

#include "vqtts/eval.hpp"

using namespace vqtts;
using namespace vqtts::eval;

namespace {

CepstraFrames random_cepstra(Eigen::Index n, Rng& rng) {
  CepstraFrames c;
  c.frames.resize(n, kCepstraDim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < kCepstraDim; ++j) c.frames(i, j) = rng.normal();
  return c;
}

// Exhaustive enumeration of every monotone path over steps {(1,0),(0,1),(1,1)}
// from (0,0) to (n-1,m-1); node costs accumulated along the walk.
void walk_paths(const Mat& cost, Eigen::Index i, Eigen::Index j, double acc, double& best) {
  acc += cost(i, j);
  if (i == cost.rows() - 1 && j == cost.cols() - 1) {
    best = std::min(best, acc);
    return;
  }
  if (i + 1 < cost.rows()) walk_paths(cost, i + 1, j, acc, best);
  if (j + 1 < cost.cols()) walk_paths(cost, i, j + 1, acc, best);
  if (i + 1 < cost.rows() && j + 1 < cost.cols()) walk_paths(cost, i + 1, j + 1, acc, best);
}

double brute_force_dtw(const CepstraFrames& a, const CepstraFrames& b) {
  Mat cost(a.frames.rows(), b.frames.rows());
  for (Eigen::Index i = 0; i < a.frames.rows(); ++i)
    for (Eigen::Index j = 0; j < b.frames.rows(); ++j)
      cost(i, j) = mcd_frame(a.frames.row(i), b.frames.row(j));
  double best = std::numeric_limits<double>::infinity();
  walk_paths(cost, 0, 0, 0.0, best);
  return best;
}

Waveform tone(double freq, double seconds, int sr, double amp = 0.4) {
  Waveform w;
  w.sample_rate = sr;
  const auto n = static_cast<std::size_t>(seconds * sr);
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    w.samples[i] = amp * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / sr);
  return w;
}

}  // namespace

TEST_CASE("mcd_frame closed form, symmetry and zero", "[eval]") {
  Rng rng(41);
  Eigen::RowVectorXd a(kCepstraDim), b(kCepstraDim);
  for (int i = 0; i < kCepstraDim; ++i) {
    a(i) = rng.normal();
    b(i) = rng.normal();
  }
  REQUIRE(mcd_frame(a, a) == 0.0);
  REQUIRE(mcd_frame(a, b) == mcd_frame(b, a));

  for (double delta : {0.1, 1.0}) {
    const Eigen::RowVectorXd shifted = a.array() + delta;
    const double expect = (10.0 / M_LN10) * std::sqrt(26.0) * delta;
    REQUIRE(std::abs(mcd_frame(a, shifted) - expect) < 1e-9);
  }
}

TEST_CASE("dtw of identical sequences is the zero-cost diagonal", "[eval]") {
  Rng rng(42);
  const CepstraFrames a = random_cepstra(7, rng);
  const DtwResult d = dtw(a, a);
  REQUIRE(d.total_cost == 0.0);
  REQUIRE(d.path.size() == 7);
  for (int i = 0; i < 7; ++i) {
    REQUIRE(d.path[static_cast<std::size_t>(i)].first == i);
    REQUIRE(d.path[static_cast<std::size_t>(i)].second == i);
  }
}

TEST_CASE("dtw path is monotone with unit steps and correct endpoints", "[eval]") {
  Rng rng(43);
  const CepstraFrames a = random_cepstra(9, rng);
  const CepstraFrames b = random_cepstra(6, rng);
  const DtwResult d = dtw(a, b);
  REQUIRE(d.path.front() == std::make_pair(0, 0));
  REQUIRE(d.path.back() == std::make_pair(8, 5));
  for (std::size_t k = 1; k < d.path.size(); ++k) {
    const int di = d.path[k].first - d.path[k - 1].first;
    const int dj = d.path[k].second - d.path[k - 1].second;
    REQUIRE((di == 0 || di == 1));
    REQUIRE((dj == 0 || dj == 1));
    REQUIRE(di + dj >= 1);
  }
}

TEST_CASE("dtw rejects empty input", "[eval]") {
  Rng rng(44);
  const CepstraFrames a = random_cepstra(3, rng);
  CepstraFrames empty;
  empty.frames.resize(0, kCepstraDim);
  REQUIRE_THROWS_AS(dtw(a, empty), InvalidInput);
}

TEST_CASE("dtw cost equals exhaustive path enumeration for short inputs", "[eval]") {
  Rng rng(45);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = rng.uniform_int(1, 5);
    const auto m = rng.uniform_int(1, 5);
    const CepstraFrames a = random_cepstra(n, rng);
    const CepstraFrames b = random_cepstra(m, rng);
    REQUIRE(dtw(a, b).total_cost == brute_force_dtw(a, b));
  }
}

TEST_CASE("dtw against a single frame sums all distances", "[eval]") {
  Rng rng(46);
  const CepstraFrames a = random_cepstra(1, rng);
  const CepstraFrames b = random_cepstra(6, rng);
  double expect = 0.0;
  for (Eigen::Index j = 0; j < 6; ++j)
    expect += mcd_frame(a.frames.row(0), b.frames.row(j));
  // same accumulation order as the DP recurrence
  const DtwResult d = dtw(a, b);
  REQUIRE(std::abs(d.total_cost - expect) < 1e-9);
  REQUIRE(d.path.size() == 6);
}

TEST_CASE("dtw never beats itself along the diagonal", "[eval]") {
  Rng rng(47);
  const CepstraFrames a = random_cepstra(8, rng);
  const CepstraFrames b = random_cepstra(8, rng);
  double diag = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i) diag += mcd_frame(a.frames.row(i), b.frames.row(i));
  REQUIRE(dtw(a, b).total_cost <= diag + 1e-12);
}

TEST_CASE("mcd_dtw of a waveform with itself is exactly zero", "[eval]") {
  const Waveform w = tone(330.0, 0.4, 16000);
  const McdResult r = mcd_dtw(w, w);
  REQUIRE(r.mcd_db == 0.0);
  REQUIRE(r.path_length > 0);
}

TEST_CASE("constant-offset cepstra reproduce the closed form through dtw", "[eval]") {
  Rng rng(48);
  const CepstraFrames ref = random_cepstra(12, rng);
  for (double delta : {0.1, 1.0}) {
    CepstraFrames shifted;
    shifted.frames = ref.frames.array() + delta;
    const McdResult r = mcd_dtw_cepstra(ref, shifted);
    const double expect = (10.0 / M_LN10) * std::sqrt(26.0) * delta;
    REQUIRE(std::abs(r.mcd_db - expect) < 1e-9);
  }
}

TEST_CASE("mcd is insensitive to shared leading silence", "[eval]") {
  Waveform a = tone(440.0, 0.5, 16000);
  Waveform b = tone(452.0, 0.5, 16000);
  const double base = mcd_dtw(a, b).mcd_db;

  const std::vector<double> silence(3200, 0.0);
  a.samples.insert(a.samples.begin(), silence.begin(), silence.end());
  b.samples.insert(b.samples.begin(), silence.begin(), silence.end());
  const double padded = mcd_dtw(a, b).mcd_db;
  REQUIRE(std::abs(padded - base) < 0.1);
}

TEST_CASE("mcd is insensitive to a global gain change", "[eval]") {
  const Waveform a = tone(440.0, 0.5, 16000, 0.2);
  const Waveform b = tone(300.0, 0.5, 16000, 0.25);
  const double base = mcd_dtw(a, b).mcd_db;

  Waveform a2 = a, b2 = b;
  for (auto& s : a2.samples) s *= 2.0;
  for (auto& s : b2.samples) s *= 2.0;
  const double doubled = mcd_dtw(a2, b2).mcd_db;
  REQUIRE(std::abs(doubled - base) < 0.5);
}

TEST_CASE("corpus evaluation aggregates, reports failures, ignores order", "[eval]") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "vqtts_eval_corpus";
  fs::create_directories(dir);

  data::Manifest m;
  for (int i = 0; i < 5; ++i) {
    const std::string id = "utt" + std::to_string(i);
    const std::string path = (dir / (id + ".wav")).string();
    const Waveform w = tone(250.0 + 60 * i, 0.4, 16000);
    write_wav(path, w.samples, 16000);
    m.records.push_back({id, path, "spk", 0.4, ""});
  }

  // ground truth against itself: corpus MCD 0
  auto identity = [](const data::UtteranceRecord& rec) {
    const WavData w = read_wav(rec.audio_path);
    return Waveform{w.samples, w.sample_rate};
  };
  const CorpusMcdResult self = evaluate_corpus(identity, m);
  REQUIRE(self.corpus_mcd_db == 0.0);
  REQUIRE(self.n_utts == 5);

  // detuned synthesis: mean equals an independent re-aggregation of the rows
  auto detuned = [](const data::UtteranceRecord& rec) {
    const WavData w = read_wav(rec.audio_path);
    Waveform out{w.samples, w.sample_rate};
    for (std::size_t i = 0; i < out.samples.size(); ++i)
      out.samples[i] = 0.4 * std::sin(2.0 * M_PI * 500.0 * static_cast<double>(i) / 16000.0);
    return out;
  };
  const CorpusMcdResult res = evaluate_corpus(detuned, m);
  double sum = 0.0;
  for (const auto& r : res.rows) sum += r.mcd_db;
  REQUIRE(std::abs(res.corpus_mcd_db - sum / static_cast<double>(res.rows.size())) < 1e-12);

  // permutation invariance
  data::Manifest shuffled = m;
  std::rotate(shuffled.records.begin(), shuffled.records.begin() + 2, shuffled.records.end());
  const CorpusMcdResult res2 = evaluate_corpus(detuned, shuffled);
  REQUIRE(std::abs(res2.corpus_mcd_db - res.corpus_mcd_db) < 1e-12);

  // failures recorded and excluded, never silently dropped
  auto flaky = [&](const data::UtteranceRecord& rec) {
    if (rec.id == "utt2") throw std::runtime_error("synthesis exploded");
    return identity(rec);
  };
  const CorpusMcdResult res3 = evaluate_corpus(flaky, m);
  REQUIRE(res3.n_utts == 4);
  REQUIRE(res3.failures.size() == 1);
  REQUIRE(res3.failures[0].find("utt2") != std::string::npos);

  // multi-worker result identical to single-worker
  const CorpusMcdResult res4 = evaluate_corpus(detuned, m, {}, 3);
  REQUIRE(res4.corpus_mcd_db == res.corpus_mcd_db);
  fs::remove_all(dir);
}
