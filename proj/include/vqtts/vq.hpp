// include/vqtts/vq.hpp

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

#include <map>
#include <set>
#include <string>
#include <vector>

#include "vqtts/autodiff.hpp"
#include "vqtts/data.hpp"
#include "vqtts/signal.hpp"

namespace vqtts::vq {

using ad::Mat;
using ad::Tape;
using ad::Var;

// ------------------------------------------------------------------- types

struct Codebook {
  Mat entries;  // C x D

  int size() const { return static_cast<int>(entries.rows()); }
  int dim() const { return static_cast<int>(entries.cols()); }

  void validate() const {
    VQTTS_REQUIRE(size() >= 2, "codebook needs at least 2 entries");
    VQTTS_REQUIRE(dim() >= 1, "codebook dimension must be >= 1");
    VQTTS_REQUIRE(entries.allFinite(), "codebook entries must be finite");
  }
};

struct VqvaeConfig {
  int codebook_size = 256;  // 512 for multi-corpus pre-training
  int latent_dim = 64;
  double beta = 0.25;
  double jitter_p = 0.12;
  int encoder_hidden = 128;
  int speaker_dim = 16;
  int downsample = 2;  // one stride-2 encoder layer
  int segment_frames = 64;
  int batch_size = 16;
  long steps = 5000;
  double learning_rate = 3e-4;
  double grad_clip = 1.0;
  std::uint64_t seed = 1;
  int sample_rate = 16000;
  FrameConfig frame;

  nlohmann::json to_json() const {
    return {{"codebook_size", codebook_size},
            {"latent_dim", latent_dim},
            {"beta", beta},
            {"jitter_p", jitter_p},
            {"encoder_hidden", encoder_hidden},
            {"speaker_dim", speaker_dim},
            {"downsample", downsample},
            {"segment_frames", segment_frames},
            {"batch_size", batch_size},
            {"steps", steps},
            {"learning_rate", learning_rate},
            {"grad_clip", grad_clip},
            {"seed", seed},
            {"sample_rate", sample_rate},
            {"fft_size", frame.fft_size},
            {"hop", frame.hop},
            {"window_len", frame.window_len},
            {"window", window_name(frame.window)}};
  }

  static VqvaeConfig from_json(const nlohmann::json& j) {
    VqvaeConfig c;
    c.codebook_size = j.at("codebook_size");
    c.latent_dim = j.at("latent_dim");
    c.beta = j.at("beta");
    c.jitter_p = j.at("jitter_p");
    c.encoder_hidden = j.at("encoder_hidden");
    c.speaker_dim = j.at("speaker_dim");
    c.downsample = j.at("downsample");
    c.segment_frames = j.at("segment_frames");
    c.batch_size = j.at("batch_size");
    c.steps = j.at("steps");
    c.learning_rate = j.at("learning_rate");
    c.grad_clip = j.at("grad_clip");
    c.seed = j.at("seed");
    c.sample_rate = j.at("sample_rate");
    c.frame.fft_size = j.at("fft_size");
    c.frame.hop = j.at("hop");
    c.frame.window_len = j.at("window_len");
    c.frame.window = window_from_name(j.at("window"));
    return c;
  }

  std::uint64_t hash() const { return fnv1a64(to_json().dump()); }
};

struct VqLoss {
  double reconstruction = 0.0;
  double codebook_term = 0.0;
  double commitment_term = 0.0;
  double beta = 0.0;
  double total = 0.0;
};

// -------------------------------------------------------------- operations

// Nearest codebook entry by Euclidean distance; ties break to the lowest
// index; the returned vector is the stored row verbatim.
inline std::pair<int, Eigen::RowVectorXd> quantize(const Eigen::RowVectorXd& z,
                                                   const Codebook& cb) {
  VQTTS_REQUIRE(z.cols() == cb.entries.cols(), "latent dimension mismatch");
  int best = 0;
  double best_d = (z - cb.entries.row(0)).squaredNorm();
  for (int j = 1; j < cb.size(); ++j) {
    const double d = (z - cb.entries.row(j)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return {best, cb.entries.row(best)};
}

inline std::vector<int> quantize_indices(const Mat& z, const Codebook& cb) {
  std::vector<int> ks(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    ks[static_cast<std::size_t>(i)] = quantize(z.row(i), cb).first;
  return ks;
}

// Position -> source-position map for jitter: with probability p a position
// is replaced by its left or right neighbor (equal odds); boundary positions
// use their single neighbor. Draws two rng values per replacement.
inline std::vector<int> jitter_map(int n, double p, Rng& rng) {
  VQTTS_REQUIRE(p >= 0.0 && p <= 1.0, "jitter probability out of [0,1]");
  std::vector<int> map(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    map[static_cast<std::size_t>(i)] = i;
    if (n > 1 && rng.bernoulli(p)) {
      const bool left = rng.bernoulli(0.5);
      int src = left ? i - 1 : i + 1;
      if (src < 0) src = 1;
      if (src >= n) src = n - 2;
      map[static_cast<std::size_t>(i)] = src;
    }
  }
  return map;
}

template <typename T>
std::vector<T> jitter(const std::vector<T>& seq, double p, Rng& rng) {
  const auto map = jitter_map(static_cast<int>(seq.size()), p, rng);
  std::vector<T> out(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i)
    out[i] = seq[static_cast<std::size_t>(map[i])];
  return out;
}

// Loss of the quantized autoencoder: reconstruction (unit-variance Gaussian
// likelihood up to a constant, i.e. mean squared error), the codebook pull
// ||sg(z) - e||^2 and the beta-weighted commitment ||z - sg(e)||^2. The two
// quantization terms share a value; they differ only in gradient routing.
inline VqLoss vq_loss(const Mat& x, const Mat& xhat, const Mat& z, const Mat& e,
                      double beta) {
  VQTTS_REQUIRE(x.rows() == xhat.rows() && x.cols() == xhat.cols(),
                "reconstruction shape mismatch");
  VQTTS_REQUIRE(z.rows() == e.rows() && z.cols() == e.cols(), "latent shape mismatch");
  VqLoss l;
  l.beta = beta;
  l.reconstruction = (x - xhat).squaredNorm() / static_cast<double>(x.size());
  l.codebook_term = (z - e).squaredNorm() / static_cast<double>(z.size());
  l.commitment_term = l.codebook_term;
  l.total = l.reconstruction + l.codebook_term + beta * l.commitment_term;
  return l;
}

// -------------------------------------------------------------------- model

// Frame-level encoder (two same convs around one stride-2 conv, then a
// linear head), codebook, and a frame decoder conditioned on a speaker
// embedding. Features are standardized with corpus statistics held by the
// model.
class VqvaeModel {
 public:
  VqvaeConfig config;
  ad::ParamStore params;
  std::vector<std::string> speakers;
  Eigen::RowVectorXd feat_mean;
  Eigen::RowVectorXd feat_std;
  long trained_steps = 0;

  VqvaeModel() = default;
  VqvaeModel(VqvaeModel&&) = default;
  VqvaeModel& operator=(VqvaeModel&&) = default;

  static VqvaeModel build(const VqvaeConfig& cfg, std::vector<std::string> speaker_ids) {
    VQTTS_REQUIRE(cfg.codebook_size >= 2, "codebook_size must be >= 2");
    VQTTS_REQUIRE(cfg.latent_dim >= 1, "latent_dim must be >= 1");
    VQTTS_REQUIRE(!speaker_ids.empty(), "need at least one speaker");
    VQTTS_REQUIRE(cfg.downsample == 2, "encoder is built with a single stride-2 layer");
    VqvaeModel m;
    m.config = cfg;
    m.speakers = std::move(speaker_ids);
    m.feat_mean = Eigen::RowVectorXd::Zero(kMfccDim);
    m.feat_std = Eigen::RowVectorXd::Ones(kMfccDim);

    Rng rng = Rng(cfg.seed).derive("vqvae_init");
    const int h = cfg.encoder_hidden;
    auto& p = m.params;
    p.add_glorot("encoder.conv1.w", 3 * kMfccDim, h, rng);
    p.add("encoder.conv1.b", 1, h);
    p.add_glorot("encoder.conv2.w", 3 * h, h, rng);
    p.add("encoder.conv2.b", 1, h);
    p.add_glorot("encoder.conv3.w", 3 * h, h, rng);
    p.add("encoder.conv3.b", 1, h);
    p.add_glorot("encoder.proj.w", h, cfg.latent_dim, rng);
    p.add("encoder.proj.b", 1, cfg.latent_dim);

    const double cb_range = 1.0 / cfg.codebook_size;
    p.add_uniform("codebook", cfg.codebook_size, cfg.latent_dim, -cb_range, cb_range, rng);

    p.add_uniform("speaker_table", static_cast<Eigen::Index>(m.speakers.size()),
                  cfg.speaker_dim, -0.1, 0.1, rng);

    p.add_glorot("decoder.conv1.w", 3 * (cfg.latent_dim + cfg.speaker_dim), h, rng);
    p.add("decoder.conv1.b", 1, h);
    p.add_glorot("decoder.conv2.w", 3 * h, h, rng);
    p.add("decoder.conv2.b", 1, h);
    p.add_glorot("decoder.out.w", h, kMfccDim, rng);
    p.add("decoder.out.b", 1, kMfccDim);
    return m;
  }

  Codebook codebook() { return Codebook{params.at("codebook").value}; }

  int speaker_row(const std::string& speaker) const {
    for (std::size_t i = 0; i < speakers.size(); ++i)
      if (speakers[i] == speaker) return static_cast<int>(i);
    throw LookupError("unknown speaker: " + speaker);
  }

  Mat normalize(const Mat& feats) const {
    Mat out = feats;
    out.rowwise() -= feat_mean;
    out.array().rowwise() /= feat_std.array();
    return out;
  }

  Mat denormalize(const Mat& feats) const {
    Mat out = feats;
    out.array().rowwise() *= feat_std.array();
    out.rowwise() += feat_mean;
    return out;
  }

  // Latent sequence z_1..N for standardized features; N = ceil(T / 2).
  Var encode_tape(Tape& t, const Mat& feats_norm) {
    VQTTS_REQUIRE(feats_norm.cols() == kMfccDim,
                  "encoder expects 39-dim features");
    auto& p = params;
    Var x = ad::constant(t, feats_norm);
    Var h = ad::relu_(ad::conv1d(x, ad::param(t, p.at("encoder.conv1.w")),
                                 ad::param(t, p.at("encoder.conv1.b")), 3, 1));
    h = ad::relu_(ad::conv1d(h, ad::param(t, p.at("encoder.conv2.w")),
                             ad::param(t, p.at("encoder.conv2.b")), 3, 2));
    h = ad::relu_(ad::conv1d(h, ad::param(t, p.at("encoder.conv3.w")),
                             ad::param(t, p.at("encoder.conv3.b")), 3, 1));
    return ad::affine(h, ad::param(t, p.at("encoder.proj.w")),
                      ad::param(t, p.at("encoder.proj.b")));
  }

  // Inference-mode encoding (no jitter, codebook untouched).
  Mat encode(const MfccFrames& feats) {
    Tape t;
    return encode_tape(t, normalize(feats.frames)).value();
  }

  // Quantized latents (N x D) -> standardized feature frames (2N x 39).
  Var decode_tape(Tape& t, const Var& zq, int speaker_row_idx) {
    auto& p = params;
    Var up = ad::repeat_rows(zq, config.downsample);
    const std::vector<int> spk_ids(static_cast<std::size_t>(up.rows()), speaker_row_idx);
    Var spk = ad::embed(t, p.at("speaker_table"), spk_ids);
    Var h = ad::concat_cols(up, spk);
    h = ad::relu_(ad::conv1d(h, ad::param(t, p.at("decoder.conv1.w")),
                             ad::param(t, p.at("decoder.conv1.b")), 3, 1));
    h = ad::relu_(ad::conv1d(h, ad::param(t, p.at("decoder.conv2.w")),
                             ad::param(t, p.at("decoder.conv2.b")), 3, 1));
    return ad::affine(h, ad::param(t, p.at("decoder.out.w")),
                      ad::param(t, p.at("decoder.out.b")));
  }

  // Feature-domain reconstruction from quantized latents.
  Mat reconstruct(const Mat& zq, const std::string& speaker) {
    const int row = speaker_row(speaker);
    Tape t;
    Var y = decode_tape(t, ad::constant(t, zq), row);
    return denormalize(y.value());
  }
};

// ---------------------------------------------------------------- training

struct VqTrainLogRow {
  long step = 0;
  double recon = 0.0;
  double codebook = 0.0;
  double commit = 0.0;
  double total = 0.0;
  double usage = 0.0;  // distinct codes selected this step / C
};

struct VqTrainResult {
  VqvaeModel model;
  std::vector<VqTrainLogRow> log;
};

inline void write_vq_log_csv(const std::string& path, const std::vector<VqTrainLogRow>& log) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write training log: " + path);
  f << "step,recon,codebook,commit,total,codebook_usage\n";
  f.precision(10);
  for (const auto& r : log)
    f << r.step << ',' << r.recon << ',' << r.codebook << ',' << r.commit << ','
      << r.total << ',' << r.usage << '\n';
}

namespace detail {

struct Segment {
  Mat feats;  // segment_frames x 39, standardized
  int speaker_row = 0;
};

}  // namespace detail

// Step 1 of the pipeline: fit the quantized autoencoder on untranscribed
// speech. Per-step batches, jitter and initialization all derive from
// config.seed, so a rerun reproduces the model bit for bit.
inline VqTrainResult train_vqvae(const data::Manifest& corpus, const VqvaeConfig& cfg) {
  VQTTS_REQUIRE(!corpus.records.empty(), "training corpus is empty");
  VQTTS_REQUIRE(cfg.segment_frames % cfg.downsample == 0,
                "segment_frames must be divisible by the downsample factor");

  // Pass 1: features and corpus statistics.
  std::vector<std::string> speaker_ids;
  {
    std::set<std::string> spk;
    for (const auto& r : corpus.records) spk.insert(r.speaker);
    speaker_ids.assign(spk.begin(), spk.end());
  }
  VqvaeModel model = VqvaeModel::build(cfg, speaker_ids);

  std::vector<Mat> feats_per_utt;
  std::vector<int> speaker_per_utt;
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(kMfccDim);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(kMfccDim);
  long n_frames = 0;
  for (const auto& r : corpus.records) {
    const WavData wav = read_wav(r.audio_path);
    VQTTS_REQUIRE(wav.sample_rate == cfg.sample_rate,
                  "sample rate mismatch for " + r.id);
    Waveform w{wav.samples, wav.sample_rate};
    if (static_cast<long>(w.samples.size()) < cfg.frame.window_len) continue;
    const MfccFrames f = mfcc(w, cfg.frame);
    mean += f.frames.colwise().sum();
    sq += f.frames.array().square().matrix().colwise().sum();
    n_frames += f.frames.rows();
    feats_per_utt.push_back(f.frames);
    speaker_per_utt.push_back(model.speaker_row(r.speaker));
  }
  VQTTS_REQUIRE(n_frames > 0, "no usable audio in the training corpus");
  mean /= static_cast<double>(n_frames);
  sq /= static_cast<double>(n_frames);
  model.feat_mean = mean;
  model.feat_std =
      (sq - mean.cwiseProduct(mean)).cwiseMax(1e-8).cwiseSqrt();

  // Fixed-length standardized segments.
  std::vector<detail::Segment> segments;
  for (std::size_t u = 0; u < feats_per_utt.size(); ++u) {
    const Mat norm = model.normalize(feats_per_utt[u]);
    const auto T = norm.rows();
    for (Eigen::Index s = 0; s + cfg.segment_frames <= T; s += cfg.segment_frames)
      segments.push_back({norm.middleRows(s, cfg.segment_frames), speaker_per_utt[u]});
  }
  VQTTS_REQUIRE(!segments.empty(),
                "corpus has no utterance reaching one training segment");

  ad::Adam opt(cfg.learning_rate, cfg.grad_clip);
  ad::Tensor& codebook_tensor = model.params.at("codebook");
  const Rng base(cfg.seed);

  VqTrainResult result;
  result.log.reserve(static_cast<std::size_t>(cfg.steps));
  for (long step = 1; step <= cfg.steps; ++step) {
    Rng step_rng = base.derive("vqvae_step", static_cast<std::uint64_t>(step));
    VqTrainLogRow row;
    row.step = step;
    std::set<int> used;

    for (int b = 0; b < cfg.batch_size; ++b) {
      const auto seg_idx = static_cast<std::size_t>(
          step_rng.uniform_int(0, static_cast<std::int64_t>(segments.size()) - 1));
      const detail::Segment& seg = segments[seg_idx];

      Tape tape;
      Var z = model.encode_tape(tape, seg.feats);
      const Codebook cb{codebook_tensor.value};
      const std::vector<int> ks = quantize_indices(z.value(), cb);
      used.insert(ks.begin(), ks.end());
      Mat e_sel(z.rows(), z.cols());
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        e_sel.row(i) = codebook_tensor.value.row(ks[static_cast<std::size_t>(i)]);

      const auto jmap = jitter_map(static_cast<int>(z.rows()), cfg.jitter_p, step_rng);

      Var st = ad::straight_through(z, e_sel);
      Var dec_in = ad::gather_rows(st, jmap);
      Var y = model.decode_tape(tape, dec_in, seg.speaker_row);
      Var recon = ad::mse(y, seg.feats);
      Var cb_term = ad::mse(ad::embed(tape, codebook_tensor, ks), ad::detach(z));
      Var commit = ad::mse(z, ad::constant(tape, e_sel));
      Var total = ad::add(ad::add(recon, cb_term), ad::scale(commit, cfg.beta));
      Var scaled = ad::scale(total, 1.0 / cfg.batch_size);
      tape.backward(scaled);

      row.recon += recon.value()(0, 0);
      row.codebook += cb_term.value()(0, 0);
      row.commit += commit.value()(0, 0);
      row.total += total.value()(0, 0);
    }
    opt.step(model.params);

    const double inv_b = 1.0 / cfg.batch_size;
    row.recon *= inv_b;
    row.codebook *= inv_b;
    row.commit *= inv_b;
    row.total *= inv_b;
    row.usage = static_cast<double>(used.size()) / cfg.codebook_size;
    result.log.push_back(row);
  }
  model.trained_steps = cfg.steps;
  result.model = std::move(model);
  return result;
}

// ------------------------------------------------------------- checkpoints

inline void save_vqvae(const VqvaeModel& model, const std::string& path) {
  Checkpoint ck;
  ck.meta["kind"] = "vqvae";
  ck.meta["version"] = kVersion;
  ck.meta["config"] = model.config.to_json();
  ck.meta["config_hash"] = hash_hex(model.config.hash());
  ck.meta["speakers"] = model.speakers;
  ck.meta["seed"] = model.config.seed;
  ck.meta["step"] = model.trained_steps;
  ck.meta["feat_mean"] = std::vector<double>(model.feat_mean.data(),
                                             model.feat_mean.data() + model.feat_mean.size());
  ck.meta["feat_std"] = std::vector<double>(model.feat_std.data(),
                                            model.feat_std.data() + model.feat_std.size());
  ad::params_to_checkpoint(model.params, ck);
  save_checkpoint(path, ck);
}

inline VqvaeModel load_vqvae(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (!ck.meta.contains("kind") || ck.meta["kind"] != "vqvae")
    throw IoError("not a vqvae checkpoint: " + path);
  const VqvaeConfig cfg = VqvaeConfig::from_json(ck.meta.at("config"));
  VqvaeModel model = VqvaeModel::build(cfg, ck.meta.at("speakers").get<std::vector<std::string>>());
  ad::params_from_checkpoint(model.params, ck);
  const auto mean = ck.meta.at("feat_mean").get<std::vector<double>>();
  const auto std_ = ck.meta.at("feat_std").get<std::vector<double>>();
  VQTTS_REQUIRE(mean.size() == kMfccDim && std_.size() == kMfccDim,
                "corrupt feature statistics in " + path);
  model.feat_mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), kMfccDim);
  model.feat_std = Eigen::Map<const Eigen::RowVectorXd>(std_.data(), kMfccDim);
  model.trained_steps = ck.meta.value("step", 0L);
  return model;
}

}  // namespace vqtts::vq
