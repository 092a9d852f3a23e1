// include/vqtts/tts.hpp

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

namespace vqtts::tts {

using ad::Mat;
using ad::Tape;
using ad::Var;

// ------------------------------------------------------------ symbol table

enum class SymbolKind { kUnit, kPhoneme, kGrapheme };

inline std::string symbol_kind_name(SymbolKind k) {
  switch (k) {
    case SymbolKind::kUnit: return "unit";
    case SymbolKind::kPhoneme: return "phoneme";
    case SymbolKind::kGrapheme: return "grapheme";
  }
  return "?";
}

inline SymbolKind symbol_kind_from_name(const std::string& s) {
  if (s == "unit") return SymbolKind::kUnit;
  if (s == "phoneme") return SymbolKind::kPhoneme;
  if (s == "grapheme") return SymbolKind::kGrapheme;
  throw InvalidInput("unknown symbol kind: " + s);
}

// Vocabulary with fixed special slots: 0 = padding, 1 = end-of-sequence.
// The embedding matrix itself lives in the model parameter store so tables
// of any kind stay interchangeable.
struct SymbolTable {
  SymbolKind kind = SymbolKind::kPhoneme;
  std::vector<std::string> symbols;  // includes "<pad>", "<eos>"

  static constexpr int kPadId = 0;
  static constexpr int kEosId = 1;

  static SymbolTable units(int codebook_size) {
    SymbolTable t;
    t.kind = SymbolKind::kUnit;
    t.symbols = {"<pad>", "<eos>"};
    for (int i = 0; i < codebook_size; ++i) t.symbols.push_back(std::to_string(i));
    return t;
  }

  static SymbolTable phonemes(const std::vector<std::string>& inventory) {
    SymbolTable t;
    t.kind = SymbolKind::kPhoneme;
    t.symbols = {"<pad>", "<eos>"};
    std::set<std::string> seen;
    for (const auto& p : inventory) {
      VQTTS_REQUIRE(seen.insert(p).second, "duplicate symbol in inventory: " + p);
      t.symbols.push_back(p);
    }
    return t;
  }

  int size() const { return static_cast<int>(symbols.size()); }

  int id(const std::string& sym) const {
    for (std::size_t i = 0; i < symbols.size(); ++i)
      if (symbols[i] == sym) return static_cast<int>(i);
    throw LookupError("symbol not in table: " + sym);
  }

  // Symbol names -> ids with EOS appended; unit and phoneme sequences share
  // the same convention.
  std::vector<int> encode(const std::vector<std::string>& seq) const {
    VQTTS_REQUIRE(!seq.empty(), "empty symbol sequence");
    std::vector<int> ids;
    ids.reserve(seq.size() + 1);
    for (const auto& s : seq) ids.push_back(id(s));
    ids.push_back(kEosId);
    return ids;
  }

  std::uint64_t vocab_hash() const {
    std::uint64_t h = fnv1a64(symbol_kind_name(kind));
    for (const auto& s : symbols) h = fnv1a64(s + "\x1f", h);
    return h;
  }

  nlohmann::json to_json() const {
    return {{"kind", symbol_kind_name(kind)}, {"symbols", symbols}};
  }

  static SymbolTable from_json(const nlohmann::json& j) {
    SymbolTable t;
    t.kind = symbol_kind_from_name(j.at("kind"));
    t.symbols = j.at("symbols").get<std::vector<std::string>>();
    return t;
  }
};

// ------------------------------------------------------------------ config

struct TtsConfig {
  int embed_dim = 128;
  int enc_channels = 128;
  int enc_kernel = 5;
  int enc_layers = 2;
  int enc_gru = 64;  // per direction; memory width = 2 * enc_gru
  int attn_dim = 128;
  int loc_filters = 32;
  int loc_kernel = 31;
  int prenet_dim = 64;
  int attn_rnn_dim = 128;
  int dec_rnn_dim = 128;
  int n_mels = 80;
  int reduction = 2;  // spectrogram frames per decoder step
  int postnet_channels = 128;
  int postnet_kernel = 5;
  int postnet_layers = 3;
  double stop_pos_weight = 5.0;
  double stop_threshold = 0.5;
  int max_steps = 400;
  int speaker_dim = 0;  // 0 disables speaker conditioning
  double learning_rate = 1e-3;
  double grad_clip = 1.0;
  long steps = 2000;
  int batch_size = 8;
  std::uint64_t seed = 1;
  int sample_rate = 16000;
  int griffin_lim_iters = 60;
  FrameConfig frame;

  nlohmann::json to_json() const {
    return {{"embed_dim", embed_dim},
            {"enc_channels", enc_channels},
            {"enc_kernel", enc_kernel},
            {"enc_layers", enc_layers},
            {"enc_gru", enc_gru},
            {"attn_dim", attn_dim},
            {"loc_filters", loc_filters},
            {"loc_kernel", loc_kernel},
            {"prenet_dim", prenet_dim},
            {"attn_rnn_dim", attn_rnn_dim},
            {"dec_rnn_dim", dec_rnn_dim},
            {"n_mels", n_mels},
            {"reduction", reduction},
            {"postnet_channels", postnet_channels},
            {"postnet_kernel", postnet_kernel},
            {"postnet_layers", postnet_layers},
            {"stop_pos_weight", stop_pos_weight},
            {"stop_threshold", stop_threshold},
            {"max_steps", max_steps},
            {"speaker_dim", speaker_dim},
            {"learning_rate", learning_rate},
            {"grad_clip", grad_clip},
            {"steps", steps},
            {"batch_size", batch_size},
            {"seed", seed},
            {"sample_rate", sample_rate},
            {"griffin_lim_iters", griffin_lim_iters},
            {"fft_size", frame.fft_size},
            {"hop", frame.hop},
            {"window_len", frame.window_len},
            {"window", window_name(frame.window)}};
  }

  static TtsConfig from_json(const nlohmann::json& j) {
    TtsConfig c;
    c.embed_dim = j.at("embed_dim");
    c.enc_channels = j.at("enc_channels");
    c.enc_kernel = j.at("enc_kernel");
    c.enc_layers = j.at("enc_layers");
    c.enc_gru = j.at("enc_gru");
    c.attn_dim = j.at("attn_dim");
    c.loc_filters = j.at("loc_filters");
    c.loc_kernel = j.at("loc_kernel");
    c.prenet_dim = j.at("prenet_dim");
    c.attn_rnn_dim = j.at("attn_rnn_dim");
    c.dec_rnn_dim = j.at("dec_rnn_dim");
    c.n_mels = j.at("n_mels");
    c.reduction = j.at("reduction");
    c.postnet_channels = j.at("postnet_channels");
    c.postnet_kernel = j.at("postnet_kernel");
    c.postnet_layers = j.at("postnet_layers");
    c.stop_pos_weight = j.at("stop_pos_weight");
    c.stop_threshold = j.at("stop_threshold");
    c.max_steps = j.at("max_steps");
    c.speaker_dim = j.at("speaker_dim");
    c.learning_rate = j.at("learning_rate");
    c.grad_clip = j.at("grad_clip");
    c.steps = j.at("steps");
    c.batch_size = j.at("batch_size");
    c.seed = j.at("seed");
    c.sample_rate = j.at("sample_rate");
    c.griffin_lim_iters = j.at("griffin_lim_iters");
    c.frame.fft_size = j.at("fft_size");
    c.frame.hop = j.at("hop");
    c.frame.window_len = j.at("window_len");
    c.frame.window = window_from_name(j.at("window"));
    return c;
  }

  std::uint64_t hash() const { return fnv1a64(to_json().dump()); }
  std::uint64_t audio_hash() const {
    return fnv1a64(std::to_string(n_mels) + "@" + std::to_string(sample_rate), frame.hash());
  }
};

// --------------------------------------------------------------------- GRU

struct GruParams {
  ad::Tensor* wxz;
  ad::Tensor* whz;
  ad::Tensor* bz;
  ad::Tensor* wxr;
  ad::Tensor* whr;
  ad::Tensor* br;
  ad::Tensor* wxh;
  ad::Tensor* whh;
  ad::Tensor* bh;
};

inline void add_gru(ad::ParamStore& p, const std::string& prefix, int in, int hidden,
                    Rng& rng) {
  p.add_glorot(prefix + ".wxz", in, hidden, rng);
  p.add_glorot(prefix + ".whz", hidden, hidden, rng);
  p.add(prefix + ".bz", 1, hidden);
  p.add_glorot(prefix + ".wxr", in, hidden, rng);
  p.add_glorot(prefix + ".whr", hidden, hidden, rng);
  p.add(prefix + ".br", 1, hidden);
  p.add_glorot(prefix + ".wxh", in, hidden, rng);
  p.add_glorot(prefix + ".whh", hidden, hidden, rng);
  p.add(prefix + ".bh", 1, hidden);
}

inline GruParams gru_view(ad::ParamStore& p, const std::string& prefix) {
  return {&p.at(prefix + ".wxz"), &p.at(prefix + ".whz"), &p.at(prefix + ".bz"),
          &p.at(prefix + ".wxr"), &p.at(prefix + ".whr"), &p.at(prefix + ".br"),
          &p.at(prefix + ".wxh"), &p.at(prefix + ".whh"), &p.at(prefix + ".bh")};
}

inline Var gru_step(Tape& t, const GruParams& g, const Var& x, const Var& h) {
  using namespace ad;
  Var z = sigmoid_(add(add(matmul(x, param(t, *g.wxz)), matmul(h, param(t, *g.whz))),
                       param(t, *g.bz)));
  Var r = sigmoid_(add(add(matmul(x, param(t, *g.wxr)), matmul(h, param(t, *g.whr))),
                       param(t, *g.br)));
  Var hc = tanh_(add(add(matmul(x, param(t, *g.wxh)), matmul(cmul(r, h), param(t, *g.whh))),
                     param(t, *g.bh)));
  return add(h, cmul(z, sub(hc, h)));
}

// ----------------------------------------------------- location attention

// Alignment state carried between decoder steps.
struct AttentionState {
  Eigen::VectorXd alignment;
  Eigen::VectorXd cumulative;

  void validate() const {
    VQTTS_REQUIRE(std::abs(alignment.sum() - 1.0) < 1e-6 || alignment.sum() == 0.0,
                  "alignment does not sum to 1");
    VQTTS_REQUIRE((alignment.array() >= 0.0).all(), "negative alignment entry");
  }
};

struct AttentionParams {
  ad::Tensor* query_w;    // query dim x attn_dim
  ad::Tensor* memory_w;   // memory dim x attn_dim
  ad::Tensor* loc_conv_w; // (loc_kernel*2) x loc_filters
  ad::Tensor* loc_conv_b; // 1 x loc_filters
  ad::Tensor* loc_proj_w; // loc_filters x attn_dim
  ad::Tensor* bias;       // 1 x attn_dim
  ad::Tensor* v;          // attn_dim x 1
  int loc_kernel = 31;
};

inline void add_attention(ad::ParamStore& p, const std::string& prefix, int query_dim,
                          int memory_dim, int attn_dim, int loc_filters, int loc_kernel,
                          Rng& rng) {
  p.add_glorot(prefix + ".query_w", query_dim, attn_dim, rng);
  p.add_glorot(prefix + ".memory_w", memory_dim, attn_dim, rng);
  p.add_glorot(prefix + ".loc_conv_w", loc_kernel * 2, loc_filters, rng);
  p.add(prefix + ".loc_conv_b", 1, loc_filters);
  p.add_glorot(prefix + ".loc_proj_w", loc_filters, attn_dim, rng);
  p.add(prefix + ".bias", 1, attn_dim);
  p.add_glorot(prefix + ".v", attn_dim, 1, rng);
}

inline AttentionParams attention_view(ad::ParamStore& p, const std::string& prefix,
                                      int loc_kernel) {
  return {&p.at(prefix + ".query_w"), &p.at(prefix + ".memory_w"),
          &p.at(prefix + ".loc_conv_w"), &p.at(prefix + ".loc_conv_b"),
          &p.at(prefix + ".loc_proj_w"), &p.at(prefix + ".bias"), &p.at(prefix + ".v"),
          loc_kernel};
}

struct AttentionTapeStep {
  Var context;    // 1 x memory dim
  Var alignment;  // L x 1, softmax output
  Var cumulative; // L x 1
};

// One location-sensitive attention step on the tape. Energies combine the
// projected query, projected memory, and convolved features of the previous
// and cumulative alignments.
inline AttentionTapeStep lsa_attention_step_tape(Tape& t, const AttentionParams& ap,
                                                 const Var& query, const Var& memory,
                                                 const Var& memory_proj, const Var& align,
                                                 const Var& cumulative) {
  using namespace ad;
  VQTTS_REQUIRE(memory.rows() > 0, "attention memory is empty");
  VQTTS_REQUIRE(align.rows() == memory.rows(), "alignment length mismatch");
  Var loc_in = concat_cols(align, cumulative);  // L x 2
  Var f = conv1d(loc_in, param(t, *ap.loc_conv_w), param(t, *ap.loc_conv_b),
                 ap.loc_kernel, 1);
  Var loc_term = matmul(f, param(t, *ap.loc_proj_w));           // L x A
  Var q_term = add(matmul(query, param(t, *ap.query_w)),
                   param(t, *ap.bias));                          // 1 x A
  Var hidden = tanh_(add_row_broadcast(add(memory_proj, loc_term), q_term));
  Var energies = matmul(hidden, param(t, *ap.v));                // L x 1
  Var new_align = softmax_vec(energies);
  Var context = matmul_tn(new_align, memory);                    // 1 x M
  Var new_cum = add(cumulative, new_align);
  return {context, new_align, new_cum};
}

struct AttentionStepResult {
  Eigen::RowVectorXd context;
  AttentionState state;
};

// Value-level wrapper around the tape step (the inference/unit-test surface).
inline AttentionStepResult lsa_attention_step(ad::ParamStore& params,
                                              const std::string& prefix, int loc_kernel,
                                              const Eigen::RowVectorXd& query,
                                              const Mat& memory,
                                              const AttentionState& state) {
  VQTTS_REQUIRE(memory.rows() > 0, "attention memory is empty");
  VQTTS_REQUIRE(state.alignment.size() == memory.rows() &&
                    state.cumulative.size() == memory.rows(),
                "attention state length mismatch");
  AttentionParams ap = attention_view(params, prefix, loc_kernel);
  Tape t;
  Var mem = ad::constant(t, memory);
  Var mem_proj = ad::matmul(mem, ad::param(t, *ap.memory_w));
  const auto step = lsa_attention_step_tape(
      t, ap, ad::constant(t, query), mem, mem_proj, ad::constant(t, state.alignment),
      ad::constant(t, state.cumulative));
  AttentionStepResult out;
  out.context = step.context.value().row(0);
  out.state.alignment = step.alignment.value().col(0);
  out.state.cumulative = step.cumulative.value().col(0);
  return out;
}

// ------------------------------------------------------------------- model

enum class StopReason { kStop, kMaxSteps };

struct InferResult {
  MelSpectrogram mel;
  StopReason reason = StopReason::kMaxSteps;
  Mat alignments;  // decoder steps x L
};

struct ForwardResult {
  Var pre_mel;      // padded frames x n_mels (standardized domain)
  Var post_mel;     // same shape, postnet residual added
  Var stop_logits;  // decoder steps x 1
  Mat alignments;   // decoder steps x L
};

// Tacotron-style acoustic model with a swappable input symbol table.
// Parameter groups: symbol_embedding, encoder.*, attention.*, decoder.*,
// postnet.*, speaker_table.
class AcousticModel {
 public:
  TtsConfig config;
  SymbolTable table;
  std::vector<std::string> speakers;  // empty when speaker conditioning is off
  ad::ParamStore params;
  Eigen::RowVectorXd mel_mean;
  Eigen::RowVectorXd mel_std;
  long trained_steps = 0;
  std::string phase = "pretrain";

  AcousticModel() = default;
  AcousticModel(AcousticModel&&) = default;
  AcousticModel& operator=(AcousticModel&&) = default;

  static AcousticModel build(const TtsConfig& cfg, SymbolTable table,
                             std::vector<std::string> speaker_ids = {}) {
    VQTTS_REQUIRE(cfg.reduction >= 1, "reduction factor must be >= 1");
    VQTTS_REQUIRE(cfg.speaker_dim == 0 || !speaker_ids.empty(),
                  "speaker conditioning enabled but no speakers given");
    AcousticModel m;
    m.config = cfg;
    m.table = std::move(table);
    m.speakers = std::move(speaker_ids);
    m.mel_mean = Eigen::RowVectorXd::Zero(cfg.n_mels);
    m.mel_std = Eigen::RowVectorXd::Ones(cfg.n_mels);

    Rng rng = Rng(cfg.seed).derive("tts_init");
    auto& p = m.params;
    p.add_uniform("symbol_embedding", m.table.size(), cfg.embed_dim, -0.1, 0.1, rng);

    int in_ch = cfg.embed_dim;
    for (int l = 1; l <= cfg.enc_layers; ++l) {
      p.add_glorot("encoder.conv" + std::to_string(l) + ".w", cfg.enc_kernel * in_ch,
                   cfg.enc_channels, rng);
      p.add("encoder.conv" + std::to_string(l) + ".b", 1, cfg.enc_channels);
      in_ch = cfg.enc_channels;
    }
    add_gru(p, "encoder.fwd", cfg.enc_channels, cfg.enc_gru, rng);
    add_gru(p, "encoder.bwd", cfg.enc_channels, cfg.enc_gru, rng);

    const int memory_dim = 2 * cfg.enc_gru;
    add_attention(p, "attention", cfg.attn_rnn_dim, memory_dim, cfg.attn_dim,
                  cfg.loc_filters, cfg.loc_kernel, rng);

    p.add_glorot("decoder.prenet.fc1.w", cfg.n_mels, cfg.prenet_dim, rng);
    p.add("decoder.prenet.fc1.b", 1, cfg.prenet_dim);
    p.add_glorot("decoder.prenet.fc2.w", cfg.prenet_dim, cfg.prenet_dim, rng);
    p.add("decoder.prenet.fc2.b", 1, cfg.prenet_dim);

    const int attn_in = cfg.prenet_dim + memory_dim + cfg.speaker_dim;
    add_gru(p, "decoder.attn_rnn", attn_in, cfg.attn_rnn_dim, rng);
    add_gru(p, "decoder.dec_rnn", cfg.attn_rnn_dim + memory_dim, cfg.dec_rnn_dim, rng);

    const int proj_in = cfg.dec_rnn_dim + memory_dim;
    p.add_glorot("decoder.mel_out.w", proj_in, cfg.n_mels * cfg.reduction, rng);
    p.add("decoder.mel_out.b", 1, cfg.n_mels * cfg.reduction);
    p.add_glorot("decoder.stop.w", proj_in, 1, rng);
    p.add("decoder.stop.b", 1, 1);

    int pin = cfg.n_mels;
    for (int l = 1; l <= cfg.postnet_layers; ++l) {
      const int pout = l == cfg.postnet_layers ? cfg.n_mels : cfg.postnet_channels;
      p.add_glorot("postnet.conv" + std::to_string(l) + ".w", cfg.postnet_kernel * pin,
                   pout, rng);
      p.add("postnet.conv" + std::to_string(l) + ".b", 1, pout);
      pin = pout;
    }

    if (cfg.speaker_dim > 0)
      p.add_uniform("speaker_table", static_cast<Eigen::Index>(m.speakers.size()),
                    cfg.speaker_dim, -0.1, 0.1, rng);
    return m;
  }

  int speaker_row(const std::string& speaker) const {
    for (std::size_t i = 0; i < speakers.size(); ++i)
      if (speakers[i] == speaker) return static_cast<int>(i);
    throw LookupError("unknown speaker: " + speaker);
  }

  Mat normalize_mel(const Mat& mel) const {
    Mat out = mel;
    out.rowwise() -= mel_mean;
    out.array().rowwise() /= mel_std.array();
    return out;
  }

  Mat denormalize_mel(const Mat& mel) const {
    Mat out = mel;
    out.array().rowwise() *= mel_std.array();
    out.rowwise() += mel_mean;
    return out;
  }

  // Symbol ids -> encoder memory (L x 2*enc_gru).
  Var encode_symbols_tape(Tape& t, const std::vector<int>& ids) {
    VQTTS_REQUIRE(!ids.empty(), "empty symbol sequence");
    for (int id : ids)
      if (id < 0 || id >= table.size())
        throw LookupError("symbol id out of vocabulary: " + std::to_string(id));
    using namespace ad;
    Var x = embed(t, params.at("symbol_embedding"), ids);
    for (int l = 1; l <= config.enc_layers; ++l) {
      x = relu_(conv1d(x, param(t, params.at("encoder.conv" + std::to_string(l) + ".w")),
                       param(t, params.at("encoder.conv" + std::to_string(l) + ".b")),
                       config.enc_kernel, 1));
    }
    const auto L = x.rows();
    const GruParams fwd = gru_view(params, "encoder.fwd");
    const GruParams bwd = gru_view(params, "encoder.bwd");
    std::vector<Var> fsteps(static_cast<std::size_t>(L)), bsteps(static_cast<std::size_t>(L));
    Var hf = constant(t, Mat::Zero(1, config.enc_gru));
    for (Eigen::Index i = 0; i < L; ++i) {
      hf = gru_step(t, fwd, rows(x, i, 1), hf);
      fsteps[static_cast<std::size_t>(i)] = hf;
    }
    Var hb = constant(t, Mat::Zero(1, config.enc_gru));
    for (Eigen::Index i = L - 1; i >= 0; --i) {
      hb = gru_step(t, bwd, rows(x, i, 1), hb);
      bsteps[static_cast<std::size_t>(i)] = hb;
    }
    return concat_cols(concat_rows(t, fsteps), concat_rows(t, bsteps));
  }

  Var postnet_tape(Tape& t, const Var& mel) {
    using namespace ad;
    Var h = mel;
    for (int l = 1; l <= config.postnet_layers; ++l) {
      h = conv1d(h, param(t, params.at("postnet.conv" + std::to_string(l) + ".w")),
                 param(t, params.at("postnet.conv" + std::to_string(l) + ".b")),
                 config.postnet_kernel, 1);
      if (l < config.postnet_layers) h = tanh_(h);
    }
    return add(mel, h);
  }

  Var prenet_tape(Tape& t, const Var& frame) {
    using namespace ad;
    Var h = relu_(affine(frame, param(t, params.at("decoder.prenet.fc1.w")),
                         param(t, params.at("decoder.prenet.fc1.b"))));
    return relu_(affine(h, param(t, params.at("decoder.prenet.fc2.w")),
                        param(t, params.at("decoder.prenet.fc2.b"))));
  }

  // Teacher-forced pass. `targets_norm` is standardized log-mel, one row per
  // frame; frame count is padded up to a multiple of the reduction factor.
  ForwardResult forward_teacher_forced(Tape& t, const std::vector<int>& ids,
                                       const Mat& targets_norm, int speaker_row_idx = -1) {
    using namespace ad;
    VQTTS_REQUIRE(targets_norm.rows() > 0, "empty target spectrogram");
    VQTTS_REQUIRE(targets_norm.cols() == config.n_mels, "target mel width mismatch");
    VQTTS_REQUIRE(config.speaker_dim == 0 || speaker_row_idx >= 0,
                  "speaker row required when speaker conditioning is on");

    const int r = config.reduction;
    const auto T = targets_norm.rows();
    const auto groups = (T + r - 1) / r;
    Mat padded = Mat::Zero(groups * r, config.n_mels);
    padded.topRows(T) = targets_norm;

    Var memory = encode_symbols_tape(t, ids);
    const AttentionParams ap = attention_view(params, "attention", config.loc_kernel);
    Var memory_proj = matmul(memory, param(t, *ap.memory_w));
    const GruParams attn_rnn = gru_view(params, "decoder.attn_rnn");
    const GruParams dec_rnn = gru_view(params, "decoder.dec_rnn");
    const auto L = memory.rows();

    Var align = constant(t, Mat::Zero(L, 1));
    Var cum = constant(t, Mat::Zero(L, 1));
    Var attn_h = constant(t, Mat::Zero(1, config.attn_rnn_dim));
    Var dec_h = constant(t, Mat::Zero(1, config.dec_rnn_dim));
    Var context = constant(t, Mat::Zero(1, 2 * config.enc_gru));
    Var spk;
    if (config.speaker_dim > 0)
      spk = embed(t, params.at("speaker_table"), {speaker_row_idx});

    ForwardResult res;
    res.alignments = Mat::Zero(groups, L);
    std::vector<Var> mel_groups(static_cast<std::size_t>(groups));
    std::vector<Var> stop_logits(static_cast<std::size_t>(groups));

    for (Eigen::Index g = 0; g < groups; ++g) {
      Var prev = g == 0 ? constant(t, Mat::Zero(1, config.n_mels))
                        : constant(t, padded.row(g * r - 1));
      Var pn = prenet_tape(t, prev);
      Var x = concat_cols(pn, context);
      if (config.speaker_dim > 0) x = concat_cols(x, spk);
      attn_h = gru_step(t, attn_rnn, x, attn_h);
      const auto step = lsa_attention_step_tape(t, ap, attn_h, memory, memory_proj,
                                                align, cum);
      context = step.context;
      align = step.alignment;
      cum = step.cumulative;
      res.alignments.row(g) = align.value().transpose();

      dec_h = gru_step(t, dec_rnn, concat_cols(attn_h, context), dec_h);
      Var proj_in = concat_cols(dec_h, context);
      Var flat = affine(proj_in, param(t, params.at("decoder.mel_out.w")),
                        param(t, params.at("decoder.mel_out.b")));
      mel_groups[static_cast<std::size_t>(g)] = reshape(flat, r, config.n_mels);
      stop_logits[static_cast<std::size_t>(g)] =
          affine(proj_in, param(t, params.at("decoder.stop.w")),
                 param(t, params.at("decoder.stop.b")));
    }

    res.pre_mel = concat_rows(t, mel_groups);
    res.post_mel = postnet_tape(t, res.pre_mel);
    res.stop_logits = concat_rows(t, stop_logits);
    return res;
  }

  // Autoregressive decoding; stops once the stop probability crosses the
  // threshold or after max_steps groups.
  InferResult infer(const std::vector<int>& ids, int speaker_row_idx = -1,
                    int max_steps_override = -1) {
    using namespace ad;
    const int r = config.reduction;
    const int max_groups = max_steps_override > 0 ? max_steps_override : config.max_steps;
    VQTTS_REQUIRE(max_groups > 0, "max_steps must be positive");
    VQTTS_REQUIRE(config.speaker_dim == 0 || speaker_row_idx >= 0,
                  "speaker row required when speaker conditioning is on");

    Tape t;
    Var memory = encode_symbols_tape(t, ids);
    const AttentionParams ap = attention_view(params, "attention", config.loc_kernel);
    Var memory_proj = matmul(memory, param(t, *ap.memory_w));
    const GruParams attn_rnn = gru_view(params, "decoder.attn_rnn");
    const GruParams dec_rnn = gru_view(params, "decoder.dec_rnn");
    const auto L = memory.rows();

    Var align = constant(t, Mat::Zero(L, 1));
    Var cum = constant(t, Mat::Zero(L, 1));
    Var attn_h = constant(t, Mat::Zero(1, config.attn_rnn_dim));
    Var dec_h = constant(t, Mat::Zero(1, config.dec_rnn_dim));
    Var context = constant(t, Mat::Zero(1, 2 * config.enc_gru));
    Var spk;
    if (config.speaker_dim > 0)
      spk = embed(t, params.at("speaker_table"), {speaker_row_idx});

    Mat prev = Mat::Zero(1, config.n_mels);
    std::vector<Mat> groups_out;
    std::vector<Eigen::RowVectorXd> aligns;
    StopReason reason = StopReason::kMaxSteps;

    for (int g = 0; g < max_groups; ++g) {
      Var pn = prenet_tape(t, constant(t, prev));
      Var x = concat_cols(pn, context);
      if (config.speaker_dim > 0) x = concat_cols(x, spk);
      attn_h = gru_step(t, attn_rnn, x, attn_h);
      const auto step = lsa_attention_step_tape(t, ap, attn_h, memory, memory_proj,
                                                align, cum);
      context = step.context;
      align = step.alignment;
      cum = step.cumulative;
      aligns.emplace_back(align.value().col(0).transpose());

      dec_h = gru_step(t, dec_rnn, concat_cols(attn_h, context), dec_h);
      Var proj_in = concat_cols(dec_h, context);
      Var flat = affine(proj_in, param(t, params.at("decoder.mel_out.w")),
                        param(t, params.at("decoder.mel_out.b")));
      Var frames = reshape(flat, r, config.n_mels);
      groups_out.push_back(frames.value());
      prev = frames.value().bottomRows(1);

      Var stop_logit = affine(proj_in, param(t, params.at("decoder.stop.w")),
                              param(t, params.at("decoder.stop.b")));
      const double p_stop = 1.0 / (1.0 + std::exp(-stop_logit.value()(0, 0)));
      if (p_stop > config.stop_threshold) {
        reason = StopReason::kStop;
        break;
      }
    }

    Mat pre(static_cast<Eigen::Index>(groups_out.size()) * r, config.n_mels);
    for (std::size_t g = 0; g < groups_out.size(); ++g)
      pre.middleRows(static_cast<Eigen::Index>(g) * r, r) = groups_out[g];

    Tape t2;
    Var post = postnet_tape(t2, constant(t2, pre));

    InferResult out;
    out.reason = reason;
    out.mel.frames = denormalize_mel(post.value());
    out.mel.n_mels = config.n_mels;
    out.mel.config = config.frame;
    out.mel.sample_rate = config.sample_rate;
    out.alignments = Mat(static_cast<Eigen::Index>(aligns.size()), L);
    for (std::size_t i = 0; i < aligns.size(); ++i)
      out.alignments.row(static_cast<Eigen::Index>(i)) = aligns[i];
    return out;
  }

  // infer -> approximate linear magnitude -> phase reconstruction.
  Waveform synthesize(const std::vector<int>& ids, int speaker_row_idx = -1,
                      int max_steps_override = -1) {
    const InferResult inf = infer(ids, speaker_row_idx, max_steps_override);
    const Mat fb = mel_filterbank(config.n_mels, config.frame.fft_size, config.sample_rate);
    const Mat mag = mel_to_magnitude(inf.mel.frames, mel_pseudo_inverse(fb));
    return griffin_lim(mag, config.frame, config.griffin_lim_iters, config.sample_rate)
        .waveform;
  }
};

// ---------------------------------------------------------------- training

struct TtsExample {
  std::string id;
  std::vector<int> symbol_ids;  // EOS appended
  Mat mel_norm;                 // standardized log-mel targets
  int speaker_row = -1;
};

// Audio + symbols -> training examples. With fit_stats, corpus mel statistics
// are computed here and stored on the model (pre-training); fine-tuning keeps
// the pretrained statistics so target scaling stays consistent.
inline std::vector<TtsExample> prepare_examples(AcousticModel& model,
                                                const std::vector<data::PairedUtterance>& pairs,
                                                bool fit_stats) {
  VQTTS_REQUIRE(!pairs.empty(), "no paired utterances");
  std::vector<TtsExample> out;
  std::vector<Mat> mels;
  Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(model.config.n_mels);
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(model.config.n_mels);
  long n = 0;
  for (const auto& p : pairs) {
    const WavData wav = read_wav(p.record.audio_path);
    VQTTS_REQUIRE(wav.sample_rate == model.config.sample_rate,
                  "sample rate mismatch for " + p.record.id);
    Waveform w{wav.samples, wav.sample_rate};
    const MelSpectrogram mel = mel_spectrogram(w, model.config.frame, model.config.n_mels);
    mean += mel.frames.colwise().sum();
    sq += mel.frames.array().square().matrix().colwise().sum();
    n += mel.frames.rows();
    mels.push_back(mel.frames);

    TtsExample ex;
    ex.id = p.record.id;
    ex.symbol_ids = model.table.encode(p.symbols);
    ex.speaker_row = model.config.speaker_dim > 0 ? model.speaker_row(p.record.speaker) : -1;
    out.push_back(std::move(ex));
  }
  if (fit_stats) {
    mean /= static_cast<double>(n);
    sq /= static_cast<double>(n);
    model.mel_mean = mean;
    model.mel_std = (sq - mean.cwiseProduct(mean)).cwiseMax(1e-8).cwiseSqrt();
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].mel_norm = model.normalize_mel(mels[i]);
  return out;
}

struct TtsTrainLogRow {
  long step = 0;
  double mel_pre = 0.0;
  double mel_post = 0.0;
  double stop = 0.0;
  double total = 0.0;
};

inline void write_tts_log_csv(const std::string& path, const std::vector<TtsTrainLogRow>& log) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write training log: " + path);
  f << "step,mel_pre,mel_post,stop,total\n";
  f.precision(10);
  for (const auto& r : log)
    f << r.step << ',' << r.mel_pre << ',' << r.mel_post << ',' << r.stop << ','
      << r.total << '\n';
}

// Teacher-forced loss for one example: pre-net mel L2 + post-net mel L2 +
// weighted stop cross-entropy. Returns the component values.
inline TtsTrainLogRow example_loss(AcousticModel& model, Tape& t, const TtsExample& ex,
                                   Var& total_out) {
  using namespace ad;
  const auto T = ex.mel_norm.rows();
  ForwardResult fwd = model.forward_teacher_forced(t, ex.symbol_ids, ex.mel_norm,
                                                   ex.speaker_row);
  Var pre_loss = mse(rows(fwd.pre_mel, 0, T), ex.mel_norm);
  Var post_loss = mse(rows(fwd.post_mel, 0, T), ex.mel_norm);
  Mat stop_target = Mat::Zero(fwd.stop_logits.rows(), 1);
  stop_target(fwd.stop_logits.rows() - 1, 0) = 1.0;
  Var stop_loss = bce_logits(fwd.stop_logits, stop_target, model.config.stop_pos_weight);
  total_out = add(add(pre_loss, post_loss), stop_loss);

  TtsTrainLogRow row;
  row.mel_pre = pre_loss.value()(0, 0);
  row.mel_post = post_loss.value()(0, 0);
  row.stop = stop_loss.value()(0, 0);
  row.total = total_out.value()(0, 0);
  return row;
}

// Teacher-forced optimization for `steps` additional steps. Batches are
// sampled from a per-step seeded stream, making runs resumable: restarting
// from a step-k checkpoint replays step k+1 exactly.
inline std::vector<TtsTrainLogRow> train(AcousticModel& model,
                                         const std::vector<TtsExample>& examples,
                                         long steps) {
  VQTTS_REQUIRE(!examples.empty(), "training dataset is empty");
  ad::Adam opt(model.config.learning_rate, model.config.grad_clip);
  opt.set_step_count(model.trained_steps);
  const Rng base(model.config.seed);

  std::vector<TtsTrainLogRow> log;
  log.reserve(static_cast<std::size_t>(steps));
  for (long step = model.trained_steps + 1; step <= model.trained_steps + steps; ++step) {
    Rng step_rng = base.derive(model.phase + "_step", static_cast<std::uint64_t>(step));
    TtsTrainLogRow row;
    row.step = step;
    for (int b = 0; b < model.config.batch_size; ++b) {
      const auto idx = static_cast<std::size_t>(
          step_rng.uniform_int(0, static_cast<std::int64_t>(examples.size()) - 1));
      Tape tape;
      Var total;
      const TtsTrainLogRow one = example_loss(model, tape, examples[idx], total);
      Var scaled = ad::scale(total, 1.0 / model.config.batch_size);
      tape.backward(scaled);
      row.mel_pre += one.mel_pre;
      row.mel_post += one.mel_post;
      row.stop += one.stop;
      row.total += one.total;
    }
    opt.step(model.params);
    const double inv_b = 1.0 / model.config.batch_size;
    row.mel_pre *= inv_b;
    row.mel_post *= inv_b;
    row.stop *= inv_b;
    row.total *= inv_b;
    log.push_back(row);
  }
  model.trained_steps += steps;
  return log;
}

// ------------------------------------------------------------- fine-tuning

// Swap in a freshly initialized symbol table (and, when configured, a fresh
// speaker table for the target speakers); every other parameter is copied
// bit for bit from the pretrained model.
inline AcousticModel finetune_init(const AcousticModel& pretrained, SymbolTable new_table,
                                   std::vector<std::string> new_speakers,
                                   std::uint64_t seed) {
  TtsConfig cfg = pretrained.config;
  cfg.seed = seed;
  AcousticModel m = AcousticModel::build(cfg, std::move(new_table), std::move(new_speakers));
  for (auto& p : m.params.tensors()) {
    if (p->name == "symbol_embedding" || p->name == "speaker_table") continue;
    const ad::Tensor* src = nullptr;
    for (const auto& q : pretrained.params.tensors())
      if (q->name == p->name) src = q.get();
    VQTTS_REQUIRE(src != nullptr, "pretrained model misses tensor " + p->name);
    VQTTS_REQUIRE(src->value.rows() == p->value.rows() && src->value.cols() == p->value.cols(),
                  "embedding dimension mismatch between tables for " + p->name);
    p->value = src->value;
  }
  m.mel_mean = pretrained.mel_mean;
  m.mel_std = pretrained.mel_std;
  m.trained_steps = 0;
  m.phase = "finetune";
  return m;
}

// ------------------------------------------------------------- checkpoints

inline void save_tts(const AcousticModel& model, const std::string& path) {
  Checkpoint ck;
  ck.meta["kind"] = "tts";
  ck.meta["version"] = kVersion;
  ck.meta["phase"] = model.phase;
  ck.meta["config"] = model.config.to_json();
  ck.meta["config_hash"] = hash_hex(model.config.hash());
  ck.meta["audio_hash"] = hash_hex(model.config.audio_hash());
  ck.meta["symbol_table"] = model.table.to_json();
  ck.meta["vocab_hash"] = hash_hex(model.table.vocab_hash());
  ck.meta["speakers"] = model.speakers;
  ck.meta["seed"] = model.config.seed;
  ck.meta["step"] = model.trained_steps;
  ck.meta["mel_mean"] = std::vector<double>(model.mel_mean.data(),
                                            model.mel_mean.data() + model.mel_mean.size());
  ck.meta["mel_std"] = std::vector<double>(model.mel_std.data(),
                                           model.mel_std.data() + model.mel_std.size());
  ad::params_to_checkpoint(model.params, ck);
  save_checkpoint(path, ck);
}

inline AcousticModel load_tts(const std::string& path) {
  const Checkpoint ck = load_checkpoint(path);
  if (!ck.meta.contains("kind") || ck.meta["kind"] != "tts")
    throw IoError("not a tts checkpoint: " + path);
  const TtsConfig cfg = TtsConfig::from_json(ck.meta.at("config"));
  AcousticModel model = AcousticModel::build(
      cfg, SymbolTable::from_json(ck.meta.at("symbol_table")),
      ck.meta.at("speakers").get<std::vector<std::string>>());
  ad::params_from_checkpoint(model.params, ck);
  const auto mean = ck.meta.at("mel_mean").get<std::vector<double>>();
  const auto std_ = ck.meta.at("mel_std").get<std::vector<double>>();
  VQTTS_REQUIRE(static_cast<int>(mean.size()) == cfg.n_mels &&
                    static_cast<int>(std_.size()) == cfg.n_mels,
                "corrupt mel statistics in " + path);
  model.mel_mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), cfg.n_mels);
  model.mel_std = Eigen::Map<const Eigen::RowVectorXd>(std_.data(), cfg.n_mels);
  model.trained_steps = ck.meta.value("step", 0L);
  model.phase = ck.meta.value("phase", "pretrain");
  return model;
}

// Parameter groups (prefix before the first dot, Adam buffers excluded) whose
// values differ between two checkpoints.
inline std::vector<std::string> diff_param_groups(const Checkpoint& a, const Checkpoint& b) {
  std::set<std::string> groups;
  for (const std::string& name : diff_checkpoints(a, b)) {
    if (name.find(".adam_") != std::string::npos) continue;
    groups.insert(name.substr(0, name.find('.')));
  }
  return {groups.begin(), groups.end()};
}

}  // namespace vqtts::tts
