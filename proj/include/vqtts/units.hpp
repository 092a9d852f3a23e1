// include/vqtts/units.hpp

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
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vqtts/data.hpp"
#include "vqtts/vq.hpp"

namespace vqtts::units {

struct UnitSequence {
  std::string utterance_id;
  std::vector<int> units;  // collapsed codebook ids
};

struct UnitInventory {
  std::vector<long> counts;  // per codebook id
  long total = 0;
  double perplexity = 1.0;
  double coverage = 0.0;  // fraction of the codebook seen at least once
};

// Algorithm step: drop consecutive repeats, keep order. Idempotent.
inline std::vector<int> collapse_repeats(const std::vector<int>& seq) {
  std::vector<int> out;
  out.reserve(seq.size());
  for (int v : seq)
    if (out.empty() || out.back() != v) out.push_back(v);
  return out;
}

// Audio -> collapsed unit ids through the trained quantizer. Inference mode:
// no jitter, codebook frozen.
inline std::vector<int> extract_units(const Waveform& w, vq::VqvaeModel& model) {
  const MfccFrames feats = mfcc(w, model.config.frame);
  const ad::Mat z = model.encode(feats);
  const vq::Codebook cb = model.codebook();
  return collapse_repeats(vq::quantize_indices(z, cb));
}

inline UnitInventory unit_stats(const std::vector<UnitSequence>& seqs, int codebook_size) {
  UnitInventory inv;
  inv.counts.assign(static_cast<std::size_t>(codebook_size), 0);
  for (const auto& s : seqs)
    for (int u : s.units) {
      VQTTS_REQUIRE(u >= 0 && u < codebook_size, "unit id out of range: " + std::to_string(u));
      ++inv.counts[static_cast<std::size_t>(u)];
      ++inv.total;
    }
  long used = 0;
  double entropy = 0.0;
  for (long c : inv.counts) {
    if (c == 0) continue;
    ++used;
    const double p = static_cast<double>(c) / static_cast<double>(inv.total);
    entropy -= p * std::log(p);
  }
  inv.perplexity = inv.total > 0 ? std::exp(entropy) : 1.0;
  inv.coverage = static_cast<double>(used) / codebook_size;
  return inv;
}

// ---------------------------------------------------------------- unit file
//
// One line per utterance: `utterance_id<TAB>u1 u2 u3 ...`, LF-terminated.

inline void write_unit_file(const std::string& path, const std::vector<UnitSequence>& seqs) {
  std::ofstream f(path, std::ios::binary);  // binary: LF line ends everywhere
  if (!f) throw IoError("cannot write unit file: " + path);
  for (const auto& s : seqs) {
    f << s.utterance_id << '\t';
    for (std::size_t i = 0; i < s.units.size(); ++i)
      f << (i ? " " : "") << s.units[i];
    f << '\n';
  }
  if (!f) throw IoError("short write to " + path);
}

inline std::vector<UnitSequence> read_unit_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open unit file: " + path);
  std::vector<UnitSequence> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    VQTTS_REQUIRE(tab != std::string::npos, "malformed unit line: " + line);
    UnitSequence s;
    s.utterance_id = line.substr(0, tab);
    std::stringstream ss(line.substr(tab + 1));
    int v;
    while (ss >> v) s.units.push_back(v);
    out.push_back(std::move(s));
  }
  return out;
}

// ------------------------------------------------------------ corpus sweep

// Extraction is embarrassingly parallel; each worker fills preassigned slots
// so the output order (and bytes) never depend on the worker count.
inline std::vector<UnitSequence> extract_units_corpus(const data::Manifest& m,
                                                      vq::VqvaeModel& model,
                                                      int workers = 1) {
  VQTTS_REQUIRE(workers >= 1, "workers must be >= 1");
  std::vector<UnitSequence> out(m.records.size());
  std::vector<std::string> errors(m.records.size());

  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& r = m.records[i];
      try {
        const WavData wav = read_wav(r.audio_path);
        Waveform w{wav.samples, wav.sample_rate};
        out[i] = {r.id, extract_units(w, model)};
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  if (workers == 1) {
    run(0, m.records.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (m.records.size() + static_cast<std::size_t>(workers) - 1) /
                              static_cast<std::size_t>(workers);
    for (int t = 0; t < workers; ++t) {
      const std::size_t b = static_cast<std::size_t>(t) * chunk;
      const std::size_t e = std::min(b + chunk, m.records.size());
      if (b < e) pool.emplace_back(run, b, e);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < errors.size(); ++i)
    if (!errors[i].empty())
      throw InvalidInput("unit extraction failed for " + m.records[i].id + ": " + errors[i]);
  return out;
}

}  // namespace vqtts::units
