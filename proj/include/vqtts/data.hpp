// include/vqtts/data.hpp

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

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "vqtts/common.hpp"
#include "vqtts/io.hpp"
#include "vqtts/rng.hpp"

namespace vqtts::data {

namespace fs = std::filesystem;

// ------------------------------------------------------------------ records

struct UtteranceRecord {
  std::string id;
  std::string audio_path;
  std::string speaker;
  double duration_sec = 0.0;
  std::string text;  // empty for untranscribed speech
};

struct Manifest {
  std::string name;
  std::string language = "und";
  int sample_rate = 16000;
  std::vector<UtteranceRecord> records;

  double total_duration() const {
    double d = 0.0;
    for (const auto& r : records) d += r.duration_sec;
    return d;
  }

  void validate() const {
    std::set<std::string> seen;
    for (const auto& r : records) {
      VQTTS_REQUIRE(r.duration_sec > 0.0, "non-positive duration for " + r.id);
      VQTTS_REQUIRE(seen.insert(r.id).second, "duplicate utterance id " + r.id);
    }
  }

  const UtteranceRecord& at(const std::string& id) const {
    for (const auto& r : records)
      if (r.id == id) return r;
    throw LookupError("utterance not in manifest: " + id);
  }
};

// File format: leading `# key=value` metadata lines, then one record per
// line, pipe-delimited: id|audio_path|speaker|duration_sec|text.
inline void save_manifest(const std::string& path, const Manifest& m) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write manifest: " + path);
  f << "# name=" << m.name << "\n# language=" << m.language
    << "\n# sample_rate=" << m.sample_rate << "\n";
  f.precision(9);
  for (const auto& r : m.records)
    f << r.id << '|' << r.audio_path << '|' << r.speaker << '|' << r.duration_sec
      << '|' << r.text << '\n';
  if (!f) throw IoError("short write to " + path);
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open manifest: " + path);
  Manifest m;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      const std::string val = line.substr(eq + 1);
      if (key == "name") m.name = val;
      else if (key == "language") m.language = val;
      else if (key == "sample_rate") m.sample_rate = std::stoi(val);
      continue;
    }
    std::vector<std::string> parts;
    std::stringstream ss(line);
    std::string part;
    while (std::getline(ss, part, '|')) parts.push_back(part);
    while (parts.size() < 5) parts.emplace_back();
    VQTTS_REQUIRE(parts.size() == 5, "malformed manifest line: " + line);
    UtteranceRecord r;
    r.id = parts[0];
    r.audio_path = parts[1];
    r.speaker = parts[2];
    r.duration_sec = std::stod(parts[3]);
    r.text = parts[4];
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

// ---------------------------------------------------------------- ingestion

enum class CorpusLayout { kLJSpeech, kVCTK };

struct IngestReport {
  Manifest manifest;
  std::vector<std::string> skipped;  // "id: reason" lines, never silent
};

namespace detail {

inline void add_record(IngestReport& rep, const std::string& id, const fs::path& wav,
                       const std::string& speaker, const std::string& text) {
  UtteranceRecord r;
  r.id = id;
  r.audio_path = wav.string();
  r.speaker = speaker;
  r.text = text;
  try {
    r.duration_sec = wav_duration_seconds(wav.string());
  } catch (const std::exception& e) {
    rep.skipped.push_back(id + ": " + e.what());
    return;
  }
  if (r.duration_sec <= 0.0) {
    rep.skipped.push_back(id + ": zero-length audio");
    return;
  }
  rep.manifest.records.push_back(std::move(r));
}

}  // namespace detail

// LJSpeech-style tree: metadata.csv with `id|text|normalized_text`, audio at
// wavs/<id>.wav, one implicit speaker.
inline IngestReport ingest_ljspeech(const std::string& root, const std::string& speaker = "spk0") {
  VQTTS_REQUIRE(fs::is_directory(root), "corpus root not found: " + root);
  const fs::path meta = fs::path(root) / "metadata.csv";
  std::ifstream f(meta);
  if (!f) throw IoError("cannot open " + meta.string());
  IngestReport rep;
  rep.manifest.name = fs::path(root).filename().string();
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto p1 = line.find('|');
    VQTTS_REQUIRE(p1 != std::string::npos, "malformed metadata line: " + line);
    const auto p2 = line.find('|', p1 + 1);
    const std::string id = line.substr(0, p1);
    const std::string text = p2 == std::string::npos ? line.substr(p1 + 1)
                                                     : line.substr(p1 + 1, p2 - p1 - 1);
    detail::add_record(rep, id, fs::path(root) / "wavs" / (id + ".wav"), speaker, text);
  }
  VQTTS_REQUIRE(!rep.manifest.records.empty(), "no valid records under " + root);
  rep.manifest.validate();
  return rep;
}

// VCTK-style tree: wav48/<speaker>/<utt>.wav with txt/<speaker>/<utt>.txt.
inline IngestReport ingest_vctk(const std::string& root) {
  VQTTS_REQUIRE(fs::is_directory(root), "corpus root not found: " + root);
  const fs::path wav_root = fs::path(root) / "wav48";
  VQTTS_REQUIRE(fs::is_directory(wav_root), "missing wav48/ under " + root);
  IngestReport rep;
  rep.manifest.name = fs::path(root).filename().string();

  std::vector<fs::path> speakers;
  for (const auto& e : fs::directory_iterator(wav_root))
    if (e.is_directory()) speakers.push_back(e.path());
  std::sort(speakers.begin(), speakers.end());

  for (const auto& spk_dir : speakers) {
    const std::string speaker = spk_dir.filename().string();
    std::vector<fs::path> wavs;
    for (const auto& e : fs::directory_iterator(spk_dir))
      if (e.path().extension() == ".wav") wavs.push_back(e.path());
    std::sort(wavs.begin(), wavs.end());
    for (const auto& wav : wavs) {
      const std::string id = wav.stem().string();
      std::string text;
      const fs::path txt = fs::path(root) / "txt" / speaker / (id + ".txt");
      if (std::ifstream tf(txt); tf) std::getline(tf, text);
      detail::add_record(rep, id, wav, speaker, text);
    }
  }
  VQTTS_REQUIRE(!rep.manifest.records.empty(), "no valid records under " + root);
  rep.manifest.validate();
  return rep;
}

inline IngestReport ingest_corpus(const std::string& root, CorpusLayout layout) {
  return layout == CorpusLayout::kLJSpeech ? ingest_ljspeech(root) : ingest_vctk(root);
}

// ------------------------------------------------------------------- shards

struct Shard {
  std::vector<UtteranceRecord> records;
  double total_duration = 0.0;
  int index = 0;
};

namespace detail {

inline std::vector<UtteranceRecord> shuffled_records(const Manifest& m, std::uint64_t seed) {
  std::vector<UtteranceRecord> recs = m.records;
  Rng rng(seed);
  Rng shuffle_rng = rng.derive("shard_shuffle");
  shuffle_rng.shuffle(recs);
  return recs;
}

}  // namespace detail

// Seeded shuffle, then greedy accumulation into consecutive full shards. A
// shard closes before it would exceed the target, so each full shard holds
// [target - longest utterance, target] seconds. The trailing partial shard
// is discarded.
inline std::vector<Shard> shard_split(const Manifest& m, double shard_minutes,
                                      std::uint64_t seed) {
  VQTTS_REQUIRE(shard_minutes > 0.0, "shard_minutes must be positive");
  const double target = shard_minutes * 60.0;
  VQTTS_REQUIRE(m.total_duration() >= target,
                "corpus shorter than one shard (" + std::to_string(shard_minutes) + " min)");
  const auto recs = detail::shuffled_records(m, seed);

  std::vector<Shard> shards;
  Shard cur;
  for (const auto& r : recs) {
    if (cur.total_duration + r.duration_sec > target) {
      cur.index = static_cast<int>(shards.size());
      shards.push_back(std::move(cur));
      cur = Shard{};
    }
    cur.records.push_back(r);
    cur.total_duration += r.duration_sec;
  }
  if (cur.total_duration + 1e-12 >= target) {
    cur.index = static_cast<int>(shards.size());
    shards.push_back(std::move(cur));
  }
  return shards;
}

// Prefix of the same shuffled order, for fractional shard amounts. Nested:
// the selection for a larger amount contains the selection for a smaller
// one, so data-amount sweeps vary only in quantity.
inline Manifest take_prefix_minutes(const Manifest& m, double minutes, std::uint64_t seed) {
  VQTTS_REQUIRE(minutes > 0.0, "minutes must be positive");
  const double target = minutes * 60.0;
  const auto recs = detail::shuffled_records(m, seed);
  Manifest out;
  out.name = m.name + "@" + std::to_string(minutes) + "min";
  out.language = m.language;
  out.sample_rate = m.sample_rate;
  double acc = 0.0;
  for (const auto& r : recs) {
    if (acc + r.duration_sec > target) break;
    out.records.push_back(r);
    acc += r.duration_sec;
  }
  VQTTS_REQUIRE(!out.records.empty(), "prefix of " + std::to_string(minutes) + " min selects nothing");
  return out;
}

// ----------------------------------------------------------- text front end

// Lowercase, strip punctuation to a small kept set, expand numerals.
namespace detail {

inline const char* kOnes[] = {"zero", "one", "two", "three", "four", "five", "six",
                              "seven", "eight", "nine", "ten", "eleven", "twelve",
                              "thirteen", "fourteen", "fifteen", "sixteen", "seventeen",
                              "eighteen", "nineteen"};
inline const char* kTens[] = {"", "", "twenty", "thirty", "forty", "fifty", "sixty",
                              "seventy", "eighty", "ninety"};

inline std::string number_to_words(long n) {
  if (n < 20) return kOnes[n];
  if (n < 100) {
    std::string s = kTens[n / 10];
    if (n % 10) s += " " + std::string(kOnes[n % 10]);
    return s;
  }
  if (n < 1000) {
    std::string s = std::string(kOnes[n / 100]) + " hundred";
    if (n % 100) s += " " + number_to_words(n % 100);
    return s;
  }
  return {};  // spelled digit by digit by the caller
}

inline std::string expand_numeral_token(const std::string& tok) {
  long v = 0;
  bool overflow = tok.size() > 9;
  if (!overflow)
    for (char c : tok) v = v * 10 + (c - '0');
  std::string words = overflow ? std::string{} : number_to_words(v);
  if (!words.empty()) return words;
  std::string out;
  for (char c : tok) {
    if (!out.empty()) out += ' ';
    out += kOnes[c - '0'];
  }
  return out;
}

}  // namespace detail

inline std::string normalize_text(const std::string& text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'')
      lowered += static_cast<char>(std::tolower(u));
    else
      lowered += ' ';  // punctuation and everything else separates tokens
  }
  std::stringstream ss(lowered);
  std::string tok, out;
  while (ss >> tok) {
    const bool numeric = std::all_of(tok.begin(), tok.end(),
                                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
    const std::string piece = numeric ? detail::expand_numeral_token(tok) : tok;
    if (!out.empty()) out += ' ';
    out += piece;
  }
  return out;
}

// ------------------------------------------------------------- phonemizer

// Lexicon file: `word<TAB>p1 p2 p3`, one entry per line.
class Lexicon {
 public:
  Lexicon() = default;

  static Lexicon from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open lexicon: " + path);
    Lexicon lex;
    std::string line;
    while (std::getline(f, line)) {
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      VQTTS_REQUIRE(tab != std::string::npos, "malformed lexicon line: " + line);
      const std::string word = line.substr(0, tab);
      std::stringstream ss(line.substr(tab + 1));
      std::vector<std::string> phones;
      std::string p;
      while (ss >> p) phones.push_back(p);
      VQTTS_REQUIRE(!phones.empty(), "empty pronunciation for " + word);
      lex.entries_[word] = std::move(phones);
    }
    return lex;
  }

  void add(const std::string& word, std::vector<std::string> phones) {
    entries_[word] = std::move(phones);
  }

  const std::vector<std::string>* lookup(const std::string& word) const {
    auto it = entries_.find(word);
    return it == entries_.end() ? nullptr : &it->second;
  }

  // Sorted phoneme inventory over all entries.
  std::vector<std::string> inventory() const {
    std::set<std::string> inv;
    for (const auto& [w, ps] : entries_)
      for (const auto& p : ps) inv.insert(p);
    return {inv.begin(), inv.end()};
  }

  std::size_t size() const { return entries_.size(); }

  void save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write lexicon: " + path);
    for (const auto& [w, ps] : entries_) {
      f << w << '\t';
      for (std::size_t i = 0; i < ps.size(); ++i) f << (i ? " " : "") << ps[i];
      f << '\n';
    }
  }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

struct PhonemizeResult {
  std::vector<std::string> phonemes;
  std::vector<std::string> warnings;  // one per out-of-lexicon word
};

inline std::string grapheme_symbol(char c) { return std::string("g:") + c; }

// Normalized text -> phoneme sequence; unknown words fall back to per
// character grapheme symbols and are reported, never dropped silently.
inline PhonemizeResult phonemize(const std::string& text, const Lexicon& lexicon) {
  const std::string norm = normalize_text(text);
  VQTTS_REQUIRE(!norm.empty(), "text is empty after normalization");
  PhonemizeResult out;
  std::stringstream ss(norm);
  std::string word;
  while (ss >> word) {
    if (const auto* phones = lexicon.lookup(word)) {
      out.phonemes.insert(out.phonemes.end(), phones->begin(), phones->end());
    } else {
      out.warnings.push_back("out-of-lexicon word '" + word + "' spelled as graphemes");
      for (char c : word) out.phonemes.push_back(grapheme_symbol(c));
    }
  }
  return out;
}

// ------------------------------------------------------------ paired data

struct PairedUtterance {
  UtteranceRecord record;
  std::vector<std::string> symbols;
};

struct PairReport {
  std::vector<PairedUtterance> pairs;
  std::vector<std::string> warnings;
};

// Join a manifest with per-utterance symbol sequences (unit files or
// phonemized text); ids without symbols are dropped with a warning.
inline PairReport pair_dataset(const Manifest& m,
                               const std::map<std::string, std::vector<std::string>>& symbols) {
  PairReport rep;
  for (const auto& r : m.records) {
    auto it = symbols.find(r.id);
    if (it == symbols.end() || it->second.empty()) {
      rep.warnings.push_back("no symbols for utterance '" + r.id + "', dropped");
      continue;
    }
    rep.pairs.push_back({r, it->second});
  }
  VQTTS_REQUIRE(!rep.pairs.empty(), "paired dataset is empty");
  return rep;
}

// Stable sort by symbol length then chunk; preserves the multiset of pairs.
inline std::vector<std::vector<PairedUtterance>> bucket_by_length(
    std::vector<PairedUtterance> pairs, std::size_t bucket_size) {
  VQTTS_REQUIRE(bucket_size > 0, "bucket_size must be positive");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const PairedUtterance& a, const PairedUtterance& b) {
                     return a.symbols.size() < b.symbols.size();
                   });
  std::vector<std::vector<PairedUtterance>> buckets;
  for (std::size_t i = 0; i < pairs.size(); i += bucket_size) {
    const std::size_t end = std::min(i + bucket_size, pairs.size());
    buckets.emplace_back(pairs.begin() + static_cast<long>(i),
                         pairs.begin() + static_cast<long>(end));
  }
  return buckets;
}

}  // namespace vqtts::data
