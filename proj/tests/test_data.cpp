// tests/test_data.cpp

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
#include <fstream>

#include "vqtts/data.hpp"

using namespace vqtts;
using namespace vqtts::data;
namespace fs = std::filesystem;

namespace {

void write_tone_wav(const fs::path& path, double seconds, double freq = 440.0) {
  std::vector<double> samples(static_cast<std::size_t>(seconds * 16000));
  for (std::size_t i = 0; i < samples.size(); ++i)
    samples[i] = 0.3 * std::sin(2.0 * M_PI * freq * static_cast<double>(i) / 16000.0);
  write_wav(path.string(), samples, 16000);
}

Manifest synthetic_manifest(const std::vector<double>& durations) {
  Manifest m;
  m.name = "synthetic";
  for (std::size_t i = 0; i < durations.size(); ++i)
    m.records.push_back({"utt" + std::to_string(i), "/nonexistent/" + std::to_string(i) + ".wav",
                         "spk", durations[i], ""});
  return m;
}

}  // namespace

TEST_CASE("manifest files round trip losslessly", "[data]") {
  Manifest m;
  m.name = "demo";
  m.language = "en";
  m.sample_rate = 22050;
  m.records.push_back({"a1", "/tmp/a1.wav", "spkA", 1.25, "hello there"});
  m.records.push_back({"b2", "/tmp/b2.wav", "spkB", 3.5, ""});
  const std::string path = (fs::temp_directory_path() / "vqtts_manifest.psv").string();
  save_manifest(path, m);
  const Manifest back = load_manifest(path);
  REQUIRE(back.name == m.name);
  REQUIRE(back.language == m.language);
  REQUIRE(back.sample_rate == m.sample_rate);
  REQUIRE(back.records.size() == 2);
  REQUIRE(back.records[0].id == "a1");
  REQUIRE(back.records[0].duration_sec == 1.25);
  REQUIRE(back.records[0].text == "hello there");
  REQUIRE(back.records[1].text.empty());
  std::remove(path.c_str());
}

TEST_CASE("ljspeech-style ingestion builds records and skips corrupt audio", "[data]") {
  const fs::path root = fs::temp_directory_path() / "vqtts_lj";
  fs::create_directories(root / "wavs");
  std::ofstream meta(root / "metadata.csv");
  meta << "utt0|Hello world.|hello world\n";
  meta << "utt1|Second one!|second one\n";
  meta << "utt2|Third.|third\n";
  meta.close();
  write_tone_wav(root / "wavs" / "utt0.wav", 0.5);
  write_tone_wav(root / "wavs" / "utt1.wav", 0.75);
  {
    std::ofstream bad(root / "wavs" / "utt2.wav", std::ios::binary);
    bad << "garbage";
  }

  const IngestReport rep = ingest_corpus(root.string(), CorpusLayout::kLJSpeech);
  REQUIRE(rep.manifest.records.size() == 2);
  REQUIRE(rep.skipped.size() == 1);
  REQUIRE(rep.skipped[0].find("utt2") != std::string::npos);
  REQUIRE(rep.manifest.records[0].text == "Hello world.");

  // duration oracle: per-file probe
  double probe_total = 0.0;
  probe_total += wav_duration_seconds((root / "wavs" / "utt0.wav").string());
  probe_total += wav_duration_seconds((root / "wavs" / "utt1.wav").string());
  REQUIRE(std::abs(rep.manifest.total_duration() - probe_total) < 1e-9);
  fs::remove_all(root);
}

TEST_CASE("vctk-style ingestion walks speaker directories", "[data]") {
  const fs::path root = fs::temp_directory_path() / "vqtts_vctk";
  fs::create_directories(root / "wav48" / "p225");
  fs::create_directories(root / "wav48" / "p226");
  fs::create_directories(root / "txt" / "p225");
  write_tone_wav(root / "wav48" / "p225" / "p225_001.wav", 0.4);
  write_tone_wav(root / "wav48" / "p226" / "p226_001.wav", 0.6);
  std::ofstream(root / "txt" / "p225" / "p225_001.txt") << "Some text";

  const IngestReport rep = ingest_corpus(root.string(), CorpusLayout::kVCTK);
  REQUIRE(rep.manifest.records.size() == 2);
  REQUIRE(rep.manifest.records[0].speaker == "p225");
  REQUIRE(rep.manifest.records[0].text == "Some text");
  REQUIRE(rep.manifest.records[1].speaker == "p226");
  REQUIRE(rep.manifest.records[1].text.empty());
  fs::remove_all(root);
}

TEST_CASE("shard_split cuts full shards of the target size", "[data]") {
  // 48 one-minute utterances, 24-minute shards -> exactly 2 full shards
  const Manifest m = synthetic_manifest(std::vector<double>(48, 60.0));
  const auto shards = shard_split(m, 24.0, 9);
  REQUIRE(shards.size() == 2);
  for (const auto& s : shards) {
    REQUIRE(s.records.size() == 24);
    REQUIRE(s.total_duration == 24.0 * 60.0);
  }
  REQUIRE(shards[0].index == 0);
  REQUIRE(shards[1].index == 1);
}

TEST_CASE("shard_split is deterministic and respects duration bounds", "[data]") {
  Rng rng(71);
  std::vector<double> durations;
  double max_dur = 0.0;
  for (int i = 0; i < 200; ++i) {
    durations.push_back(rng.uniform(2.0, 9.0));
    max_dur = std::max(max_dur, durations.back());
  }
  const Manifest m = synthetic_manifest(durations);
  const auto s1 = shard_split(m, 2.0, 1234);
  const auto s2 = shard_split(m, 2.0, 1234);
  REQUIRE(s1.size() == s2.size());
  std::set<std::string> seen;
  for (std::size_t k = 0; k < s1.size(); ++k) {
    REQUIRE(s1[k].records.size() == s2[k].records.size());
    for (std::size_t r = 0; r < s1[k].records.size(); ++r)
      REQUIRE(s1[k].records[r].id == s2[k].records[r].id);
    REQUIRE(s1[k].total_duration <= 120.0 + 1e-9);
    REQUIRE(s1[k].total_duration >= 120.0 - max_dur - 1e-9);
    for (const auto& r : s1[k].records) REQUIRE(seen.insert(r.id).second);  // disjoint
  }
  const auto s3 = shard_split(m, 2.0, 77);
  bool differs = s3.size() != s1.size();
  if (!differs)
    for (std::size_t k = 0; !differs && k < s1.size(); ++k)
      differs = s1[k].records[0].id != s3[k].records[0].id;
  REQUIRE(differs);  // seed actually drives the shuffle
}

TEST_CASE("shard_split matches a hand-simulated accumulation", "[data]") {
  Rng rng(72);
  std::vector<double> durations;
  for (int i = 0; i < 10; ++i) durations.push_back(rng.uniform(10.0, 50.0));
  const Manifest m = synthetic_manifest(durations);
  const double target = 90.0;
  const auto shards = shard_split(m, target / 60.0, 5);

  // oracle: walk the same shuffled order, close a shard before it overflows
  const auto order = data::detail::shuffled_records(m, 5);
  std::vector<std::vector<std::string>> expect;
  std::vector<std::string> cur;
  double acc = 0.0;
  for (const auto& r : order) {
    if (acc + r.duration_sec > target) {
      expect.push_back(cur);
      cur.clear();
      acc = 0.0;
    }
    cur.push_back(r.id);
    acc += r.duration_sec;
  }
  if (acc >= target) expect.push_back(cur);

  REQUIRE(shards.size() == expect.size());
  for (std::size_t k = 0; k < shards.size(); ++k) {
    REQUIRE(shards[k].records.size() == expect[k].size());
    for (std::size_t r = 0; r < expect[k].size(); ++r)
      REQUIRE(shards[k].records[r].id == expect[k][r]);
  }
}

TEST_CASE("shard_split rejects insufficient data", "[data]") {
  const Manifest m = synthetic_manifest({30.0, 40.0});
  REQUIRE_THROWS_AS(shard_split(m, 24.0, 1), InvalidInput);
}

TEST_CASE("take_prefix_minutes yields nested subsets", "[data]") {
  Rng rng(73);
  std::vector<double> durations;
  for (int i = 0; i < 60; ++i) durations.push_back(rng.uniform(2.0, 6.0));
  const Manifest m = synthetic_manifest(durations);
  const Manifest small = take_prefix_minutes(m, 1.0, 99);
  const Manifest big = take_prefix_minutes(m, 3.0, 99);
  REQUIRE(small.records.size() < big.records.size());
  for (std::size_t i = 0; i < small.records.size(); ++i)
    REQUIRE(small.records[i].id == big.records[i].id);  // prefix property
  REQUIRE(small.total_duration() <= 60.0);
  REQUIRE(big.total_duration() <= 180.0);
}

TEST_CASE("text normalization lowers case, strips punctuation, expands numbers", "[data]") {
  REQUIRE(normalize_text("Hello, WORLD!") == "hello world");
  REQUIRE(normalize_text("We saw 42 birds") == "we saw forty two birds");
  REQUIRE(normalize_text("Room 101.") == "room one hundred one");
  REQUIRE(normalize_text("about 1234567890 things") ==
          "about one two three four five six seven eight nine zero things");
  REQUIRE(normalize_text("it's fine") == "it's fine");
  REQUIRE(normalize_text("?!...").empty());
}

TEST_CASE("phonemize uses the lexicon verbatim with grapheme fallback", "[data]") {
  Lexicon lex;
  lex.add("cat", {"k", "ae", "t"});
  lex.add("sat", {"s", "ae", "t"});

  const PhonemizeResult r1 = phonemize("Cat sat.", lex);
  REQUIRE(r1.phonemes == std::vector<std::string>{"k", "ae", "t", "s", "ae", "t"});
  REQUIRE(r1.warnings.empty());

  const PhonemizeResult r2 = phonemize("cat zog", lex);
  REQUIRE(r2.phonemes == std::vector<std::string>{"k", "ae", "t", "g:z", "g:o", "g:g"});
  REQUIRE(r2.warnings.size() == 1);
  REQUIRE(r2.warnings[0].find("zog") != std::string::npos);

  REQUIRE_THROWS_AS(phonemize("?!,.", lex), InvalidInput);
}

TEST_CASE("lexicon files round trip", "[data]") {
  Lexicon lex;
  lex.add("dog", {"d", "ao", "g"});
  lex.add("fish", {"f", "ih", "sh"});
  const std::string path = (fs::temp_directory_path() / "vqtts_lex.txt").string();
  lex.save(path);
  const Lexicon back = Lexicon::from_file(path);
  REQUIRE(back.size() == 2);
  REQUIRE(*back.lookup("dog") == std::vector<std::string>{"d", "ao", "g"});
  REQUIRE(back.inventory() == std::vector<std::string>{"ao", "d", "f", "g", "ih", "sh"});
  std::remove(path.c_str());
}

TEST_CASE("pair_dataset joins symbols and warns about gaps", "[data]") {
  const Manifest m = synthetic_manifest({1.0, 1.0, 1.0, 1.0, 1.0});
  std::map<std::string, std::vector<std::string>> symbols;
  for (int i = 0; i < 5; ++i) symbols["utt" + std::to_string(i)] = {"a", "b"};

  const PairReport full = pair_dataset(m, symbols);
  REQUIRE(full.pairs.size() == 5);
  REQUIRE(full.warnings.empty());

  symbols.erase("utt3");
  const PairReport partial = pair_dataset(m, symbols);
  REQUIRE(partial.pairs.size() == 4);
  REQUIRE(partial.warnings.size() == 1);
  REQUIRE(partial.warnings[0].find("utt3") != std::string::npos);

  REQUIRE_THROWS_AS(pair_dataset(m, {}), InvalidInput);
}

TEST_CASE("length bucketing preserves the multiset of pairs", "[data]") {
  Rng rng(74);
  std::vector<PairedUtterance> pairs;
  for (int i = 0; i < 23; ++i) {
    PairedUtterance p;
    p.record.id = "utt" + std::to_string(i);
    p.symbols.assign(static_cast<std::size_t>(rng.uniform_int(1, 30)), "x");
    pairs.push_back(p);
  }
  const auto buckets = bucket_by_length(pairs, 4);
  std::multiset<std::string> before, after;
  for (const auto& p : pairs) before.insert(p.record.id);
  std::size_t prev_len = 0;
  for (const auto& b : buckets)
    for (const auto& p : b) {
      after.insert(p.record.id);
      REQUIRE(p.symbols.size() >= prev_len);
      prev_len = p.symbols.size();
    }
  REQUIRE(before == after);
}
