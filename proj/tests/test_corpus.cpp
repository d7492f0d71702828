#include "doctest.h"

#include <fstream>

#include "fusiongan/corpus.hpp"
#include "fusiongan/eval.hpp"
#include "testutil.hpp"

using namespace fusiongan;
using fusiongan::testing::TempDir;

TEST_SUITE_BEGIN("corpus");

TEST_CASE("quantize_duration maps units to clipped bins") {
  CHECK(quantize_duration(1) == 0);
  CHECK(quantize_duration(20) == 19);
  CHECK(quantize_duration(500) == 19);
  CHECK_THROWS_AS(quantize_duration(0), InputError);
  CHECK_THROWS_AS(quantize_duration(-3), InputError);
}

TEST_CASE("quantize_duration is monotone and surjective on 1..20") {
  int prev = -1;
  bool seen[kDurationBins] = {};
  for (int d = 1; d <= 20; ++d) {
    const int bin = quantize_duration(d);
    CHECK(bin >= prev);
    CHECK(bin >= 0);
    CHECK(bin < kDurationBins);
    seen[bin] = true;
    prev = bin;
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("pitch_class with C = 0") {
  CHECK(pitch_class(60) == 0);
  CHECK(pitch_class(69) == 9);
  CHECK(pitch_class(127) == 7);
  CHECK_THROWS_AS(pitch_class(kRestPitch), InputError);
  CHECK_THROWS_AS(pitch_class(128), InputError);
}

TEST_CASE("build_vocabulary: one id per distinct pair plus START") {
  std::vector<NoteEvent> events{{60, 1}, {60, 2}, {62, 1}};
  auto vocab = Vocabulary::build({events});
  CHECK(vocab.size() == 4);

  // duplicates collapse
  std::vector<NoteEvent> dup{{60, 1}, {60, 1}, {60, 1}};
  CHECK(Vocabulary::build({dup}).size() == 2);

  CHECK_THROWS_AS(Vocabulary::build({{}}), InputError);
}

TEST_CASE("build_vocabulary id assignment is stable under permutation") {
  std::vector<NoteEvent> events{{72, 3}, {kRestPitch, 2}, {60, 1}, {65, 9}};
  std::vector<NoteEvent> shuffled{{60, 1}, {65, 9}, {72, 3}, {kRestPitch, 2}};
  auto v1 = Vocabulary::build({events});
  auto v2 = Vocabulary::build({shuffled});
  CHECK(v1 == v2);
  for (const auto& e : events)
    CHECK(v1.encode({e.pitch, quantize_duration(e.duration_units)}) ==
          v2.encode({e.pitch, quantize_duration(e.duration_units)}));
}

TEST_CASE("encode_events windows and drops the remainder") {
  std::vector<NoteEvent> events;
  for (int i = 0; i < 70; ++i) events.push_back({60 + (i % 5), 1 + (i % 3)});
  auto vocab = Vocabulary::build({events});
  CHECK(encode_events(events, vocab, 32).size() == 2);
  events.resize(31);
  CHECK(encode_events(events, vocab, 32).empty());
}

TEST_CASE("encode/decode round-trips quantized windows") {
  Rng rng(42);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<NoteEvent> events;
    const int n = 8 + uniform_int(rng, 40);
    for (int i = 0; i < n; ++i) {
      const bool rest = uniform01(rng) < 0.15;
      events.push_back(
          {rest ? kRestPitch : uniform_int(rng, 128), 1 + uniform_int(rng, 30)});
    }
    auto vocab = Vocabulary::build({events});
    const int T = 1 + uniform_int(rng, 10);
    auto samples = encode_events(events, vocab, T);
    CHECK(samples.size() == events.size() / static_cast<std::size_t>(T));
    for (std::size_t w = 0; w < samples.size(); ++w) {
      auto decoded = decode_sequence(samples[w], vocab);
      for (int k = 0; k < T; ++k) {
        const auto& e = events[w * static_cast<std::size_t>(T) + k];
        CHECK(decoded[k].pitch == e.pitch);
        CHECK(decoded[k].duration_bin == quantize_duration(e.duration_units));
      }
    }
  }
}

TEST_CASE("encode_events rejects pairs outside the vocabulary") {
  std::vector<NoteEvent> base{{60, 1}};
  auto vocab = Vocabulary::build({base});
  std::vector<NoteEvent> bad{{61, 1}};
  CHECK_THROWS_WITH_AS(encode_events(bad, vocab, 1), doctest::Contains("pitch=61"),
                       InputError);
}

TEST_CASE("corpus save/load round trip") {
  TempDir tmp("corpus-roundtrip");
  Corpus corpus = synth_corpus(Grammar::kStepwise, 5, 8, 11);
  const auto path = tmp.file("c.txt");
  save_corpus(corpus, path);
  Corpus loaded = load_corpus(path);
  CHECK(loaded.domain_label == corpus.domain_label);
  CHECK(loaded.T == corpus.T);
  CHECK(loaded.vocab == corpus.vocab);
  CHECK(loaded.sequences == corpus.sequences);
}

TEST_CASE("corpus loader reports the failing line") {
  TempDir tmp("corpus-errors");
  Corpus corpus = synth_corpus(Grammar::kStepwise, 3, 4, 11);
  const auto path = tmp.file("c.txt");
  save_corpus(corpus, path);

  SUBCASE("short line") {
    std::ofstream out(path, std::ios::app);
    out << "1 2 3\n";  // only 3 tokens when T=4
    out.close();
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains(":5:"), InputError);
  }
  SUBCASE("token out of range") {
    std::ofstream out(path, std::ios::app);
    out << "1 2 3 99999\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("out of range"),
                         InputError);
  }
  SUBCASE("START in body") {
    std::ofstream out(path, std::ios::app);
    out << "1 2 0 3\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("START"), InputError);
  }
  SUBCASE("garbage token") {
    std::ofstream out(path, std::ios::app);
    out << "1 2 x 3\n";
    out.close();
    CHECK_THROWS_AS(load_corpus(path), InputError);
  }
}

TEST_CASE("file with two valid lines loads two sequences") {
  TempDir tmp("corpus-two");
  const auto path = tmp.file("c.txt");
  const auto vocab_path = tmp.file("c.txt.vocab");
  {
    std::ofstream v(vocab_path);
    v << "1 -1 1\n2 60 0\n3 62 0\n";
    std::ofstream c(path);
    c << "#fusiongan-corpus v1 T=3 V=4 domain=B\n1 2 3\n3 2 1\n";
  }
  Corpus corpus = load_corpus(path);
  CHECK(corpus.sequences.size() == 2);
  CHECK(corpus.domain_label == 'B');
  CHECK(corpus.vocab.decode(1).pitch == kRestPitch);
}

TEST_CASE("vocabulary files with out-of-order ids are rejected") {
  TempDir tmp("vocab-order");
  const auto vocab_path = tmp.file("v.vocab");
  {
    std::ofstream v(vocab_path);
    v << "1 60 0\n2 62 0\n3 -1 1\n";  // REST must sort first
  }
  CHECK_THROWS_WITH_AS(load_vocabulary(vocab_path), doctest::Contains("sort order"),
                       InputError);
}

TEST_CASE("synth_corpus is pure in (grammar, n, T, seed)") {
  Corpus c1 = synth_corpus(Grammar::kArpeggio, 10, 32, 7);
  Corpus c2 = synth_corpus(Grammar::kArpeggio, 10, 32, 7);
  CHECK(c1.sequences == c2.sequences);
  CHECK(c1.vocab == c2.vocab);
  Corpus c3 = synth_corpus(Grammar::kArpeggio, 10, 32, 8);
  CHECK(c1.sequences != c3.sequences);
}

TEST_CASE("stepwise grammar stays inside C major") {
  Corpus c = synth_corpus(Grammar::kStepwise, 50, 32, 3);
  const bool in_c_major[12] = {true,  false, true,  false, true,  true,
                               false, true,  false, true,  false, true};
  Histogram npd = pitch_distribution(c.sequences, c.vocab);
  for (int pc = 0; pc < kPitchClasses; ++pc)
    if (!in_c_major[pc]) CHECK(npd.bins(pc) == 0.0);
}

TEST_CASE("the two grammars have separated duration distributions") {
  Corpus arp = synth_corpus(Grammar::kArpeggio, 500, 32, 21);
  Corpus step = synth_corpus(Grammar::kStepwise, 500, 32, 22);
  Histogram dd_a = normalized(duration_distribution(arp.sequences, arp.vocab));
  Histogram dd_s = normalized(duration_distribution(step.sequences, step.vocab));
  CHECK(euclidean_distance(dd_a, dd_s) > 0.0);
  Histogram npd_a = normalized(pitch_distribution(arp.sequences, arp.vocab));
  Histogram npd_s = normalized(pitch_distribution(step.sequences, step.vocab));
  CHECK(euclidean_distance(npd_a, npd_s) > 0.0);
}

TEST_CASE("merge_to_shared preserves events and aligns token ids") {
  Corpus a = synth_corpus(Grammar::kArpeggio, 10, 16, 1);
  Corpus b = synth_corpus(Grammar::kStepwise, 10, 16, 2);
  auto [sa, sb] = merge_to_shared(a, b);
  CHECK(sa.vocab == sb.vocab);
  CHECK(sa.sequences.size() == a.sequences.size());
  CHECK(sb.sequences.size() == b.sequences.size());
  for (std::size_t i = 0; i < a.sequences.size(); ++i)
    CHECK(decode_sequence(sa.sequences[i], sa.vocab) ==
          decode_sequence(a.sequences[i], a.vocab));
  Corpus u = union_corpus(sa, sb, 'F');
  CHECK(u.sequences.size() == sa.sequences.size() + sb.sequences.size());
  CHECK(u.domain_label == 'F');
}

TEST_SUITE_END();
