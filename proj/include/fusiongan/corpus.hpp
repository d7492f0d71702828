/**
 * @file corpus.hpp
 * @brief Symbolic melody events, token vocabulary, corpus files and the
 *        synthetic desk-scale domain generators.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "fusiongan/common.hpp"

namespace fusiongan {

using TokenId = std::int32_t;

constexpr TokenId kStartToken = 0;  // reserved, never appears in a body
constexpr int kRestPitch = -1;      // REST sentinel for NoteEvent::pitch
constexpr int kMaxMidiPitch = 127;
constexpr int kDurationBins = 20;   // duration histogram x-axis, bins 0..19
constexpr int kPitchClasses = 12;   // C .. B

// One melody event: a MIDI pitch (or REST) held for a positive number of
// quantization-grid units.
struct NoteEvent {
  int pitch = kRestPitch;
  int duration_units = 1;
  friend bool operator==(const NoteEvent&, const NoteEvent&) = default;
};

// Event after duration quantization; this is what a token encodes.
struct QuantizedEvent {
  int pitch = kRestPitch;   // kRestPitch or [0,127]
  int duration_bin = 0;     // [0, kDurationBins)
  friend bool operator==(const QuantizedEvent&, const QuantizedEvent&) = default;
  friend bool operator<(const QuantizedEvent& a, const QuantizedEvent& b) {
    return a.pitch != b.pitch ? a.pitch < b.pitch : a.duration_bin < b.duration_bin;
  }
};

// bin = min(units - 1, 19). Rejects non-positive durations.
int quantize_duration(int duration_units);

// pitch mod 12 with class 0 = C (MIDI 60 is middle C). Rejects REST and
// out-of-range pitches.
int pitch_class(int pitch);

// Bijection between observed (pitch, duration_bin) pairs and token ids
// 1..n; id 0 is START. Entries are sorted by (pitch, duration_bin), so a
// rebuild from the same event multiset yields identical ids.
class Vocabulary {
 public:
  Vocabulary() = default;

  // Builds from the union of the given event lists; at least one event.
  static Vocabulary build(const std::vector<std::vector<NoteEvent>>& corpora_events);

  // Direct construction from already-sorted unique entries (file loaders).
  static Vocabulary from_entries(std::vector<QuantizedEvent> entries);

  int size() const { return static_cast<int>(entries_.size()) + 1; }
  bool contains(const QuantizedEvent& e) const;
  TokenId encode(const QuantizedEvent& e) const;  // InputError if unknown
  QuantizedEvent decode(TokenId id) const;        // InputError on START/out of range
  const std::vector<QuantizedEvent>& entries() const { return entries_; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<QuantizedEvent> entries_;  // index = id - 1
};

// Fixed-length token sequence; never contains START.
struct SequenceSample {
  std::vector<TokenId> tokens;
  friend bool operator==(const SequenceSample&, const SequenceSample&) = default;
};

struct Corpus {
  char domain_label = 'A';  // 'A' | 'B' | 'F'
  int T = 0;
  std::vector<SequenceSample> sequences;
  Vocabulary vocab;
};

// Splits events into consecutive non-overlapping windows of length T and
// encodes each; the trailing remainder shorter than T is dropped.
std::vector<SequenceSample> encode_events(const std::vector<NoteEvent>& events,
                                          const Vocabulary& vocab, int T);

std::vector<QuantizedEvent> decode_sequence(const SequenceSample& sample,
                                            const Vocabulary& vocab);

// Corpus file: header `#fusiongan-corpus v1 T=<int> V=<int> domain=<A|B|F>`
// then one sequence per line, T space-separated token ids. The vocabulary
// lives in a sibling file (default `<path>.vocab`), one line per entry
// `id pitch duration_bin` with pitch=-1 denoting REST.
Corpus load_corpus(const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path,
                   const std::filesystem::path& vocab_path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 const std::filesystem::path& vocab_path);

Vocabulary load_vocabulary(const std::filesystem::path& path);
void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path);

enum class Grammar { kArpeggio, kStepwise };
Grammar parse_grammar(const std::string& name);  // InputError on unknown name
char default_domain_label(Grammar g);            // arpeggio -> A, stepwise -> B

// Raw event stream for n sequences of T events each. Pure in (g, n, T, seed).
std::vector<NoteEvent> synth_events(Grammar g, int n, int T, std::uint64_t seed);

// Event stream encoded against a vocabulary built from itself.
Corpus synth_corpus(Grammar g, int n, int T, std::uint64_t seed);

// Decodes both corpora, rebuilds one vocabulary over the union of their
// events and re-encodes, so the two domains share token ids (required by
// every multi-domain consumer). Labels and T are preserved; T must match.
std::pair<Corpus, Corpus> merge_to_shared(const Corpus& a, const Corpus& b);

// Concatenation of two corpora over an identical vocabulary (X_F = X_A + X_B).
Corpus union_corpus(const Corpus& a, const Corpus& b, char label);

}  // namespace fusiongan
