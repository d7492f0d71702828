#include "fusiongan/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

namespace fusiongan {

namespace {

std::string pair_name(const QuantizedEvent& e) {
  std::ostringstream os;
  os << "(pitch=" << e.pitch << ", duration_bin=" << e.duration_bin << ")";
  return os.str();
}

void check_event(const NoteEvent& e) {
  if (e.duration_units < 1)
    throw InputError("note duration must be >= 1 grid unit, got " +
                     std::to_string(e.duration_units));
  if (e.pitch != kRestPitch && (e.pitch < 0 || e.pitch > kMaxMidiPitch))
    throw InputError("pitch must be REST or in [0,127], got " + std::to_string(e.pitch));
}

QuantizedEvent quantize(const NoteEvent& e) {
  check_event(e);
  return {e.pitch, quantize_duration(e.duration_units)};
}

}  // namespace

int quantize_duration(int duration_units) {
  if (duration_units < 1)
    throw InputError("duration_units must be positive, got " +
                     std::to_string(duration_units));
  return std::min(duration_units - 1, kDurationBins - 1);
}

int pitch_class(int pitch) {
  if (pitch == kRestPitch) throw InputError("REST has no pitch class");
  if (pitch < 0 || pitch > kMaxMidiPitch)
    throw InputError("pitch out of MIDI range: " + std::to_string(pitch));
  return pitch % kPitchClasses;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<NoteEvent>>& corpora_events) {
  std::set<QuantizedEvent> pairs;
  for (const auto& events : corpora_events)
    for (const auto& e : events) pairs.insert(quantize(e));
  if (pairs.empty()) throw InputError("cannot build a vocabulary from zero events");
  return from_entries({pairs.begin(), pairs.end()});
}

Vocabulary Vocabulary::from_entries(std::vector<QuantizedEvent> entries) {
  if (entries.empty()) throw InputError("vocabulary needs at least one entry");
  // ids must follow the canonical (pitch, duration_bin) order, or rebuilds
  // from events would assign different ids than the file claims
  if (!std::is_sorted(entries.begin(), entries.end()))
    throw InputError("vocabulary ids must follow the (pitch, duration_bin) sort order");
  for (std::size_t i = 0; i + 1 < entries.size(); ++i)
    if (entries[i] == entries[i + 1])
      throw InputError("duplicate vocabulary entry " + pair_name(entries[i]));
  for (const auto& e : entries) {
    if (e.pitch != kRestPitch && (e.pitch < 0 || e.pitch > kMaxMidiPitch))
      throw InputError("vocabulary pitch out of range: " + std::to_string(e.pitch));
    if (e.duration_bin < 0 || e.duration_bin >= kDurationBins)
      throw InputError("vocabulary duration_bin out of range: " +
                       std::to_string(e.duration_bin));
  }
  Vocabulary v;
  v.entries_ = std::move(entries);
  return v;
}

bool Vocabulary::contains(const QuantizedEvent& e) const {
  return std::binary_search(entries_.begin(), entries_.end(), e);
}

TokenId Vocabulary::encode(const QuantizedEvent& e) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), e);
  if (it == entries_.end() || !(*it == e))
    throw InputError("pair " + pair_name(e) + " is not in the vocabulary");
  return static_cast<TokenId>(it - entries_.begin()) + 1;
}

QuantizedEvent Vocabulary::decode(TokenId id) const {
  if (id == kStartToken) throw InputError("START token does not decode to an event");
  if (id < 1 || id >= size())
    throw InputError("token id " + std::to_string(id) + " out of range [1," +
                     std::to_string(size()) + ")");
  return entries_[static_cast<std::size_t>(id - 1)];
}

std::vector<SequenceSample> encode_events(const std::vector<NoteEvent>& events,
                                          const Vocabulary& vocab, int T) {
  if (T < 1) throw InputError("sequence length T must be >= 1");
  std::vector<SequenceSample> out;
  const std::size_t n_windows = events.size() / static_cast<std::size_t>(T);
  out.reserve(n_windows);
  for (std::size_t w = 0; w < n_windows; ++w) {
    SequenceSample s;
    s.tokens.reserve(T);
    for (int k = 0; k < T; ++k)
      s.tokens.push_back(vocab.encode(quantize(events[w * T + k])));
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<QuantizedEvent> decode_sequence(const SequenceSample& sample,
                                            const Vocabulary& vocab) {
  std::vector<QuantizedEvent> out;
  out.reserve(sample.tokens.size());
  for (TokenId id : sample.tokens) out.push_back(vocab.decode(id));
  return out;
}

namespace {

constexpr const char* kCorpusMagic = "#fusiongan-corpus v1";

[[noreturn]] void fail_line(const std::filesystem::path& path, std::size_t line,
                            const std::string& what) {
  throw InputError(path.string() + ":" + std::to_string(line) + ": " + what);
}

bool parse_int(std::string_view text, int& value) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
  return load_corpus(path, path.string() + ".vocab");
}

Corpus load_corpus(const std::filesystem::path& path,
                   const std::filesystem::path& vocab_path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file " + path.string());
  Corpus corpus;
  corpus.vocab = load_vocabulary(vocab_path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) fail_line(path, 1, "empty file, expected header");
  ++line_no;
  {
    std::istringstream hs(line);
    std::string magic1, magic2, t_field, v_field, d_field;
    hs >> magic1 >> magic2 >> t_field >> v_field >> d_field;
    if (magic1 + " " + magic2 != kCorpusMagic)
      fail_line(path, 1, "bad magic, expected `" + std::string(kCorpusMagic) + "`");
    int t = 0, v = 0;
    if (t_field.rfind("T=", 0) != 0 || !parse_int(t_field.substr(2), t) || t < 1)
      fail_line(path, 1, "bad T field `" + t_field + "`");
    if (v_field.rfind("V=", 0) != 0 || !parse_int(v_field.substr(2), v) || v < 2)
      fail_line(path, 1, "bad V field `" + v_field + "`");
    if (d_field.rfind("domain=", 0) != 0 || d_field.size() != 8 ||
        (d_field[7] != 'A' && d_field[7] != 'B' && d_field[7] != 'F'))
      fail_line(path, 1, "bad domain field `" + d_field + "`");
    if (v != corpus.vocab.size())
      fail_line(path, 1, "header V=" + std::to_string(v) + " but vocabulary has " +
                             std::to_string(corpus.vocab.size()) + " ids");
    corpus.T = t;
    corpus.domain_label = d_field[7];
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) fail_line(path, line_no, "empty line");
    SequenceSample s;
    std::istringstream ls(line);
    std::string tok;
    while (ls >> tok) {
      int id = 0;
      if (!parse_int(tok, id)) fail_line(path, line_no, "not an integer: `" + tok + "`");
      if (id == kStartToken)
        fail_line(path, line_no, "START token (0) inside a sequence body");
      if (id < 0 || id >= corpus.vocab.size())
        fail_line(path, line_no, "token id " + std::to_string(id) + " out of range [1," +
                                     std::to_string(corpus.vocab.size()) + ")");
      s.tokens.push_back(static_cast<TokenId>(id));
    }
    if (static_cast<int>(s.tokens.size()) != corpus.T)
      fail_line(path, line_no, "expected " + std::to_string(corpus.T) + " tokens, got " +
                                   std::to_string(s.tokens.size()));
    corpus.sequences.push_back(std::move(s));
  }
  if (corpus.sequences.empty())
    throw InputError(path.string() + ": corpus has no sequences");
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  save_corpus(corpus, path, path.string() + ".vocab");
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path,
                 const std::filesystem::path& vocab_path) {
  if (corpus.sequences.empty()) throw InputError("refusing to save an empty corpus");
  std::ofstream out(path, std::ios::binary);  // binary: LF on every platform
  if (!out) throw InputError("cannot write corpus file " + path.string());
  out << kCorpusMagic << " T=" << corpus.T << " V=" << corpus.vocab.size()
      << " domain=" << corpus.domain_label << "\n";
  for (const auto& s : corpus.sequences) {
    if (static_cast<int>(s.tokens.size()) != corpus.T)
      throw InputError("sequence length differs from corpus T");
    for (std::size_t k = 0; k < s.tokens.size(); ++k) {
      if (k) out << ' ';
      out << s.tokens[k];
    }
    out << '\n';
  }
  if (!out) throw InputError("write failed for " + path.string());
  save_vocabulary(corpus.vocab, vocab_path);
}

Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open vocabulary file " + path.string());
  std::vector<std::pair<int, QuantizedEvent>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    int id = 0, pitch = 0, bin = 0;
    if (!(ls >> id >> pitch >> bin))
      fail_line(path, line_no, "expected `id pitch duration_bin`");
    std::string extra;
    if (ls >> extra) fail_line(path, line_no, "trailing content `" + extra + "`");
    rows.emplace_back(id, QuantizedEvent{pitch, bin});
  }
  if (rows.empty()) throw InputError(path.string() + ": vocabulary file is empty");
  std::sort(rows.begin(), rows.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<QuantizedEvent> entries;
  entries.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<int>(i) + 1)
      throw InputError(path.string() + ": ids must be exactly 1..n, found id " +
                       std::to_string(rows[i].first));
    entries.push_back(rows[i].second);
  }
  return Vocabulary::from_entries(std::move(entries));
}

void save_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write vocabulary file " + path.string());
  const auto& entries = vocab.entries();
  for (std::size_t i = 0; i < entries.size(); ++i)
    out << (i + 1) << ' ' << entries[i].pitch << ' ' << entries[i].duration_bin << '\n';
  if (!out) throw InputError("write failed for " + path.string());
}

Grammar parse_grammar(const std::string& name) {
  if (name == "arpeggio") return Grammar::kArpeggio;
  if (name == "stepwise") return Grammar::kStepwise;
  throw InputError("unknown grammar `" + name + "` (expected arpeggio|stepwise)");
}

char default_domain_label(Grammar g) {
  return g == Grammar::kArpeggio ? 'A' : 'B';
}

namespace {

// Geometric on {1,2,...} with success probability 1/2 (mean 2).
int geometric_duration(Rng& rng) {
  int d = 1;
  while (uniform01(rng) < 0.5) ++d;
  return d;
}

// Random walk over the tones of one major triad spread across [48,84];
// short geometric durations and occasional rests.
void arpeggio_sequence(std::vector<NoteEvent>& out, int T, Rng& rng) {
  const int root = 48 + uniform_int(rng, 30);  // root+7 stays <= 84
  std::vector<int> ladder;
  for (int p = 48; p <= 84; ++p) {
    int rel = (p - root) % 12;
    if (rel < 0) rel += 12;
    if (rel == 0 || rel == 4 || rel == 7) ladder.push_back(p);
  }
  int idx = uniform_int(rng, static_cast<int>(ladder.size()));
  for (int k = 0; k < T; ++k) {
    if (uniform01(rng) < 0.05) {
      out.push_back({kRestPitch, geometric_duration(rng)});
      continue;
    }
    int step = uniform01(rng) < 0.5 ? -1 : 1;
    idx += step;
    if (idx < 0) idx = 1;
    if (idx >= static_cast<int>(ladder.size())) idx = static_cast<int>(ladder.size()) - 2;
    out.push_back({ladder[static_cast<std::size_t>(idx)], geometric_duration(rng)});
  }
}

// +-1/+-2 scale steps inside C major on [55,79], durations from {2,4,8}.
void stepwise_sequence(std::vector<NoteEvent>& out, int T, Rng& rng) {
  static const int kScale[] = {55, 57, 59, 60, 62, 64, 65, 67, 69, 71, 72, 74, 76, 77, 79};
  constexpr int kScaleLen = static_cast<int>(std::size(kScale));
  constexpr int kDurations[] = {2, 4, 8};
  int idx = uniform_int(rng, kScaleLen);
  for (int k = 0; k < T; ++k) {
    static const int kSteps[] = {-2, -1, 1, 2};
    idx += kSteps[uniform_int(rng, 4)];
    if (idx < 0) idx = -idx;
    if (idx >= kScaleLen) idx = 2 * (kScaleLen - 1) - idx;
    out.push_back({kScale[idx], kDurations[uniform_int(rng, 3)]});
  }
}

}  // namespace

std::vector<NoteEvent> synth_events(Grammar g, int n, int T, std::uint64_t seed) {
  if (n < 1) throw InputError("synth needs n >= 1 sequences");
  if (T < 1) throw InputError("synth needs T >= 1");
  std::vector<NoteEvent> events;
  events.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(T));
  for (int i = 0; i < n; ++i) {
    Rng rng(split_seed(seed, static_cast<std::uint64_t>(i)));
    if (g == Grammar::kArpeggio)
      arpeggio_sequence(events, T, rng);
    else
      stepwise_sequence(events, T, rng);
  }
  return events;
}

Corpus synth_corpus(Grammar g, int n, int T, std::uint64_t seed) {
  Corpus corpus;
  corpus.domain_label = default_domain_label(g);
  corpus.T = T;
  auto events = synth_events(g, n, T, seed);
  corpus.vocab = Vocabulary::build({events});
  corpus.sequences = encode_events(events, corpus.vocab, T);
  return corpus;
}

std::pair<Corpus, Corpus> merge_to_shared(const Corpus& a, const Corpus& b) {
  if (a.T != b.T)
    throw InputError("cannot merge corpora with different T (" + std::to_string(a.T) +
                     " vs " + std::to_string(b.T) + ")");
  auto to_events = [](const Corpus& c) {
    std::vector<NoteEvent> events;
    events.reserve(c.sequences.size() * static_cast<std::size_t>(c.T));
    for (const auto& s : c.sequences)
      for (const auto& q : decode_sequence(s, c.vocab))
        events.push_back({q.pitch, q.duration_bin + 1});  // representative duration
    return events;
  };
  auto events_a = to_events(a);
  auto events_b = to_events(b);
  Vocabulary shared = Vocabulary::build({events_a, events_b});
  Corpus out_a{a.domain_label, a.T, encode_events(events_a, shared, a.T), shared};
  Corpus out_b{b.domain_label, b.T, encode_events(events_b, shared, b.T), shared};
  return {std::move(out_a), std::move(out_b)};
}

Corpus union_corpus(const Corpus& a, const Corpus& b, char label) {
  if (!(a.vocab == b.vocab)) throw InputError("union_corpus requires a shared vocabulary");
  if (a.T != b.T) throw InputError("union_corpus requires equal T");
  Corpus out;
  out.domain_label = label;
  out.T = a.T;
  out.vocab = a.vocab;
  out.sequences = a.sequences;
  out.sequences.insert(out.sequences.end(), b.sequences.begin(), b.sequences.end());
  return out;
}

}  // namespace fusiongan
