#include "fusiongan/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace fusiongan {

std::string to_string(HistogramKind k) {
  switch (k) {
    case HistogramKind::kDuration: return "DD";
    case HistogramKind::kPitchClass: return "NPD";
    case HistogramKind::kCustom: return "custom";
  }
  return "?";
}

std::string to_string(Metric m) {
  return m == Metric::kEuclidean ? "EUD" : "EM";
}

Histogram Histogram::duration() {
  return {HistogramKind::kDuration, HistNorm::kCounts,
          Eigen::VectorXd::Zero(kDurationBins)};
}

Histogram Histogram::pitch_class() {
  return {HistogramKind::kPitchClass, HistNorm::kCounts,
          Eigen::VectorXd::Zero(kPitchClasses)};
}

Histogram Histogram::custom(Eigen::Index n) {
  if (n < 1) throw InputError("histogram needs at least one bin");
  return {HistogramKind::kCustom, HistNorm::kCounts, Eigen::VectorXd::Zero(n)};
}

Histogram duration_distribution(const std::vector<SequenceSample>& samples,
                                const Vocabulary& vocab) {
  Histogram h = Histogram::duration();
  for (const auto& s : samples)
    for (const auto& q : decode_sequence(s, vocab)) h.bins(q.duration_bin) += 1.0;
  return h;
}

Histogram pitch_distribution(const std::vector<SequenceSample>& samples,
                             const Vocabulary& vocab) {
  Histogram h = Histogram::pitch_class();
  for (const auto& s : samples)
    for (const auto& q : decode_sequence(s, vocab))
      if (q.pitch != kRestPitch) h.bins(pitch_class(q.pitch)) += 1.0;
  return h;
}

Histogram normalized(const Histogram& h, double ref_mass) {
  if (!(ref_mass > 0)) throw InputError("reference mass must be positive");
  const double total = h.total();
  if (!(total > 0)) throw InputError("cannot normalize an all-zero histogram");
  Histogram out = h;
  out.norm = HistNorm::kProbability;
  out.bins = h.bins * (ref_mass / total);
  return out;
}

namespace {

void check_comparable(const Histogram& h1, const Histogram& h2) {
  if (h1.kind != h2.kind)
    throw InputError("histogram kind mismatch: " + to_string(h1.kind) + " vs " +
                     to_string(h2.kind));
  if (h1.bins.size() != h2.bins.size())
    throw InputError("histogram length mismatch");
  if (h1.norm != h2.norm)
    throw InputError("histogram normalization mismatch (counts vs probability)");
  if ((h1.bins.array() < 0).any() || (h2.bins.array() < 0).any())
    throw InputError("histogram bins must be non-negative");
}

}  // namespace

double euclidean_distance(const Histogram& h1, const Histogram& h2) {
  check_comparable(h1, h2);
  return (h1.bins - h2.bins).norm();
}

double emd_1d(const Histogram& h1, const Histogram& h2) {
  check_comparable(h1, h2);
  const double t1 = h1.total();
  const double t2 = h2.total();
  if (!(t1 > 0) || !(t2 > 0)) throw InputError("earth mover distance needs nonzero mass");
  const double scale = std::max(t1, t2);
  if (std::abs(t1 - t2) > 1e-9 * scale)
    throw InputError("earth mover distance needs equal total mass (" +
                     std::to_string(t1) + " vs " + std::to_string(t2) + ")");
  double cdf1 = 0.0, cdf2 = 0.0, dist = 0.0;
  for (Eigen::Index k = 0; k < h1.bins.size(); ++k) {
    cdf1 += h1.bins(k);
    cdf2 += h2.bins(k);
    dist += std::abs(cdf1 - cdf2);
  }
  return dist;
}

DiffRatio diff_ratio(const Histogram& ha, const Histogram& hb, const Histogram& hg,
                     Metric metric) {
  auto d = [metric](const Histogram& x, const Histogram& y) {
    return metric == Metric::kEuclidean ? euclidean_distance(x, y) : emd_1d(x, y);
  };
  const double dag = d(ha, hg);
  const double dbg = d(hb, hg);
  const double dab = d(ha, hb);
  if (!(dab > 0))
    throw InputError("Ratio is undefined: the two reference histograms are identical");
  return {dag + dbg - dab, (dag + dbg) / dab};
}

double fusion_level(const ListeningCounts& c) {
  if (c.jazz < 0 || c.folk < 0 || c.mixture < 0 || c.neither < 0)
    throw InputError("listening counts must be non-negative");
  const double total = c.jazz + c.folk + c.mixture + c.neither;
  if (!(total > 0)) throw InputError("listening counts must not all be zero");
  return 1.0 - (std::abs(c.jazz - c.folk) + c.neither) / total;
}

SystemReport evaluate_system(const Corpus& generated, const Corpus& corpus_a,
                             const Corpus& corpus_b, double ref_mass,
                             const std::string& system_name) {
  SystemReport report;
  report.dd_gen = normalized(duration_distribution(generated.sequences, generated.vocab),
                             ref_mass);
  report.dd_a =
      normalized(duration_distribution(corpus_a.sequences, corpus_a.vocab), ref_mass);
  report.dd_b =
      normalized(duration_distribution(corpus_b.sequences, corpus_b.vocab), ref_mass);
  report.npd_gen =
      normalized(pitch_distribution(generated.sequences, generated.vocab), ref_mass);
  report.npd_a =
      normalized(pitch_distribution(corpus_a.sequences, corpus_a.vocab), ref_mass);
  report.npd_b =
      normalized(pitch_distribution(corpus_b.sequences, corpus_b.vocab), ref_mass);
  for (Metric metric : {Metric::kEuclidean, Metric::kEarthMover}) {
    const DiffRatio dd = diff_ratio(report.dd_a, report.dd_b, report.dd_gen, metric);
    report.rows.push_back({system_name, to_string(metric), "DD", dd.diff, dd.ratio,
                           generated.sequences.size()});
    const DiffRatio npd = diff_ratio(report.npd_a, report.npd_b, report.npd_gen, metric);
    report.rows.push_back({system_name, to_string(metric), "NPD", npd.diff, npd.ratio,
                           generated.sequences.size()});
  }
  return report;
}

void write_report_json(const SystemReport& report, const std::filesystem::path& path) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"system", r.system},
                    {"metric", r.metric},
                    {"histogram_kind", r.histogram_kind},
                    {"diff", r.diff},
                    {"ratio", r.ratio},
                    {"n_samples", r.n_samples}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write report " + path.string());
  out << rows.dump(2) << '\n';
  if (!out) throw InputError("write failed for " + path.string());
}

void write_histogram_csv(const Histogram& h, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write histogram " + path.string());
  out << "kind,bin,value\n";
  char buf[64];
  for (Eigen::Index k = 0; k < h.bins.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g", h.bins(k));
    out << to_string(h.kind) << ',' << k << ',' << buf << '\n';
  }
  if (!out) throw InputError("write failed for " + path.string());
}

}  // namespace fusiongan
