/**
 * @file eval.hpp
 * @brief Histogram features (duration bins, pitch classes), distribution
 *        distances, triangle Diff/Ratio and the listening-test summary.
 */
#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

#include "fusiongan/corpus.hpp"

namespace fusiongan {

enum class HistogramKind { kDuration, kPitchClass, kCustom };
enum class HistNorm { kCounts, kProbability };

std::string to_string(HistogramKind k);

struct Histogram {
  HistogramKind kind = HistogramKind::kCustom;
  HistNorm norm = HistNorm::kCounts;
  Eigen::VectorXd bins;

  static Histogram duration();               // 20 zero bins, counts
  static Histogram pitch_class();            // 12 zero bins, counts
  static Histogram custom(Eigen::Index n);   // n zero bins, counts

  double total() const { return bins.sum(); }
};

// Duration-bin counts over all tokens (REST included).
Histogram duration_distribution(const std::vector<SequenceSample>& samples,
                                const Vocabulary& vocab);

// Pitch-class counts over non-REST tokens.
Histogram pitch_distribution(const std::vector<SequenceSample>& samples,
                             const Vocabulary& vocab);

// Probability-normalizes and scales by ref_mass. All-zero input is an error.
Histogram normalized(const Histogram& h, double ref_mass = 1.0);

// L2 distance; requires equal kind, length and normalization flag.
double euclidean_distance(const Histogram& h1, const Histogram& h2);

// 1-D earth mover distance with unit bin spacing: sum_k |CDF1(k) - CDF2(k)|.
// Requires equal kind/length/normalization and equal total mass.
double emd_1d(const Histogram& h1, const Histogram& h2);

enum class Metric { kEuclidean, kEarthMover };

std::string to_string(Metric m);

struct DiffRatio {
  double diff = 0.0;
  double ratio = 0.0;
};

// Diff = d(A,G) + d(B,G) - d(A,B); Ratio = (d(A,G) + d(B,G)) / d(A,B).
// Identical A and B leave Ratio undefined -> error.
DiffRatio diff_ratio(const Histogram& ha, const Histogram& hb, const Histogram& hg,
                     Metric metric);

struct ListeningCounts {
  double jazz = 0.0;
  double folk = 0.0;
  double mixture = 0.0;
  double neither = 0.0;
};

// FL = 1 - (|jazz - folk| + neither) / (jazz + folk + mixture + neither).
double fusion_level(const ListeningCounts& counts);

struct ReportRow {
  std::string system;
  std::string metric;          // "EUD" | "EM"
  std::string histogram_kind;  // "DD" | "NPD"
  double diff = 0.0;
  double ratio = 0.0;
  std::size_t n_samples = 0;
};

struct SystemReport {
  std::vector<ReportRow> rows;  // the 2x2 metric x kind grid
  // probability-normalized histograms scaled to the reference mass
  Histogram dd_gen, dd_a, dd_b, npd_gen, npd_a, npd_b;
};

// DD and NPD for the generated samples and both source corpora, plus the
// {EUD, EM} x {DD, NPD} Diff/Ratio grid. All histograms are normalized to
// probability form and scaled by ref_mass so the two metrics see a common
// total mass regardless of sample counts.
SystemReport evaluate_system(const Corpus& generated, const Corpus& corpus_a,
                             const Corpus& corpus_b, double ref_mass = 1e4,
                             const std::string& system_name = "generated");

void write_report_json(const SystemReport& report, const std::filesystem::path& path);

// One `kind,bin,value` CSV per histogram.
void write_histogram_csv(const Histogram& h, const std::filesystem::path& path);

}  // namespace fusiongan
