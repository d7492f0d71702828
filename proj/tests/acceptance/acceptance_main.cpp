/**
 * @file acceptance_main.cpp
 * @brief End-to-end acceptance suite. Runs every criterion at its stated
 *        tolerance and prints one PASS/FAIL line each; exits non-zero if
 *        any criterion fails.
 *
 * Usage: acceptance [--cli <path-to-cli-binary>] [--work <scratch-dir>]
 *        [--only <n>] (criterion 10 is skipped when --cli is absent)
 */
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

#include "fusiongan/baselines.hpp"
#include "fusiongan/checkpoint.hpp"
#include "fusiongan/fusion.hpp"

#include "../oracles.hpp"

namespace fs = std::filesystem;
using namespace fusiongan;
namespace orc = fusiongan::oracles;

namespace {

struct Criterion {
  int id;
  std::string label;
  std::function<std::string()> run;  // returns detail text; throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

double median5(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// ---------------------------------------------------------------- helpers

Corpus toy_corpus(char label, int n_tokens, int T,
                  const std::vector<std::vector<TokenId>>& rows) {
  std::vector<NoteEvent> events;
  for (int k = 0; k < n_tokens; ++k) events.push_back({60 + k, 1 + k});
  Corpus c;
  c.domain_label = label;
  c.T = T;
  c.vocab = Vocabulary::build({events});
  for (const auto& r : rows) c.sequences.push_back({r});
  return c;
}

Trio tiny_trio(std::uint64_t seed, int T, int n_tokens, int embed, int hidden,
               const std::vector<int>& widths, int filters) {
  std::vector<std::vector<TokenId>> rows_a, rows_b;
  Rng gen_rng(seed);
  for (int i = 0; i < 10; ++i) {
    std::vector<TokenId> ra, rb;
    for (int t = 0; t < T; ++t) {
      ra.push_back(1 + uniform_int(gen_rng, std::max(1, n_tokens / 2)));
      rb.push_back(1 + uniform_int(gen_rng, n_tokens));
    }
    rows_a.push_back(ra);
    rows_b.push_back(rb);
  }
  Corpus a = toy_corpus('A', n_tokens, T, rows_a);
  Corpus b = toy_corpus('B', n_tokens, T, rows_b);
  Corpus f = union_corpus(a, b, 'F');
  TrainConfig cfg;
  cfg.T = T;
  cfg.batch_size = 5;
  cfg.embedding_dim = embed;
  cfg.hidden_dim = hidden;
  cfg.critic_widths = widths;
  cfg.critic_filters = filters;
  cfg.clip_bound = 0.5;
  cfg.eval_batch = 5;
  Rng rng(seed + 17);
  DomainBundle ba = make_bundle('A', a, cfg, rng);
  DomainBundle bb = make_bundle('B', b, cfg, rng);
  DomainBundle bf = make_bundle('F', f, cfg, rng);
  Trio trio = make_trio(std::move(ba), std::move(bb), std::move(bf), cfg);
  orc::scale_params(trio.a.critic, 6.0);
  orc::scale_params(trio.b.critic, 6.0);
  orc::scale_params(trio.f.critic, 6.0);
  orc::scale_params(trio.a.generator, 6.0);
  orc::scale_params(trio.b.generator, 6.0);
  orc::scale_params(trio.f.generator, 6.0);
  return trio;
}

// ------------------------------------------------------------ criterion 1

std::string c1_fusion_level() {
  struct Row {
    const char* name;
    ListeningCounts counts;
    double expected;
    double tol;
  };
  const Row rows[] = {
      {"RM", {25.0, 22.5, 12.5, 40.0}, 0.575, 1e-3},
      {"MLE", {43.6, 9.1, 30.9, 16.4}, 0.491, 1e-3},
      {"RL", {20.1, 28.3, 20.8, 30.8}, 0.610, 1e-3},
      {"Fusion", {35.9, 25.0, 20.0, 19.1}, 0.700, 1e-3},
      // published table disagrees with its own formula on these two rows;
      // the formula's value is asserted
      {"GAN(formula)", {34.0, 17.0, 26.0, 14.0}, 1.0 - 31.0 / 91.0, 1e-9},
      {"MC(formula)", {32.0, 2.0, 14.0, 52.0}, 0.180, 1e-9},
  };
  std::string detail;
  for (const auto& row : rows) {
    const double fl = fusion_level(row.counts);
    require(std::abs(fl - row.expected) <= row.tol,
            std::string(row.name) + ": FL=" + fmt(fl) + " expected " +
                fmt(row.expected));
    detail += std::string(row.name) + "=" + fmt(fl) + " ";
  }
  return detail;
}

// ------------------------------------------------------------ criterion 2

std::string c2_emd_oracle() {
  Rng rng(2025);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int bins = 2 + uniform_int(rng, 7);
    const long total = 3 + uniform_int(rng, 9);
    std::vector<long> supply(static_cast<std::size_t>(bins), 0);
    std::vector<long> demand(static_cast<std::size_t>(bins), 0);
    for (long u = 0; u < total; ++u) {
      supply[static_cast<std::size_t>(uniform_int(rng, bins))] += 1;
      demand[static_cast<std::size_t>(uniform_int(rng, bins))] += 1;
    }
    Histogram h1 = Histogram::custom(bins), h2 = Histogram::custom(bins);
    for (int k = 0; k < bins; ++k) {
      h1.bins(k) = static_cast<double>(supply[static_cast<std::size_t>(k)]);
      h2.bins(k) = static_cast<double>(demand[static_cast<std::size_t>(k)]);
    }
    const double err =
        std::abs(emd_1d(h1, h2) - orc::transport_min_cost(supply, demand));
    worst = std::max(worst, err);
    require(err <= 1e-9, "case " + std::to_string(trial) + " err=" + fmt(err));
  }
  return "200 cases, worst |emd - oracle| = " + fmt(worst);
}

// ------------------------------------------------------------ criterion 3

Histogram random_prob_hist(Eigen::Index bins, Rng& rng) {
  Histogram h = Histogram::custom(bins);
  for (Eigen::Index k = 0; k < bins; ++k) h.bins(k) = uniform01(rng);
  h.bins(uniform_int(rng, static_cast<int>(bins))) += 0.5;
  return normalized(h);
}

std::string c3_triangle() {
  Rng rng(33);
  double worst_diff = 0.0, worst_ratio = 2.0;
  for (int trial = 0; trial < 1000; ++trial) {
    Histogram a = random_prob_hist(10, rng);
    Histogram b = random_prob_hist(10, rng);
    Histogram g = random_prob_hist(10, rng);
    for (Metric m : {Metric::kEuclidean, Metric::kEarthMover}) {
      const auto dr = diff_ratio(a, b, g, m);
      require(dr.diff >= -1e-9, "Diff=" + fmt(dr.diff) + " at trial " +
                                    std::to_string(trial));
      require(dr.ratio >= 1.0 - 1e-9, "Ratio=" + fmt(dr.ratio) + " at trial " +
                                          std::to_string(trial));
      worst_diff = std::min(worst_diff, dr.diff);
      worst_ratio = std::min(worst_ratio, dr.ratio);
      const auto at_a = diff_ratio(a, b, a, m);
      require(at_a.diff == 0.0 && at_a.ratio == 1.0, "degenerate at hA not exact");
      const auto at_b = diff_ratio(a, b, b, m);
      require(at_b.diff == 0.0 && at_b.ratio == 1.0, "degenerate at hB not exact");
    }
  }
  return "1000 triples; min Diff=" + fmt(worst_diff) + ", min Ratio=" + fmt(worst_ratio);
}

// ------------------------------------------------------------ criterion 4

std::string c4_gradients() {
  // V=5, E=3, H=4, T=6 instance
  Rng rng(44);
  auto gen = make_generator<double>(5, 3, 4, rng);
  orc::scale_params(gen, 8.0);
  Rng seq_rng(45);
  auto rand_seq = [&](int T) {
    SequenceSample s;
    for (int t = 0; t < T; ++t) s.tokens.push_back(1 + uniform_int(seq_rng, 4));
    return s;
  };
  std::vector<SequenceSample> batch{rand_seq(6), rand_seq(6), rand_seq(6)};
  std::string detail;

  {  // mean NLL
    auto analytic = grad_nll(gen, batch);
    auto fd = orc::finite_difference(gen, [&](const GeneratorParamsD& p) {
      double acc = 0.0;
      for (const auto& s : batch) acc += sequence_nll(p, s);
      return acc / 3.0;
    });
    const double err = orc::max_relative_error(analytic, fd);
    require(err <= 1e-4, "NLL gradient rel err " + fmt(err));
    detail += "nll=" + fmt(err) + " ";
  }
  {  // weighted log-prob under the sampling law
    Eigen::MatrixXd w(6, 3);
    for (int t = 0; t < 6; ++t)
      for (int i = 0; i < 3; ++i) w(t, i) = uniform_in(seq_rng, -2.0, 2.0);
    auto analytic = grad_weighted_logprob(gen, batch, w);
    auto fd = orc::finite_difference(gen, [&](const GeneratorParamsD& p) {
      double acc = 0.0;
      for (int i = 0; i < 3; ++i) {
        GenStateD st = initial_state(p);
        TokenId last = kStartToken;
        for (int t = 0; t < 6; ++t) {
          auto [probs, next] = generator_step(p, st, last);
          const TokenId target = batch[static_cast<std::size_t>(i)].tokens[t];
          acc += w(t, i) * std::log(probs(target) / (1.0 - probs(0)));
          st = next;
          last = target;
        }
      }
      return acc / 3.0;
    });
    const double err = orc::max_relative_error(analytic, fd);
    require(err <= 1e-4, "weighted log-prob gradient rel err " + fmt(err));
    detail += "wlogp=" + fmt(err) + " ";
  }
  {  // critic score
    auto critic = make_critic<double>(5, 3, {1, 2, 3}, 2, 0.5, rng);
    orc::scale_params(critic, 8.0);
    std::vector<SequenceSample> cbatch{rand_seq(6), rand_seq(6), rand_seq(6),
                                       rand_seq(6)};
    std::vector<double> signs{1.0, -1.0, 1.0, -1.0};
    auto analytic = grad_critic(critic, cbatch, signs);
    auto fd = orc::finite_difference(critic, [&](const CriticParamsD& p) {
      double acc = 0.0;
      for (std::size_t i = 0; i < cbatch.size(); ++i)
        acc += signs[i] * critic_score(p, cbatch[i]);
      return acc / static_cast<double>(cbatch.size());
    });
    const double err = orc::max_relative_error(analytic, fd);
    require(err <= 1e-4, "critic gradient rel err " + fmt(err));
    detail += "critic=" + fmt(err) + " ";
  }
  {  // combined critic objectives on a tiny trio
    Trio trio = tiny_trio(46, 6, 4, 3, 4, {1, 2, 3}, 2);
    Rng brng(47);
    BatchSet b = sample_batch_set(trio, 5, brng);
    const double lambda = trio.config.lambda_balance;

    auto obj_f = df_objective_grad(trio.f.critic, b, lambda);
    auto fd_f = orc::finite_difference(trio.f.critic, [&](const CriticParamsD& c) {
      return critic_part_F(b, c) - lambda * balance_penalty_F(b, c);
    });
    const double err_f = orc::max_relative_error(obj_f.grad, fd_f);
    require(err_f <= 1e-4, "D_F combined objective rel err " + fmt(err_f));
    detail += "df=" + fmt(err_f) + " ";

    auto obj_a = da_objective_grad(trio.a.critic, b, lambda, false);
    auto fd_a = orc::finite_difference(trio.a.critic, [&](const CriticParamsD& c) {
      return critic_part_A(b, c) - lambda * sandwich_penalty_A(b, c);
    });
    const double err_a = orc::max_relative_error(obj_a.grad, fd_a);
    require(err_a <= 1e-4, "D_A combined objective rel err " + fmt(err_a));
    detail += "da=" + fmt(err_a);
  }
  return detail;
}

// ------------------------------------------------------------ criterion 5

std::string c5_unbiasedness() {
  // enumerable instance: V=3 (two usable tokens), T=2
  Trio trio = tiny_trio(55, 2, 2, 2, 2, {1, 2}, 2);
  const int T = 2;
  const int kSamples = 50000;
  std::string detail;

  for (const bool gf_side : {true, false}) {
    const GeneratorParamsD& gen = gf_side ? trio.f.generator : trio.a.generator;
    SequenceScorer scorer = gf_side ? gf_reward_scorer(trio) : gab_reward_scorer(trio);

    // exact gradient of E[reward] by finite differences over the enumerated
    // sequence distribution (forward evaluations only)
    auto exact = orc::finite_difference(gen, [&](const GeneratorParamsD& p) {
      auto all = orc::enumerate_sequences(p, T);
      std::vector<SequenceSample> seqs;
      for (auto& [s, prob] : all) seqs.push_back(s);
      Eigen::VectorXd rewards = scorer(seqs);
      double acc = 0.0;
      for (std::size_t i = 0; i < all.size(); ++i)
        acc += all[i].second * rewards(static_cast<Eigen::Index>(i));
      return acc;
    });

    // 50k-sample batch mean of the per-sample REINFORCE estimate with the
    // rollout Q values and a constant zero baseline
    GeneratorParamsD mean_acc = zeros_like(gen);
    GeneratorParamsD m2_acc = zeros_like(gen);
    Rng rng(gf_side ? 601 : 602);
    for (int i = 0; i < kSamples; ++i) {
      Rng sample_rng(rng());
      auto [seq, logp] = generator_sample(gen, T, sample_rng);
      Eigen::VectorXd q = rollout_q_with(gen, scorer, seq, /*n_rollouts=*/2, sample_rng);
      Eigen::MatrixXd w(q.size(), 1);
      w.col(0) = q;
      auto g = grad_weighted_logprob(gen, {seq}, w);
      auto tm = mean_acc.tensors();
      auto t2 = m2_acc.tensors();
      auto tg = g.tensors();
      for (std::size_t k = 0; k < tm.size(); ++k) {
        *tm[k].second += *tg[k].second;
        *t2[k].second += tg[k].second->cwiseProduct(*tg[k].second);
      }
    }

    auto te = exact.tensors();
    auto tm = mean_acc.tensors();
    auto t2 = m2_acc.tensors();
    double worst_z = 0.0;
    for (std::size_t k = 0; k < tm.size(); ++k)
      for (Eigen::Index i = 0; i < tm[k].second->size(); ++i) {
        const double mean = tm[k].second->data()[i] / kSamples;
        const double second = t2[k].second->data()[i] / kSamples;
        const double var = std::max(second - mean * mean, 0.0);
        const double sigma = std::sqrt(var / kSamples);
        const double gap = std::abs(mean - te[k].second->data()[i]);
        const double z = gap / (sigma + 1e-12);
        worst_z = std::max(worst_z, z);
        require(gap <= 3.0 * sigma + 1e-9,
                std::string(gf_side ? "G_F" : "G_A") + " coordinate " +
                    tm[k].first + "[" + std::to_string(i) + "]: |mean-exact|=" +
                    fmt(gap) + " > 3 sigma=" + fmt(3.0 * sigma));
      }
    detail += std::string(gf_side ? "GF" : "GA") + " worst z=" + fmt(worst_z) + " ";
  }
  return detail + "(50k samples each)";
}

// ------------------------------------------------------------ criterion 6

std::string c6_sandwich_floor() {
  Rng rng(66);
  int equality_cases = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    // dyadic rationals: all arithmetic below is exact
    const double a = (uniform_int(rng, 257) - 128) / 8.0;
    const double f = (uniform_int(rng, 257) - 128) / 8.0;
    const double b = (uniform_int(rng, 257) - 128) / 8.0;
    const double pen = sandwich_penalty(a, f, b);
    const double floor = std::abs(a - b);
    require(pen >= floor, "pen < |a-b| at trial " + std::to_string(trial));
    const bool between = (f >= std::min(a, b)) && (f <= std::max(a, b));
    if (between) {
      require(pen == floor, "between but pen != floor (a=" + fmt(a) + ",f=" + fmt(f) +
                                ",b=" + fmt(b) + ")");
      ++equality_cases;
    } else {
      require(pen > floor, "outside but pen == floor");
    }
  }
  return "10000 triples, " + std::to_string(equality_cases) + " exact-equality cases";
}

// ------------------------------------------------------------ criterion 7

std::string c7_sign_bookkeeping() {
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Trio trio = tiny_trio(700 + trial, 6, 4, 3, 4, {1, 2, 3}, 2);
    Rng rng(900 + trial);
    BatchSet b = sample_batch_set(trio, 4, rng);
    const double total = total_objective(b, trio.a.critic, trio.b.critic, trio.f.critic);
    const double parts = critic_part_A(b, trio.a.critic) +
                         critic_part_B(b, trio.b.critic) +
                         critic_part_F(b, trio.f.critic);
    const double err = std::abs(total - parts);
    worst = std::max(worst, err);
    require(err <= 1e-10, "decomposition gap " + fmt(err) + " at trial " +
                              std::to_string(trial));
  }
  return "100 batches, worst |total - sum(parts)| = " + fmt(worst);
}

// ------------------------------------------------------------ criterion 8

TrainConfig e2e_config() {
  TrainConfig cfg;
  cfg.T = 32;
  cfg.batch_size = 8;
  cfg.embedding_dim = 16;
  cfg.hidden_dim = 32;
  cfg.critic_filters = 16;
  cfg.critic_widths = {1, 2, 3};
  cfg.n_rollouts = 4;
  cfg.pretrain_mle_epochs = 8;
  cfg.pretrain_classifier_steps = 30;
  cfg.pretrain_adv_iters = 6;
  cfg.fusion_iters = 300;
  cfg.critic_steps_per_gen_step = 3;
  cfg.eval_batch = 64;
  cfg.fusion_convergence_tol = 0.0;  // run the full 300 iterations
  return cfg;
}

std::string c8_end_to_end() {
  std::vector<double> pen_ratio, ratio_gf, ratio_rm;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig cfg = e2e_config();
    cfg.seed = seed;
    auto [a, b] =
        merge_to_shared(synth_corpus(Grammar::kArpeggio, 500, 32, split_seed(seed, 1)),
                        synth_corpus(Grammar::kStepwise, 500, 32, split_seed(seed, 2)));
    Corpus f = union_corpus(a, b, 'F');

    auto pretrain_domain = [&](char label, Corpus corpus) {
      Rng rng(split_seed(seed, static_cast<std::uint64_t>(label)));
      DomainBundle bundle = make_bundle(label, std::move(corpus), cfg, rng);
      pretrain_pipeline(bundle, cfg, rng);
      return bundle;
    };
    Trio trio = make_trio(pretrain_domain('A', a), pretrain_domain('B', b),
                          pretrain_domain('F', f), cfg);
    Rng fuse_rng(split_seed(seed, 999));
    FusionHistory history = fusion_train(trio, fuse_rng);
    require(history.rows.size() == 300, "expected 300 history rows");
    pen_ratio.push_back(history.rows.back().balance_f /
                        std::max(history.rows.front().balance_f, 1e-300));

    const Histogram dd_a = normalized(duration_distribution(a.sequences, a.vocab));
    const Histogram dd_b = normalized(duration_distribution(b.sequences, b.vocab));
    Rng sample_rng(split_seed(seed, 1234));
    auto gf_samples =
        generator_sample_batch(trio.f.generator, 500, cfg.T, sample_rng).first;
    const Histogram dd_gf = normalized(duration_distribution(gf_samples, a.vocab));
    ratio_gf.push_back(diff_ratio(dd_a, dd_b, dd_gf, Metric::kEuclidean).ratio);

    Rng rm_rng(split_seed(seed, 4321));
    auto rm_samples = rm_generate(f.vocab, f, 500, cfg.T, rm_rng);
    const Histogram dd_rm = normalized(duration_distribution(rm_samples, f.vocab));
    ratio_rm.push_back(diff_ratio(dd_a, dd_b, dd_rm, Metric::kEuclidean).ratio);

    const auto dt = std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    detail << "seed" << seed << "{pen " << fmt(history.rows.front().balance_f) << "->"
           << fmt(history.rows.back().balance_f) << ", ratioGF "
           << fmt(ratio_gf.back()) << ", ratioRM " << fmt(ratio_rm.back()) << ", "
           << dt << "s} ";
  }
  const double med_pen = median5(pen_ratio);
  const double med_gf = median5(ratio_gf);
  const double med_rm = median5(ratio_rm);
  detail << "| medians: pen_ratio=" << fmt(med_pen) << " ratioGF=" << fmt(med_gf)
         << " ratioRM=" << fmt(med_rm);
  require(med_pen <= 0.5, "median balance-penalty ratio " + fmt(med_pen) + " > 0.5");
  require(med_gf < med_rm, "median Ratio(EUD,DD) of G_F " + fmt(med_gf) +
                               " not below RM " + fmt(med_rm));
  return detail.str();
}

// ------------------------------------------------------------ criterion 9

std::string c9_figure_crosscheck() {
  const double jazz[20] = {124689, 12475, 5047, 2573, 1493, 1024, 694, 451, 355, 264,
                           208,    167,   105,  59,   50,   48,   32,  25,  25,  31};
  const double folk[20] = {18739, 8697, 1390, 997, 109, 96, 20, 21, 4, 1,
                           4,     0,    0,    3,   0,   0,  0,  0,  0, 0};
  Histogram hj = Histogram::duration(), hf = Histogram::duration();
  for (int k = 0; k < 20; ++k) {
    hj.bins(k) = jazz[k];
    hf.bins(k) = folk[k];
  }
  const double eud = euclidean_distance(hj, hf);
  const double implied_rm = 39742.2 / (1.375 - 1.0);
  const double implied_mc = 13988.7 / (1.132 - 1.0);
  require(std::abs(eud - implied_rm) / implied_rm < 0.02,
          "direct " + fmt(eud) + " vs RM-implied " + fmt(implied_rm));
  require(std::abs(eud - implied_mc) / implied_mc < 0.02,
          "direct " + fmt(eud) + " vs MC-implied " + fmt(implied_mc));
  return "direct=" + fmt(eud) + " RM-implied=" + fmt(implied_rm) +
         " MC-implied=" + fmt(implied_mc);
}

// ----------------------------------------------------------- criterion 10

std::string g_cli_path;
fs::path g_work_dir;

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), "missing output file " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

int run_cli_status(const std::string& args) {
  const std::string cmd = "\"" + g_cli_path + "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void run_cli(const std::string& args) {
  const int rc = run_cli_status(args);
  require(rc == 0, "CLI failed (" + std::to_string(rc) + "): " + args);
}

std::string c10_determinism() {
  require(!g_cli_path.empty(), "needs --cli <path>");
  const fs::path w = g_work_dir / "determinism";
  fs::remove_all(w);
  fs::create_directories(w);
  const std::string wd = w.string();

  run_cli("synth --grammar arpeggio --n 60 --T 32 --seed 7 --out " + wd + "/A1.txt");
  run_cli("synth --grammar arpeggio --n 60 --T 32 --seed 7 --out " + wd + "/A2.txt");
  require(file_bytes(w / "A1.txt") == file_bytes(w / "A2.txt"),
          "synth corpus bytes differ");
  require(file_bytes(w / "A1.txt.vocab") == file_bytes(w / "A2.txt.vocab"),
          "synth vocab bytes differ");
  run_cli("synth --grammar stepwise --n 60 --T 32 --seed 8 --out " + wd + "/B1.txt");

  std::ofstream cfg(w / "cfg.json");
  cfg << "{\n"
      << "  \"corpus_a\": \"" << wd << "/A1.txt\",\n"
      << "  \"corpus_b\": \"" << wd << "/B1.txt\",\n"
      << "  \"T\": 32, \"batch_size\": 8, \"n_rollouts\": 2,\n"
      << "  \"pretrain_mle_epochs\": 2, \"pretrain_classifier_steps\": 5,\n"
      << "  \"pretrain_adv_iters\": 2, \"fusion_iters\": 2,\n"
      << "  \"embedding_dim\": 8, \"hidden_dim\": 16, \"critic_filters\": 4,\n"
      << "  \"critic_widths\": [1,2,3], \"eval_batch\": 8, \"seed\": 11\n"
      << "}\n";
  cfg.close();
  const std::string base = "--config " + wd + "/cfg.json ";
  for (const char* d : {"A", "B", "F"}) {
    run_cli("pretrain " + base + "--set out_dir=" + wd + "/p1 --domain " + d);
    run_cli("pretrain " + base + "--set out_dir=" + wd + "/p2 --domain " + d);
    require(file_bytes(w / "p1" / (std::string(d) + ".ckpt")) ==
                file_bytes(w / "p2" / (std::string(d) + ".ckpt")),
            std::string("pretrain ckpt bytes differ for domain ") + d);
  }
  const std::string ckpts = "--ckpt-a " + wd + "/p1/A.ckpt --ckpt-b " + wd +
                            "/p1/B.ckpt --ckpt-f " + wd + "/p1/F.ckpt";
  run_cli("fuse " + base + "--set out_dir=" + wd + "/f1 " + ckpts);
  run_cli("fuse " + base + "--set out_dir=" + wd + "/f2 " + ckpts);
  require(file_bytes(w / "f1/trio.ckpt") == file_bytes(w / "f2/trio.ckpt"),
          "fuse trio ckpt bytes differ");
  require(file_bytes(w / "f1/fusion.log.tsv") == file_bytes(w / "f2/fusion.log.tsv"),
          "fusion logs differ");

  // the remaining commands are deterministic too
  run_cli("generate --ckpt " + wd + "/f1/trio.ckpt --n 20 --seed 3 --out " + wd +
          "/g1.txt");
  run_cli("generate --ckpt " + wd + "/f1/trio.ckpt --n 20 --seed 3 --out " + wd +
          "/g2.txt");
  require(file_bytes(w / "g1.txt") == file_bytes(w / "g2.txt"),
          "generate corpus bytes differ");
  run_cli("baseline " + base + "--kind mc --n 20 --out " + wd + "/m1.txt");
  run_cli("baseline " + base + "--kind mc --n 20 --out " + wd + "/m2.txt");
  require(file_bytes(w / "m1.txt") == file_bytes(w / "m2.txt"),
          "baseline corpus bytes differ");
  run_cli("eval --gen " + wd + "/g1.txt --a " + wd + "/A1.txt --b " + wd +
          "/B1.txt --out " + wd + "/e1");
  run_cli("eval --gen " + wd + "/g1.txt --a " + wd + "/A1.txt --b " + wd +
          "/B1.txt --out " + wd + "/e2");
  require(file_bytes(w / "e1/report.json") == file_bytes(w / "e2/report.json"),
          "eval reports differ");

  // exit statuses: 1 for config/usage errors, never-overwrite for checkpoints
  require(run_cli_status("") == 1, "missing subcommand should exit 1");
  require(run_cli_status("pretrain " + base + "--set no_such_key=1 --domain A") == 1,
          "unknown config key should exit 1");
  require(run_cli_status("synth --grammar nosuch --out " + wd + "/x.txt") == 1,
          "unknown grammar should exit 1");
  require(run_cli_status("pretrain " + base + "--set out_dir=" + wd +
                         "/p1 --domain A") == 1,
          "overwriting an existing checkpoint should exit 1");
  return "synth/pretrain/fuse/generate/baseline/eval reruns byte-identical; "
         "usage errors exit 1";
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  g_work_dir = fs::temp_directory_path() / "fusiongan-acceptance";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) g_cli_path = argv[++i];
    else if (arg == "--work" && i + 1 < argc) g_work_dir = argv[++i];
    else if (arg == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
    else {
      std::cerr << "unknown argument " << arg << "\n";
      return 1;
    }
  }
  fs::create_directories(g_work_dir);

  std::vector<Criterion> criteria{
      {1, "fusion-level reproduction", c1_fusion_level},
      {2, "earth-mover oracle equivalence (tol 1e-9)", c2_emd_oracle},
      {3, "triangle Diff/Ratio properties", c3_triangle},
      {4, "analytic gradients vs finite differences (rel err <= 1e-4)", c4_gradients},
      {5, "policy-gradient unbiasedness (3 sigma, 50k samples)", c5_unbiasedness},
      {6, "sandwich penalty floor (exact arithmetic)", c6_sandwich_floor},
      {7, "objective sign bookkeeping (tol 1e-10)", c7_sign_bookkeeping},
      {8, "end-to-end fusion on synthetic domains (5 seeds, 300 iters)", c8_end_to_end},
      {9, "duration-histogram cross-check (within 2%)", c9_figure_crosscheck},
      {10, "CLI determinism (byte-identical reruns)", c10_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (only != 0 && c.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = true;
    try {
      detail = c.run();
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    const auto secs = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count() /
                      1000.0;
    std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << ": " << c.label
              << " (" << secs << "s)\n        " << detail << "\n";
    if (!ok) ++failures;
  }
  if (failures) {
    std::cout << failures << " criterion(s) FAILED\n";
    return 1;
  }
  std::cout << "all criteria passed\n";
  return 0;
}
