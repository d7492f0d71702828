#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "fusiongan/baselines.hpp"
#include "fusiongan/eval.hpp"
#include "testutil.hpp"

using namespace fusiongan;
using fusiongan::testing::tiny_config;
using fusiongan::testing::toy_corpus;

TEST_SUITE_BEGIN("baselines");

TEST_CASE("rm_generate is uniform over the observed support") {
  // support {2, 5} inside a larger vocabulary
  Corpus combined = toy_corpus('F', 6, 4, {{2, 5, 2, 5}, {5, 2, 5, 2}});
  Rng rng(1);
  auto seqs = rm_generate(combined.vocab, combined, 2500, 4, rng);
  long c2 = 0, c5 = 0, other = 0;
  for (const auto& s : seqs)
    for (TokenId t : s.tokens) {
      if (t == 2) ++c2;
      else if (t == 5) ++c5;
      else ++other;
    }
  CHECK(other == 0);  // support closure
  const double n = 10000.0;
  const double sigma = std::sqrt(0.25 / n);
  CHECK(std::abs(c2 / n - 0.5) <= 3.0 * sigma);
}

TEST_CASE("rm/mc on a single-token support are constant") {
  Corpus combined = toy_corpus('F', 4, 3, {{3, 3, 3}});
  Rng r1(2), r2(2);
  for (const auto& s : rm_generate(combined.vocab, combined, 5, 3, r1))
    for (TokenId t : s.tokens) CHECK(t == 3);
  for (const auto& s : mc_generate(combined.vocab, combined, 5, 3, r2))
    for (TokenId t : s.tokens) CHECK(t == 3);
}

TEST_CASE("mc_generate follows the empirical frequencies (chi-square)") {
  // 3:1 ratio between tokens 1 and 2
  Corpus combined = toy_corpus('F', 2, 4, {{1, 1, 1, 2}});
  Rng rng(3);
  auto seqs = mc_generate(combined.vocab, combined, 2500, 4, rng);
  long c1 = 0, c2 = 0;
  for (const auto& s : seqs)
    for (TokenId t : s.tokens) (t == 1 ? c1 : c2) += 1;
  const double n = 10000.0;
  const double e1 = 0.75 * n, e2 = 0.25 * n;
  const double chi2 = (c1 - e1) * (c1 - e1) / e1 + (c2 - e2) * (c2 - e2) / e2;
  CHECK(chi2 < 10.828);  // df=1 critical value at p=0.001
}

TEST_CASE("mc duration distribution converges to the corpus distribution") {
  auto [a, b] = merge_to_shared(synth_corpus(Grammar::kArpeggio, 60, 16, 5),
                                synth_corpus(Grammar::kStepwise, 60, 16, 6));
  Corpus combined = union_corpus(a, b, 'F');
  Histogram dd_ref = normalized(duration_distribution(combined.sequences, combined.vocab));
  auto eud_at = [&](int n, std::uint64_t seed) {
    Rng rng(seed);
    auto seqs = mc_generate(combined.vocab, combined, n, 16, rng);
    return euclidean_distance(normalized(duration_distribution(seqs, combined.vocab)),
                              dd_ref);
  };
  CHECK(eud_at(5000, 9) < eud_at(150, 9));
}

TEST_CASE("rm and mc coincide when the corpus support is uniform") {
  Corpus combined = toy_corpus('F', 3, 4, {{1, 2, 3, 1}, {2, 3, 1, 2}, {3, 1, 2, 3}});
  Rng r1(11), r2(11);
  auto rm = rm_generate(combined.vocab, combined, 50, 4, r1);
  auto mc = mc_generate(combined.vocab, combined, 50, 4, r2);
  CHECK(rm == mc);
}

TEST_CASE("rm rejects an empty support") {
  Corpus combined = toy_corpus('F', 3, 2, {{1, 1}});
  combined.sequences.clear();
  Rng rng(1);
  CHECK_THROWS_AS(rm_generate(combined.vocab, combined, 1, 2, rng), InputError);
}

TEST_CASE("training baselines with zero iterations return their initialization") {
  Corpus combined = toy_corpus('F', 4, 5, {{1, 2, 3, 4, 1}, {4, 3, 2, 1, 4}});
  TrainConfig cfg = tiny_config(5);
  cfg.pretrain_mle_epochs = 0;
  cfg.pretrain_classifier_steps = 0;
  cfg.pretrain_adv_iters = 0;
  cfg.rl_iters = 0;

  Rng r1(21);
  auto gan = gan_baseline(combined, cfg, r1);
  Rng r2(21);
  auto fresh = make_bundle('F', combined, cfg, r2);
  auto ta = gan.generator.tensors();
  auto tf = fresh.generator.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k) CHECK(*ta[k].second == *tf[k].second);

  Rng r3(22);
  auto a = make_bundle('A', combined, cfg, r3);
  auto b = make_bundle('B', combined, cfg, r3);
  Rng r4(23);
  auto [ga, gb] = rl_baseline(a, b, cfg, r4);
  CHECK(ga.embedding == a.generator.embedding);
  CHECK(gb.embedding == b.generator.embedding);
}

TEST_CASE("rl_baseline with a zero reward critic leaves the generator unchanged") {
  Corpus combined = toy_corpus('F', 4, 5, {{1, 2, 3, 4, 1}});
  TrainConfig cfg = tiny_config(5);
  cfg.rl_iters = 3;
  Rng rng(31);
  auto a = make_bundle('A', combined, cfg, rng);
  auto b = make_bundle('B', combined, cfg, rng);
  for (auto& [name, t] : a.critic.tensors()) t->setZero();  // rewards G_B
  for (auto& [name, t] : b.critic.tensors()) t->setZero();  // rewards G_A
  Rng r(32);
  auto [ga, gb] = rl_baseline(a, b, cfg, r);
  auto ta = ga.tensors();
  auto t0 = a.generator.tensors();
  for (std::size_t k = 0; k < ta.size(); ++k) CHECK(*ta[k].second == *t0[k].second);
}

TEST_CASE("gan_baseline memorizes a single-sequence corpus") {
  const std::vector<TokenId> row{1, 3, 2, 4, 2, 3};
  Corpus combined = toy_corpus('F', 4, 6, {row});
  TrainConfig cfg = tiny_config(6);
  cfg.pretrain_mle_epochs = 200;
  cfg.alpha_gen = 5e-2;
  cfg.pretrain_classifier_steps = 10;
  cfg.pretrain_adv_iters = 3;
  Rng rng(41);
  auto bundle = gan_baseline(combined, cfg, rng);
  Rng sample_rng(42);
  auto samples = generator_sample_batch(bundle.generator, 40, 6, sample_rng).first;
  int hits = 0;
  for (const auto& s : samples)
    if (s.tokens == row) ++hits;
  CHECK(hits > 20);  // reproduction probability > 0.5
}

TEST_CASE("baseline outputs stay inside the shared vocabulary and length") {
  auto [a, b] = merge_to_shared(synth_corpus(Grammar::kArpeggio, 20, 8, 7),
                                synth_corpus(Grammar::kStepwise, 20, 8, 8));
  Corpus combined = union_corpus(a, b, 'F');
  Rng rng(9);
  for (const auto& seqs : {rm_generate(combined.vocab, combined, 10, 8, rng),
                           mc_generate(combined.vocab, combined, 10, 8, rng)}) {
    for (const auto& s : seqs) {
      CHECK(s.tokens.size() == 8);
      for (TokenId t : s.tokens) {
        CHECK(t >= 1);
        CHECK(t < combined.vocab.size());
      }
    }
  }
}

TEST_SUITE_END();
