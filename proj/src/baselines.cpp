#include "fusiongan/baselines.hpp"

#include <algorithm>

namespace fusiongan {

BaselineKind parse_baseline(const std::string& name) {
  if (name == "rm") return BaselineKind::kRM;
  if (name == "mc") return BaselineKind::kMC;
  if (name == "mle") return BaselineKind::kMLE;
  if (name == "gan") return BaselineKind::kGAN;
  if (name == "rl") return BaselineKind::kRL;
  throw InputError("unknown baseline `" + name + "` (rm|mc|mle|gan|rl)");
}

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::kRM: return "rm";
    case BaselineKind::kMC: return "mc";
    case BaselineKind::kMLE: return "mle";
    case BaselineKind::kGAN: return "gan";
    case BaselineKind::kRL: return "rl";
  }
  return "?";
}

namespace {

// Observed token ids and their counts, in id order.
std::pair<std::vector<TokenId>, std::vector<long>> token_counts(const Corpus& corpus,
                                                                const Vocabulary& vocab) {
  std::vector<long> counts(static_cast<std::size_t>(vocab.size()), 0);
  for (const auto& s : corpus.sequences)
    for (TokenId t : s.tokens) {
      if (t <= 0 || t >= vocab.size())
        throw InputError("combined corpus token outside the vocabulary");
      counts[static_cast<std::size_t>(t)] += 1;
    }
  std::vector<TokenId> support;
  std::vector<long> support_counts;
  for (TokenId t = 1; t < vocab.size(); ++t)
    if (counts[static_cast<std::size_t>(t)] > 0) {
      support.push_back(t);
      support_counts.push_back(counts[static_cast<std::size_t>(t)]);
    }
  if (support.empty()) throw InputError("combined corpus has an empty token support");
  return {std::move(support), std::move(support_counts)};
}

std::vector<SequenceSample> iid_sequences(int n, int T,
                                          const std::function<TokenId(Rng&)>& draw,
                                          Rng& rng) {
  if (n < 0 || T < 1) throw InputError("need n >= 0 samples of length T >= 1");
  std::vector<SequenceSample> out(static_cast<std::size_t>(n));
  for (auto& s : out) {
    s.tokens.reserve(static_cast<std::size_t>(T));
    for (int k = 0; k < T; ++k) s.tokens.push_back(draw(rng));
  }
  return out;
}

}  // namespace

std::vector<SequenceSample> rm_generate(const Vocabulary& vocab,
                                        const Corpus& combined_corpus, int n, int T,
                                        Rng& rng) {
  auto [support, counts] = token_counts(combined_corpus, vocab);
  auto draw = [support = support](Rng& r) {
    return support[static_cast<std::size_t>(
        uniform_int(r, static_cast<int>(support.size())))];
  };
  return iid_sequences(n, T, draw, rng);
}

std::vector<SequenceSample> mc_generate(const Vocabulary& vocab,
                                        const Corpus& combined_corpus, int n, int T,
                                        Rng& rng) {
  auto [support, counts] = token_counts(combined_corpus, vocab);
  long total = 0;
  for (long c : counts) total += c;
  std::vector<double> cdf(counts.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    acc += static_cast<double>(counts[i]) / static_cast<double>(total);
    cdf[i] = acc;
  }
  // first cdf entry strictly above u; agrees with uniform_int on a uniform
  // empirical distribution, boundary draws included
  auto draw = [support = support, cdf = cdf](Rng& r) {
    const double u = uniform01(r);
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const std::size_t idx =
        std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
    return support[idx];
  };
  return iid_sequences(n, T, draw, rng);
}

GeneratorParamsD mle_baseline(const Corpus& combined_corpus, const TrainConfig& cfg,
                              Rng& rng) {
  DomainBundle bundle = make_bundle('F', combined_corpus, cfg, rng);
  mle_pretrain(bundle, cfg.pretrain_mle_epochs, cfg, rng);
  return std::move(bundle.generator);
}

DomainBundle gan_baseline(const Corpus& combined_corpus, const TrainConfig& cfg, Rng& rng) {
  DomainBundle bundle = make_bundle('F', combined_corpus, cfg, rng);
  pretrain_pipeline(bundle, cfg, rng);
  return bundle;
}

std::pair<GeneratorParamsD, GeneratorParamsD> rl_baseline(const DomainBundle& bundle_a,
                                                          const DomainBundle& bundle_b,
                                                          const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  DomainBundle a = bundle_a;
  DomainBundle b = bundle_b;
  for (int it = 0; it < cfg.rl_iters; ++it) {
    auto reward_a = make_rollout_reward(a.generator, critic_scorer(bundle_b.critic),
                                        cfg.n_rollouts, cfg.log_eps);
    policy_gradient_step(a, cfg.batch_size, reward_a, cfg, rng);
    auto reward_b = make_rollout_reward(b.generator, critic_scorer(bundle_a.critic),
                                        cfg.n_rollouts, cfg.log_eps);
    policy_gradient_step(b, cfg.batch_size, reward_b, cfg, rng);
  }
  return {std::move(a.generator), std::move(b.generator)};
}

}  // namespace fusiongan
