/**
 * @file baselines.hpp
 * @brief The five comparison systems: random mixing, Monte-Carlo sampling,
 *        MLE, single-domain GAN and exchanged-critic RL.
 */
#pragma once

#include "fusiongan/pretrain.hpp"

namespace fusiongan {

enum class BaselineKind { kRM, kMC, kMLE, kGAN, kRL };

BaselineKind parse_baseline(const std::string& name);  // rm|mc|mle|gan|rl
std::string to_string(BaselineKind k);

// Tokens drawn uniformly over the SUPPORT of the combined corpus (each
// observed token id equally likely), independently per step.
std::vector<SequenceSample> rm_generate(const Vocabulary& vocab,
                                        const Corpus& combined_corpus, int n, int T,
                                        Rng& rng);

// Tokens drawn i.i.d. from the empirical frequency distribution of the
// combined corpus.
std::vector<SequenceSample> mc_generate(const Vocabulary& vocab,
                                        const Corpus& combined_corpus, int n, int T,
                                        Rng& rng);

// MLE pre-training only, on the combined corpus.
GeneratorParamsD mle_baseline(const Corpus& combined_corpus, const TrainConfig& cfg,
                              Rng& rng);

// The full single-domain pipeline on the combined corpus.
DomainBundle gan_baseline(const Corpus& combined_corpus, const TrainConfig& cfg, Rng& rng);

// Continues policy-gradient training with the critics exchanged (frozen):
// G_A is rewarded by D_B and G_B by D_A, for cfg.rl_iters iterations.
std::pair<GeneratorParamsD, GeneratorParamsD> rl_baseline(const DomainBundle& bundle_a,
                                                          const DomainBundle& bundle_b,
                                                          const TrainConfig& cfg, Rng& rng);

}  // namespace fusiongan
