/**
 * @file fusion.hpp
 * @brief Three-domain adversarial core: the 15-term objective, the six
 *        update rules (critic F/A/B with balance penalties, generator
 *        F/A/B by rollout policy gradient) and the fusion training loop.
 */
#pragma once

#include "fusiongan/eval.hpp"
#include "fusiongan/pretrain.hpp"

namespace fusiongan {

struct Trio {
  DomainBundle a, b, f;
  TrainConfig config;
  long iteration = 0;
};

// Validates labels {A,B,F}, shared vocabulary and equal T.
Trio make_trio(DomainBundle a, DomainBundle b, DomainBundle f, TrainConfig config);

// Minibatches for the five critic input slots. Generated slots carry the
// per-step log-probabilities of their samples (column = sequence).
struct BatchSet {
  std::vector<SequenceSample> real_a, real_b, gen_a, gen_b, gen_f;
  Eigen::MatrixXd logp_a, logp_b, logp_f;
};

BatchSet sample_batch_set(const Trio& trio, int batch_size, Rng& rng);

// Five-term signed means per critic; the total objective is their sum.
double critic_part_A(const BatchSet& batches, const CriticParamsD& critic_a);
double critic_part_B(const BatchSet& batches, const CriticParamsD& critic_b);
double critic_part_F(const BatchSet& batches, const CriticParamsD& critic_f);

// The full 15-term empirical objective, computed term by term:
//   D_A: +rA -rB -gA -gB -gF
//   D_B: -rA +rB -gA -gB -gF
//   D_F: +rA +rB +gA +gB -gF
double total_objective(const BatchSet& batches, const CriticParamsD& critic_a,
                       const CriticParamsD& critic_b, const CriticParamsD& critic_f);

// |mean F(gen_A) - mean F(gen_B)| + |mean F(real_A) - mean F(real_B)|
double balance_penalty_F(const BatchSet& batches, const CriticParamsD& critic_f);

// |a - f| + |f - b|; >= |a - b| with equality iff f lies weakly between.
double sandwich_penalty(double a, double f, double b);
double sandwich_penalty_A(const BatchSet& batches, const CriticParamsD& critic_a);
double sandwich_penalty_B(const BatchSet& batches, const CriticParamsD& critic_b);

// Value and exact gradient of (five-term part - lambda * penalty) for one
// critic, exposed for gradient checking. `side` selects F, A, or B.
struct CriticObjective {
  double objective = 0.0;  // the five-term part alone
  double penalty = 0.0;
  CriticParamsD grad;      // of (objective - lambda * penalty)
};
CriticObjective df_objective_grad(const CriticParamsD& critic_f, const BatchSet& batches,
                                  double lambda);
CriticObjective da_objective_grad(const CriticParamsD& critic, const BatchSet& batches,
                                  double lambda, bool mirror_b);

struct CriticUpdateDiag {
  double objective = 0.0;
  double penalty = 0.0;
};

// Adam-ascends the critic on (part - lambda_balance * penalty), then clips.
CriticUpdateDiag update_DF(Trio& trio, const BatchSet& batches);
CriticUpdateDiag update_DA(Trio& trio, const BatchSet& batches);
CriticUpdateDiag update_DB(Trio& trio, const BatchSet& batches);

// Terminal reward scorers under the configured sign convention. Under
// minmax the generators ascend these rewards; under paper-literal the
// scores are negated. G_F: D_A + D_B + D_F. G_A and G_B: D_A + D_B - D_F.
SequenceScorer gf_reward_scorer(const Trio& trio);
SequenceScorer gab_reward_scorer(const Trio& trio);

// One rollout policy-gradient step on the respective generator.
void update_GF(Trio& trio, Rng& rng);
void update_GA(Trio& trio, Rng& rng);
void update_GB(Trio& trio, Rng& rng);

struct FusionIterStats {
  long iter = 0;
  double objective = 0.0;
  double balance_f = 0.0;
  double sandwich_a = 0.0;
  double sandwich_b = 0.0;
  double diff_eud_dd = 0.0;   // Diff(EUD, DD) of fusion-generator samples
  double ratio_eud_dd = 0.0;  // Ratio(EUD, DD) of fusion-generator samples
};

struct FusionHistory {
  std::vector<FusionIterStats> rows;
  bool converged_early = false;
};

// Lines 17..24: per iteration, critic_steps x update_DF then update_GF,
// then the same for the A side and the B mirror. Emits one history row per
// iteration. On non-finite diagnostics the trio is rolled back to the last
// good iteration and NumericError is thrown.
FusionHistory fusion_train(Trio& trio, Rng& rng, std::vector<LogRow>* log = nullptr);

}  // namespace fusiongan
