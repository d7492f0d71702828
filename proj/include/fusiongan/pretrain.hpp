/**
 * @file pretrain.hpp
 * @brief Per-domain training: MLE pre-training, critic classification
 *        training, Monte-Carlo rollout rewards and the single-domain
 *        adversarial loop.
 */
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fusiongan/corpus.hpp"
#include "fusiongan/nets.hpp"

namespace fusiongan {

enum class SignConvention { kMinMax, kPaperLiteral };

SignConvention parse_sign_convention(const std::string& name);
std::string to_string(SignConvention c);

// Every tunable the objective leaves open lives here; defaults are the
// artifact's documented choices.
struct TrainConfig {
  int T = 32;
  int batch_size = 16;
  double alpha_gen = 1e-3;
  double alpha_critic = 1e-3;
  int n_rollouts = 16;
  int pretrain_mle_epochs = 20;
  int pretrain_classifier_steps = 50;
  int pretrain_adv_iters = 20;
  int fusion_iters = 300;
  int critic_steps_per_gen_step = 3;
  double lambda_balance = 1.0;
  double clip_bound = 0.01;
  std::uint64_t seed = 1;
  SignConvention sign_convention = SignConvention::kMinMax;
  double log_eps = 1e-12;
  double baseline_decay = 0.9;
  double pretrain_convergence_tol = 1e-3;
  double fusion_convergence_tol = 0.0;  // 0 = run exactly fusion_iters
  int embedding_dim = 32;
  int hidden_dim = 64;
  int critic_filters = 32;
  std::vector<int> critic_widths = {1, 2, 3, 5};
  int eval_batch = 64;
  int rl_iters = 20;
  double emd_ref_mass = 1e4;
  int threads = 0;  // worker budget; 0 = hardware concurrency

  void validate() const;  // InputError on nonsense values
};

// Exponential moving average (decay 0.9) of the batch-mean Q value at each
// step, subtracted from the Q values to reduce estimator variance. Sized
// lazily to T on first use; zero until then.
struct PolicyBaseline {
  Eigen::VectorXd value;

  Eigen::VectorXd resized(int T) const {
    if (value.size() == T) return value;
    if (value.size() != 0)
      throw InputError("policy baseline was trained with a different T");
    return Eigen::VectorXd::Zero(T);
  }
};

// One domain: corpus, generator, critic and their optimizer states.
struct DomainBundle {
  char label = 'A';
  Corpus corpus;
  GeneratorParamsD generator;
  AdamStateD gen_opt;
  CriticParamsD critic;
  AdamStateD critic_opt;
  PolicyBaseline baseline;
};

DomainBundle make_bundle(char label, Corpus corpus, const TrainConfig& cfg, Rng& rng);

// Tab-separated training-log row: `iter phase domain metric value`.
struct LogRow {
  long iter = 0;
  std::string phase;
  char domain = 'A';
  std::string metric;
  double value = 0.0;
};

void write_log_tsv(const std::vector<LogRow>& rows, const std::filesystem::path& path);

// --- Algorithm ops ----------------------------------------------------------

// Descends mean sequence NLL over shuffled minibatches; returns the
// per-epoch mean-NLL trace. Aborts with NumericError if the NLL diverges.
std::vector<double> mle_pretrain(DomainBundle& bundle, int epochs, const TrainConfig& cfg,
                                 Rng& rng);

std::vector<SequenceSample> generate_negatives(const DomainBundle& bundle, int n, Rng& rng,
                                               double log_eps = kLogProbFloor);

// Logistic loss on the raw critic scalar (label 1 = positives); clips after
// every step; returns the per-step loss trace.
std::vector<double> train_classifier(DomainBundle& bundle,
                                     const std::vector<SequenceSample>& positives,
                                     const std::vector<SequenceSample>& negatives,
                                     int steps, const TrainConfig& cfg, Rng& rng);

// Scores a batch of sequences; must be pure and callable concurrently.
using SequenceScorer = std::function<Eigen::VectorXd(const std::vector<SequenceSample>&)>;

SequenceScorer critic_scorer(const CriticParamsD& critic);

// Q_t for t=1..T: mean over n_rollouts of scorer(prefix s_1..s_t completed
// by sampling from gen); Q_T is scorer(seq) exactly, no sampling.
Eigen::VectorXd rollout_q_with(const GeneratorParamsD& gen, const SequenceScorer& scorer,
                               const SequenceSample& seq, int n_rollouts, Rng& rng,
                               double log_eps = kLogProbFloor);

Eigen::VectorXd rollout_q(const GeneratorParamsD& gen, const CriticParamsD& critic,
                          const SequenceSample& seq, int n_rollouts, Rng& rng,
                          double log_eps = kLogProbFloor);

// Per-sequence reward: maps (sequence, rng) to the T per-step Q values.
using RewardFn = std::function<Eigen::VectorXd(const SequenceSample&, Rng&)>;

RewardFn make_rollout_reward(const GeneratorParamsD& gen, SequenceScorer scorer,
                             int n_rollouts, double log_eps = kLogProbFloor);

// The REINFORCE estimate used by policy_gradient_step, exposed so its
// statistics can be tested: gradient of (1/B) sum_{i,t} (Q_it - baseline_t)
// log q(s_it) at the current parameters, without an optimizer step.
// mean_q_out, when non-null, receives the per-step batch-mean Q.
GeneratorParamsD policy_gradient_estimate(const GeneratorParamsD& gen,
                                          const RewardFn& reward_fn, int batch_size, int T,
                                          const Eigen::VectorXd& baseline, Rng& rng,
                                          double log_eps, Eigen::VectorXd* mean_q_out);

// Samples a batch, weights log-probs by (Q - baseline), Adam-ascends the
// generator and updates the baseline EMA.
void policy_gradient_step(DomainBundle& bundle, int batch_size, const RewardFn& reward_fn,
                          const TrainConfig& cfg, Rng& rng);

// Alternates one policy-gradient step (rewards from rollout_q against the
// bundle's own critic) with critic_steps_per_gen_step classifier updates on
// fresh negatives. Stops early when the 10-iteration moving average of the
// critic loss changes by less than pretrain_convergence_tol (relative).
// Returns the per-iteration critic-loss trace.
std::vector<double> adversarial_pretrain(DomainBundle& bundle, int iters,
                                         const TrainConfig& cfg, Rng& rng,
                                         std::vector<LogRow>* log = nullptr);

// Lines 2..14 for one domain: MLE, initial classifier, adversarial loop.
void pretrain_pipeline(DomainBundle& bundle, const TrainConfig& cfg, Rng& rng,
                       std::vector<LogRow>* log = nullptr);

}  // namespace fusiongan
