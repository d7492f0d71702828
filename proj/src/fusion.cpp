#include "fusiongan/fusion.hpp"

#include <cmath>
#include <tuple>

namespace fusiongan {

Trio make_trio(DomainBundle a, DomainBundle b, DomainBundle f, TrainConfig config) {
  config.validate();
  if (a.label != 'A' || b.label != 'B' || f.label != 'F')
    throw InputError("trio bundles must carry labels A, B, F in that order");
  if (!(a.corpus.vocab == b.corpus.vocab) || !(a.corpus.vocab == f.corpus.vocab))
    throw InputError("trio bundles must share one vocabulary");
  if (a.corpus.T != config.T || b.corpus.T != config.T || f.corpus.T != config.T)
    throw InputError("trio corpora must share the configured T");
  Trio trio;
  trio.a = std::move(a);
  trio.b = std::move(b);
  trio.f = std::move(f);
  trio.config = std::move(config);
  return trio;
}

BatchSet sample_batch_set(const Trio& trio, int batch_size, Rng& rng) {
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  BatchSet out;
  auto draw_real = [&](const Corpus& corpus, std::vector<SequenceSample>& slot) {
    slot.reserve(static_cast<std::size_t>(batch_size));
    for (int k = 0; k < batch_size; ++k)
      slot.push_back(corpus.sequences[static_cast<std::size_t>(
          uniform_int(rng, static_cast<int>(corpus.sequences.size())))]);
  };
  draw_real(trio.a.corpus, out.real_a);
  draw_real(trio.b.corpus, out.real_b);
  const double eps = trio.config.log_eps;
  std::tie(out.gen_a, out.logp_a) =
      generator_sample_batch(trio.a.generator, batch_size, trio.config.T, rng, eps);
  std::tie(out.gen_b, out.logp_b) =
      generator_sample_batch(trio.b.generator, batch_size, trio.config.T, rng, eps);
  std::tie(out.gen_f, out.logp_f) =
      generator_sample_batch(trio.f.generator, batch_size, trio.config.T, rng, eps);
  return out;
}

namespace {

double mean_score(const CriticParamsD& critic, const std::vector<SequenceSample>& seqs) {
  if (seqs.empty()) throw InputError("batch slot is empty");
  return critic_score_batch(critic, seqs).mean();
}

void check_batches(const BatchSet& b) {
  const std::size_t n = b.real_a.size();
  if (n == 0 || b.real_b.size() != n || b.gen_a.size() != n || b.gen_b.size() != n ||
      b.gen_f.size() != n)
    throw InputError("the five batch slots must have one common non-zero size");
}

double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

double critic_part_A(const BatchSet& b, const CriticParamsD& critic_a) {
  check_batches(b);
  return mean_score(critic_a, b.real_a) - mean_score(critic_a, b.real_b) -
         mean_score(critic_a, b.gen_a) - mean_score(critic_a, b.gen_b) -
         mean_score(critic_a, b.gen_f);
}

double critic_part_B(const BatchSet& b, const CriticParamsD& critic_b) {
  check_batches(b);
  return -mean_score(critic_b, b.real_a) + mean_score(critic_b, b.real_b) -
         mean_score(critic_b, b.gen_a) - mean_score(critic_b, b.gen_b) -
         mean_score(critic_b, b.gen_f);
}

double critic_part_F(const BatchSet& b, const CriticParamsD& critic_f) {
  check_batches(b);
  return mean_score(critic_f, b.real_a) + mean_score(critic_f, b.real_b) +
         mean_score(critic_f, b.gen_a) + mean_score(critic_f, b.gen_b) -
         mean_score(critic_f, b.gen_f);
}

double total_objective(const BatchSet& b, const CriticParamsD& critic_a,
                       const CriticParamsD& critic_b, const CriticParamsD& critic_f) {
  check_batches(b);
  const double a_ra = mean_score(critic_a, b.real_a), a_rb = mean_score(critic_a, b.real_b),
               a_ga = mean_score(critic_a, b.gen_a), a_gb = mean_score(critic_a, b.gen_b),
               a_gf = mean_score(critic_a, b.gen_f);
  const double b_ra = mean_score(critic_b, b.real_a), b_rb = mean_score(critic_b, b.real_b),
               b_ga = mean_score(critic_b, b.gen_a), b_gb = mean_score(critic_b, b.gen_b),
               b_gf = mean_score(critic_b, b.gen_f);
  const double f_ra = mean_score(critic_f, b.real_a), f_rb = mean_score(critic_f, b.real_b),
               f_ga = mean_score(critic_f, b.gen_a), f_gb = mean_score(critic_f, b.gen_b),
               f_gf = mean_score(critic_f, b.gen_f);
  return (a_ra - a_rb - a_ga - a_gb - a_gf) + (-b_ra + b_rb - b_ga - b_gb - b_gf) +
         (f_ra + f_rb + f_ga + f_gb - f_gf);
}

double balance_penalty_F(const BatchSet& b, const CriticParamsD& critic_f) {
  check_batches(b);
  return std::abs(mean_score(critic_f, b.gen_a) - mean_score(critic_f, b.gen_b)) +
         std::abs(mean_score(critic_f, b.real_a) - mean_score(critic_f, b.real_b));
}

double sandwich_penalty(double a, double f, double b) {
  return std::abs(a - f) + std::abs(f - b);
}

double sandwich_penalty_A(const BatchSet& b, const CriticParamsD& critic_a) {
  check_batches(b);
  return sandwich_penalty(mean_score(critic_a, b.real_a), mean_score(critic_a, b.gen_f),
                          mean_score(critic_a, b.real_b));
}

double sandwich_penalty_B(const BatchSet& b, const CriticParamsD& critic_b) {
  check_batches(b);
  return sandwich_penalty(mean_score(critic_b, b.real_b), mean_score(critic_b, b.gen_f),
                          mean_score(critic_b, b.real_a));
}

namespace {

// Concatenates the five slots in the fixed order [rA, rB, gA, gB, gF] and
// differentiates sum_slot coeff_slot * mean_score(slot) in one pass.
CriticParamsD slot_weighted_grad(const CriticParamsD& critic, const BatchSet& b,
                                 double w_ra, double w_rb, double w_ga, double w_gb,
                                 double w_gf) {
  const std::size_t n = b.real_a.size();
  std::vector<SequenceSample> all;
  all.reserve(5 * n);
  std::vector<double> weights;
  weights.reserve(5 * n);
  auto push = [&](const std::vector<SequenceSample>& slot, double coeff) {
    for (const auto& s : slot) {
      all.push_back(s);
      weights.push_back(coeff / static_cast<double>(n));
    }
  };
  push(b.real_a, w_ra);
  push(b.real_b, w_rb);
  push(b.gen_a, w_ga);
  push(b.gen_b, w_gb);
  push(b.gen_f, w_gf);
  return critic_grad_weighted(critic, all, weights);
}

}  // namespace

CriticObjective df_objective_grad(const CriticParamsD& critic_f, const BatchSet& b,
                                  double lambda) {
  check_batches(b);
  CriticObjective out;
  out.objective = critic_part_F(b, critic_f);
  const double g_gap = mean_score(critic_f, b.gen_a) - mean_score(critic_f, b.gen_b);
  const double r_gap = mean_score(critic_f, b.real_a) - mean_score(critic_f, b.real_b);
  out.penalty = std::abs(g_gap) + std::abs(r_gap);
  const double sg = sgn(g_gap), sr = sgn(r_gap);
  out.grad = slot_weighted_grad(critic_f, b,
                                /*rA*/ 1.0 - lambda * sr,
                                /*rB*/ 1.0 + lambda * sr,
                                /*gA*/ 1.0 - lambda * sg,
                                /*gB*/ 1.0 + lambda * sg,
                                /*gF*/ -1.0);
  return out;
}

CriticObjective da_objective_grad(const CriticParamsD& critic, const BatchSet& b,
                                  double lambda, bool mirror_b) {
  check_batches(b);
  // own = the critic's home domain slot, other = the opposite domain.
  const auto& real_own = mirror_b ? b.real_b : b.real_a;
  const auto& real_other = mirror_b ? b.real_a : b.real_b;
  const double own = mean_score(critic, real_own);
  const double other = mean_score(critic, real_other);
  const double fgen = mean_score(critic, b.gen_f);
  CriticObjective out;
  out.objective = own - other - mean_score(critic, b.gen_a) - mean_score(critic, b.gen_b) -
                  fgen;
  out.penalty = sandwich_penalty(own, fgen, other);
  const double s1 = sgn(own - fgen), s2 = sgn(fgen - other);
  const double w_own = 1.0 - lambda * s1;
  const double w_other = -1.0 + lambda * s2;
  out.grad = slot_weighted_grad(critic, b,
                                /*rA*/ mirror_b ? w_other : w_own,
                                /*rB*/ mirror_b ? w_own : w_other,
                                /*gA*/ -1.0,
                                /*gB*/ -1.0,
                                /*gF*/ -1.0 + lambda * (s1 - s2));
  return out;
}

namespace {

CriticUpdateDiag apply_critic_update(DomainBundle& bundle, const CriticObjective& obj,
                                     const TrainConfig& cfg) {
  if (!std::isfinite(obj.objective) || !std::isfinite(obj.penalty) ||
      !all_finite(obj.grad))
    throw NumericError("critic update diverged (non-finite objective or gradient)");
  adam_step(bundle.critic, obj.grad, Direction::kAscend, bundle.critic_opt,
            cfg.alpha_critic);
  clip_parameters_in_place(bundle.critic);
  return {obj.objective, obj.penalty};
}

}  // namespace

CriticUpdateDiag update_DF(Trio& trio, const BatchSet& batches) {
  auto obj = df_objective_grad(trio.f.critic, batches, trio.config.lambda_balance);
  return apply_critic_update(trio.f, obj, trio.config);
}

CriticUpdateDiag update_DA(Trio& trio, const BatchSet& batches) {
  auto obj = da_objective_grad(trio.a.critic, batches, trio.config.lambda_balance, false);
  return apply_critic_update(trio.a, obj, trio.config);
}

CriticUpdateDiag update_DB(Trio& trio, const BatchSet& batches) {
  auto obj = da_objective_grad(trio.b.critic, batches, trio.config.lambda_balance, true);
  return apply_critic_update(trio.b, obj, trio.config);
}

namespace {

double convention_sign(const TrainConfig& cfg) {
  return cfg.sign_convention == SignConvention::kMinMax ? 1.0 : -1.0;
}

}  // namespace

SequenceScorer gf_reward_scorer(const Trio& trio) {
  const double sign = convention_sign(trio.config);
  return [ca = trio.a.critic, cb = trio.b.critic, cf = trio.f.critic,
          sign](const std::vector<SequenceSample>& seqs) -> Eigen::VectorXd {
    return sign * (critic_score_batch(ca, seqs) + critic_score_batch(cb, seqs) +
                   critic_score_batch(cf, seqs));
  };
}

SequenceScorer gab_reward_scorer(const Trio& trio) {
  const double sign = convention_sign(trio.config);
  return [ca = trio.a.critic, cb = trio.b.critic, cf = trio.f.critic,
          sign](const std::vector<SequenceSample>& seqs) -> Eigen::VectorXd {
    return sign * (critic_score_batch(ca, seqs) + critic_score_batch(cb, seqs) -
                   critic_score_batch(cf, seqs));
  };
}

void update_GF(Trio& trio, Rng& rng) {
  auto reward = make_rollout_reward(trio.f.generator, gf_reward_scorer(trio),
                                    trio.config.n_rollouts, trio.config.log_eps);
  policy_gradient_step(trio.f, trio.config.batch_size, reward, trio.config, rng);
}

void update_GA(Trio& trio, Rng& rng) {
  auto reward = make_rollout_reward(trio.a.generator, gab_reward_scorer(trio),
                                    trio.config.n_rollouts, trio.config.log_eps);
  policy_gradient_step(trio.a, trio.config.batch_size, reward, trio.config, rng);
}

void update_GB(Trio& trio, Rng& rng) {
  auto reward = make_rollout_reward(trio.b.generator, gab_reward_scorer(trio),
                                    trio.config.n_rollouts, trio.config.log_eps);
  policy_gradient_step(trio.b, trio.config.batch_size, reward, trio.config, rng);
}

FusionHistory fusion_train(Trio& trio, Rng& rng, std::vector<LogRow>* log) {
  const TrainConfig& cfg = trio.config;
  cfg.validate();
  FusionHistory history;
  if (cfg.fusion_iters == 0) return history;

  const Histogram dd_a =
      normalized(duration_distribution(trio.a.corpus.sequences, trio.a.corpus.vocab));
  const Histogram dd_b =
      normalized(duration_distribution(trio.b.corpus.sequences, trio.b.corpus.vocab));

  Trio last_good = trio;
  std::vector<double> objective_trace;
  for (int it = 1; it <= cfg.fusion_iters; ++it) {
    try {
      for (int c = 0; c < cfg.critic_steps_per_gen_step; ++c) {
        BatchSet bs = sample_batch_set(trio, cfg.batch_size, rng);
        update_DF(trio, bs);
      }
      update_GF(trio, rng);
      for (int c = 0; c < cfg.critic_steps_per_gen_step; ++c) {
        BatchSet bs = sample_batch_set(trio, cfg.batch_size, rng);
        update_DA(trio, bs);
      }
      update_GA(trio, rng);
      for (int c = 0; c < cfg.critic_steps_per_gen_step; ++c) {
        BatchSet bs = sample_batch_set(trio, cfg.batch_size, rng);
        update_DB(trio, bs);
      }
      update_GB(trio, rng);

      BatchSet ev = sample_batch_set(trio, cfg.eval_batch, rng);
      FusionIterStats row;
      row.iter = it;
      row.objective = total_objective(ev, trio.a.critic, trio.b.critic, trio.f.critic);
      row.balance_f = balance_penalty_F(ev, trio.f.critic);
      row.sandwich_a = sandwich_penalty_A(ev, trio.a.critic);
      row.sandwich_b = sandwich_penalty_B(ev, trio.b.critic);
      const Histogram dd_g =
          normalized(duration_distribution(ev.gen_f, trio.f.corpus.vocab));
      const DiffRatio dr = diff_ratio(dd_a, dd_b, dd_g, Metric::kEuclidean);
      row.diff_eud_dd = dr.diff;
      row.ratio_eud_dd = dr.ratio;
      if (!std::isfinite(row.objective) || !std::isfinite(row.balance_f) ||
          !std::isfinite(row.sandwich_a) || !std::isfinite(row.sandwich_b) ||
          !std::isfinite(row.ratio_eud_dd))
        throw NumericError("fusion diagnostics became non-finite at iteration " +
                           std::to_string(it));

      history.rows.push_back(row);
      objective_trace.push_back(row.objective);
      if (log) {
        log->push_back({it, "fusion", 'F', "objective", row.objective});
        log->push_back({it, "fusion", 'F', "balance_penalty", row.balance_f});
        log->push_back({it, "fusion", 'A', "sandwich_penalty", row.sandwich_a});
        log->push_back({it, "fusion", 'B', "sandwich_penalty", row.sandwich_b});
        log->push_back({it, "fusion", 'F', "diff_eud_dd", row.diff_eud_dd});
        log->push_back({it, "fusion", 'F', "ratio_eud_dd", row.ratio_eud_dd});
      }
      trio.iteration += 1;
      last_good = trio;
    } catch (const NumericError&) {
      trio = last_good;
      throw;
    }

    constexpr std::size_t kWindow = 10;
    if (cfg.fusion_convergence_tol > 0 && objective_trace.size() >= 2 * kWindow) {
      double now = 0.0, prev = 0.0;
      for (std::size_t i = objective_trace.size() - kWindow; i < objective_trace.size();
           ++i)
        now += objective_trace[i];
      for (std::size_t i = objective_trace.size() - 2 * kWindow;
           i < objective_trace.size() - kWindow; ++i)
        prev += objective_trace[i];
      now /= kWindow;
      prev /= kWindow;
      if (std::abs(now - prev) / std::max(std::abs(prev), 1e-12) <
          cfg.fusion_convergence_tol) {
        history.converged_early = true;
        break;
      }
    }
  }
  return history;
}

}  // namespace fusiongan
