#include "fusiongan/pretrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace fusiongan {

SignConvention parse_sign_convention(const std::string& name) {
  if (name == "minmax") return SignConvention::kMinMax;
  if (name == "paper-literal") return SignConvention::kPaperLiteral;
  throw InputError("unknown sign convention `" + name + "` (minmax|paper-literal)");
}

std::string to_string(SignConvention c) {
  return c == SignConvention::kMinMax ? "minmax" : "paper-literal";
}

void TrainConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw InputError(std::string(name) + " must be positive");
  };
  positive(T, "T");
  positive(batch_size, "batch_size");
  positive(alpha_gen, "alpha_gen");
  positive(alpha_critic, "alpha_critic");
  positive(n_rollouts, "n_rollouts");
  positive(critic_steps_per_gen_step, "critic_steps_per_gen_step");
  positive(clip_bound, "clip_bound");
  positive(embedding_dim, "embedding_dim");
  positive(hidden_dim, "hidden_dim");
  positive(critic_filters, "critic_filters");
  positive(eval_batch, "eval_batch");
  positive(emd_ref_mass, "emd_ref_mass");
  positive(log_eps, "log_eps");
  if (pretrain_mle_epochs < 0 || pretrain_adv_iters < 0 || fusion_iters < 0 ||
      rl_iters < 0 || pretrain_classifier_steps < 0)
    throw InputError("iteration counts must be >= 0");
  if (lambda_balance < 0) throw InputError("lambda_balance must be >= 0");
  if (baseline_decay < 0 || baseline_decay >= 1)
    throw InputError("baseline_decay must be in [0,1)");
  if (pretrain_convergence_tol < 0 || fusion_convergence_tol < 0)
    throw InputError("convergence tolerances must be >= 0");
  if (critic_widths.empty()) throw InputError("critic_widths must not be empty");
  for (int w : critic_widths) {
    if (w < 1) throw InputError("critic widths must be >= 1");
    if (w > T) throw InputError("critic width exceeds sequence length T");
  }
  if (threads < 0) throw InputError("threads must be >= 0");
}

DomainBundle make_bundle(char label, Corpus corpus, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  if (label != 'A' && label != 'B' && label != 'F')
    throw InputError("domain label must be A, B or F");
  if (corpus.sequences.empty()) throw InputError("bundle corpus must be non-empty");
  if (corpus.T != cfg.T)
    throw InputError("corpus T=" + std::to_string(corpus.T) + " does not match config T=" +
                     std::to_string(cfg.T));
  DomainBundle b;
  b.label = label;
  b.generator = make_generator<double>(corpus.vocab.size(), cfg.embedding_dim,
                                       cfg.hidden_dim, rng);
  b.critic = make_critic<double>(corpus.vocab.size(), cfg.embedding_dim, cfg.critic_widths,
                                 cfg.critic_filters, cfg.clip_bound, rng);
  b.corpus = std::move(corpus);
  return b;
}

void write_log_tsv(const std::vector<LogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write log file " + path.string());
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out << r.iter << '\t' << r.phase << '\t' << r.domain << '\t' << r.metric << '\t' << buf
        << '\n';
  }
  if (!out) throw InputError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

std::vector<double> mle_pretrain(DomainBundle& bundle, int epochs, const TrainConfig& cfg,
                                 Rng& rng) {
  if (bundle.corpus.sequences.empty()) throw InputError("MLE needs a non-empty corpus");
  if (epochs < 0) throw InputError("epochs must be >= 0");
  const auto& seqs = bundle.corpus.sequences;
  std::vector<std::size_t> order(seqs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(epochs));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[static_cast<std::size_t>(uniform_int(rng, static_cast<int>(i)))]);
    double nll_sum = 0.0;
    std::size_t nll_count = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<SequenceSample> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) batch.push_back(seqs[order[k]]);
      auto result = mean_nll_and_grad(bundle.generator, batch, cfg.log_eps);
      if (!std::isfinite(result.value) || !all_finite(result.grad))
        throw NumericError("MLE diverged: non-finite NLL at epoch " +
                           std::to_string(epoch));
      adam_step(bundle.generator, result.grad, Direction::kDescend, bundle.gen_opt,
                cfg.alpha_gen);
      nll_sum += result.value * static_cast<double>(batch.size());
      nll_count += batch.size();
    }
    trace.push_back(nll_sum / static_cast<double>(nll_count));
  }
  return trace;
}

std::vector<SequenceSample> generate_negatives(const DomainBundle& bundle, int n, Rng& rng,
                                               double log_eps) {
  if (n < 0) throw InputError("negative sample count must be >= 0");
  return generator_sample_batch(bundle.generator, n, bundle.corpus.T, rng, log_eps).first;
}

namespace {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<double> train_classifier(DomainBundle& bundle,
                                     const std::vector<SequenceSample>& positives,
                                     const std::vector<SequenceSample>& negatives,
                                     int steps, const TrainConfig& cfg, Rng& rng) {
  if (positives.empty() || negatives.empty())
    throw InputError("classifier training needs non-empty positive and negative sets");
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(steps));
  const int half = cfg.batch_size;
  for (int step = 0; step < steps; ++step) {
    std::vector<SequenceSample> batch;
    batch.reserve(2 * static_cast<std::size_t>(half));
    for (int k = 0; k < half; ++k)
      batch.push_back(positives[static_cast<std::size_t>(
          uniform_int(rng, static_cast<int>(positives.size())))]);
    for (int k = 0; k < half; ++k)
      batch.push_back(negatives[static_cast<std::size_t>(
          uniform_int(rng, static_cast<int>(negatives.size())))]);
    Eigen::VectorXd scores = critic_score_batch(bundle.critic, batch);
    double loss = 0.0;
    std::vector<double> weights(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const double y = i < static_cast<std::size_t>(half) ? 1.0 : 0.0;
      const double s = scores(static_cast<Eigen::Index>(i));
      loss += softplus(s) - y * s;
      weights[i] = (sigmoid(s) - y) / static_cast<double>(batch.size());
    }
    loss /= static_cast<double>(batch.size());
    if (!std::isfinite(loss))
      throw NumericError("classifier diverged: non-finite loss at step " +
                         std::to_string(step));
    auto grad = critic_grad_weighted(bundle.critic, batch, weights);
    adam_step(bundle.critic, grad, Direction::kDescend, bundle.critic_opt,
              cfg.alpha_critic);
    clip_parameters_in_place(bundle.critic);
    trace.push_back(loss);
  }
  return trace;
}

SequenceScorer critic_scorer(const CriticParamsD& critic) {
  return [c = critic](const std::vector<SequenceSample>& seqs) {
    return critic_score_batch(c, seqs);
  };
}

Eigen::VectorXd rollout_q_with(const GeneratorParamsD& gen, const SequenceScorer& scorer,
                               const SequenceSample& seq, int n_rollouts, Rng& rng,
                               double log_eps) {
  (void)log_eps;  // sampling itself never takes a log
  const int T = static_cast<int>(seq.tokens.size());
  if (T < 1) throw InputError("rollout needs a non-empty sequence");
  if (n_rollouts < 1) throw InputError("n_rollouts must be >= 1");
  const int R = n_rollouts;
  Eigen::VectorXd q(T);
  const int lanes_total = R * (T - 1);

  std::vector<SequenceSample> completions(static_cast<std::size_t>(lanes_total));
  if (T > 1) {
    // prefix states S_0..S_{T-2}: S_k is the LSTM state after consuming
    // [START, s_1..s_k]; a lane for prefix length t starts from S_{t-1}
    // with last token s_t still pending.
    std::vector<GenBatchState<double>> prefix_state;
    prefix_state.reserve(static_cast<std::size_t>(T - 1));
    {
      auto st = initial_batch_state(gen, 1);
      std::vector<TokenId> last{kStartToken};
      generator_step_batch(gen, last, st, true);  // consume START -> S_0
      prefix_state.push_back(st);
      for (int k = 1; k <= T - 2; ++k) {
        last[0] = seq.tokens[static_cast<std::size_t>(k - 1)];
        generator_step_batch(gen, last, st, true);  // consume s_k -> S_k
        prefix_state.push_back(st);
      }
    }

    GenBatchState<double> wave{Eigen::MatrixXd::Zero(gen.hidden_dim(), lanes_total),
                               Eigen::MatrixXd::Zero(gen.hidden_dim(), lanes_total)};
    std::vector<TokenId> last(static_cast<std::size_t>(lanes_total), kStartToken);
    int active = 0;
    for (int pos = 2; pos <= T; ++pos) {
      const int t = pos - 1;  // newly activated prefix length
      for (int r = 0; r < R; ++r) {
        const int lane = (t - 1) * R + r;
        wave.hidden.col(lane) = prefix_state[static_cast<std::size_t>(t - 1)].hidden.col(0);
        wave.cell.col(lane) = prefix_state[static_cast<std::size_t>(t - 1)].cell.col(0);
        last[static_cast<std::size_t>(lane)] = seq.tokens[static_cast<std::size_t>(t - 1)];
        auto& comp = completions[static_cast<std::size_t>(lane)];
        comp.tokens.assign(seq.tokens.begin(), seq.tokens.begin() + t);
        comp.tokens.reserve(static_cast<std::size_t>(T));
      }
      active += R;
      GenBatchState<double> front{wave.hidden.leftCols(active), wave.cell.leftCols(active)};
      std::vector<TokenId> front_last(last.begin(), last.begin() + active);
      Eigen::MatrixXd probs = generator_step_batch(gen, front_last, front, true);
      wave.hidden.leftCols(active) = front.hidden;
      wave.cell.leftCols(active) = front.cell;
      for (int lane = 0; lane < active; ++lane) {
        const int tok = detail::sample_column(probs, lane, rng);
        completions[static_cast<std::size_t>(lane)].tokens.push_back(tok);
        last[static_cast<std::size_t>(lane)] = tok;
      }
    }
  }

  std::vector<SequenceSample> to_score = std::move(completions);
  to_score.push_back(seq);
  Eigen::VectorXd scores = scorer(to_score);
  if (scores.size() != static_cast<Eigen::Index>(to_score.size()))
    throw InputError("scorer returned the wrong number of scores");
  for (int t = 1; t <= T - 1; ++t) {
    double acc = 0.0;
    for (int r = 0; r < R; ++r) acc += scores((t - 1) * R + r);
    q(t - 1) = acc / R;
  }
  q(T - 1) = scores(scores.size() - 1);
  if (!q.allFinite()) throw NumericError("rollout produced non-finite Q values");
  return q;
}

Eigen::VectorXd rollout_q(const GeneratorParamsD& gen, const CriticParamsD& critic,
                          const SequenceSample& seq, int n_rollouts, Rng& rng,
                          double log_eps) {
  return rollout_q_with(gen, critic_scorer(critic), seq, n_rollouts, rng, log_eps);
}

RewardFn make_rollout_reward(const GeneratorParamsD& gen, SequenceScorer scorer,
                             int n_rollouts, double log_eps) {
  return [&gen, scorer = std::move(scorer), n_rollouts, log_eps](
             const SequenceSample& seq, Rng& rng) {
    return rollout_q_with(gen, scorer, seq, n_rollouts, rng, log_eps);
  };
}

GeneratorParamsD policy_gradient_estimate(const GeneratorParamsD& gen,
                                          const RewardFn& reward_fn, int batch_size, int T,
                                          const Eigen::VectorXd& baseline, Rng& rng,
                                          double log_eps, Eigen::VectorXd* mean_q_out) {
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (baseline.size() != T) throw InputError("baseline must have T entries");
  auto seqs = generator_sample_batch(gen, batch_size, T, rng, log_eps).first;
  Eigen::MatrixXd q(T, batch_size);
  std::vector<std::uint64_t> item_seed(static_cast<std::size_t>(batch_size));
  for (auto& s : item_seed) s = rng();
  parallel_for(static_cast<std::size_t>(batch_size), [&](std::size_t i) {
    Rng item_rng(item_seed[i]);
    Eigen::VectorXd qi = reward_fn(seqs[i], item_rng);
    if (qi.size() != T) throw InputError("reward_fn must return T values");
    q.col(static_cast<Eigen::Index>(i)) = qi;
  });
  if (mean_q_out) *mean_q_out = q.rowwise().mean();
  Eigen::MatrixXd weights = q.colwise() - baseline;
  return grad_weighted_logprob(gen, seqs, weights);
}

void policy_gradient_step(DomainBundle& bundle, int batch_size, const RewardFn& reward_fn,
                          const TrainConfig& cfg, Rng& rng) {
  Eigen::VectorXd mean_q;
  const Eigen::VectorXd baseline = bundle.baseline.resized(cfg.T);
  auto grad = policy_gradient_estimate(bundle.generator, reward_fn, batch_size, cfg.T,
                                       baseline, rng, cfg.log_eps, &mean_q);
  if (!all_finite(grad) || !mean_q.allFinite())
    throw NumericError("policy gradient diverged (non-finite gradient)");
  adam_step(bundle.generator, grad, Direction::kAscend, bundle.gen_opt, cfg.alpha_gen);
  bundle.baseline.value =
      cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * mean_q;
}

namespace {

double window_mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += v[i];
  return acc / static_cast<double>(end - begin);
}

}  // namespace

std::vector<double> adversarial_pretrain(DomainBundle& bundle, int iters,
                                         const TrainConfig& cfg, Rng& rng,
                                         std::vector<LogRow>* log) {
  if (iters < 0) throw InputError("iters must be >= 0");
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(iters));
  for (int it = 1; it <= iters; ++it) {
    auto reward = make_rollout_reward(bundle.generator, critic_scorer(bundle.critic),
                                      cfg.n_rollouts, cfg.log_eps);
    policy_gradient_step(bundle, cfg.batch_size, reward, cfg, rng);
    auto negatives = generate_negatives(
        bundle, cfg.batch_size * cfg.critic_steps_per_gen_step, rng, cfg.log_eps);
    auto losses = train_classifier(bundle, bundle.corpus.sequences, negatives,
                                   cfg.critic_steps_per_gen_step, cfg, rng);
    const double mean_loss = window_mean(losses, 0, losses.size());
    trace.push_back(mean_loss);
    if (log) {
      log->push_back({it, "adv", bundle.label, "critic_loss", mean_loss});
      const double baseline_mean =
          bundle.baseline.value.size() ? bundle.baseline.value.mean() : 0.0;
      log->push_back({it, "adv", bundle.label, "gen_baseline", baseline_mean});
    }
    constexpr std::size_t kWindow = 10;
    if (cfg.pretrain_convergence_tol > 0 && trace.size() >= 2 * kWindow) {
      const double now = window_mean(trace, trace.size() - kWindow, trace.size());
      const double prev =
          window_mean(trace, trace.size() - 2 * kWindow, trace.size() - kWindow);
      if (std::abs(now - prev) / std::max(std::abs(prev), 1e-12) <
          cfg.pretrain_convergence_tol)
        break;
    }
  }
  return trace;
}

void pretrain_pipeline(DomainBundle& bundle, const TrainConfig& cfg, Rng& rng,
                       std::vector<LogRow>* log) {
  auto nll_trace = mle_pretrain(bundle, cfg.pretrain_mle_epochs, cfg, rng);
  if (log)
    for (std::size_t e = 0; e < nll_trace.size(); ++e)
      log->push_back(
          {static_cast<long>(e + 1), "mle", bundle.label, "nll", nll_trace[e]});
  const int n_neg =
      std::min<int>(static_cast<int>(bundle.corpus.sequences.size()), 512);
  auto negatives = generate_negatives(bundle, n_neg, rng, cfg.log_eps);
  auto cls_trace = train_classifier(bundle, bundle.corpus.sequences, negatives,
                                    cfg.pretrain_classifier_steps, cfg, rng);
  if (log)
    for (std::size_t s = 0; s < cls_trace.size(); ++s)
      log->push_back(
          {static_cast<long>(s + 1), "classifier", bundle.label, "loss", cls_trace[s]});
  adversarial_pretrain(bundle, cfg.pretrain_adv_iters, cfg, rng, log);
}

}  // namespace fusiongan
