/**
 * @file nets.hpp
 * @brief Autoregressive LSTM generator and convolutional sequence critic:
 *        dense Eigen parameter types templated on scalar, forward ops,
 *        exact analytic gradients, weight clipping and the Adam rule.
 *
 * Token id 0 is the reserved START symbol. generator_step exposes the raw
 * conditional over the full vocabulary; the sampling ops (generator_sample
 * and friends) never emit START — they sample the softmax restricted to
 * ids >= 1 — and their log-probabilities, as well as grad_weighted_logprob,
 * refer to that restricted law. sequence_nll and grad_nll use the full
 * softmax (corpus tokens are never START, so the target is always legal).
 */
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "fusiongan/common.hpp"
#include "fusiongan/corpus.hpp"

namespace fusiongan {

template <class Scalar>
using MatX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VecX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

constexpr double kLogProbFloor = 1e-12;  // floor before any log
constexpr double kInitScale = 0.05;      // uniform(-0.05, 0.05) init

// ---------------------------------------------------------------------------
// Parameter containers

template <class ScalarT>
struct GeneratorParams {
  using Scalar = ScalarT;
  MatX<Scalar> embedding;  // V x E
  MatX<Scalar> lstm_w;     // (E+H) x 4H, gate blocks [input|forget|output|cell]
  MatX<Scalar> lstm_b;     // 4H x 1
  MatX<Scalar> out_w;      // H x V
  MatX<Scalar> out_b;      // V x 1

  int vocab_size() const { return static_cast<int>(embedding.rows()); }
  int embed_dim() const { return static_cast<int>(embedding.cols()); }
  int hidden_dim() const { return static_cast<int>(out_w.rows()); }

  std::vector<std::pair<std::string, MatX<Scalar>*>> tensors() {
    return {{"embedding", &embedding},
            {"lstm.weight", &lstm_w},
            {"lstm.bias", &lstm_b},
            {"out.weight", &out_w},
            {"out.bias", &out_b}};
  }
  std::vector<std::pair<std::string, const MatX<Scalar>*>> tensors() const {
    return {{"embedding", &embedding},
            {"lstm.weight", &lstm_w},
            {"lstm.bias", &lstm_b},
            {"out.weight", &out_w},
            {"out.bias", &out_b}};
  }
};

template <class ScalarT>
struct CriticParams {
  using Scalar = ScalarT;
  struct ConvBank {
    int width = 1;
    MatX<Scalar> filters;  // F x (width*E); window row j occupies cols [j*E, (j+1)*E)
    MatX<Scalar> bias;     // F x 1
  };
  MatX<Scalar> embedding;  // V x E
  std::vector<ConvBank> banks;
  MatX<Scalar> head_w;  // (F * |banks|) x 1
  MatX<Scalar> head_b;  // 1 x 1
  Scalar clip_bound = Scalar(0.01);

  int vocab_size() const { return static_cast<int>(embedding.rows()); }
  int embed_dim() const { return static_cast<int>(embedding.cols()); }
  int feature_dim() const { return static_cast<int>(head_w.rows()); }

  std::vector<std::pair<std::string, MatX<Scalar>*>> tensors() {
    std::vector<std::pair<std::string, MatX<Scalar>*>> out;
    out.emplace_back("embedding", &embedding);
    for (auto& bank : banks) {
      out.emplace_back("conv" + std::to_string(bank.width) + ".filters", &bank.filters);
      out.emplace_back("conv" + std::to_string(bank.width) + ".bias", &bank.bias);
    }
    out.emplace_back("head.weight", &head_w);
    out.emplace_back("head.bias", &head_b);
    return out;
  }
  std::vector<std::pair<std::string, const MatX<Scalar>*>> tensors() const {
    std::vector<std::pair<std::string, const MatX<Scalar>*>> out;
    out.emplace_back("embedding", &embedding);
    for (const auto& bank : banks) {
      out.emplace_back("conv" + std::to_string(bank.width) + ".filters", &bank.filters);
      out.emplace_back("conv" + std::to_string(bank.width) + ".bias", &bank.bias);
    }
    out.emplace_back("head.weight", &head_w);
    out.emplace_back("head.bias", &head_b);
    return out;
  }
};

template <class ScalarT>
struct GenState {
  using Scalar = ScalarT;
  VecX<Scalar> hidden;  // H
  VecX<Scalar> cell;    // H
};

using GeneratorParamsD = GeneratorParams<double>;
using CriticParamsD = CriticParams<double>;
using GenStateD = GenState<double>;

// ---------------------------------------------------------------------------
// Construction helpers

namespace detail {

template <class Scalar>
void fill_uniform(MatX<Scalar>& m, Rng& rng, double scale) {
  for (Eigen::Index k = 0; k < m.size(); ++k)
    m.data()[k] = static_cast<Scalar>(uniform_in(rng, -scale, scale));
}

}  // namespace detail

template <class Scalar = double>
GeneratorParams<Scalar> make_generator(int vocab_size, int embed_dim, int hidden_dim,
                                       Rng& rng) {
  if (vocab_size < 2 || embed_dim < 1 || hidden_dim < 1)
    throw InputError("generator needs V >= 2, E >= 1, H >= 1");
  GeneratorParams<Scalar> p;
  p.embedding.resize(vocab_size, embed_dim);
  p.lstm_w.resize(embed_dim + hidden_dim, 4 * hidden_dim);
  p.lstm_b = MatX<Scalar>::Zero(4 * hidden_dim, 1);
  p.out_w.resize(hidden_dim, vocab_size);
  p.out_b = MatX<Scalar>::Zero(vocab_size, 1);
  detail::fill_uniform(p.embedding, rng, kInitScale);
  detail::fill_uniform(p.lstm_w, rng, kInitScale);
  detail::fill_uniform(p.out_w, rng, kInitScale);
  // forget-gate bias starts at 1 so early cell state is retained
  p.lstm_b.block(hidden_dim, 0, hidden_dim, 1).setConstant(Scalar(1));
  return p;
}

template <class Scalar = double>
CriticParams<Scalar> make_critic(int vocab_size, int embed_dim,
                                 const std::vector<int>& widths, int filters_per_width,
                                 Scalar clip_bound, Rng& rng) {
  if (vocab_size < 2 || embed_dim < 1) throw InputError("critic needs V >= 2, E >= 1");
  if (widths.empty()) throw InputError("critic needs at least one filter width");
  if (filters_per_width < 1) throw InputError("critic needs >= 1 filter per width");
  if (!(clip_bound > Scalar(0))) throw InputError("clip_bound must be positive");
  CriticParams<Scalar> p;
  p.clip_bound = clip_bound;
  p.embedding.resize(vocab_size, embed_dim);
  detail::fill_uniform(p.embedding, rng, kInitScale);
  for (int w : widths) {
    if (w < 1) throw InputError("filter width must be >= 1");
    typename CriticParams<Scalar>::ConvBank bank;
    bank.width = w;
    bank.filters.resize(filters_per_width, w * embed_dim);
    detail::fill_uniform(bank.filters, rng, kInitScale);
    bank.bias = MatX<Scalar>::Zero(filters_per_width, 1);
    p.banks.push_back(std::move(bank));
  }
  p.head_w.resize(filters_per_width * static_cast<int>(widths.size()), 1);
  detail::fill_uniform(p.head_w, rng, kInitScale);
  p.head_b = MatX<Scalar>::Zero(1, 1);
  return p;
}

template <class ParamsT>
ParamsT zeros_like(const ParamsT& p) {
  ParamsT out = p;
  for (auto& [name, tensor] : out.tensors()) tensor->setZero();
  return out;
}

template <class ParamsT>
bool all_finite(const ParamsT& p) {
  for (const auto& [name, tensor] : p.tensors())
    if (!tensor->allFinite()) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Generator forward

namespace detail {

template <class Scalar>
struct LstmGates {
  MatX<Scalar> i, f, o, g;  // each H x B
};

// xh: stacked [embedded input; previous hidden], (E+H) x B.
template <class Scalar>
LstmGates<Scalar> lstm_gates(const GeneratorParams<Scalar>& p, const MatX<Scalar>& xh) {
  const int h = p.hidden_dim();
  MatX<Scalar> z;
  z.noalias() = p.lstm_w.transpose() * xh;
  z.colwise() += p.lstm_b.col(0);
  LstmGates<Scalar> gates;
  auto sigmoid = [](const auto& block) {
    return (Scalar(1) / (Scalar(1) + (-block.array()).exp())).matrix().eval();
  };
  gates.i = sigmoid(z.topRows(h));
  gates.f = sigmoid(z.middleRows(h, h));
  gates.o = sigmoid(z.middleRows(2 * h, h));
  gates.g = z.bottomRows(h).array().tanh().matrix();
  return gates;
}

// Column-wise softmax. If mask_start, the softmax is over rows >= 1 and
// row 0 is set to exactly zero.
template <class Scalar>
void softmax_columns(MatX<Scalar>& logits, bool mask_start) {
  const Eigen::Index v = logits.rows();
  const Eigen::Index lo = mask_start ? 1 : 0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    auto col = logits.col(c).segment(lo, v - lo);
    const Scalar m = col.maxCoeff();
    col = (col.array() - m).exp().matrix();
    const Scalar sum = col.sum();
    if (!(sum > Scalar(0)) || !std::isfinite(static_cast<double>(sum)))
      throw NumericError("softmax produced a non-finite distribution");
    col /= sum;
    if (mask_start) logits(0, c) = Scalar(0);
  }
}

// embedding lookup for a batch of tokens into the top E rows of xh.
template <class Scalar>
void embed_into(const MatX<Scalar>& embedding, const std::vector<TokenId>& tokens,
                MatX<Scalar>& xh) {
  const Eigen::Index e = embedding.cols();
  for (std::size_t b = 0; b < tokens.size(); ++b) {
    const TokenId t = tokens[b];
    if (t < 0 || t >= embedding.rows())
      throw InputError("token id " + std::to_string(t) + " out of vocabulary");
    xh.col(static_cast<Eigen::Index>(b)).head(e) = embedding.row(t).transpose();
  }
}

template <class Scalar>
int sample_column(const MatX<Scalar>& probs, Eigen::Index col, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  int last_positive = -1;
  for (Eigen::Index k = 0; k < probs.rows(); ++k) {
    const double p = static_cast<double>(probs(k, col));
    if (p <= 0.0) continue;
    last_positive = static_cast<int>(k);
    cum += p;
    if (u < cum) return static_cast<int>(k);
  }
  if (last_positive < 0) throw NumericError("cannot sample from an all-zero column");
  return last_positive;
}

}  // namespace detail

// One autoregressive step: raw conditional over the full vocabulary.
template <class Scalar>
std::pair<VecX<Scalar>, GenState<Scalar>> generator_step(const GeneratorParams<Scalar>& p,
                                                         const GenState<Scalar>& state,
                                                         TokenId token) {
  const int h = p.hidden_dim();
  if (token < 0 || token >= p.vocab_size())
    throw InputError("token id " + std::to_string(token) + " out of vocabulary");
  MatX<Scalar> xh(p.embed_dim() + h, 1);
  detail::embed_into(p.embedding, {token}, xh);
  xh.col(0).tail(h) = state.hidden;
  auto gates = detail::lstm_gates(p, xh);
  GenState<Scalar> next;
  next.cell = (gates.f.array() * state.cell.array() + gates.i.array() * gates.g.array())
                  .matrix();
  next.hidden = (gates.o.array() * next.cell.array().tanh()).matrix();
  MatX<Scalar> logits;
  logits.noalias() = p.out_w.transpose() * next.hidden;
  logits += p.out_b;
  detail::softmax_columns(logits, /*mask_start=*/false);
  const double sum = static_cast<double>(logits.col(0).sum());
  if (std::abs(sum - 1.0) > 1e-6) throw NumericError("step probabilities do not sum to 1");
  return {logits.col(0), std::move(next)};
}

template <class Scalar>
GenState<Scalar> initial_state(const GeneratorParams<Scalar>& p) {
  GenState<Scalar> s;
  s.hidden = VecX<Scalar>::Zero(p.hidden_dim());
  s.cell = VecX<Scalar>::Zero(p.hidden_dim());
  return s;
}

// Batched state used by the sampling/rollout paths: one column per lane.
template <class Scalar>
struct GenBatchState {
  MatX<Scalar> hidden;  // H x B
  MatX<Scalar> cell;    // H x B
};

template <class Scalar>
GenBatchState<Scalar> initial_batch_state(const GeneratorParams<Scalar>& p, int lanes) {
  return {MatX<Scalar>::Zero(p.hidden_dim(), lanes), MatX<Scalar>::Zero(p.hidden_dim(), lanes)};
}

// Advances every lane by one token and returns the next-token distribution
// per lane (START-masked when mask_start is set).
template <class Scalar>
MatX<Scalar> generator_step_batch(const GeneratorParams<Scalar>& p,
                                  const std::vector<TokenId>& tokens,
                                  GenBatchState<Scalar>& state, bool mask_start) {
  const int h = p.hidden_dim();
  const int lanes = static_cast<int>(tokens.size());
  MatX<Scalar> xh(p.embed_dim() + h, lanes);
  detail::embed_into(p.embedding, tokens, xh);
  xh.bottomRows(h) = state.hidden;
  auto gates = detail::lstm_gates(p, xh);
  state.cell =
      (gates.f.array() * state.cell.array() + gates.i.array() * gates.g.array()).matrix();
  state.hidden = (gates.o.array() * state.cell.array().tanh()).matrix();
  MatX<Scalar> logits;
  logits.noalias() = p.out_w.transpose() * state.hidden;
  logits.colwise() += p.out_b.col(0);
  detail::softmax_columns(logits, mask_start);
  return logits;
}

// Samples n sequences of length T in lockstep. Log-probabilities are of the
// sampled tokens under the START-masked law; entry (t-1, lane).
template <class Scalar>
std::pair<std::vector<SequenceSample>, MatX<Scalar>> generator_sample_batch(
    const GeneratorParams<Scalar>& p, int n, int T, Rng& rng,
    double log_eps = kLogProbFloor) {
  if (T < 1) throw InputError("sequence length T must be >= 1");
  if (n < 0) throw InputError("sample count must be >= 0");
  std::vector<SequenceSample> seqs(static_cast<std::size_t>(n));
  MatX<Scalar> logp = MatX<Scalar>::Zero(T, n);
  if (n == 0) return {std::move(seqs), std::move(logp)};
  for (auto& s : seqs) s.tokens.reserve(T);
  auto state = initial_batch_state(p, n);
  std::vector<TokenId> last(static_cast<std::size_t>(n), kStartToken);
  for (int t = 0; t < T; ++t) {
    MatX<Scalar> probs = generator_step_batch(p, last, state, /*mask_start=*/true);
    for (int lane = 0; lane < n; ++lane) {
      const int tok = detail::sample_column(probs, lane, rng);
      seqs[static_cast<std::size_t>(lane)].tokens.push_back(tok);
      logp(t, lane) = std::log(std::max(static_cast<double>(probs(tok, lane)), log_eps));
      last[static_cast<std::size_t>(lane)] = tok;
    }
  }
  return {std::move(seqs), std::move(logp)};
}

template <class Scalar>
std::pair<SequenceSample, VecX<Scalar>> generator_sample(const GeneratorParams<Scalar>& p,
                                                         int T, Rng& rng,
                                                         double log_eps = kLogProbFloor) {
  auto [seqs, logp] = generator_sample_batch(p, 1, T, rng, log_eps);
  return {std::move(seqs[0]), logp.col(0)};
}

// -sum_t log p(s_t | s_<t) under the full softmax, with the log floor.
template <class Scalar>
Scalar sequence_nll(const GeneratorParams<Scalar>& p, const SequenceSample& seq,
                    double log_eps = kLogProbFloor) {
  if (seq.tokens.empty()) throw InputError("cannot score an empty sequence");
  auto state = initial_batch_state(p, 1);
  std::vector<TokenId> last{kStartToken};
  Scalar nll = 0;
  for (TokenId target : seq.tokens) {
    MatX<Scalar> probs = generator_step_batch(p, last, state, /*mask_start=*/false);
    if (target <= 0 || target >= p.vocab_size())
      throw InputError("sequence token out of vocabulary");
    nll -= static_cast<Scalar>(
        std::log(std::max(static_cast<double>(probs(target, 0)), log_eps)));
    last[0] = target;
  }
  return nll;
}

// ---------------------------------------------------------------------------
// Generator gradients (exact back-propagation through time)

namespace detail {

// Gradient of sum_{i,t} weights(t,i) * log p(s_it | s_i,<t) * scale over one
// contiguous chunk of sequences. mask_start selects the restricted law.
// value_acc accumulates the (floored) objective value itself.
template <class Scalar>
void gen_backward_chunk(const GeneratorParams<Scalar>& p,
                        const std::vector<SequenceSample>& seqs, std::size_t begin,
                        std::size_t end, const MatX<Scalar>& weights, bool mask_start,
                        Scalar scale, GeneratorParams<Scalar>& grad, double log_eps,
                        Scalar* value_acc) {
  const int hdim = p.hidden_dim();
  const int edim = p.embed_dim();
  const int lanes = static_cast<int>(end - begin);
  const int T = static_cast<int>(seqs[begin].tokens.size());
  if (weights.rows() != T) throw InputError("per-step weights must have T rows");

  // forward, storing activations
  std::vector<std::vector<TokenId>> inputs(static_cast<std::size_t>(T));
  std::vector<LstmGates<Scalar>> gates(static_cast<std::size_t>(T));
  std::vector<MatX<Scalar>> cell(static_cast<std::size_t>(T) + 1),
      hidden(static_cast<std::size_t>(T) + 1), probs(static_cast<std::size_t>(T));
  cell[0] = MatX<Scalar>::Zero(hdim, lanes);
  hidden[0] = MatX<Scalar>::Zero(hdim, lanes);
  MatX<Scalar> xh(edim + hdim, lanes);
  for (int t = 0; t < T; ++t) {
    auto& in = inputs[static_cast<std::size_t>(t)];
    in.resize(static_cast<std::size_t>(lanes));
    for (int lane = 0; lane < lanes; ++lane) {
      const auto& toks = seqs[begin + static_cast<std::size_t>(lane)].tokens;
      if (static_cast<int>(toks.size()) != T)
        throw InputError("all sequences in a batch must share length T");
      in[static_cast<std::size_t>(lane)] = t == 0 ? kStartToken : toks[t - 1];
    }
    embed_into(p.embedding, in, xh);
    xh.bottomRows(hdim) = hidden[static_cast<std::size_t>(t)];
    gates[static_cast<std::size_t>(t)] = lstm_gates(p, xh);
    const auto& gt = gates[static_cast<std::size_t>(t)];
    cell[static_cast<std::size_t>(t) + 1] =
        (gt.f.array() * cell[static_cast<std::size_t>(t)].array() +
         gt.i.array() * gt.g.array())
            .matrix();
    hidden[static_cast<std::size_t>(t) + 1] =
        (gt.o.array() * cell[static_cast<std::size_t>(t) + 1].array().tanh()).matrix();
    MatX<Scalar> logits;
    logits.noalias() = p.out_w.transpose() * hidden[static_cast<std::size_t>(t) + 1];
    logits.colwise() += p.out_b.col(0);
    softmax_columns(logits, mask_start);
    probs[static_cast<std::size_t>(t)] = std::move(logits);
  }

  // backward
  MatX<Scalar> dh_carry = MatX<Scalar>::Zero(hdim, lanes);
  MatX<Scalar> dc_carry = MatX<Scalar>::Zero(hdim, lanes);
  for (int t = T - 1; t >= 0; --t) {
    MatX<Scalar> dlogits = -probs[static_cast<std::size_t>(t)];
    for (int lane = 0; lane < lanes; ++lane) {
      const TokenId target = seqs[begin + static_cast<std::size_t>(lane)].tokens[t];
      if (target <= 0 || target >= p.vocab_size())
        throw InputError("sequence token out of vocabulary");
      const Scalar w = weights(t, static_cast<Eigen::Index>(begin) + lane) * scale;
      if (value_acc)
        *value_acc += w * static_cast<Scalar>(std::log(std::max(
                          static_cast<double>(probs[static_cast<std::size_t>(t)](target, lane)),
                          log_eps)));
      dlogits(target, lane) += Scalar(1);
      dlogits.col(lane) *= w;
    }
    if (mask_start) dlogits.row(0).setZero();

    const auto& h_t = hidden[static_cast<std::size_t>(t) + 1];
    grad.out_w.noalias() += h_t * dlogits.transpose();
    grad.out_b.col(0) += dlogits.rowwise().sum();

    MatX<Scalar> dh = dh_carry;
    dh.noalias() += p.out_w * dlogits;

    const auto& gt = gates[static_cast<std::size_t>(t)];
    const auto tc = cell[static_cast<std::size_t>(t) + 1].array().tanh();
    MatX<Scalar> d_o = (dh.array() * tc).matrix();
    MatX<Scalar> dc =
        (dc_carry.array() + dh.array() * gt.o.array() * (1 - tc * tc)).matrix();
    MatX<Scalar> d_i = (dc.array() * gt.g.array()).matrix();
    MatX<Scalar> d_g = (dc.array() * gt.i.array()).matrix();
    MatX<Scalar> d_f = (dc.array() * cell[static_cast<std::size_t>(t)].array()).matrix();
    dc_carry = (dc.array() * gt.f.array()).matrix();

    MatX<Scalar> dz(4 * hdim, lanes);
    dz.topRows(hdim) = (d_i.array() * gt.i.array() * (1 - gt.i.array())).matrix();
    dz.middleRows(hdim, hdim) = (d_f.array() * gt.f.array() * (1 - gt.f.array())).matrix();
    dz.middleRows(2 * hdim, hdim) =
        (d_o.array() * gt.o.array() * (1 - gt.o.array())).matrix();
    dz.bottomRows(hdim) = (d_g.array() * (1 - gt.g.array() * gt.g.array())).matrix();

    embed_into(p.embedding, inputs[static_cast<std::size_t>(t)], xh);
    xh.bottomRows(hdim) = hidden[static_cast<std::size_t>(t)];
    grad.lstm_w.noalias() += xh * dz.transpose();
    grad.lstm_b.col(0) += dz.rowwise().sum();

    MatX<Scalar> dxh;
    dxh.noalias() = p.lstm_w * dz;
    for (int lane = 0; lane < lanes; ++lane)
      grad.embedding.row(inputs[static_cast<std::size_t>(t)][static_cast<std::size_t>(lane)]) +=
          dxh.col(lane).head(edim).transpose();
    dh_carry = dxh.bottomRows(hdim);
  }
}

template <class Scalar>
struct GenGradValue {
  GeneratorParams<Scalar> grad;
  Scalar value = 0;  // scale * sum_{i,t} w_it * log(max(p_it, log_eps))
};

// Shared driver: fixed chunking so results do not depend on thread count.
template <class Scalar>
GenGradValue<Scalar> gen_grad(const GeneratorParams<Scalar>& p,
                              const std::vector<SequenceSample>& seqs,
                              const MatX<Scalar>& weights, bool mask_start, Scalar scale,
                              double log_eps) {
  constexpr std::size_t kChunk = 8;
  if (seqs.empty()) return {zeros_like(p), Scalar(0)};
  if (weights.cols() != static_cast<Eigen::Index>(seqs.size()))
    throw InputError("per-step weights must have one column per sequence");
  const std::size_t n_chunks = (seqs.size() + kChunk - 1) / kChunk;
  std::vector<GeneratorParams<Scalar>> partial(n_chunks, zeros_like(p));
  std::vector<Scalar> values(n_chunks, Scalar(0));
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t b = c * kChunk;
    const std::size_t e = std::min(b + kChunk, seqs.size());
    gen_backward_chunk(p, seqs, b, e, weights, mask_start, scale, partial[c], log_eps,
                       &values[c]);
  });
  GenGradValue<Scalar> out{std::move(partial[0]), values[0]};
  auto acc = out.grad.tensors();
  for (std::size_t c = 1; c < n_chunks; ++c) {
    auto part = partial[c].tensors();
    for (std::size_t k = 0; k < acc.size(); ++k) *acc[k].second += *part[k].second;
    out.value += values[c];
  }
  return out;
}

}  // namespace detail

// Gradient of (1/B) sum_i sum_t weights(t,i) * log q(s_it | s_i,<t), where q
// is the START-masked sampling law (the one generator_sample reports).
template <class Scalar>
GeneratorParams<Scalar> grad_weighted_logprob(const GeneratorParams<Scalar>& p,
                                              const std::vector<SequenceSample>& seqs,
                                              const MatX<Scalar>& per_step_weights,
                                              double log_eps = kLogProbFloor) {
  const Scalar scale = seqs.empty() ? Scalar(1) : Scalar(1) / Scalar(seqs.size());
  return detail::gen_grad(p, seqs, per_step_weights, /*mask_start=*/true, scale, log_eps)
      .grad;
}

// Gradient and value of the batch-mean sequence NLL (full softmax).
template <class Scalar>
detail::GenGradValue<Scalar> mean_nll_and_grad(const GeneratorParams<Scalar>& p,
                                               const std::vector<SequenceSample>& seqs,
                                               double log_eps = kLogProbFloor) {
  if (seqs.empty()) throw InputError("NLL needs a non-empty batch");
  MatX<Scalar> weights = MatX<Scalar>::Constant(
      static_cast<Eigen::Index>(seqs[0].tokens.size()),
      static_cast<Eigen::Index>(seqs.size()), Scalar(-1));
  return detail::gen_grad(p, seqs, weights, /*mask_start=*/false,
                          Scalar(1) / Scalar(seqs.size()), log_eps);
}

// Gradient of the batch-mean sequence NLL (full softmax).
template <class Scalar>
GeneratorParams<Scalar> grad_nll(const GeneratorParams<Scalar>& p,
                                 const std::vector<SequenceSample>& seqs,
                                 double log_eps = kLogProbFloor) {
  return mean_nll_and_grad(p, seqs, log_eps).grad;
}

// ---------------------------------------------------------------------------
// Critic forward and gradient

namespace detail {

template <class Scalar>
void check_critic_input(const CriticParams<Scalar>& p, const SequenceSample& seq) {
  const int T = static_cast<int>(seq.tokens.size());
  if (T < 1) throw InputError("cannot score an empty sequence");
  for (const auto& bank : p.banks)
    if (bank.width > T)
      throw InputError("sequence length " + std::to_string(T) +
                       " shorter than filter width " + std::to_string(bank.width));
}

template <class Scalar>
MatX<Scalar> embed_sequence(const CriticParams<Scalar>& p, const SequenceSample& seq) {
  MatX<Scalar> x(p.embed_dim(), static_cast<Eigen::Index>(seq.tokens.size()));
  embed_into(p.embedding, seq.tokens, x);
  return x;
}

// conv activations for one bank: F x P, plus the im2col matrix used.
template <class Scalar>
void bank_forward(const typename CriticParams<Scalar>::ConvBank& bank,
                  const MatX<Scalar>& x, MatX<Scalar>& im2col, MatX<Scalar>& acts) {
  const int e = static_cast<int>(x.rows());
  const int T = static_cast<int>(x.cols());
  const int positions = T - bank.width + 1;
  im2col.resize(bank.width * e, positions);
  for (int pos = 0; pos < positions; ++pos)
    for (int j = 0; j < bank.width; ++j)
      im2col.col(pos).segment(j * e, e) = x.col(pos + j);
  acts.noalias() = bank.filters * im2col;
  acts.colwise() += bank.bias.col(0);
}

}  // namespace detail

// Embed, convolve per width, max-over-time + ReLU, affine head. Unbounded
// scalar output (no sigmoid).
template <class Scalar>
Scalar critic_score(const CriticParams<Scalar>& p, const SequenceSample& seq) {
  detail::check_critic_input(p, seq);
  MatX<Scalar> x = detail::embed_sequence(p, seq);
  VecX<Scalar> features(p.feature_dim());
  Eigen::Index offset = 0;
  MatX<Scalar> im2col, acts;
  for (const auto& bank : p.banks) {
    detail::bank_forward<Scalar>(bank, x, im2col, acts);
    for (Eigen::Index f = 0; f < acts.rows(); ++f) {
      Scalar m = acts(f, 0);
      for (Eigen::Index pos = 1; pos < acts.cols(); ++pos)
        if (acts(f, pos) > m) m = acts(f, pos);
      features(offset + f) = m > Scalar(0) ? m : Scalar(0);
    }
    offset += acts.rows();
  }
  return (p.head_w.col(0).dot(features)) + p.head_b(0, 0);
}

template <class Scalar>
VecX<Scalar> critic_score_batch(const CriticParams<Scalar>& p,
                                const std::vector<SequenceSample>& seqs) {
  VecX<Scalar> out(static_cast<Eigen::Index>(seqs.size()));
  if (seqs.empty()) return out;
  constexpr std::size_t kChunk = 32;
  const std::size_t n_chunks = (seqs.size() + kChunk - 1) / kChunk;
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t b = c * kChunk;
    const std::size_t e = std::min(b + kChunk, seqs.size());
    for (std::size_t i = b; i < e; ++i)
      out(static_cast<Eigen::Index>(i)) = critic_score(p, seqs[i]);
  });
  return out;
}

// Gradient of sum_i weights[i] * critic_score(seqs[i]).
template <class Scalar>
CriticParams<Scalar> critic_grad_weighted(const CriticParams<Scalar>& p,
                                          const std::vector<SequenceSample>& seqs,
                                          const std::vector<Scalar>& weights) {
  if (seqs.size() != weights.size())
    throw InputError("one weight per sequence required");
  CriticParams<Scalar> grad = zeros_like(p);
  const int e = p.embed_dim();
  MatX<Scalar> im2col, acts;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    const Scalar w = weights[i];
    if (w == Scalar(0)) continue;
    detail::check_critic_input(p, seqs[i]);
    MatX<Scalar> x = detail::embed_sequence(p, seqs[i]);
    MatX<Scalar> dx = MatX<Scalar>::Zero(x.rows(), x.cols());
    Eigen::Index offset = 0;
    for (std::size_t bk = 0; bk < p.banks.size(); ++bk) {
      const auto& bank = p.banks[bk];
      auto& gbank = grad.banks[bk];
      detail::bank_forward<Scalar>(bank, x, im2col, acts);
      for (Eigen::Index f = 0; f < acts.rows(); ++f) {
        Eigen::Index best = 0;
        for (Eigen::Index pos = 1; pos < acts.cols(); ++pos)
          if (acts(f, pos) > acts(f, best)) best = pos;
        const Scalar m = acts(f, best);
        grad.head_w(offset + f, 0) += w * (m > Scalar(0) ? m : Scalar(0));
        if (m > Scalar(0)) {
          const Scalar da = w * p.head_w(offset + f, 0);
          gbank.filters.row(f) += da * im2col.col(best).transpose();
          gbank.bias(f, 0) += da;
          for (int j = 0; j < bank.width; ++j)
            dx.col(best + j) += da * bank.filters.row(f).segment(j * e, e).transpose();
        }
      }
      offset += acts.rows();
    }
    grad.head_b(0, 0) += w;
    for (Eigen::Index t = 0; t < dx.cols(); ++t)
      grad.embedding.row(seqs[i].tokens[static_cast<std::size_t>(t)]) +=
          dx.col(t).transpose();
  }
  return grad;
}

// Gradient of (1/N) sum_i sign_i * critic_score(seqs[i]).
template <class Scalar>
CriticParams<Scalar> grad_critic(const CriticParams<Scalar>& p,
                                 const std::vector<SequenceSample>& seqs,
                                 const std::vector<Scalar>& per_sequence_signs) {
  if (seqs.empty()) throw InputError("grad_critic needs a non-empty batch");
  std::vector<Scalar> w(per_sequence_signs);
  for (auto& x : w) x /= Scalar(seqs.size());
  return critic_grad_weighted(p, seqs, w);
}

// ---------------------------------------------------------------------------
// Lipschitz control and Adam

template <class Scalar>
void clip_parameters_in_place(CriticParams<Scalar>& p) {
  if (!(p.clip_bound > Scalar(0))) throw InputError("clip_bound must be positive");
  const Scalar c = p.clip_bound;
  for (auto& [name, tensor] : p.tensors())
    *tensor = tensor->array().min(c).max(-c).matrix();
}

template <class Scalar>
CriticParams<Scalar> clip_parameters(CriticParams<Scalar> p) {
  clip_parameters_in_place(p);
  return p;
}

template <class Scalar>
struct AdamState {
  std::vector<MatX<Scalar>> m, v;
  long step = 0;
};

using AdamStateD = AdamState<double>;

enum class Direction { kAscend, kDescend };

template <class ParamsT>
void adam_step(ParamsT& params, const ParamsT& grad, Direction direction,
               AdamState<typename ParamsT::Scalar>& state,
               typename ParamsT::Scalar alpha,
               typename ParamsT::Scalar beta1 = typename ParamsT::Scalar(0.9),
               typename ParamsT::Scalar beta2 = typename ParamsT::Scalar(0.999),
               typename ParamsT::Scalar eps = typename ParamsT::Scalar(1e-8)) {
  using Scalar = typename ParamsT::Scalar;
  auto ps = params.tensors();
  auto gs = grad.tensors();
  if (ps.size() != gs.size()) throw InputError("parameter/gradient tensor count mismatch");
  if (state.m.empty()) {
    for (auto& [name, tensor] : ps) {
      state.m.push_back(MatX<Scalar>::Zero(tensor->rows(), tensor->cols()));
      state.v.push_back(MatX<Scalar>::Zero(tensor->rows(), tensor->cols()));
    }
  }
  state.step += 1;
  const Scalar bc1 = Scalar(1) - std::pow(beta1, Scalar(state.step));
  const Scalar bc2 = Scalar(1) - std::pow(beta2, Scalar(state.step));
  const Scalar sign = direction == Direction::kAscend ? Scalar(1) : Scalar(-1);
  for (std::size_t k = 0; k < ps.size(); ++k) {
    MatX<Scalar>& theta = *ps[k].second;
    const MatX<Scalar>& g = *gs[k].second;
    if (theta.rows() != g.rows() || theta.cols() != g.cols())
      throw InputError("parameter/gradient shape mismatch at " + ps[k].first);
    state.m[k] = beta1 * state.m[k] + (Scalar(1) - beta1) * g;
    state.v[k] = (beta2 * state.v[k].array() + (Scalar(1) - beta2) * g.array().square())
                     .matrix();
    theta.array() += sign * alpha * (state.m[k].array() / bc1) /
                     ((state.v[k].array() / bc2).sqrt() + eps);
  }
}

}  // namespace fusiongan
