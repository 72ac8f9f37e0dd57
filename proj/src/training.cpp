#include "radar_e2e/training.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>

#include "radar_e2e/csv_format.hpp"
#include "radar_e2e/parallel.hpp"

namespace radar_e2e {

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::alternating: return "alternating";
    case Algorithm::simultaneous: return "simultaneous";
    case Algorithm::known_channel: return "known_channel";
    case Algorithm::receiver_only: return "receiver_only";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view name) {
  if (name == "alternating") return Algorithm::alternating;
  if (name == "simultaneous") return Algorithm::simultaneous;
  if (name == "known_channel") return Algorithm::known_channel;
  if (name == "receiver_only") return Algorithm::receiver_only;
  throw std::invalid_argument("unknown training algorithm '" + std::string(name) + "'");
}

std::string_view to_string(Optimizer o) { return o == Optimizer::adam ? "adam" : "sgd"; }

Optimizer parse_optimizer(std::string_view name) {
  if (name == "adam") return Optimizer::adam;
  if (name == "sgd") return Optimizer::sgd;
  throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (Q < 1) throw std::invalid_argument("train.Q must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("train.lr must be positive");
  if (stop.max_iters < 0) throw std::invalid_argument("train.max_iters must be >= 0");
  if (stop.window < 0) throw std::invalid_argument("train.patience_window must be >= 0");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  policy.validate();
  penalty.validate();
  for (const auto& b : report_bands) b.validate();
}

void write_history_csv(std::ostream& os, const TrainHistory& history, bool with_time) {
  os << "iter,loss,penalty,par_db,interf_db,seconds\n";
  for (const auto& r : history) {
    os << r.iter << ',' << detail::fmt_full(r.loss) << ',' << detail::fmt_full(r.penalty) << ','
       << detail::fmt_fixed4(r.par_db) << ',' << detail::fmt_fixed4(r.interf_db) << ','
       << detail::fmt_fixed4(with_time ? r.seconds : 0.0) << '\n';
  }
}

bool stopping_check(const TrainHistory& history, const StopRule& rule) {
  if (static_cast<long>(history.size()) >= rule.max_iters) return true;
  const auto w = static_cast<std::size_t>(rule.window);
  if (w == 0 || history.size() < 2 * w) return false;
  double prev = 0.0, last = 0.0;
  const std::size_t n = history.size();
  for (std::size_t i = n - 2 * w; i < n - w; ++i) prev += history[i].loss;
  for (std::size_t i = n - w; i < n; ++i) last += history[i].loss;
  return (prev - last) / static_cast<double>(w) < rule.min_decrease;
}

TrainingDiverged::TrainingDiverged(int iter, const std::string& what)
    : std::runtime_error("training diverged at iteration " + std::to_string(iter) + ": " + what), iter_(iter) {}

// ---------------------------------------------------------------------------
// Per-batch evaluation shared by the estimators and the training loops.

namespace {

struct BatchSums {
  NetParams rx_grad;      // sum of per-sample receiver gradients
  RealPacked score_sum;   // sum of loss * policy score (waveform space)
  double loss_sum = 0.0;
  std::vector<double> losses;
};

struct BatchWants {
  bool rx_grad = false;
  const Waveform* y = nullptr;  // set to accumulate loss-weighted scores
  const PolicyConfig* pol = nullptr;
  bool keep_losses = false;
};

Eigen::MatrixXd pack_received(std::span<const LabeledSample> data) {
  const auto K = data.front().z.size();
  Eigen::MatrixXd out(2 * K, static_cast<Eigen::Index>(data.size()));
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto c = static_cast<Eigen::Index>(n);
    out.col(c).head(K) = data[n].z.real();
    out.col(c).tail(K) = data[n].z.imag();
  }
  return out;
}

BatchSums eval_batch(const NetParams& rx, std::span<const LabeledSample> data, const BatchWants& want) {
  BatchSums s;
  if (want.y) s.score_sum = RealPacked::Zero(2 * want.y->size());
  if (data.empty()) {
    if (want.rx_grad) s.rx_grad = rx.zeros_like();
    return s;
  }
  const Eigen::MatrixXd packed = pack_received(data);
  const auto n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd cot(1, n);
  ForwardCache cache;
  Eigen::VectorXd p;
  if (want.rx_grad) {
    auto fwd = net_forward_batch(rx, packed);
    p = fwd.output.row(0).transpose();
    cache = std::move(fwd.cache);
  } else {
    p = rx_predict_batch(rx, packed);
  }
  if (want.keep_losses) s.losses.resize(data.size());
  for (Eigen::Index q = 0; q < n; ++q) {
    const auto& smp = data[static_cast<std::size_t>(q)];
    const double l = bce_loss(p[q], smp.label);
    s.loss_sum += l;
    if (want.keep_losses) s.losses[static_cast<std::size_t>(q)] = l;
    if (want.rx_grad) cot(0, q) = bce_grad(p[q], smp.label);
    if (want.y) {
      if (smp.a.size() != want.y->size()) throw std::invalid_argument("sample lacks its transmitted waveform");
      s.score_sum += l * policy_score_wrt_waveform(smp.a, *want.y, *want.pol);
    }
  }
  if (want.rx_grad) s.rx_grad = net_backward_batch(rx, cache, cot).grads;
  return s;
}

void require_nonempty(std::span<const LabeledSample> data) {
  if (data.empty()) throw std::invalid_argument("gradient estimate needs a nonempty dataset");
}

}  // namespace

std::vector<double> per_sample_losses(const NetParams& rx, std::span<const LabeledSample> data) {
  return eval_batch(rx, data, {.keep_losses = true}).losses;
}

GradEstimate rx_grad_estimate(const NetParams& rx, std::span<const LabeledSample> data) {
  require_nonempty(data);
  auto s = eval_batch(rx, data, {.rx_grad = true});
  const double inv = 1.0 / static_cast<double>(data.size());
  s.rx_grad *= inv;
  return {std::move(s.rx_grad), s.loss_sum * inv};
}

GradEstimate tx_rl_grad_estimate(const NetParams& rx, const Transmitter& tx, const TxForward& fwd,
                                 std::span<const LabeledSample> data, const PolicyConfig& pol) {
  require_nonempty(data);
  pol.validate();
  auto s = eval_batch(rx, data, {.y = &fwd.y, .pol = &pol});
  const double inv = 1.0 / static_cast<double>(data.size());
  return {tx_backward(tx, fwd, s.score_sum * inv), s.loss_sum * inv};
}

GradEstimate tx_constrained_grad(const NetParams& rx, const Transmitter& tx, const TxForward& fwd,
                                 std::span<const LabeledSample> data, const PolicyConfig& pol,
                                 const Penalty& pen) {
  auto g = tx_rl_grad_estimate(rx, tx, fwd, data, pol);
  if (pen.config().kind != PenaltyKind::none && pen.config().lambda != 0.0) {
    g.grad += penalty_param_grad(tx, fwd, pen);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Known-channel gradient

GaussianLikelihood::GaussianLikelihood(const EnvModel& env, const ComplexMatrix& noise_cov, const Waveform& y) {
  const ComplexMatrix base = clutter_covariance(y, env) + noise_cov;
  for (int i = 0; i < 2; ++i) {
    ComplexMatrix S = base;
    if (i == 1) S += env.sigma_alpha2 * (y * y.adjoint());
    factor_[i] = cholesky(S);
    double ld = 0.0;
    for (Eigen::Index k = 0; k < S.rows(); ++k) ld += std::log(factor_[i](k, k).real());
    logdet_[i] = 2.0 * ld;
  }
}

double GaussianLikelihood::loglik(const Waveform& z, int label) const {
  const auto& L = factor_[label == 1 ? 1 : 0];
  const Waveform w = L.triangularView<Eigen::Lower>().solve(z);
  return -static_cast<double>(z.size()) * std::log(std::numbers::pi) - logdet_[label == 1 ? 1 : 0] -
         w.squaredNorm();
}

RealPacked known_channel_waveform_grad(const NetParams& rx, const Waveform& y,
                                       std::span<const LabeledSample> data, const RadarChannel& ch) {
  require_nonempty(data);
  if (!ch.env().gaussian_only()) {
    throw std::invalid_argument("known-channel gradient needs Gaussian clutter (shape 2)");
  }
  const auto dim = 2 * y.size();
  const RealPacked base = pack(y);
  std::vector<GaussianLikelihood> plus, minus;
  plus.reserve(static_cast<std::size_t>(dim));
  minus.reserve(static_cast<std::size_t>(dim));
  for (Eigen::Index j = 0; j < dim; ++j) {
    RealPacked v = base;
    v[j] += kLikelihoodFdStep;
    plus.emplace_back(ch.env(), ch.noise_cov(), unpack(v));
    v[j] = base[j] - kLikelihoodFdStep;
    minus.emplace_back(ch.env(), ch.noise_cov(), unpack(v));
  }
  const auto s = eval_batch(rx, data, {.keep_losses = true});
  RealPacked acc = RealPacked::Zero(dim);
  for (std::size_t q = 0; q < data.size(); ++q) {
    const auto& smp = data[q];
    const double l = s.losses[q];
    for (Eigen::Index j = 0; j < dim; ++j) {
      const auto jj = static_cast<std::size_t>(j);
      const double d = plus[jj].loglik(smp.z, smp.label) - minus[jj].loglik(smp.z, smp.label);
      acc[j] += l * d / (2.0 * kLikelihoodFdStep);
    }
  }
  return acc / static_cast<double>(data.size());
}

GradEstimate known_channel_tx_grad(const NetParams& rx, const Transmitter& tx, const TxForward& fwd,
                                   const RadarChannel& ch, std::size_t Q, Rng& rng) {
  const Dataset data = gen_dataset(Q, ch, WaveformSource::fixed(fwd.y), rng);
  const auto g = known_channel_waveform_grad(rx, fwd.y, data, ch);
  double loss = 0.0;
  for (double l : per_sample_losses(rx, data)) loss += l;
  return {tx_backward(tx, fwd, g), loss / static_cast<double>(Q)};
}

// ---------------------------------------------------------------------------
// Training loops

Models init_models(const Waveform& init, int tx_hidden, int rx_hidden, std::uint64_t seed) {
  const int K = static_cast<int>(init.size());
  Rng tx_rng = substream(seed, {0, 0});
  Rng rx_rng = substream(seed, {0, 1});
  Models m;
  m.tx.init = init;
  m.tx.params = net_init(transmitter_spec(K, tx_hidden), tx_rng);
  m.rx = net_init(receiver_spec(K, rx_hidden), rx_rng);
  return m;
}

Waveform transmitted_waveform(const Models& m, Algorithm algorithm) {
  if (algorithm == Algorithm::receiver_only) {
    const double n = m.tx.init.norm();
    if (!(n > 0.0)) throw std::domain_error("initial waveform is zero");
    return m.tx.init / n;
  }
  return tx_forward(m.tx).y;
}

namespace {

// Blocked version of eval_batch over freshly generated data: per-block sums
// are reduced in block order.
struct IterationSums {
  NetParams rx_grad;
  RealPacked score_sum;
  RealPacked known_sum;
  double loss_sum = 0.0;
};

IterationSums run_blocks(std::size_t Q, const RadarChannel& ch, const WaveformSource& src, const StreamId& stream,
                         int workers, const NetParams& rx, bool want_rx, bool want_score, bool want_known) {
  const auto nb = num_blocks(Q);
  std::vector<IterationSums> parts(nb);
  parallel_for_blocks(nb, workers, [&](std::size_t b) {
    Rng rng = block_rng(stream, b);
    Rng prng = policy_block_rng(stream, b);
    const Dataset data = gen_dataset(block_count(Q, b), ch, src, rng, &prng);
    BatchWants want{.rx_grad = want_rx};
    if (want_score) {
      want.y = &src.y;
      want.pol = &src.policy;
    }
    auto s = eval_batch(rx, data, want);
    auto& out = parts[b];
    out.loss_sum = s.loss_sum;
    if (want_rx) out.rx_grad = std::move(s.rx_grad);
    if (want_score) out.score_sum = std::move(s.score_sum);
    if (want_known) out.known_sum = known_channel_waveform_grad(rx, src.y, data, ch) * static_cast<double>(data.size());
  });
  IterationSums total = std::move(parts[0]);
  for (std::size_t b = 1; b < nb; ++b) {
    total.loss_sum += parts[b].loss_sum;
    if (want_rx) total.rx_grad += parts[b].rx_grad;
    if (want_score) total.score_sum += parts[b].score_sum;
    if (want_known) total.known_sum += parts[b].known_sum;
  }
  return total;
}

class Updater {
 public:
  Updater(Optimizer opt, double lr, const NetParams& like) : opt_(opt), lr_(lr), adam_(AdamState::zeros_for(like)) {}

  void step(NetParams& params, const NetParams& grad) {
    if (opt_ == Optimizer::adam) {
      adam_step(adam_, params, grad, lr_);
    } else {
      sgd_step(params, grad, lr_);
    }
  }

 private:
  Optimizer opt_;
  double lr_;
  AdamState adam_;
};

// Stream ids: a = iteration + 1; b = 0 for the receiver-phase (or the only)
// dataset, 1 for the transmitter-phase dataset of alternating training.
constexpr std::uint64_t kPhaseMain = 0;
constexpr std::uint64_t kPhaseTx = 1;

}  // namespace

TrainResult train(const TrainConfig& cfg, const EnvModel& env, Models init, const IterationCallback& on_iter) {
  cfg.validate();
  const RadarChannel ch(env);
  if (init.tx.K() != env.K) throw std::invalid_argument("transmitter length differs from env.K");
  if (cfg.algorithm == Algorithm::known_channel && !env.gaussian_only()) {
    throw std::invalid_argument("known-channel training needs Gaussian clutter (shape 2)");
  }
  const Penalty pen(cfg.penalty, env.K);
  const ComplexMatrix report_omega =
      cfg.report_bands.empty() ? ComplexMatrix() : build_interference_cov(cfg.report_bands, env.K);
  const bool penalized = cfg.penalty.kind != PenaltyKind::none && cfg.penalty.lambda != 0.0;

  TrainResult res{std::move(init), {}, {}, {}};
  Models& m = res.models;
  Updater rx_opt(cfg.optimizer, cfg.lr, m.rx);
  Updater tx_opt(cfg.optimizer, cfg.lr, m.tx.params);
  const double invQ = 1.0 / static_cast<double>(cfg.Q);
  const auto t0 = std::chrono::steady_clock::now();

  for (int it = 0;; ++it) {
    if (stopping_check(res.history, cfg.stop)) {
      res.stop_reason = static_cast<long>(res.history.size()) >= cfg.stop.max_iters ? "max_iters" : "plateau";
      break;
    }
    const StreamId main{cfg.seed, static_cast<std::uint64_t>(it) + 1, kPhaseMain};
    const StreamId txs{cfg.seed, static_cast<std::uint64_t>(it) + 1, kPhaseTx};

    TxForward fwd;
    Waveform y;
    try {
      if (cfg.algorithm == Algorithm::receiver_only) {
        y = transmitted_waveform(m, cfg.algorithm);
      } else {
        fwd = tx_forward(m.tx);
        y = fwd.y;
      }
    } catch (const std::domain_error& e) {
      throw TrainingDiverged(it + 1, e.what());
    }

    IterationRecord rec;
    rec.iter = it + 1;
    rec.penalty = pen.value(y);
    rec.par_db = to_db(par_value(y));
    rec.interf_db = report_omega.size() ? to_db(spectral_value(y, report_omega)) : 0.0;

    switch (cfg.algorithm) {
      case Algorithm::alternating: {
        auto r = run_blocks(cfg.Q, ch, WaveformSource::fixed(y), main, cfg.workers, m.rx, true, false, false);
        rec.loss = r.loss_sum * invQ;
        r.rx_grad *= invQ;
        rx_opt.step(m.rx, r.rx_grad);
        auto t = run_blocks(cfg.Q, ch, WaveformSource::from_policy(y, cfg.policy), txs, cfg.workers, m.rx, false,
                            true, false);
        NetParams g = tx_backward(m.tx, fwd, t.score_sum * invQ);
        if (penalized) g += penalty_param_grad(m.tx, fwd, pen);
        tx_opt.step(m.tx.params, g);
        break;
      }
      case Algorithm::simultaneous: {
        auto r = run_blocks(cfg.Q, ch, WaveformSource::from_policy(y, cfg.policy), main, cfg.workers, m.rx, true,
                            true, false);
        rec.loss = r.loss_sum * invQ;
        r.rx_grad *= invQ;
        NetParams g = tx_backward(m.tx, fwd, r.score_sum * invQ);
        if (penalized) g += penalty_param_grad(m.tx, fwd, pen);
        rx_opt.step(m.rx, r.rx_grad);
        tx_opt.step(m.tx.params, g);
        break;
      }
      case Algorithm::known_channel: {
        auto r = run_blocks(cfg.Q, ch, WaveformSource::fixed(y), main, cfg.workers, m.rx, true, false, true);
        rec.loss = r.loss_sum * invQ;
        r.rx_grad *= invQ;
        NetParams g = tx_backward(m.tx, fwd, r.known_sum * invQ);
        if (penalized) g += penalty_param_grad(m.tx, fwd, pen);
        rx_opt.step(m.rx, r.rx_grad);
        tx_opt.step(m.tx.params, g);
        break;
      }
      case Algorithm::receiver_only: {
        auto r = run_blocks(cfg.Q, ch, WaveformSource::fixed(y), main, cfg.workers, m.rx, true, false, false);
        rec.loss = r.loss_sum * invQ;
        r.rx_grad *= invQ;
        rx_opt.step(m.rx, r.rx_grad);
        break;
      }
    }

    if (!std::isfinite(rec.loss)) throw TrainingDiverged(rec.iter, "non-finite empirical loss");
    if (!m.rx.all_finite() || !m.tx.params.all_finite()) {
      throw TrainingDiverged(rec.iter, "non-finite parameters after update");
    }
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back(rec);
    if (on_iter) on_iter(rec, m);
  }

  try {
    res.y = transmitted_waveform(m, cfg.algorithm);
  } catch (const std::domain_error& e) {
    throw TrainingDiverged(static_cast<int>(res.history.size()), e.what());
  }
  return res;
}

TrainResult train_alternating(TrainConfig cfg, const EnvModel& env, Models init) {
  cfg.algorithm = Algorithm::alternating;
  return train(cfg, env, std::move(init));
}

TrainResult train_simultaneous(TrainConfig cfg, const EnvModel& env, Models init) {
  cfg.algorithm = Algorithm::simultaneous;
  return train(cfg, env, std::move(init));
}

}  // namespace radar_e2e
