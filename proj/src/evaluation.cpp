#include "radar_e2e/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "radar_e2e/csv_format.hpp"
#include "radar_e2e/parallel.hpp"
#include "radar_e2e/receiver.hpp"
#include "radar_e2e/training.hpp"

namespace radar_e2e {

Detector learned_detector(NetParams rx) {
  return [rx = std::move(rx)](std::span<const Waveform> zs) {
    const Eigen::VectorXd p = rx_predict_batch(rx, pack_batch(zs));
    return std::vector<double>(p.data(), p.data() + p.size());
  };
}

Detector statistic_detector(std::function<double(const Waveform&)> stat) {
  return [stat = std::move(stat)](std::span<const Waveform> zs) {
    std::vector<double> out;
    out.reserve(zs.size());
    for (const auto& z : zs) out.push_back(stat(z));
    return out;
  };
}

std::function<double(const Waveform&)> square_law_statistic(const Waveform& y, const EnvModel& env) {
  env.validate();
  if (y.size() != env.K) throw std::invalid_argument("square-law waveform length differs from env.K");
  ComplexMatrix sigma = clutter_covariance(y, env);
  if (env.sigma_n2 > 0.0) sigma += build_noise_cov(env.sigma_n2, env.rho, env.K);
  const ComplexMatrix L = cholesky(sigma);
  // y^H Sigma^-1 z = w^H z with w = Sigma^-1 y.
  const Waveform w = L.adjoint().triangularView<Eigen::Upper>().solve(L.triangularView<Eigen::Lower>().solve(y));
  return [w](const Waveform& z) { return std::norm(w.dot(z)); };
}

// ---------------------------------------------------------------------------
// ROC

RocCurve roc_from_statistics(std::vector<double> h0, std::vector<double> h1, const std::vector<double>& thresholds) {
  if (h0.empty() || h1.empty()) throw std::invalid_argument("ROC needs statistics under both hypotheses");
  std::sort(h0.begin(), h0.end());
  std::sort(h1.begin(), h1.end());
  RocCurve c;
  c.Q0 = h0.size();
  c.Q1 = h1.size();
  const double n0 = static_cast<double>(h0.size());
  const double n1 = static_cast<double>(h1.size());
  auto point = [&](double t) {
    const auto above0 = h0.end() - std::upper_bound(h0.begin(), h0.end(), t);
    const auto above1 = h1.end() - std::upper_bound(h1.begin(), h1.end(), t);
    return RocPoint{t, static_cast<double>(above0) / n0, static_cast<double>(above1) / n1};
  };
  if (!thresholds.empty()) {
    std::vector<double> ts = thresholds;
    std::sort(ts.begin(), ts.end());
    for (double t : ts) c.points.push_back(point(t));
    return c;
  }
  std::vector<double> pooled;
  pooled.reserve(h0.size() + h1.size());
  std::merge(h0.begin(), h0.end(), h1.begin(), h1.end(), std::back_inserter(pooled));
  pooled.erase(std::unique(pooled.begin(), pooled.end()), pooled.end());
  c.points.reserve(pooled.size() + 1);
  c.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});
  for (double t : pooled) c.points.push_back(point(t));
  return c;
}

std::vector<double> simulate_statistics(const Detector& det, const Waveform& y, const RadarChannel& ch, int label,
                                        std::size_t Q, const StreamId& stream, int workers) {
  if (Q < 1) throw std::invalid_argument("ROC sample counts must be >= 1");
  const auto nb = num_blocks(Q);
  std::vector<std::vector<double>> parts(nb);
  parallel_for_blocks(nb, workers, [&](std::size_t b) {
    Rng rng = block_rng(stream, b);
    const std::size_t n = block_count(Q, b);
    std::vector<Waveform> zs;
    zs.reserve(n);
    for (std::size_t q = 0; q < n; ++q) {
      const double beta = ch.draw_shape(rng);
      zs.push_back(ch.observe(y, label, beta, rng));
    }
    parts[b] = det(zs);
  });
  std::vector<double> out;
  out.reserve(Q);
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

RocCurve estimate_roc(const Detector& det, const Waveform& y, const RadarChannel& ch, std::size_t Q0,
                      std::size_t Q1, const StreamId& stream, const std::vector<double>& thresholds, int workers) {
  auto h0 = simulate_statistics(det, y, ch, 0, Q0, {stream.seed, stream.a, 2 * stream.b}, workers);
  auto h1 = simulate_statistics(det, y, ch, 1, Q1, {stream.seed, stream.a, 2 * stream.b + 1}, workers);
  return roc_from_statistics(std::move(h0), std::move(h1), thresholds);
}

RocPoint interpolate_at_pfa(const RocCurve& curve, double pfa) {
  const auto& p = curve.points;
  if (p.empty()) throw std::invalid_argument("empty ROC curve");
  // Largest index whose pfa still reaches the target; pfa is nonincreasing.
  std::size_t i = 0;
  bool found = false;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k].pfa >= pfa) {
      i = k;
      found = true;
    }
  }
  if (!found) return p.front();
  if (i + 1 == p.size() || p[i].pfa == pfa) {
    RocPoint r = p[i];
    if (!std::isfinite(r.threshold) && i + 1 < p.size()) r.threshold = p[i + 1].threshold;
    r.pfa = pfa;
    return r;
  }
  const RocPoint& a = p[i];
  const RocPoint& b = p[i + 1];
  const double w = (a.pfa - pfa) / (a.pfa - b.pfa);
  const double ta = std::isfinite(a.threshold) ? a.threshold : b.threshold;
  return {ta + w * (b.threshold - ta), pfa, a.pd + w * (b.pd - a.pd)};
}

std::vector<double> log_pfa_grid(double pfa_min, int per_decade) {
  if (!(pfa_min > 0.0 && pfa_min < 1.0) || per_decade < 1) {
    throw std::invalid_argument("Pfa grid needs 0 < pfa_min < 1 and per_decade >= 1");
  }
  const double decades = -std::log10(pfa_min);
  const int n = static_cast<int>(std::floor(decades * per_decade + 1e-9));
  std::vector<double> grid;
  for (int k = 0; k <= n; ++k) grid.push_back(std::pow(10.0, -static_cast<double>(k) / per_decade));
  if (grid.back() > pfa_min * (1.0 + 1e-9)) grid.push_back(pfa_min);
  return grid;
}

RocCurve resample_on_grid(const RocCurve& curve, const std::vector<double>& grid) {
  RocCurve out;
  out.Q0 = curve.Q0;
  out.Q1 = curve.Q1;
  out.trials = curve.trials;
  out.points.reserve(grid.size());
  for (double g : grid) out.points.push_back(interpolate_at_pfa(curve, g));
  return out;
}

RocCurve estimate_roc_trials(const Detector& det, const Waveform& y, const RadarChannel& ch, std::size_t Q0,
                             std::size_t Q1, const std::vector<double>& grid, std::uint64_t seed,
                             std::uint64_t stream_tag, int trials, int workers) {
  if (trials < 1) throw std::invalid_argument("ROC needs at least one trial");
  RocCurve avg;
  for (int t = 0; t < trials; ++t) {
    const auto c = resample_on_grid(
        estimate_roc(det, y, ch, Q0, Q1, {seed, stream_tag, static_cast<std::uint64_t>(t)}, {}, workers), grid);
    if (t == 0) {
      avg = c;
      continue;
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      avg.points[k].threshold += c.points[k].threshold;
      avg.points[k].pd += c.points[k].pd;
    }
  }
  for (auto& p : avg.points) {
    p.threshold /= trials;
    p.pd /= trials;
  }
  avg.trials = trials;
  return avg;
}

void write_roc_csv(std::ostream& os, const RocCurve& curve) {
  os << "threshold,pfa,pd\n";
  for (const auto& p : curve.points) {
    os << detail::fmt_full(p.threshold) << ',' << detail::fmt_full(p.pfa) << ',' << detail::fmt_full(p.pd) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Reports

WaveformReport waveform_report(const Waveform& y, const std::vector<FrequencyBand>& bands, int esd_grid) {
  WaveformReport r;
  r.par_db = to_db(par_value(y));
  if (bands.empty()) {
    r.interf_db = -std::numeric_limits<double>::infinity();
  } else {
    auto unit = bands;
    for (auto& b : unit) b.weight = 1.0;
    r.interf_db = to_db(quad_form(y, build_interference_cov(unit, static_cast<int>(y.size()))));
  }
  r.esd = esd(y, esd_grid);
  return r;
}

void write_report_csv(std::ostream& os, const std::vector<NamedReport>& rows) {
  os << "name,par_db,interf_db\n";
  for (const auto& r : rows) {
    os << r.name << ',' << detail::fmt_fixed4(r.report.par_db) << ',' << detail::fmt_fixed4(r.report.interf_db)
       << '\n';
  }
}

void write_modulus_csv(std::ostream& os, const Waveform& y) {
  os << "k,modulus\n";
  for (Eigen::Index k = 0; k < y.size(); ++k) os << k + 1 << ',' << detail::fmt_full(std::abs(y[k])) << '\n';
}

// ---------------------------------------------------------------------------
// Gradient agreement checks

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

namespace {

constexpr std::uint64_t kProp1Tag = 0x9101;
constexpr std::uint64_t kProp2Tag = 0x9102;

// Per-block mean receiver gradients (flattened) for one dataset stream.
std::vector<Eigen::VectorXd> block_rx_grads(const NetParams& rx, std::size_t Q, const RadarChannel& ch,
                                            const WaveformSource& src, const StreamId& stream, int workers) {
  const auto nb = num_blocks(Q);
  std::vector<Eigen::VectorXd> out(nb);
  parallel_for_blocks(nb, workers, [&](std::size_t b) {
    Rng rng = block_rng(stream, b);
    Rng prng = policy_block_rng(stream, b);
    const Dataset data = gen_dataset(block_count(Q, b), ch, src, rng, &prng);
    out[b] = rx_grad_estimate(rx, data).grad.flatten();
  });
  return out;
}

}  // namespace

Prop1Report prop1_test(const NetParams& rx, const Transmitter& tx, const EnvModel& env, const PolicyConfig& pol,
                       const Prop1Options& opt) {
  if (opt.repetitions < 1 || opt.Q < 1) throw std::invalid_argument("prop1 needs Q >= 1 and repetitions >= 1");
  pol.validate();
  const RadarChannel ch(env);
  const Waveform y = tx_forward(tx).y;
  const auto P = static_cast<Eigen::Index>(rx.size());

  Eigen::VectorXd sum_f = Eigen::VectorXd::Zero(P), sq_f = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd sum_p = Eigen::VectorXd::Zero(P), sq_p = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd sum_d = Eigen::VectorXd::Zero(P), sq_d = Eigen::VectorXd::Zero(P);
  std::size_t n = 0;
  for (int m = 0; m < opt.repetitions; ++m) {
    const auto um = static_cast<std::uint64_t>(m);
    const StreamId sf{opt.seed, kProp1Tag, opt.paired ? um : 2 * um};
    const StreamId sp{opt.seed, kProp1Tag, opt.paired ? um : 2 * um + 1};
    const auto gf = block_rx_grads(rx, opt.Q, ch, WaveformSource::fixed(y), sf, opt.workers);
    const auto gp = block_rx_grads(rx, opt.Q, ch, WaveformSource::from_policy(y, pol), sp, opt.workers);
    for (std::size_t b = 0; b < gf.size(); ++b) {
      sum_f += gf[b];
      sq_f += gf[b].cwiseAbs2();
      sum_p += gp[b];
      sq_p += gp[b].cwiseAbs2();
      const Eigen::VectorXd d = gf[b] - gp[b];
      sum_d += d;
      sq_d += d.cwiseAbs2();
      ++n;
    }
  }
  const double N = static_cast<double>(n);
  const Eigen::VectorXd mean_f = sum_f / N, mean_p = sum_p / N;
  auto var = [N](const Eigen::VectorXd& s, const Eigen::VectorXd& sq) -> Eigen::VectorXd {
    if (N < 2.0) return Eigen::VectorXd::Zero(s.size());
    return ((sq - s.cwiseAbs2() / N) / (N - 1.0)).cwiseMax(0.0);
  };
  Eigen::VectorXd se;
  if (opt.paired) {
    se = (var(sum_d, sq_d) / N).cwiseSqrt();
  } else {
    se = ((var(sum_f, sq_f) + var(sum_p, sq_p)) / N).cwiseSqrt();
  }
  Prop1Report r;
  r.num_params = static_cast<std::size_t>(P);
  for (Eigen::Index k = 0; k < P; ++k) {
    const double diff = mean_f[k] - mean_p[k];
    r.max_abs_mean_diff = std::max(r.max_abs_mean_diff, std::abs(diff));
    const double z = se[k] > 0.0 ? std::abs(diff) / se[k] : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    if (z > r.max_z || k == 0) {
      r.max_z = z;
      r.worst_index = static_cast<std::size_t>(k);
    }
  }
  r.pass = r.max_z <= opt.z_limit;
  return r;
}

Prop2Report prop2_test(const NetParams& rx, const Transmitter& tx, const EnvModel& env, const PolicyConfig& pol,
                       const Prop2Options& opt) {
  if (env.K > 4) throw std::invalid_argument("prop2 check supports K <= 4");
  if (!env.gaussian_only()) throw std::invalid_argument("prop2 check needs Gaussian clutter (shape 2)");
  pol.validate();
  const RadarChannel ch(env);
  const TxForward fwd = tx_forward(tx);
  const Waveform& y = fwd.y;

  const Dataset dp = gen_dataset_blocked(opt.Q, ch, WaveformSource::from_policy(y, pol),
                                         {opt.seed, kProp2Tag, 0}, opt.workers);
  const std::vector<double> losses = per_sample_losses(rx, dp);
  std::vector<RealPacked> scores;
  scores.reserve(dp.size());
  for (const auto& s : dp) scores.push_back(policy_score_wrt_waveform(s.a, y, pol));
  const double invQ = 1.0 / static_cast<double>(opt.Q);
  RealPacked rl = RealPacked::Zero(2 * y.size());
  for (std::size_t q = 0; q < scores.size(); ++q) rl += losses[q] * scores[q];
  const Eigen::VectorXd g_rl = tx_backward(tx, fwd, rl * invQ).flatten();

  const Dataset df =
      gen_dataset_blocked(opt.Q, ch, WaveformSource::fixed(y), {opt.seed, kProp2Tag, 1}, opt.workers);
  const auto nb = num_blocks(opt.Q);
  std::vector<RealPacked> parts(nb);
  parallel_for_blocks(nb, opt.workers, [&](std::size_t b) {
    const std::span<const LabeledSample> blk(df.data() + b * kBlockSize, block_count(opt.Q, b));
    parts[b] = known_channel_waveform_grad(rx, y, blk, ch) * static_cast<double>(blk.size());
  });
  RealPacked known = RealPacked::Zero(2 * y.size());
  for (const auto& p : parts) known += p;
  const Eigen::VectorXd g_known = tx_backward(tx, fwd, known * invQ).flatten();

  Prop2Report r;
  r.rl_norm = g_rl.norm();
  r.known_norm = g_known.norm();
  r.cosine = cosine_similarity(g_rl, g_known);

  // Control: centered losses permuted against the scores. Without centering
  // every permutation shares the mean-loss times mean-score term, so the
  // average would not tend to zero.
  const double mean_loss = std::accumulate(losses.begin(), losses.end(), 0.0) * invQ;
  Rng rng = substream(opt.seed, {kProp2Tag, 2});
  std::vector<std::size_t> perm(losses.size());
  double acc = 0.0;
  for (int s = 0; s < opt.shuffles; ++s) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    RealPacked v = RealPacked::Zero(2 * y.size());
    for (std::size_t q = 0; q < scores.size(); ++q) v += (losses[perm[q]] - mean_loss) * scores[q];
    acc += cosine_similarity(tx_backward(tx, fwd, v * invQ).flatten(), g_known);
  }
  r.shuffled_cosine = opt.shuffles > 0 ? acc / opt.shuffles : 0.0;

  const auto [lo, hi] = std::minmax_element(losses.begin(), losses.end());
  r.uninformative = (*hi - *lo) <= 1e-12 || r.rl_norm < opt.min_norm || r.known_norm < opt.min_norm;
  r.pass = !r.uninformative && r.cosine >= opt.min_cosine && r.shuffled_cosine <= opt.max_control_cosine;
  return r;
}

}  // namespace radar_e2e
