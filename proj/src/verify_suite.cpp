#include "radar_e2e/verify_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <stdexcept>

#include "radar_e2e/evaluation.hpp"

namespace radar_e2e {

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

Models reference_models(const EnvModel& env, const Waveform& init, int hidden, std::uint64_t seed, int rx_iters,
                        std::size_t Q) {
  Models m = init_models(init, hidden, hidden, seed);
  if (rx_iters <= 0) return m;
  TrainConfig c;
  c.algorithm = Algorithm::receiver_only;
  c.Q = Q;
  c.seed = seed;
  c.stop = {rx_iters, 0, 0.0};
  return train(c, env, std::move(m)).models;
}

EnvModel small_gaussian_env(const EnvModel& env, int K) {
  EnvModel e = env;
  e.K = K;
  e.clutter_shapes = {{2.0, 1.0}};
  return e;
}

namespace {

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

constexpr int kFdCoords = 20;
constexpr double kFdStep = 1e-5;

// Indices of kFdCoords distinct parameters drawn from rng.
std::vector<std::size_t> pick_coords(std::size_t n, Rng& rng) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(n, kFdCoords));
  return all;
}

Transmitter random_tx(const ExperimentConfig& cfg, std::uint64_t tag) {
  Rng rng = substream(cfg.seed, {0x7e57, tag});
  Transmitter tx;
  tx.init = cfg.init_waveform();
  tx.params = net_init(transmitter_spec(cfg.K, cfg.tx_hidden), rng);
  return tx;
}

// Central differences of f over tx parameters, compared with an analytic gradient.
CheckResult fd_check(const std::string& name, Transmitter tx, const NetParams& analytic,
                     const std::function<double(const Transmitter&)>& f, double tol,
                     const std::function<bool(const Transmitter&, const Transmitter&)>& skip = {}) {
  Rng rng = substream(0, {0x7e57, 99});
  double worst = 0.0;
  int used = 0;
  for (auto idx : pick_coords(tx.params.size(), rng)) {
    const double x = tx.params.get(idx);
    Transmitter p = tx, m = tx;
    p.params.set(idx, x + kFdStep);
    m.params.set(idx, x - kFdStep);
    if (skip && skip(p, m)) continue;
    const double fd = (f(p) - f(m)) / (2.0 * kFdStep);
    worst = std::max(worst, relative_error(analytic.get(idx), fd));
    ++used;
  }
  return {name, used > 0 && worst <= tol, fmt("max rel err %.3g over %.0f coords", worst, used)};
}

CheckResult check_par_grad(const ExperimentConfig& cfg) {
  const Transmitter tx = random_tx(cfg, 1);
  const Penalty pen({PenaltyKind::par, 1.0, {}}, cfg.K);
  const auto analytic = penalty_param_grad(tx, tx_forward(tx), pen);
  const auto peak = par_argmax(tx_forward(tx).y);
  return fd_check(
      "par_grad", tx, analytic, [](const Transmitter& t) { return par_value(tx_forward(t).y); }, 1e-4,
      [peak](const Transmitter& p, const Transmitter& m) {
        return par_argmax(tx_forward(p).y) != peak || par_argmax(tx_forward(m).y) != peak;
      });
}

CheckResult check_spectral_grad(const ExperimentConfig& cfg) {
  const Transmitter tx = random_tx(cfg, 2);
  const auto bands = cfg.penalty_bands.empty() ? cfg.report_bands : cfg.penalty_bands;
  const Penalty pen({PenaltyKind::spectrum, 1.0, bands}, cfg.K);
  const auto analytic = penalty_param_grad(tx, tx_forward(tx), pen);
  return fd_check(
      "spectral_grad", tx, analytic, [&](const Transmitter& t) { return pen.value(tx_forward(t).y); }, 1e-5);
}

CheckResult check_score_grad(const ExperimentConfig& cfg) {
  const Transmitter tx = random_tx(cfg, 3);
  const auto fwd = tx_forward(tx);
  Rng rng = substream(cfg.seed, {0x7e57, 4});
  const auto pol = cfg.policy();
  const Waveform a = policy_sample(fwd.y, pol, rng);
  const auto analytic = tx_score_grad(tx, fwd, a, pol);
  return fd_check(
      "score_grad", tx, analytic, [&](const Transmitter& t) { return policy_logpdf(a, tx_forward(t).y, pol); },
      1e-5);
}

CheckResult check_score_mean(const ExperimentConfig& cfg) {
  const Waveform y = cfg.init_waveform().normalized();
  const auto pol = cfg.policy();
  Rng rng = substream(cfg.seed, {0x7e57, 5});
  const int n = 100000;
  const auto dim = 2 * y.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim), sq = Eigen::VectorXd::Zero(dim);
  for (int i = 0; i < n; ++i) {
    const RealPacked s = policy_score_wrt_waveform(policy_sample(y, pol, rng), y, pol);
    sum += s;
    sq += s.cwiseAbs2();
  }
  double worst = 0.0;
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double mean = sum[k] / n;
    const double se = std::sqrt((sq[k] / n - mean * mean) / n);
    worst = std::max(worst, std::abs(mean) / se);
  }
  return {"score_mean", worst <= 4.0, fmt("max |mean|/se %.3f over %.0f draws", worst, n)};
}

CheckResult check_rx_grad(const ExperimentConfig& cfg) {
  const EnvModel env = cfg.env();
  const Waveform y = cfg.init_waveform().normalized();
  Rng rng = substream(cfg.seed, {0x7e57, 6});
  NetParams rx = net_init(receiver_spec(cfg.K, cfg.rx_hidden), rng);
  const Dataset data = gen_dataset(256, env, WaveformSource::fixed(y), rng);
  const auto g = rx_grad_estimate(rx, data).grad;
  auto loss = [&](const NetParams& p) { return rx_grad_estimate(p, data).mean_loss; };
  double worst = 0.0;
  for (auto idx : pick_coords(rx.size(), rng)) {
    NetParams p = rx, m = rx;
    p.set(idx, rx.get(idx) + kFdStep);
    m.set(idx, rx.get(idx) - kFdStep);
    worst = std::max(worst, relative_error(g.get(idx), (loss(p) - loss(m)) / (2.0 * kFdStep)));
  }
  return {"rx_grad", worst <= 1e-5, fmt("max rel err %.3g", worst)};
}

CheckResult check_known_loglik(const ExperimentConfig& cfg) {
  EnvModel env = cfg.env();
  env.K = 1;
  env.sigma_gamma2 = 0.0;
  const Waveform y = Waveform::Constant(1, cdouble(0.6, -0.3));
  const Waveform z = Waveform::Constant(1, cdouble(1.1, 0.4));
  const GaussianLikelihood lik(env, ComplexMatrix::Constant(1, 1, env.sigma_n2), y);
  const double v1 = env.sigma_alpha2 * std::norm(y[0]) + env.sigma_n2;
  const double want1 = -std::log(std::numbers::pi * v1) - std::norm(z[0]) / v1;
  const double want0 = -std::log(std::numbers::pi * env.sigma_n2) - std::norm(z[0]) / env.sigma_n2;
  const double err = std::max(std::abs(lik.loglik(z, 1) - want1), std::abs(lik.loglik(z, 0) - want0));
  return {"known_loglik", err <= 1e-10, fmt("abs err %.3g", err)};
}

CheckResult check_weibull_power(const ExperimentConfig& cfg) {
  const EnvModel env = cfg.env();
  Rng rng = substream(cfg.seed, {0x7e57, 7});
  const int n = 100000;
  double worst = 0.0;
  for (const auto& shape : env.clutter_shapes) {
    const double nu = weibull_scale_from_power(env.sigma_gamma2, shape.beta);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += std::pow(weibull_magnitude(nu, shape.beta, uniform_open(rng)), 2);
    // |gamma|^2 has relative variance Gamma(1 + 4/b) / Gamma(1 + 2/b)^2 - 1.
    const double rel_sd =
        std::sqrt(std::exp(std::lgamma(1.0 + 4.0 / shape.beta) - 2.0 * std::lgamma(1.0 + 2.0 / shape.beta)) - 1.0);
    worst = std::max(worst, std::abs(acc / n / env.sigma_gamma2 - 1.0) / (rel_sd / std::sqrt(n)));
  }
  return {"weibull_power", worst <= 4.0, fmt("max power error %.3f standard errors", worst)};
}

CheckResult check_noise_lag(const ExperimentConfig& cfg) {
  const EnvModel env = cfg.env();
  const RadarChannel ch(env);
  Rng rng = substream(cfg.seed, {0x7e57, 8});
  const int n = 100000;
  ComplexMatrix acc = ComplexMatrix::Zero(env.K, env.K);
  for (int i = 0; i < n; ++i) {
    const Waveform w = sample_noise(ch.noise_factor(), rng);
    acc += w * w.adjoint();
  }
  acc /= static_cast<double>(n);
  double worst = 0.0;
  for (int v = 0; v < env.K; ++v)
    for (int h = 0; h < env.K; ++h)
      worst = std::max(worst, std::abs(acc(v, h) - env.sigma_n2 * std::pow(env.rho, std::abs(v - h))) / env.sigma_n2);
  return {"noise_lag", worst <= 0.02, fmt("max |C - sigma^2 rho^lag| / sigma^2 = %.4f", worst)};
}

CheckResult check_target_rayleigh(const ExperimentConfig& cfg) {
  const EnvModel env = cfg.env();
  Rng rng = substream(cfg.seed, {0x7e57, 9});
  const int n = 100000;
  std::vector<double> r(n);
  for (auto& x : r) x = std::abs(sample_target(env.sigma_alpha2, rng));
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double F = 1.0 - std::exp(-r[i] * r[i] / env.sigma_alpha2);
    ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(F - static_cast<double>(i + 1) / n)});
  }
  return {"target_rayleigh", ks <= 0.01, fmt("KS %.5f", ks)};
}

CheckResult check_prop1(const ExperimentConfig& cfg) {
  const EnvModel env = cfg.env();
  const Models m = reference_models(env, cfg.init_waveform(), cfg.rx_hidden, cfg.seed);
  Prop1Options o;
  o.Q = cfg.verify_Q;
  o.repetitions = cfg.verify_reps;
  o.seed = cfg.seed;
  o.workers = cfg.workers;
  const auto r = prop1_test(m.rx, m.tx, env, cfg.policy(), o);
  return {"prop1", r.pass, fmt("max |z| %.3f, max |mean diff| %.3g", r.max_z, r.max_abs_mean_diff)};
}

CheckResult check_prop2(const ExperimentConfig& cfg) {
  const EnvModel env = small_gaussian_env(cfg.env());
  const Waveform init = chirp_init(env.K, cfg.chirp_rate, cfg.sample_rate);
  const Models m = reference_models(env, init, cfg.rx_hidden, cfg.seed);
  Prop2Options o;
  o.Q = cfg.verify_Q;
  o.seed = cfg.seed;
  o.workers = cfg.workers;
  const auto r = prop2_test(m.rx, m.tx, env, cfg.policy(), o);
  return {"prop2", r.pass,
          fmt("cosine %.4f, shuffled control %.4f", r.cosine, r.shuffled_cosine) +
              (r.uninformative ? " (uninformative)" : "")};
}

using CheckFn = CheckResult (*)(const ExperimentConfig&);

const std::vector<std::pair<std::string, CheckFn>>& registry() {
  static const std::vector<std::pair<std::string, CheckFn>> r = {
      {"par_grad", check_par_grad},           {"spectral_grad", check_spectral_grad},
      {"score_grad", check_score_grad},       {"score_mean", check_score_mean},
      {"rx_grad", check_rx_grad},             {"known_loglik", check_known_loglik},
      {"weibull_power", check_weibull_power}, {"noise_lag", check_noise_lag},
      {"target_rayleigh", check_target_rayleigh}, {"prop1", check_prop1},
      {"prop2", check_prop2},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& verify_check_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [n, f] : registry()) v.push_back(n);
    return v;
  }();
  return names;
}

CheckResult run_verify_check(const std::string& name, const ExperimentConfig& cfg) {
  for (const auto& [n, f] : registry()) {
    if (n == name) return f(cfg);
  }
  throw std::invalid_argument("unknown check '" + name + "'");
}

}  // namespace radar_e2e
