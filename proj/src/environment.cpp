#include "radar_e2e/environment.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>

#include "radar_e2e/csv_format.hpp"
#include "radar_e2e/parallel.hpp"

namespace radar_e2e {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void EnvModel::validate() const {
  require(K >= 1, "env.K must be >= 1");
  require(sigma_alpha2 > 0.0 && std::isfinite(sigma_alpha2), "env: target power must be positive");
  require(sigma_n2 >= 0.0 && std::isfinite(sigma_n2), "env: noise power must be nonnegative");
  require(rho >= 0.0 && rho < 1.0, "env.rho must lie in [0, 1), got " + std::to_string(rho));
  require(sigma_gamma2 >= 0.0 && std::isfinite(sigma_gamma2), "env: clutter power must be nonnegative");
  require(!clutter_shapes.empty(), "env: at least one clutter shape is required");
  double wsum = 0.0;
  for (const auto& s : clutter_shapes) {
    require(s.beta >= 0.25 && s.beta <= 2.0,
            "env: clutter shape " + std::to_string(s.beta) + " outside [0.25, 2]");
    require(s.weight >= 0.0, "env: clutter shape weights must be nonnegative");
    wsum += s.weight;
  }
  require(wsum > 0.0, "env: clutter shape weights must not all be zero");
  require(p_h0 >= 0.0 && p_h1 >= 0.0 && std::abs(p_h0 + p_h1 - 1.0) < 1e-12,
          "env: priors must be nonnegative and sum to 1");
}

bool EnvModel::gaussian_only() const {
  for (const auto& s : clutter_shapes) {
    if (s.weight > 0.0 && s.beta != 2.0) return false;
  }
  return true;
}

double weibull_scale_from_power(double sigma_gamma2, double beta) {
  if (!(sigma_gamma2 >= 0.0) || !(beta > 0.0)) {
    throw std::invalid_argument("weibull scale needs nonnegative power and positive shape");
  }
  return std::sqrt(sigma_gamma2 * beta / (2.0 * std::tgamma(2.0 / beta)));
}

double weibull_magnitude(double nu, double beta, double u) { return nu * std::pow(-std::log(u), 1.0 / beta); }

namespace {

void fill_clutter(double nu, double beta, Rng& rng, std::span<cdouble> out) {
  for (auto& g : out) {
    const double mag = weibull_magnitude(nu, beta, uniform_open(rng));
    const double phase = 2.0 * std::numbers::pi * uniform_open(rng);
    g = std::polar(mag, phase);
  }
}

}  // namespace

std::vector<cdouble> sample_clutter_coeffs(const EnvModel& env, double beta, Rng& rng) {
  std::vector<cdouble> gamma(static_cast<std::size_t>(2 * env.K - 1));
  fill_clutter(weibull_scale_from_power(env.sigma_gamma2, beta), beta, rng, gamma);
  return gamma;
}

Waveform synth_clutter(std::span<const cdouble> gamma, const Waveform& a) {
  const auto K = static_cast<int>(a.size());
  if (gamma.size() != static_cast<std::size_t>(2 * K - 1)) {
    throw std::invalid_argument("synth_clutter needs 2K-1 coefficients");
  }
  // c(v) = sum_g gamma_g a(v - g); written as a direct convolution.
  Waveform c = Waveform::Zero(K);
  for (int v = 0; v < K; ++v) {
    cdouble acc(0.0, 0.0);
    for (int src = 0; src < K; ++src) acc += gamma[static_cast<std::size_t>(v - src + K - 1)] * a[src];
    c[v] = acc;
  }
  return c;
}

Waveform sample_noise(const ComplexMatrix& noise_factor, Rng& rng) {
  Waveform g(noise_factor.cols());
  for (Eigen::Index k = 0; k < g.size(); ++k) g[k] = complex_normal(rng, 1.0);
  return noise_factor.triangularView<Eigen::Lower>() * g;
}

cdouble sample_target(double sigma_alpha2, Rng& rng) { return complex_normal(rng, sigma_alpha2); }

ComplexMatrix clutter_covariance(const Waveform& y, const EnvModel& env) {
  const auto K = static_cast<int>(y.size());
  ComplexMatrix S = ComplexMatrix::Zero(K, K);
  if (env.sigma_gamma2 == 0.0) return S;
  for (int g = -K + 1; g <= K - 1; ++g) {
    const Waveform s = shift_apply(y, g);
    S += env.sigma_gamma2 * (s * s.adjoint());
  }
  return S;
}

// ---------------------------------------------------------------------------

RadarChannel::RadarChannel(EnvModel env) : env_(std::move(env)) {
  env_.validate();
  if (env_.sigma_n2 > 0.0) {
    noise_cov_ = build_noise_cov(env_.sigma_n2, env_.rho, env_.K);
    noise_factor_ = cholesky(noise_cov_);
  } else {
    noise_cov_ = ComplexMatrix::Zero(env_.K, env_.K);
    noise_factor_ = ComplexMatrix::Zero(env_.K, env_.K);
  }
  double acc = 0.0;
  for (const auto& s : env_.clutter_shapes) {
    acc += s.weight;
    cumulative_weights_.push_back(acc);
  }
}

Waveform RadarChannel::observe(const Waveform& a, int label, double beta, Rng& rng) const {
  if (a.size() != env_.K) throw std::invalid_argument("channel input has wrong length");
  const cdouble alpha = sample_target(env_.sigma_alpha2, rng);
  std::vector<cdouble> gamma(static_cast<std::size_t>(2 * env_.K - 1));
  fill_clutter(weibull_scale_from_power(env_.sigma_gamma2, beta), beta, rng, gamma);
  Waveform z = synth_clutter(gamma, a) + sample_noise(noise_factor_, rng);
  if (label == 1) z += alpha * a;
  return z;
}

double RadarChannel::draw_shape(Rng& rng) const {
  if (cumulative_weights_.size() == 1) return env_.clutter_shapes.front().beta;
  const double u = uniform_open(rng) * cumulative_weights_.back();
  for (std::size_t i = 0; i < cumulative_weights_.size(); ++i) {
    if (u < cumulative_weights_[i]) return env_.clutter_shapes[i].beta;
  }
  return env_.clutter_shapes.back().beta;
}

int RadarChannel::draw_label(Rng& rng) const { return uniform_open(rng) < env_.p_h1 ? 1 : 0; }

Waveform channel(const Waveform& a, int label, const EnvModel& env, double beta, Rng& rng) {
  return RadarChannel(env).observe(a, label, beta, rng);
}

Dataset gen_dataset(std::size_t Q, const RadarChannel& ch, const WaveformSource& source, Rng& rng,
                    Rng* policy_rng) {
  if (Q < 1) throw std::invalid_argument("dataset size must be >= 1");
  if (source.policy_on) source.policy.validate();
  Dataset data;
  data.reserve(Q);
  for (std::size_t q = 0; q < Q; ++q) {
    LabeledSample s;
    s.label = ch.draw_label(rng);
    s.beta = ch.draw_shape(rng);
    s.a = source.policy_on ? policy_sample(source.y, source.policy, policy_rng ? *policy_rng : rng) : source.y;
    s.z = ch.observe(s.a, s.label, s.beta, rng);
    data.push_back(std::move(s));
  }
  return data;
}

Dataset gen_dataset(std::size_t Q, const EnvModel& env, const WaveformSource& source, Rng& rng) {
  return gen_dataset(Q, RadarChannel(env), source, rng);
}

Dataset gen_dataset_blocked(std::size_t Q, const RadarChannel& ch, const WaveformSource& source,
                            const StreamId& stream, int workers) {
  if (Q < 1) throw std::invalid_argument("dataset size must be >= 1");
  const auto nb = num_blocks(Q);
  std::vector<Dataset> blocks(nb);
  parallel_for_blocks(nb, workers, [&](std::size_t b) {
    Rng rng = block_rng(stream, b);
    Rng prng = policy_block_rng(stream, b);
    blocks[b] = gen_dataset(block_count(Q, b), ch, source, rng, &prng);
  });
  Dataset out;
  out.reserve(Q);
  for (auto& blk : blocks)
    for (auto& s : blk) out.push_back(std::move(s));
  return out;
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  if (data.empty()) return;
  const auto K = data.front().z.size();
  for (Eigen::Index k = 1; k <= K; ++k) os << "re(z_" << k << "),";
  for (Eigen::Index k = 1; k <= K; ++k) os << "im(z_" << k << "),";
  os << "label\n";
  for (const auto& s : data) {
    for (Eigen::Index k = 0; k < K; ++k) os << detail::fmt_full(s.z[k].real()) << ',';
    for (Eigen::Index k = 0; k < K; ++k) os << detail::fmt_full(s.z[k].imag()) << ',';
    os << s.label << '\n';
  }
}

}  // namespace radar_e2e
