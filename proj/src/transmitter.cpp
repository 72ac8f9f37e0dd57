#include "radar_e2e/transmitter.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace radar_e2e {

void PolicyConfig::validate() const {
  if (!(sigma_p2 > 0.0 && sigma_p2 < 1.0)) {
    throw std::invalid_argument("policy variance sigma_p2 must lie in (0, 1), got " + std::to_string(sigma_p2));
  }
}

Waveform chirp_init(int K, double chirp_rate, double sample_rate) {
  if (K < 1) throw std::invalid_argument("chirp needs K >= 1");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("chirp sample rate must be positive");
  Waveform s(K);
  const double amp = 1.0 / std::sqrt(static_cast<double>(K));
  for (int k = 0; k < K; ++k) {
    const double t = static_cast<double>(k) / sample_rate;
    s[k] = std::polar(amp, std::numbers::pi * chirp_rate * t * t);
  }
  return s;
}

NetSpec transmitter_spec(int K, int hidden) {
  return {{2 * K, hidden, hidden, 2 * K}, {Activation::elu, Activation::elu, Activation::linear}};
}

TxForward tx_forward(const Transmitter& tx) {
  if (tx.params.spec().input_dim() != 2 * tx.K() || tx.params.spec().output_dim() != 2 * tx.K()) {
    throw std::invalid_argument("transmitter network must map 2K -> 2K");
  }
  auto fwd = net_forward(tx.params, pack(tx.init));
  TxForward out;
  out.raw = std::move(fwd.output);
  out.raw_norm = out.raw.norm();
  if (!(out.raw_norm > 0.0) || !std::isfinite(out.raw_norm)) {
    throw std::domain_error("transmitter produced a zero or non-finite waveform before normalization");
  }
  out.y = unpack(out.raw / out.raw_norm);
  out.cache = std::move(fwd.cache);
  return out;
}

RealPacked normalization_vjp(const TxForward& fwd, const RealPacked& grad_wrt_y) {
  // d(u/|u|)/du = (I - yy^T)/|u| with y = u/|u|, symmetric.
  const RealPacked y = fwd.raw / fwd.raw_norm;
  return (grad_wrt_y - y * y.dot(grad_wrt_y)) / fwd.raw_norm;
}

NetParams tx_backward(const Transmitter& tx, const TxForward& fwd, const RealPacked& grad_wrt_y) {
  if (grad_wrt_y.size() != 2 * tx.K()) throw std::invalid_argument("waveform gradient has wrong length");
  return net_backward(tx.params, fwd.cache, normalization_vjp(fwd, grad_wrt_y)).grads;
}

Waveform policy_sample(const Waveform& y, const PolicyConfig& pol, Rng& rng) {
  const auto K = y.size();
  const double chip_var = pol.sigma_p2 / static_cast<double>(K);
  Waveform a = pol.mean_scale() * y;
  for (Eigen::Index k = 0; k < K; ++k) a[k] += complex_normal(rng, chip_var);
  return a;
}

double policy_logpdf(const Waveform& a, const Waveform& y, const PolicyConfig& pol) {
  if (a.size() != y.size()) throw std::invalid_argument("policy_logpdf dimension mismatch");
  const double K = static_cast<double>(y.size());
  const double dist2 = (a - pol.mean_scale() * y).squaredNorm();
  return -K * std::log(std::numbers::pi * pol.sigma_p2 / K) - (K / pol.sigma_p2) * dist2;
}

RealPacked policy_score_wrt_waveform(const Waveform& a, const Waveform& y, const PolicyConfig& pol) {
  if (a.size() != y.size()) throw std::invalid_argument("policy score dimension mismatch");
  const double K = static_cast<double>(y.size());
  const double c = pol.mean_scale();
  return (2.0 * K * c / pol.sigma_p2) * pack(a - c * y);
}

NetParams tx_score_grad(const Transmitter& tx, const TxForward& fwd, const Waveform& a, const PolicyConfig& pol) {
  return tx_backward(tx, fwd, policy_score_wrt_waveform(a, fwd.y, pol));
}

}  // namespace radar_e2e
