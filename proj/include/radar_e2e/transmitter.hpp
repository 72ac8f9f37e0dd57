#pragma once

// Waveform generator f_T(s): complex -> packed real -> MLP -> complex -> unit
// energy, plus the Gaussian exploration policy used for score-function
// training of the generator.

#include "radar_e2e/complex_core.hpp"
#include "radar_e2e/neural.hpp"
#include "radar_e2e/rng.hpp"

namespace radar_e2e {

/// Per-waveform exploration variance of the Gaussian policy, in (0, 1).
struct PolicyConfig {
  double sigma_p2 = 0.031622776601683794;  // 10^-1.5

  void validate() const;
  double mean_scale() const { return std::sqrt(1.0 - sigma_p2); }
};

/// Linear FM pulse s(k) = exp(j pi R (k/fs)^2) / sqrt(K), k = 0..K-1.
Waveform chirp_init(int K, double chirp_rate, double sample_rate);

/// 2K -> M -> M -> 2K with ELU hidden layers and a linear output.
NetSpec transmitter_spec(int K, int hidden);

struct Transmitter {
  NetParams params;
  Waveform init;  // network input s

  int K() const { return static_cast<int>(init.size()); }
};

struct TxForward {
  Waveform y;        // unit-energy waveform
  RealPacked raw;    // network output before normalization
  double raw_norm = 0.0;
  ForwardCache cache;
};

TxForward tx_forward(const Transmitter& tx);

/// Vector-Jacobian product of the normalization u -> u/||u|| at the cached u.
RealPacked normalization_vjp(const TxForward& fwd, const RealPacked& grad_wrt_y);

/// Chains a gradient with respect to the packed unit-energy waveform down to
/// the transmitter parameters.
NetParams tx_backward(const Transmitter& tx, const TxForward& fwd, const RealPacked& grad_wrt_y);

/// a = sqrt(1 - sigma_p2) y + w,  w ~ CN(0, sigma_p2/K I).
Waveform policy_sample(const Waveform& y, const PolicyConfig& pol, Rng& rng);

/// Normalized log-density of the policy, including -K ln(pi sigma_p2 / K).
double policy_logpdf(const Waveform& a, const Waveform& y, const PolicyConfig& pol);

/// Gradient of policy_logpdf with respect to the packed mean waveform y.
RealPacked policy_score_wrt_waveform(const Waveform& a, const Waveform& y, const PolicyConfig& pol);

/// Gradient of ln pi(a | f_T(s)) with respect to the transmitter parameters.
NetParams tx_score_grad(const Transmitter& tx, const TxForward& fwd, const Waveform& a, const PolicyConfig& pol);

}  // namespace radar_e2e
