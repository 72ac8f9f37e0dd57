#pragma once

// Stochastic radar channel z = i*alpha*a + c(a) + n for one range cell:
// Rayleigh target, signal-dependent Weibull clutter from 2K-1 cells,
// exponentially correlated Gaussian noise. Powers are linear scale.

#include <algorithm>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "radar_e2e/complex_core.hpp"
#include "radar_e2e/rng.hpp"
#include "radar_e2e/transmitter.hpp"

namespace radar_e2e {

struct ClutterShape {
  double beta = 2.0;    // Weibull shape; 2 gives Gaussian scattering
  double weight = 1.0;  // selection weight in mixed-clutter datasets
};

struct EnvModel {
  int K = 8;
  double sigma_alpha2 = 17.782794100389228;  // 12.5 dB over unit noise
  double sigma_n2 = 1.0;
  double rho = 0.7;
  std::vector<ClutterShape> clutter_shapes{{2.0, 1.0}};
  double sigma_gamma2 = 0.0676082975391982;  // -11.7 dB per cell
  double p_h0 = 0.5;
  double p_h1 = 0.5;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  /// Sum of per-cell clutter powers over the 2K-1 cells.
  double total_clutter_power() const { return (2 * K - 1) * sigma_gamma2; }
  bool gaussian_only() const;
};

struct LabeledSample {
  Waveform z;   // received vector
  int label;    // 1 when the target is present
  Waveform a;   // transmitted realization that produced z
  double beta;  // clutter shape used for this sample
};

using Dataset = std::vector<LabeledSample>;

/// Weibull scale nu such that E|gamma|^2 = sigma_gamma2.
double weibull_scale_from_power(double sigma_gamma2, double beta);

/// Inverse-CDF Weibull draw nu * (-ln u)^(1/beta) for u in (0, 1).
double weibull_magnitude(double nu, double beta, double u);

/// 2K-1 coefficients ordered g = -(K-1) .. K-1.
std::vector<cdouble> sample_clutter_coeffs(const EnvModel& env, double beta, Rng& rng);

/// c = sum_g gamma_g J_g a.
Waveform synth_clutter(std::span<const cdouble> gamma, const Waveform& a);

/// n = L g with g white circular Gaussian of unit variance.
Waveform sample_noise(const ComplexMatrix& noise_factor, Rng& rng);

cdouble sample_target(double sigma_alpha2, Rng& rng);

/// Sigma_c(y) = sigma_gamma2 * sum_g (J_g y)(J_g y)^H.
ComplexMatrix clutter_covariance(const Waveform& y, const EnvModel& env);

/// Channel with the noise factor and Weibull scales precomputed.
///
/// Every observation draws, in order: the target amplitude (also under H0,
/// so H0/H1 streams stay aligned), the 2K-1 clutter coefficients, the noise.
class RadarChannel {
 public:
  explicit RadarChannel(EnvModel env);

  const EnvModel& env() const { return env_; }
  const ComplexMatrix& noise_cov() const { return noise_cov_; }
  const ComplexMatrix& noise_factor() const { return noise_factor_; }

  Waveform observe(const Waveform& a, int label, double beta, Rng& rng) const;
  /// Picks a clutter shape according to the configured weights.
  double draw_shape(Rng& rng) const;
  int draw_label(Rng& rng) const;

 private:
  EnvModel env_;
  ComplexMatrix noise_cov_;
  ComplexMatrix noise_factor_;
  std::vector<double> cumulative_weights_;
};

/// One-shot channel draw (rebuilds the noise factor; use RadarChannel in loops).
Waveform channel(const Waveform& a, int label, const EnvModel& env, double beta, Rng& rng);

/// Where the transmitted waveform of each sample comes from.
struct WaveformSource {
  Waveform y;
  bool policy_on = false;
  PolicyConfig policy;

  static WaveformSource fixed(Waveform y) { return {std::move(y), false, {}}; }
  static WaveformSource from_policy(Waveform y, PolicyConfig pol) { return {std::move(y), true, pol}; }
};

/// Q i.i.d. samples from one stream: label, clutter shape, waveform, channel.
/// Policy noise comes from policy_rng when given, else from rng.
Dataset gen_dataset(std::size_t Q, const RadarChannel& ch, const WaveformSource& source, Rng& rng,
                    Rng* policy_rng = nullptr);
Dataset gen_dataset(std::size_t Q, const EnvModel& env, const WaveformSource& source, Rng& rng);

/// Block size used whenever sample generation is split into substreams.
inline constexpr std::size_t kBlockSize = 512;

inline Rng policy_block_rng(const StreamId& id, std::uint64_t block) {
  return substream(id.seed, {id.a, id.b, block, 1});
}

inline std::size_t num_blocks(std::size_t Q) { return (Q + kBlockSize - 1) / kBlockSize; }
inline std::size_t block_count(std::size_t Q, std::size_t block) {
  return std::min(kBlockSize, Q - block * kBlockSize);
}

/// Block b is gen_dataset(block_count(Q, b), ..., block_rng(stream, b),
/// policy_block_rng(stream, b)); the result is the concatenation in block
/// order for any worker count. Keeping policy noise on its own stream means a
/// policy-on and a policy-off dataset from one stream share labels, clutter
/// and noise.
Dataset gen_dataset_blocked(std::size_t Q, const RadarChannel& ch, const WaveformSource& source,
                            const StreamId& stream, int workers = 1);

/// `re(z_1),...,re(z_K),im(z_1),...,im(z_K),label`
void write_dataset_csv(std::ostream& os, const Dataset& data);

}  // namespace radar_e2e
