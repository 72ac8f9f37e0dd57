#pragma once

// Waveform penalties: peak-to-average power ratio and in-band interfering
// energy, with their gradients with respect to the packed waveform and the
// chained gradient with respect to the transmitter parameters.

#include <string_view>
#include <vector>

#include "radar_e2e/complex_core.hpp"
#include "radar_e2e/neural.hpp"
#include "radar_e2e/transmitter.hpp"

namespace radar_e2e {

enum class PenaltyKind { none, par, spectrum };

std::string_view to_string(PenaltyKind k);
PenaltyKind parse_penalty_kind(std::string_view name);

struct PenaltyConfig {
  PenaltyKind kind = PenaltyKind::none;
  double lambda = 0.0;
  std::vector<FrequencyBand> bands;  // spectrum only

  void validate() const;
};

/// K max|y_k|^2 / ||y||^2, in [1, K].
double par_value(const Waveform& y);

/// Lowest index attaining the maximum modulus.
Eigen::Index par_argmax(const Waveform& y);

/// Gradient of K max|y_k|^2 for unit-energy y: 2K Re/Im of the peak chip in
/// its two packed slots, zero elsewhere. Ties resolve to the lowest index.
RealPacked par_grad_wrt_waveform(const Waveform& y);

/// y^H Omega y.
double spectral_value(const Waveform& y, const ComplexMatrix& omega);

/// [2 Re(Omega y); 2 Im(Omega y)].
RealPacked spectral_grad_wrt_waveform(const Waveform& y, const ComplexMatrix& omega);

/// Penalty with the interference matrix built once for a given K.
class Penalty {
 public:
  Penalty() = default;
  Penalty(PenaltyConfig cfg, int K);

  const PenaltyConfig& config() const { return cfg_; }
  const ComplexMatrix& omega() const { return omega_; }

  /// Unweighted J(y); zero for kind none.
  double value(const Waveform& y) const;
  /// lambda * J(y).
  double weighted_value(const Waveform& y) const { return cfg_.lambda * value(y); }
  /// Gradient of J with respect to the packed waveform (unweighted).
  RealPacked grad_wrt_waveform(const Waveform& y) const;

 private:
  PenaltyConfig cfg_;
  ComplexMatrix omega_;
};

/// lambda * grad_theta J(f_T(s)).
NetParams penalty_param_grad(const Transmitter& tx, const TxForward& fwd, const Penalty& pen);

}  // namespace radar_e2e
