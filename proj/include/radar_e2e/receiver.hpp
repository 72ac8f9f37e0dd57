#pragma once

// Detector network: packed received vector -> MLP -> p in (0, 1), trained
// with binary cross-entropy and thresholded for decisions.

#include <span>

#include <Eigen/Dense>

#include "radar_e2e/complex_core.hpp"
#include "radar_e2e/neural.hpp"

namespace radar_e2e {

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-12;

/// 2K -> M -> M -> 1, sigmoid everywhere.
NetSpec receiver_spec(int K, int hidden);

struct RxForward {
  double p;
  ForwardCache cache;
};

RxForward rx_forward(const NetParams& rx, const Waveform& z);

/// Packs received vectors column-wise (one sample per column).
Eigen::MatrixXd pack_batch(std::span<const Waveform> zs);

/// p for every column of a packed batch, without caching intermediates.
Eigen::VectorXd rx_predict_batch(const NetParams& rx, const Eigen::MatrixXd& packed);

double bce_loss(double p, int label);
/// d loss / d p.
double bce_grad(double p, int label);

/// 1 iff p > threshold; a tie declares H0.
int decide(double p, double threshold);

}  // namespace radar_e2e
