#pragma once

// Gradient estimators and the training loops: alternating (supervised
// receiver step with the policy off, then a score-function transmitter step),
// simultaneous (both steps on one policy-on dataset), known-channel reference
// training (transmitter gradient through the Gaussian likelihood), and
// receiver-only training on a fixed waveform.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "radar_e2e/constraints.hpp"
#include "radar_e2e/environment.hpp"
#include "radar_e2e/neural.hpp"
#include "radar_e2e/receiver.hpp"
#include "radar_e2e/transmitter.hpp"

namespace radar_e2e {

enum class Algorithm { alternating, simultaneous, known_channel, receiver_only };
enum class Optimizer { adam, sgd };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);
std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view name);

/// Stop when the mean loss of the last `window` iterations improved on the
/// window before it by less than `min_decrease`, or after max_iters.
/// window = 0 disables the plateau test.
struct StopRule {
  int max_iters = 1000;
  int window = 50;
  double min_decrease = 1e-4;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::simultaneous;
  std::size_t Q = 8192;
  double lr = 0.005;
  Optimizer optimizer = Optimizer::adam;
  PolicyConfig policy;
  PenaltyConfig penalty;
  StopRule stop;
  std::uint64_t seed = 1;
  int workers = 1;
  /// Bands used for the interfering-energy column of the history.
  std::vector<FrequencyBand> report_bands{{0.3, 0.35, 1.0}, {0.5, 0.6, 1.0}};

  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double loss = 0.0;
  double penalty = 0.0;  // unweighted J of the configured penalty
  double par_db = 0.0;
  double interf_db = 0.0;
  double seconds = 0.0;
};

using TrainHistory = std::vector<IterationRecord>;

/// `iter,loss,penalty,par_db,interf_db,seconds`; seconds are zeroed unless
/// with_time is set so that output is reproducible byte for byte.
void write_history_csv(std::ostream& os, const TrainHistory& history, bool with_time = false);

bool stopping_check(const TrainHistory& history, const StopRule& rule);

class TrainingDiverged : public std::runtime_error {
 public:
  TrainingDiverged(int iter, const std::string& what);
  int iter() const noexcept { return iter_; }

 private:
  int iter_;
};

struct GradEstimate {
  NetParams grad;
  double mean_loss = 0.0;
};

/// l(f_R(z_q), i_q) for every sample.
std::vector<double> per_sample_losses(const NetParams& rx, std::span<const LabeledSample> data);

/// Mean over the dataset of grad_R l(f_R(z), i).
GradEstimate rx_grad_estimate(const NetParams& rx, std::span<const LabeledSample> data);

/// Score-function estimate (1/Q) sum l(f_R(z_q), i_q) grad_T ln pi(a_q | y).
/// The sum is formed in waveform space and pulled back through the
/// transmitter once.
GradEstimate tx_rl_grad_estimate(const NetParams& rx, const Transmitter& tx, const TxForward& fwd,
                                 std::span<const LabeledSample> data, const PolicyConfig& pol);

/// RL estimate plus lambda * grad J.
GradEstimate tx_constrained_grad(const NetParams& rx, const Transmitter& tx, const TxForward& fwd,
                                 std::span<const LabeledSample> data, const PolicyConfig& pol,
                                 const Penalty& pen);

/// Closed-form likelihood of z given y under Gaussian clutter:
/// z | H_i ~ CN(0, i sigma_alpha2 y y^H + Sigma_c(y) + Omega_n).
class GaussianLikelihood {
 public:
  GaussianLikelihood(const EnvModel& env, const ComplexMatrix& noise_cov, const Waveform& y);
  double loglik(const Waveform& z, int label) const;

 private:
  ComplexMatrix factor_[2];
  double logdet_[2];
};

/// Central-difference step (in packed waveform coordinates) for grad_y ln p.
inline constexpr double kLikelihoodFdStep = 1e-5;

/// (1/Q) sum l_q grad_y ln p(z_q | y, H_{i_q}) in packed waveform coordinates,
/// with the gradient taken by central differences of the closed form.
RealPacked known_channel_waveform_grad(const NetParams& rx, const Waveform& y,
                                       std::span<const LabeledSample> data, const RadarChannel& ch);

/// Known-likelihood transmitter gradient on Q fresh policy-off samples.
GradEstimate known_channel_tx_grad(const NetParams& rx, const Transmitter& tx, const TxForward& fwd,
                                   const RadarChannel& ch, std::size_t Q, Rng& rng);

struct Models {
  Transmitter tx;
  NetParams rx;
};

/// Freshly initialized networks; the transmitter input is `init`.
Models init_models(const Waveform& init, int tx_hidden, int rx_hidden, std::uint64_t seed);

struct TrainResult {
  Models models;
  Waveform y;  // final transmitted waveform (unit energy)
  TrainHistory history;
  std::string stop_reason;
};

using IterationCallback = std::function<void(const IterationRecord&, const Models&)>;

TrainResult train(const TrainConfig& cfg, const EnvModel& env, Models init, const IterationCallback& on_iter = {});

TrainResult train_alternating(TrainConfig cfg, const EnvModel& env, Models init);
TrainResult train_simultaneous(TrainConfig cfg, const EnvModel& env, Models init);

/// Waveform actually transmitted by a model set under an algorithm:
/// receiver-only uses the normalized init waveform, the rest use f_T(s).
Waveform transmitted_waveform(const Models& m, Algorithm algorithm);

}  // namespace radar_e2e
