#pragma once

// Monte Carlo ROC estimation, the square-law baseline, waveform reports, and
// the statistical checks that the policy-based gradients agree with their
// policy-free counterparts.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "radar_e2e/complex_core.hpp"
#include "radar_e2e/environment.hpp"
#include "radar_e2e/neural.hpp"
#include "radar_e2e/transmitter.hpp"

namespace radar_e2e {

/// Maps a batch of received vectors to detection statistics (larger means
/// more target-like).
using Detector = std::function<std::vector<double>(std::span<const Waveform>)>;

Detector learned_detector(NetParams rx);
Detector statistic_detector(std::function<double(const Waveform&)> stat);

/// T(z) = |y^H Sigma^-1 z|^2 with Sigma = Sigma_c(y) + Omega_n. For non-Gaussian
/// clutter this is the detector matched to the clutter's second moments.
/// Throws NotPositiveDefinite when Sigma is singular.
std::function<double(const Waveform&)> square_law_statistic(const Waveform& y, const EnvModel& env);

struct RocPoint {
  double threshold;
  double pfa;
  double pd;
};

/// Points ordered by increasing threshold, so pfa and pd are nonincreasing.
struct RocCurve {
  std::vector<RocPoint> points;
  std::size_t Q0 = 0;
  std::size_t Q1 = 0;
  int trials = 1;
};

/// Every achievable operating point from pooled statistics, starting with
/// threshold -inf at (1, 1). With explicit thresholds only those are used.
RocCurve roc_from_statistics(std::vector<double> h0, std::vector<double> h1,
                             const std::vector<double>& thresholds = {});

/// Statistics of Q samples under one hypothesis with the policy off.
std::vector<double> simulate_statistics(const Detector& det, const Waveform& y, const RadarChannel& ch, int label,
                                        std::size_t Q, const StreamId& stream, int workers = 1);

/// H0 samples use stream (seed, a, 2b), H1 samples (seed, a, 2b+1), so two
/// detectors evaluated with the same stream see the same received vectors.
RocCurve estimate_roc(const Detector& det, const Waveform& y, const RadarChannel& ch, std::size_t Q0,
                      std::size_t Q1, const StreamId& stream, const std::vector<double>& thresholds = {},
                      int workers = 1);

/// Linear interpolation between the two operating points that bracket pfa.
RocPoint interpolate_at_pfa(const RocCurve& curve, double pfa);
inline double pd_at_pfa(const RocCurve& curve, double pfa) { return interpolate_at_pfa(curve, pfa).pd; }

/// Strictly decreasing grid from 1 down to pfa_min, `per_decade` points per decade.
std::vector<double> log_pfa_grid(double pfa_min, int per_decade = 10);

RocCurve resample_on_grid(const RocCurve& curve, const std::vector<double>& grid);

/// Mean of `trials` independent curves (stream b = trial), each resampled on grid.
RocCurve estimate_roc_trials(const Detector& det, const Waveform& y, const RadarChannel& ch, std::size_t Q0,
                             std::size_t Q1, const std::vector<double>& grid, std::uint64_t seed,
                             std::uint64_t stream_tag, int trials, int workers = 1);

/// `threshold,pfa,pd`
void write_roc_csv(std::ostream& os, const RocCurve& curve);

struct WaveformReport {
  double par_db = 0.0;
  double interf_db = 0.0;
  std::vector<EsdPoint> esd;
};

/// Interfering energy uses unit band weights; an empty band list reports -inf.
WaveformReport waveform_report(const Waveform& y, const std::vector<FrequencyBand>& bands, int esd_grid = 1024);

struct NamedReport {
  std::string name;
  WaveformReport report;
};

/// `name,par_db,interf_db`
void write_report_csv(std::ostream& os, const std::vector<NamedReport>& rows);
/// `k,modulus`
void write_modulus_csv(std::ostream& os, const Waveform& y);

// ---------------------------------------------------------------------------
// Gradient agreement checks

struct Prop1Options {
  std::size_t Q = std::size_t{1} << 16;
  int repetitions = 32;
  double z_limit = 4.0;
  /// Share labels, clutter and noise between the two estimates (policy noise
  /// is then the only difference); off for the statistical comparison.
  bool paired = false;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct Prop1Report {
  double max_z = 0.0;
  std::size_t worst_index = 0;
  double max_abs_mean_diff = 0.0;
  std::size_t num_params = 0;
  bool pass = false;
};

/// Receiver gradient means from fixed-waveform data and from policy data.
/// Standard errors come from the spread of per-block gradient means (blocks
/// of kBlockSize samples, repetitions * Q / kBlockSize per side).
Prop1Report prop1_test(const NetParams& rx, const Transmitter& tx, const EnvModel& env, const PolicyConfig& pol,
                       const Prop1Options& opt);

struct Prop2Options {
  std::size_t Q = std::size_t{1} << 16;
  double min_cosine = 0.9;
  double max_control_cosine = 0.2;
  /// The control is the mean cosine over this many independent permutations.
  int shuffles = 64;
  /// Below this gradient norm (either estimate) the check is uninformative.
  double min_norm = 1e-8;
  std::uint64_t seed = 1;
  int workers = 1;
};

struct Prop2Report {
  double cosine = 0.0;
  double shuffled_cosine = 0.0;
  double rl_norm = 0.0;
  double known_norm = 0.0;
  bool uninformative = false;
  bool pass = false;
};

/// Cosine between the RL transmitter gradient and the known-likelihood
/// gradient, with a loss-permutation negative control. Gaussian clutter and
/// K <= 4 only.
Prop2Report prop2_test(const NetParams& rx, const Transmitter& tx, const EnvModel& env, const PolicyConfig& pol,
                       const Prop2Options& opt);

double cosine_similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace radar_e2e
