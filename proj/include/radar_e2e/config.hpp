#pragma once

// Flat `key = value` experiment configuration. Keys are dotted (env.rho,
// train.lr); `#` starts a comment. Unknown keys, duplicates and bad values are
// rejected with the line they came from. Decibel keys are converted to linear
// scale here and nowhere else.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "radar_e2e/constraints.hpp"
#include "radar_e2e/environment.hpp"
#include "radar_e2e/training.hpp"

namespace radar_e2e {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& key, const std::string& msg);
  int line() const noexcept { return line_; }
  const std::string& key() const noexcept { return key_; }

 private:
  int line_;
  std::string key_;
};

struct ExperimentConfig {
  // env.*
  int K = 8;
  double snr_db = 12.5;
  double noise_db = 0.0;
  double rho = 0.7;
  double clutter_db_per_cell = -11.7;
  std::vector<ClutterShape> clutter_shapes{{2.0, 1.0}};
  double p_h1 = 0.5;
  // tx.* / rx.*
  int tx_hidden = 24;
  int rx_hidden = 24;
  double chirp_rate = 2.5e9;
  double sample_rate = 2e5;
  // policy.*
  double sigma_p2 = 0.031622776601683794;
  // train.*
  Algorithm algorithm = Algorithm::simultaneous;
  std::size_t Q = 8192;
  double lr = 0.005;
  Optimizer optimizer = Optimizer::adam;
  int max_iters = 1000;
  int patience_window = 50;
  double patience_min_decrease = 1e-4;
  int checkpoint_every = 0;  // 0 writes only the final checkpoint
  // penalty.*
  PenaltyKind penalty_kind = PenaltyKind::none;
  double penalty_lambda = 0.0;
  std::vector<FrequencyBand> penalty_bands{{0.3, 0.35, 1.0}, {0.5, 0.6, 1.0}};
  // report.*
  std::vector<FrequencyBand> report_bands{{0.3, 0.35, 1.0}, {0.5, 0.6, 1.0}};
  int esd_grid = 1024;
  // eval.*
  std::size_t eval_Q0 = 200000;
  std::size_t eval_Q1 = 50000;
  int eval_trials = 5;
  int pfa_per_decade = 10;
  std::vector<ClutterShape> test_clutter_shapes;  // empty: same as training
  // verify.*
  std::size_t verify_Q = 16384;
  int verify_reps = 8;
  // output.*
  std::string output_dir;
  bool wall_time = false;
  CheckpointFormat checkpoint_format = CheckpointFormat::binary;

  std::uint64_t seed = 1;
  int workers = 1;

  EnvModel env() const;
  EnvModel test_env() const;
  TrainConfig train_config() const;
  PolicyConfig policy() const { return {sigma_p2}; }
  Waveform init_waveform() const { return chirp_init(K, chirp_rate, sample_rate); }
};

/// Keys that must appear in every config file.
const std::vector<std::string>& required_config_keys();

ExperimentConfig parse_config(std::istream& is, const std::string& source = "<config>");
ExperimentConfig load_config_file(const std::string& path);

/// Every key with its effective value; parse_config reads it back unchanged.
void write_config(std::ostream& os, const ExperimentConfig& cfg);

}  // namespace radar_e2e
