#pragma once

// Named self-checks run by `radar_e2e verify`: gradient identities against
// finite differences, sampler moments, and the two gradient-agreement tests.

#include <string>
#include <vector>

#include "radar_e2e/config.hpp"
#include "radar_e2e/training.hpp"

namespace radar_e2e {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

const std::vector<std::string>& verify_check_names();

/// Throws std::invalid_argument for an unknown name.
CheckResult run_verify_check(const std::string& name, const ExperimentConfig& cfg);

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-8);

/// Models used by the agreement checks: seeded initialization followed by
/// `rx_iters` receiver-only iterations so that the detector output depends on z.
Models reference_models(const EnvModel& env, const Waveform& init, int hidden, std::uint64_t seed,
                        int rx_iters = 300, std::size_t Q = 2048);

/// Same setup with K = 2 (for the known-likelihood comparison).
EnvModel small_gaussian_env(const EnvModel& env, int K = 2);

}  // namespace radar_e2e
