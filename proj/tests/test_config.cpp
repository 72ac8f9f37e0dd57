#include <doctest.h>

#include <sstream>
#include <string>

#include "radar_e2e/config.hpp"

using namespace radar_e2e;

namespace {

const char* kMinimal =
    "env.K = 8\n"
    "env.snr_db = 12.5\n"
    "env.rho = 0.7\n"
    "train.Q = 8192\n"
    "train.lr = 0.005\n"
    "train.max_iters = 100\n";

ExperimentConfig parse(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is, "test.ini");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("minimal config gets the reference defaults") {
  const ExperimentConfig c = parse(kMinimal);
  const EnvModel e = c.env();
  CHECK(e.K == 8);
  CHECK(e.sigma_alpha2 == doctest::Approx(17.7828).epsilon(1e-5));
  CHECK(e.sigma_n2 == 1.0);
  CHECK(e.sigma_gamma2 == doctest::Approx(0.0676083).epsilon(1e-6));
  CHECK(e.p_h1 == 0.5);
  CHECK(e.p_h0 == 0.5);
  CHECK(c.max_iters == 100);
  CHECK(c.tx_hidden == 24);
  CHECK(c.sigma_p2 == doctest::Approx(std::pow(10.0, -1.5)));
  const TrainConfig t = c.train_config();
  CHECK(t.Q == 8192);
  CHECK(t.lr == 0.005);
  CHECK(t.stop.max_iters == 100);
  CHECK(t.stop.window == 50);
  CHECK(t.algorithm == Algorithm::simultaneous);
}

TEST_CASE("decibel keys convert at the boundary") {
  const ExperimentConfig c = parse(std::string(kMinimal) + "env.noise_db = 3\nenv.clutter_db_per_cell = -20\n");
  const EnvModel e = c.env();
  CHECK(e.sigma_n2 == doctest::Approx(from_db(3)));
  CHECK(e.sigma_alpha2 == doctest::Approx(from_db(12.5) * from_db(3)));
  CHECK(e.sigma_gamma2 == doctest::Approx(0.01));
}

TEST_CASE("lists") {
  const ExperimentConfig c = parse(std::string(kMinimal) +
                                   "env.clutter_shapes = 0.25, 0.5:2, 1\n"
                                   "penalty.kind = spectrum\n"
                                   "penalty.lambda = 0.2\n"
                                   "penalty.bands = 0.3:0.35:2, 0.5:0.6\n"
                                   "eval.clutter_shapes = 0.25\n");
  REQUIRE(c.clutter_shapes.size() == 3);
  CHECK(c.clutter_shapes[1].beta == 0.5);
  CHECK(c.clutter_shapes[1].weight == 2.0);
  REQUIRE(c.penalty_bands.size() == 2);
  CHECK(c.penalty_bands[0].weight == 2.0);
  CHECK(c.penalty_bands[1].f_high == 0.6);
  CHECK(c.train_config().penalty.kind == PenaltyKind::spectrum);
  CHECK(c.test_env().clutter_shapes.size() == 1);
  CHECK(c.test_env().clutter_shapes[0].beta == 0.25);
  CHECK(c.env().clutter_shapes.size() == 3);
}

TEST_CASE("errors name the key and the line") {
  const std::string missing = error_of("env.snr_db = 12.5\nenv.rho = 0.7\ntrain.Q = 8\ntrain.lr = 0.1\ntrain.max_iters = 1\n");
  CHECK(missing.find("env.K") != std::string::npos);

  const std::string unknown = error_of(std::string(kMinimal) + "env.colour = red\n");
  CHECK(unknown.find("env.colour") != std::string::npos);
  CHECK(unknown.find("test.ini:7") != std::string::npos);

  CHECK(error_of(std::string(kMinimal) + "env.K = 4\n").find("duplicate") != std::string::npos);
  CHECK(error_of("env.K = 8\nenv.snr_db = 12.5\nenv.rho = 1\ntrain.Q = 8\ntrain.lr = 0.1\ntrain.max_iters = 1\n")
            .find("rho") != std::string::npos);
  CHECK_FALSE(error_of(std::string(kMinimal) + "train.lr = -1\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "train.algorithm = annealing\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "env.clutter_shapes = 3\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "policy.sigma_p2 = 1\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "no equals sign\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "env.p_h1 = x\n").empty());
  CHECK_FALSE(error_of(std::string(kMinimal) + "penalty.kind = spectrum\npenalty.bands = \n").empty());
}

TEST_CASE("comments and whitespace") {
  const ExperimentConfig c = parse(std::string("# header\n\n   ") + kMinimal + "seed = 42   # trailing\n");
  CHECK(c.seed == 42);
}

TEST_CASE("echoed config round-trips") {
  const ExperimentConfig c = parse(std::string(kMinimal) +
                                   "train.algorithm = alternating\n"
                                   "train.optimizer = sgd\n"
                                   "env.clutter_shapes = 0.25:1, 0.75:3\n"
                                   "penalty.kind = par\npenalty.lambda = 0.01\n"
                                   "output.checkpoint_format = text\n"
                                   "output.dir = results/run 1\n"
                                   "seed = 7\n");
  std::ostringstream a;
  write_config(a, c);
  const ExperimentConfig back = parse(a.str());
  std::ostringstream b;
  write_config(b, back);
  CHECK(a.str() == b.str());
  CHECK(back.algorithm == Algorithm::alternating);
  CHECK(back.optimizer == Optimizer::sgd);
  CHECK(back.sigma_p2 == c.sigma_p2);
  CHECK(back.snr_db == c.snr_db);
  CHECK(back.output_dir == "results/run 1");
  CHECK(back.checkpoint_format == CheckpointFormat::text);
  for (const auto& k : required_config_keys()) CHECK(a.str().find(k + " = ") != std::string::npos);
}

TEST_CASE("shipped reference config") {
  const ExperimentConfig c = load_config_file(RADAR_E2E_CONFIG_DIR "/reference.ini");
  CHECK(c.K == 8);
  CHECK(c.Q == 8192);
  CHECK(c.lr == 0.005);
  CHECK(c.rx_hidden == 24);
  CHECK(c.rho == 0.7);
  CHECK(to_db(c.env().total_clutter_power()) == doctest::Approx(0.0).epsilon(0.06));
  CHECK_THROWS_AS(load_config_file("/nonexistent/x.ini"), ConfigError);
}
