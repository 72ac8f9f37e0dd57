// radar_e2e: train / roc / report / verify driver.
//
// Exit codes: 0 success, 1 failed checks or unexpected error, 2 invalid
// configuration or missing inputs, 3 training divergence.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "radar_e2e/config.hpp"
#include "radar_e2e/evaluation.hpp"
#include "radar_e2e/training.hpp"
#include "radar_e2e/verify_suite.hpp"

namespace fs = std::filesystem;
using namespace radar_e2e;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 1;
  std::string checkpoint;
  bool baseline = false;
  std::string only;
};

constexpr std::uint64_t kRocTag = 0x40c;

ExperimentConfig load(const CommonOpts& o) {
  ExperimentConfig cfg = load_config_file(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.workers < 1) throw UsageError("--workers must be >= 1");
  cfg.workers = o.workers;
  return cfg;
}

fs::path output_dir(const CommonOpts& o, const ExperimentConfig& cfg) {
  fs::path dir;
  if (!o.out.empty()) {
    dir = o.out;
  } else if (!cfg.output_dir.empty()) {
    dir = cfg.output_dir;
  } else if (const char* env = std::getenv("RADAR_E2E_OUT"); env && *env) {
    dir = env;
  } else {
    dir = "out";
  }
  fs::create_directories(dir);
  return dir;
}

fs::path checkpoint_dir(const CommonOpts& o, const ExperimentConfig& cfg) {
  return o.checkpoint.empty() ? output_dir(o, cfg) : fs::path(o.checkpoint);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

Waveform read_waveform(const fs::path& dir) {
  const auto p = dir / "waveform.csv";
  std::ifstream in(p);
  if (!in) throw UsageError("missing " + p.string());
  try {
    return read_waveform_csv(in);
  } catch (const std::exception& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

NetParams read_net(const fs::path& p) {
  if (!fs::exists(p)) throw UsageError("missing " + p.string());
  try {
    return load_checkpoint_file(p.string());
  } catch (const std::exception& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

void save_models(const fs::path& dir, const Models& m, const std::string& suffix, CheckpointFormat fmt) {
  save_checkpoint_file((dir / ("rx" + suffix + ".ckpt")).string(), m.rx, fmt);
  save_checkpoint_file((dir / ("tx" + suffix + ".ckpt")).string(), m.tx.params, fmt);
}

int cmd_train(const CommonOpts& o) {
  const ExperimentConfig cfg = load(o);
  const fs::path dir = output_dir(o, cfg);
  {
    auto f = open_out(dir / "effective_config.ini");
    write_config(f, cfg);
  }
  const TrainConfig tc = cfg.train_config();
  Models init = init_models(cfg.init_waveform(), cfg.tx_hidden, cfg.rx_hidden, cfg.seed);
  TrainHistory partial;
  auto on_iter = [&](const IterationRecord& r, const Models& m) {
    partial.push_back(r);
    if (cfg.checkpoint_every > 0 && r.iter % cfg.checkpoint_every == 0) {
      save_models(dir, m, "_" + std::to_string(r.iter), cfg.checkpoint_format);
    }
  };
  try {
    const TrainResult res = train(tc, cfg.env(), std::move(init), on_iter);
    save_models(dir, res.models, "", cfg.checkpoint_format);
    {
      auto f = open_out(dir / "waveform.csv");
      write_waveform_csv(f, res.y);
    }
    {
      auto f = open_out(dir / "history.csv");
      write_history_csv(f, res.history, cfg.wall_time);
    }
    const double last = res.history.empty() ? 0.0 : res.history.back().loss;
    std::printf("trained %zu iterations (%s), final loss %.6f, PAR %.4f dB -> %s\n", res.history.size(),
                res.stop_reason.c_str(), last, to_db(par_value(res.y)), dir.string().c_str());
    return 0;
  } catch (const TrainingDiverged& e) {
    auto f = open_out(dir / "history.csv");
    write_history_csv(f, partial, cfg.wall_time);
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}

int cmd_roc(const CommonOpts& o) {
  const ExperimentConfig cfg = load(o);
  const fs::path ck = checkpoint_dir(o, cfg);
  const NetParams rx = read_net(ck / "rx.ckpt");
  const Waveform y = read_waveform(ck);
  if (y.size() != cfg.K) throw UsageError("waveform length differs from env.K");
  const fs::path dir = output_dir(o, cfg);
  const RadarChannel ch(cfg.test_env());
  const auto grid = log_pfa_grid(1.0 / static_cast<double>(cfg.eval_Q0), cfg.pfa_per_decade);
  auto run = [&](const Detector& det, const Waveform& wf, const std::string& name) {
    const auto c = estimate_roc_trials(det, wf, ch, cfg.eval_Q0, cfg.eval_Q1, grid, cfg.seed, kRocTag,
                                       cfg.eval_trials, cfg.workers);
    auto f = open_out(dir / name);
    write_roc_csv(f, c);
    std::printf("%-24s Pd at Pfa=1e-2: %.4f\n", name.c_str(), cfg.eval_Q0 >= 100 ? pd_at_pfa(c, 1e-2) : 0.0);
  };
  run(learned_detector(rx), y, "roc_learned.csv");
  if (o.baseline) {
    run(statistic_detector(square_law_statistic(y, cfg.test_env())), y, "roc_squarelaw.csv");
    const Waveform chirp = cfg.init_waveform().normalized();
    run(statistic_detector(square_law_statistic(chirp, cfg.test_env())), chirp, "roc_squarelaw_chirp.csv");
  }
  return 0;
}

int cmd_report(const CommonOpts& o) {
  const ExperimentConfig cfg = load(o);
  const Waveform y = read_waveform(checkpoint_dir(o, cfg));
  const fs::path dir = output_dir(o, cfg);
  const auto learned = waveform_report(y, cfg.report_bands, cfg.esd_grid);
  const auto chirp = waveform_report(cfg.init_waveform().normalized(), cfg.report_bands, cfg.esd_grid);
  {
    auto f = open_out(dir / "report.csv");
    write_report_csv(f, {{"learned", learned}, {"chirp", chirp}});
  }
  {
    auto f = open_out(dir / "esd.csv");
    write_esd_csv(f, learned.esd, true);
  }
  {
    auto f = open_out(dir / "modulus.csv");
    write_modulus_csv(f, y);
  }
  std::printf("learned: PAR %.4f dB, interfering energy %.4f dB\n", learned.par_db, learned.interf_db);
  return 0;
}

int cmd_verify(const CommonOpts& o) {
  const ExperimentConfig cfg = load(o);
  std::vector<std::string> names = verify_check_names();
  if (!o.only.empty()) {
    if (std::find(names.begin(), names.end(), o.only) == names.end()) {
      throw UsageError("unknown check '" + o.only + "'");
    }
    names = {o.only};
  }
  std::vector<std::string> failed;
  for (const auto& n : names) {
    const CheckResult r = run_verify_check(n, cfg);
    std::printf("%-16s %s  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass) failed.push_back(r.name);
  }
  if (failed.empty()) return 0;
  std::string list;
  for (const auto& f : failed) list += (list.empty() ? "" : ", ") + f;
  std::fprintf(stderr, "failed checks: %s\n", list.c_str());
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"End-to-end radar waveform and detector learning"};
  app.require_subcommand(1);
  CommonOpts o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config file")->required();
    sub->add_option("--seed", o.seed, "override the config seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--workers", o.workers, "worker threads");
  };
  auto* train = app.add_subcommand("train", "train transmitter and receiver");
  add_common(train);
  auto* roc = app.add_subcommand("roc", "Monte Carlo ROC of a trained checkpoint");
  add_common(roc);
  roc->add_option("--checkpoint", o.checkpoint, "checkpoint directory (default: output directory)");
  roc->add_flag("--baseline", o.baseline, "also write square-law baseline curves");
  auto* report = app.add_subcommand("report", "waveform PAR, interference, ESD and modulus");
  add_common(report);
  report->add_option("--checkpoint", o.checkpoint, "checkpoint directory (default: output directory)");
  auto* verify = app.add_subcommand("verify", "run the self-check suite");
  add_common(verify);
  verify->add_option("--only", o.only, "run a single named check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(o);
    if (roc->parsed()) return cmd_roc(o);
    if (report->parsed()) return cmd_report(o);
    if (verify->parsed()) return cmd_verify(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
