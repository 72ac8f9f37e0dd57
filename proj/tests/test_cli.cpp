#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::absolute("cli_work");

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path o = kWork / "stdout.txt", e = kWork / "stderr.txt";
  const std::string cmd = std::string(RADAR_E2E_BIN) + " " + args + " > " + o.string() + " 2> " + e.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(o), slurp(e)};
}

// Small but complete config: reference setup with a short run.
fs::path write_config(const std::string& name, const std::string& extra = "", const std::string& drop = "") {
  std::ifstream in(RADAR_E2E_CONFIG_DIR "/reference.ini");
  std::ostringstream body;
  std::string line;
  while (std::getline(in, line)) {
    if (!drop.empty() && line.rfind(drop + " ", 0) == 0) continue;
    if (line.rfind("train.Q ", 0) == 0) line = "train.Q = 512";
    if (line.rfind("train.max_iters ", 0) == 0) line = "train.max_iters = 3";
    body << line << '\n';
  }
  body << extra;
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << body.str();
  return p;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("train is reproducible byte for byte") {
  const auto cfg = write_config("repro.ini");
  const Run a = run("train --config " + cfg.string() + " --out " + (kWork / "repro_a").string());
  const Run b = run("train --config " + cfg.string() + " --seed 1 --out " + (kWork / "repro_b").string());
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  for (const char* f : {"history.csv", "waveform.csv", "rx.ckpt", "tx.ckpt", "effective_config.ini"}) {
    CAPTURE(f);
    CHECK(fs::exists(kWork / "repro_a" / f));
    CHECK(slurp(kWork / "repro_a" / f) == slurp(kWork / "repro_b" / f));
  }
  const auto hist = read_csv(kWork / "repro_a" / "history.csv");
  REQUIRE(hist.size() == 4);
  CHECK(hist[0] == std::vector<std::string>{"iter", "loss", "penalty", "par_db", "interf_db", "seconds"});

  const Run c = run("train --config " + cfg.string() + " --workers 3 --out " + (kWork / "repro_c").string());
  REQUIRE(c.code == 0);
  CHECK(slurp(kWork / "repro_a" / "history.csv") == slurp(kWork / "repro_c" / "history.csv"));
  CHECK(slurp(kWork / "repro_a" / "rx.ckpt") == slurp(kWork / "repro_c" / "rx.ckpt"));

  const Run d = run("train --config " + cfg.string() + " --seed 2 --out " + (kWork / "repro_d").string());
  REQUIRE(d.code == 0);
  CHECK(slurp(kWork / "repro_a" / "history.csv") != slurp(kWork / "repro_d" / "history.csv"));
}

TEST_CASE("effective config reloads") {
  const auto cfg = write_config("echo.ini");
  REQUIRE(run("train --config " + cfg.string() + " --out " + (kWork / "echo").string()).code == 0);
  const fs::path echoed = kWork / "echo" / "effective_config.ini";
  const Run again = run("train --config " + echoed.string() + " --out " + (kWork / "echo2").string());
  CHECK(again.code == 0);
  CHECK(slurp(kWork / "echo" / "history.csv") == slurp(kWork / "echo2" / "history.csv"));
}

TEST_CASE("zero iterations writes the initial checkpoint") {
  const auto cfg = write_config("zero.ini", "", "train.max_iters");
  std::ofstream(cfg, std::ios::app) << "train.max_iters = 0\n";
  const Run r = run("train --config " + cfg.string() + " --out " + (kWork / "zero").string());
  CHECK(r.code == 0);
  CHECK(fs::exists(kWork / "zero" / "rx.ckpt"));
  CHECK(fs::exists(kWork / "zero" / "tx.ckpt"));
  CHECK(read_csv(kWork / "zero" / "history.csv").size() == 1);
}

TEST_CASE("periodic checkpoints") {
  const auto cfg = write_config("periodic.ini", "", "train.checkpoint_every");
  std::ofstream(cfg, std::ios::app) << "train.checkpoint_every = 2\n";
  REQUIRE(run("train --config " + cfg.string() + " --out " + (kWork / "periodic").string()).code == 0);
  CHECK(fs::exists(kWork / "periodic" / "rx_2.ckpt"));
  CHECK(fs::exists(kWork / "periodic" / "tx_2.ckpt"));
  CHECK_FALSE(fs::exists(kWork / "periodic" / "rx_3.ckpt"));
}

TEST_CASE("invalid configs exit 2") {
  const auto missing = write_config("missing.ini", "", "env.K");
  const Run r = run("train --config " + missing.string() + " --out " + (kWork / "missing").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("env.K") != std::string::npos);

  const auto rho = write_config("rho.ini", "", "env.rho");
  std::ofstream(rho, std::ios::app) << "env.rho = 1\n";
  CHECK(run("verify --config " + rho.string()).code == 2);
  CHECK(run("train --config " + rho.string() + " --out " + (kWork / "rho").string()).code == 2);

  CHECK(run("train --config " + (kWork / "no_such.ini").string()).code == 2);
  CHECK(run("train").code == 2);
  CHECK(run("frobnicate --config x").code == 2);
  CHECK(run("roc --config " + write_config("nockpt.ini").string() + " --checkpoint " + (kWork / "empty").string())
            .code == 2);
}

TEST_CASE("divergence exits 3 and keeps the history") {
  const auto cfg = write_config("diverge.ini", "", "train.lr");
  std::ofstream(cfg, std::ios::app) << "train.lr = 1e300\n";
  std::string text = slurp(cfg);
  text.replace(text.find("train.optimizer = adam"), 22, "train.optimizer = sgd");
  std::ofstream(cfg) << text;
  const Run r = run("train --config " + cfg.string() + " --out " + (kWork / "diverge").string());
  CHECK(r.code == 3);
  CHECK(fs::exists(kWork / "diverge" / "history.csv"));
}

TEST_CASE("verify filter") {
  const auto cfg = write_config("verify.ini");
  const Run r = run("verify --config " + cfg.string() + " --only par_grad");
  CHECK(r.code == 0);
  CHECK(r.out.find("par_grad") != std::string::npos);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("spectral_grad") == std::string::npos);
  CHECK(run("verify --config " + cfg.string() + " --only nonsense").code == 2);
}

TEST_CASE("roc smoke run") {
  const auto cfg = write_config("roc.ini", "", "eval.Q0");
  std::string text = slurp(cfg);
  text.replace(text.find("eval.Q1 = 50000"), 15, "eval.Q1 = 100");
  text += "eval.Q0 = 100\n";
  std::ofstream(cfg) << text;
  const fs::path dir = kWork / "roc";
  REQUIRE(run("train --config " + cfg.string() + " --out " + dir.string()).code == 0);

  const auto t0 = std::chrono::steady_clock::now();
  const Run r = run("roc --config " + cfg.string() + " --out " + dir.string() + " --baseline");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.code == 0);
  CHECK(secs < 5.0);

  const auto learned = read_csv(dir / "roc_learned.csv");
  const auto base = read_csv(dir / "roc_squarelaw.csv");
  const auto chirp = read_csv(dir / "roc_squarelaw_chirp.csv");
  REQUIRE(learned.size() > 2);
  CHECK(learned[0] == std::vector<std::string>{"threshold", "pfa", "pd"});
  REQUIRE(learned.size() == base.size());
  REQUIRE(learned.size() == chirp.size());
  for (std::size_t i = 1; i < learned.size(); ++i) {
    CHECK(learned[i][1] == base[i][1]);
    CHECK(learned[i][1] == chirp[i][1]);
    if (i > 1) CHECK(std::stod(learned[i][1]) < std::stod(learned[i - 1][1]));
    if (i > 1) CHECK(std::stod(learned[i][2]) <= std::stod(learned[i - 1][2]));
  }

  const Run again = run("roc --config " + cfg.string() + " --out " + (kWork / "roc2").string() + " --checkpoint " +
                        dir.string() + " --workers 2");
  CHECK(again.code == 0);
  CHECK(slurp(dir / "roc_learned.csv") == slurp(kWork / "roc2" / "roc_learned.csv"));
}

TEST_CASE("report on a chirp checkpoint") {
  const auto cfg = write_config("report.ini", "", "train.algorithm");
  std::ofstream(cfg, std::ios::app) << "train.algorithm = receiver_only\n";
  const fs::path dir = kWork / "report";
  REQUIRE(run("train --config " + cfg.string() + " --out " + dir.string()).code == 0);
  const Run r = run("report --config " + cfg.string() + " --out " + dir.string());
  REQUIRE(r.code == 0);
  const auto rep = read_csv(dir / "report.csv");
  REQUIRE(rep.size() == 3);
  CHECK(rep[0] == std::vector<std::string>{"name", "par_db", "interf_db"});
  CHECK(rep[1][0] == "learned");
  CHECK(rep[1][1] == "0.0000");
  CHECK(rep[1][2] == rep[2][2]);
  CHECK(read_csv(dir / "esd.csv").size() == 1024 + 1);
  const auto mod = read_csv(dir / "modulus.csv");
  REQUIRE(mod.size() == 9);
  double energy = 0.0;
  for (std::size_t i = 1; i < mod.size(); ++i) energy += std::pow(std::stod(mod[i][1]), 2);
  CHECK(std::abs(energy - 1.0) < 1e-12);
}

TEST_CASE("output directory from the environment") {
  const auto cfg = write_config("envout.ini");
  const fs::path dir = kWork / "from_env";
  fs::remove_all(dir);
  setenv("RADAR_E2E_OUT", dir.c_str(), 1);
  CHECK(run("train --config " + cfg.string()).code == 0);
  unsetenv("RADAR_E2E_OUT");
  CHECK(fs::exists(dir / "history.csv"));
}
