#include "radar_e2e/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "radar_e2e/csv_format.hpp"

namespace radar_e2e {

ConfigError::ConfigError(const std::string& source, int line, const std::string& key, const std::string& msg)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " +
                         (key.empty() ? std::string() : "key '" + key + "': ") + msg),
      line_(line),
      key_(key) {}

EnvModel ExperimentConfig::env() const {
  EnvModel e;
  e.K = K;
  e.sigma_n2 = from_db(noise_db);
  e.sigma_alpha2 = from_db(snr_db) * e.sigma_n2;
  e.rho = rho;
  e.sigma_gamma2 = from_db(clutter_db_per_cell);
  e.clutter_shapes = clutter_shapes;
  e.p_h1 = p_h1;
  e.p_h0 = 1.0 - p_h1;
  return e;
}

EnvModel ExperimentConfig::test_env() const {
  EnvModel e = env();
  if (!test_clutter_shapes.empty()) e.clutter_shapes = test_clutter_shapes;
  return e;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.algorithm = algorithm;
  t.Q = Q;
  t.lr = lr;
  t.optimizer = optimizer;
  t.policy = policy();
  t.penalty = {penalty_kind, penalty_lambda, penalty_bands};
  t.stop = {max_iters, patience_window, patience_min_decrease};
  t.seed = seed;
  t.workers = workers;
  t.report_bands = report_bands;
  return t;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view v) {
  const std::string s = trim(v);
  double x = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("expected a number, got '" + s + "'");
  }
  return x;
}

long long to_integer(std::string_view v) {
  const std::string s = trim(v);
  long long x = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || p != s.data() + s.size() || s.empty()) {
    throw std::invalid_argument("expected an integer, got '" + s + "'");
  }
  return x;
}

bool to_bool(std::string_view v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("expected true or false, got '" + s + "'");
}

void check(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<ClutterShape> to_shapes(std::string_view v) {
  std::vector<ClutterShape> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, ':');
    check(parts.size() <= 2, "clutter shape must be beta or beta:weight");
    ClutterShape s{to_double(parts[0]), parts.size() == 2 ? to_double(parts[1]) : 1.0};
    check(s.beta >= 0.25 && s.beta <= 2.0, "shape parameter must lie in [0.25, 2]");
    check(s.weight >= 0.0, "shape weight must be nonnegative");
    out.push_back(s);
  }
  return out;
}

std::vector<FrequencyBand> to_bands(std::string_view v) {
  std::vector<FrequencyBand> out;
  if (trim(v).empty()) return out;
  for (const auto& item : split(v, ',')) {
    const auto parts = split(item, ':');
    check(parts.size() == 2 || parts.size() == 3, "band must be low:high or low:high:weight");
    FrequencyBand b{to_double(parts[0]), to_double(parts[1]), parts.size() == 3 ? to_double(parts[2]) : 1.0};
    b.validate();
    out.push_back(b);
  }
  return out;
}

std::string num(double x) { return detail::fmt_full(x); }

std::string shapes_str(const std::vector<ClutterShape>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + num(v[i].beta) + ":" + num(v[i].weight);
  return s;
}

std::string bands_str(const std::vector<FrequencyBand>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    s += (i ? ", " : "") + num(v[i].f_low) + ":" + num(v[i].f_high) + ":" + num(v[i].weight);
  }
  return s;
}

struct Field {
  std::string key;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

int positive_int(std::string_view v, const char* what) {
  const auto x = to_integer(v);
  check(x >= 1 && x <= 1'000'000'000, std::string(what) + " must be a positive integer");
  return static_cast<int>(x);
}

int nonneg_int(std::string_view v, const char* what) {
  const auto x = to_integer(v);
  check(x >= 0 && x <= 1'000'000'000, std::string(what) + " must be a nonnegative integer");
  return static_cast<int>(x);
}

std::size_t positive_count(std::string_view v, const char* what) {
  const auto x = to_integer(v);
  check(x >= 1, std::string(what) + " must be >= 1");
  return static_cast<std::size_t>(x);
}

double finite(std::string_view v) {
  const double x = to_double(v);
  check(std::isfinite(x), "value must be finite");
  return x;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      {"seed", [](auto& c, auto v) {
         const auto x = to_integer(v);
         check(x >= 0, "seed must be nonnegative");
         c.seed = static_cast<std::uint64_t>(x);
       },
       [](const auto& c) { return std::to_string(c.seed); }},
      {"env.K", [](auto& c, auto v) { c.K = positive_int(v, "K"); }, [](const auto& c) { return std::to_string(c.K); }},
      {"env.snr_db", [](auto& c, auto v) { c.snr_db = finite(v); }, [](const auto& c) { return num(c.snr_db); }},
      {"env.noise_db", [](auto& c, auto v) { c.noise_db = finite(v); }, [](const auto& c) { return num(c.noise_db); }},
      {"env.rho",
       [](auto& c, auto v) {
         c.rho = to_double(v);
         check(c.rho >= 0.0 && c.rho < 1.0, "rho must lie in [0, 1)");
       },
       [](const auto& c) { return num(c.rho); }},
      {"env.clutter_db_per_cell", [](auto& c, auto v) { c.clutter_db_per_cell = to_double(v); },
       [](const auto& c) { return num(c.clutter_db_per_cell); }},
      {"env.clutter_shapes",
       [](auto& c, auto v) {
         c.clutter_shapes = to_shapes(v);
         check(!c.clutter_shapes.empty(), "at least one clutter shape is required");
       },
       [](const auto& c) { return shapes_str(c.clutter_shapes); }},
      {"env.p_h1",
       [](auto& c, auto v) {
         c.p_h1 = to_double(v);
         check(c.p_h1 >= 0.0 && c.p_h1 <= 1.0, "prior must lie in [0, 1]");
       },
       [](const auto& c) { return num(c.p_h1); }},
      {"tx.hidden", [](auto& c, auto v) { c.tx_hidden = positive_int(v, "hidden width"); },
       [](const auto& c) { return std::to_string(c.tx_hidden); }},
      {"tx.chirp_rate", [](auto& c, auto v) { c.chirp_rate = finite(v); }, [](const auto& c) { return num(c.chirp_rate); }},
      {"tx.sample_rate",
       [](auto& c, auto v) {
         c.sample_rate = to_double(v);
         check(c.sample_rate > 0.0 && std::isfinite(c.sample_rate), "sample rate must be positive");
       },
       [](const auto& c) { return num(c.sample_rate); }},
      {"rx.hidden", [](auto& c, auto v) { c.rx_hidden = positive_int(v, "hidden width"); },
       [](const auto& c) { return std::to_string(c.rx_hidden); }},
      {"policy.sigma_p2",
       [](auto& c, auto v) {
         c.sigma_p2 = to_double(v);
         check(c.sigma_p2 > 0.0 && c.sigma_p2 < 1.0, "policy variance must lie in (0, 1)");
       },
       [](const auto& c) { return num(c.sigma_p2); }},
      {"train.algorithm", [](auto& c, auto v) { c.algorithm = parse_algorithm(trim(v)); },
       [](const auto& c) { return std::string(to_string(c.algorithm)); }},
      {"train.Q", [](auto& c, auto v) { c.Q = positive_count(v, "Q"); }, [](const auto& c) { return std::to_string(c.Q); }},
      {"train.lr",
       [](auto& c, auto v) {
         c.lr = to_double(v);
         check(c.lr > 0.0 && std::isfinite(c.lr), "learning rate must be positive");
       },
       [](const auto& c) { return num(c.lr); }},
      {"train.optimizer", [](auto& c, auto v) { c.optimizer = parse_optimizer(trim(v)); },
       [](const auto& c) { return std::string(to_string(c.optimizer)); }},
      {"train.max_iters", [](auto& c, auto v) { c.max_iters = nonneg_int(v, "max_iters"); },
       [](const auto& c) { return std::to_string(c.max_iters); }},
      {"train.patience_window", [](auto& c, auto v) { c.patience_window = nonneg_int(v, "patience window"); },
       [](const auto& c) { return std::to_string(c.patience_window); }},
      {"train.patience_min_decrease", [](auto& c, auto v) { c.patience_min_decrease = finite(v); },
       [](const auto& c) { return num(c.patience_min_decrease); }},
      {"train.checkpoint_every", [](auto& c, auto v) { c.checkpoint_every = nonneg_int(v, "checkpoint interval"); },
       [](const auto& c) { return std::to_string(c.checkpoint_every); }},
      {"penalty.kind", [](auto& c, auto v) { c.penalty_kind = parse_penalty_kind(trim(v)); },
       [](const auto& c) { return std::string(to_string(c.penalty_kind)); }},
      {"penalty.lambda",
       [](auto& c, auto v) {
         c.penalty_lambda = to_double(v);
         check(c.penalty_lambda >= 0.0 && std::isfinite(c.penalty_lambda), "lambda must be nonnegative");
       },
       [](const auto& c) { return num(c.penalty_lambda); }},
      {"penalty.bands", [](auto& c, auto v) { c.penalty_bands = to_bands(v); },
       [](const auto& c) { return bands_str(c.penalty_bands); }},
      {"report.bands", [](auto& c, auto v) { c.report_bands = to_bands(v); },
       [](const auto& c) { return bands_str(c.report_bands); }},
      {"report.esd_grid", [](auto& c, auto v) { c.esd_grid = positive_int(v, "ESD grid size"); },
       [](const auto& c) { return std::to_string(c.esd_grid); }},
      {"eval.Q0", [](auto& c, auto v) { c.eval_Q0 = positive_count(v, "Q0"); },
       [](const auto& c) { return std::to_string(c.eval_Q0); }},
      {"eval.Q1", [](auto& c, auto v) { c.eval_Q1 = positive_count(v, "Q1"); },
       [](const auto& c) { return std::to_string(c.eval_Q1); }},
      {"eval.trials", [](auto& c, auto v) { c.eval_trials = positive_int(v, "trials"); },
       [](const auto& c) { return std::to_string(c.eval_trials); }},
      {"eval.pfa_per_decade", [](auto& c, auto v) { c.pfa_per_decade = positive_int(v, "grid density"); },
       [](const auto& c) { return std::to_string(c.pfa_per_decade); }},
      {"eval.clutter_shapes", [](auto& c, auto v) { c.test_clutter_shapes = to_shapes(v); },
       [](const auto& c) { return shapes_str(c.test_clutter_shapes); }},
      {"verify.Q", [](auto& c, auto v) { c.verify_Q = positive_count(v, "verify Q"); },
       [](const auto& c) { return std::to_string(c.verify_Q); }},
      {"verify.repetitions", [](auto& c, auto v) { c.verify_reps = positive_int(v, "repetitions"); },
       [](const auto& c) { return std::to_string(c.verify_reps); }},
      {"output.dir", [](auto& c, auto v) { c.output_dir = trim(v); }, [](const auto& c) { return c.output_dir; }},
      {"output.wall_time", [](auto& c, auto v) { c.wall_time = to_bool(v); },
       [](const auto& c) { return std::string(c.wall_time ? "true" : "false"); }},
      {"output.checkpoint_format",
       [](auto& c, auto v) {
         const auto s = trim(v);
         if (s == "binary") {
           c.checkpoint_format = CheckpointFormat::binary;
         } else if (s == "text") {
           c.checkpoint_format = CheckpointFormat::text;
         } else {
           throw std::invalid_argument("checkpoint format must be binary or text");
         }
       },
       [](const auto& c) { return std::string(c.checkpoint_format == CheckpointFormat::binary ? "binary" : "text"); }},
  };
  return f;
}

}  // namespace

const std::vector<std::string>& required_config_keys() {
  static const std::vector<std::string> keys = {"env.K", "env.snr_db", "env.rho", "train.Q", "train.lr",
                                                "train.max_iters"};
  return keys;
}

ExperimentConfig parse_config(std::istream& is, const std::string& source) {
  ExperimentConfig cfg;
  std::map<std::string, int> seen;
  std::string raw;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? std::string_view(raw) : std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(source, lineno, "", "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto& fs = fields();
    const auto it = std::find_if(fs.begin(), fs.end(), [&](const Field& f) { return f.key == key; });
    if (it == fs.end()) throw ConfigError(source, lineno, key, "unknown key");
    if (seen.contains(key)) {
      throw ConfigError(source, lineno, key, "duplicate key (first set on line " + std::to_string(seen[key]) + ")");
    }
    seen[key] = lineno;
    try {
      it->set(cfg, value);
    } catch (const std::exception& e) {
      throw ConfigError(source, lineno, key, e.what());
    }
  }
  for (const auto& k : required_config_keys()) {
    if (!seen.contains(k)) throw ConfigError(source, 0, k, "missing required key");
  }
  auto line_of = [&](const std::string& k) { return seen.contains(k) ? seen[k] : 0; };
  try {
    cfg.env().validate();
  } catch (const std::exception& e) {
    throw ConfigError(source, line_of("env.clutter_shapes"), "", e.what());
  }
  if (!cfg.test_clutter_shapes.empty()) {
    try {
      cfg.test_env().validate();
    } catch (const std::exception& e) {
      throw ConfigError(source, line_of("eval.clutter_shapes"), "eval.clutter_shapes", e.what());
    }
  }
  if (cfg.penalty_kind == PenaltyKind::spectrum && cfg.penalty_bands.empty()) {
    throw ConfigError(source, line_of("penalty.bands"), "penalty.bands", "spectrum penalty needs at least one band");
  }
  try {
    cfg.train_config().validate();
  } catch (const std::exception& e) {
    throw ConfigError(source, 0, "", e.what());
  }
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "", "cannot open config file");
  return parse_config(in, path);
}

void write_config(std::ostream& os, const ExperimentConfig& cfg) {
  for (const auto& f : fields()) os << f.key << " = " << f.get(cfg) << '\n';
}

}  // namespace radar_e2e
