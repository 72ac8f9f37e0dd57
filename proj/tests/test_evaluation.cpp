#include <doctest.h>

#include <cmath>
#include <sstream>

#include "radar_e2e/evaluation.hpp"
#include "radar_e2e/training.hpp"
#include "radar_e2e/verify_suite.hpp"

using namespace radar_e2e;

namespace {

EnvModel scalar_env(double snr) {
  EnvModel e;
  e.K = 1;
  e.sigma_alpha2 = snr;
  e.sigma_n2 = 1.0;
  e.rho = 0.0;
  e.sigma_gamma2 = 0.0;
  return e;
}

// Half-width of a binomial confidence interval at z standard errors.
double binom_halfwidth(double p, double n, double z) { return z * std::sqrt(std::max(p * (1 - p), 1e-12) / n); }

}  // namespace

TEST_CASE("ROC from statistics") {
  SUBCASE("constant detector") {
    const RocCurve c = roc_from_statistics(std::vector<double>(10, 0.5), std::vector<double>(7, 0.5), {0.6, 0.4});
    REQUIRE(c.points.size() == 2);
    CHECK(c.points[0].threshold == 0.4);
    CHECK(c.points[0].pfa == 1.0);
    CHECK(c.points[0].pd == 1.0);
    CHECK(c.points[1].pfa == 0.0);
    CHECK(c.points[1].pd == 0.0);
  }

  SUBCASE("pooled sweep") {
    const RocCurve c = roc_from_statistics({1, 2, 3, 4}, {3, 5});
    REQUIRE(c.points.size() == 6);
    CHECK(std::isinf(c.points[0].threshold));
    CHECK(c.points[0].pfa == 1.0);
    // threshold 3: H0 {4} above, H1 {5} above
    CHECK(c.points[3].threshold == 3.0);
    CHECK(c.points[3].pfa == 0.25);
    CHECK(c.points[3].pd == 0.5);
    CHECK(c.points.back().pfa == 0.0);
    CHECK(c.points.back().pd == 0.0);
    for (std::size_t i = 1; i < c.points.size(); ++i) {
      CHECK(c.points[i].pfa <= c.points[i - 1].pfa);
      CHECK(c.points[i].pd <= c.points[i - 1].pd);
    }
  }

  SUBCASE("interpolation") {
    const RocCurve c = roc_from_statistics({1, 2, 3, 4}, {3, 5});
    CHECK(pd_at_pfa(c, 0.25) == 0.5);
    CHECK(pd_at_pfa(c, 0.125) == doctest::Approx(0.5));
    CHECK(pd_at_pfa(c, 0.375) == doctest::Approx(0.75));
    CHECK(pd_at_pfa(c, 1.0) == 1.0);
  }

  CHECK_THROWS(roc_from_statistics({}, {1.0}));
}

TEST_CASE("chance detector") {
  const EnvModel env;
  const RadarChannel ch(env);
  const Waveform y = chirp_init(8, 2.5e9, 2e5);
  // statistic drawn independently of z and the label
  Rng side = substream(3, {1});
  auto det = [&side](std::span<const Waveform> zs) {
    std::vector<double> out;
    for (std::size_t i = 0; i < zs.size(); ++i) out.push_back(uniform_open(side));
    return out;
  };
  const std::size_t Q = 10000;
  const RocCurve c = estimate_roc(det, y, ch, Q, Q, {3, 2, 0}, {0.1, 0.3, 0.5, 0.7, 0.9});
  for (const auto& p : c.points) {
    CHECK(std::abs(p.pd - p.pfa) <= 3.0 * std::sqrt(2.0 * p.pfa * (1 - p.pfa) / Q));
  }
}

TEST_CASE("scalar Rayleigh target in white noise") {
  const double snr = 4.0;
  const EnvModel env = scalar_env(snr);
  const RadarChannel ch(env);
  const Waveform y = Waveform::Constant(1, 1.0);
  const std::size_t Q = 20000;
  // |z|^2 is exponential with mean 1 under H0 and 1 + snr under H1.
  auto energy = statistic_detector([](const Waveform& z) { return z.squaredNorm(); });
  std::vector<double> ts;
  for (double pfa : {0.3, 0.1, 0.03, 0.01}) ts.push_back(-std::log(pfa));
  const RocCurve c = estimate_roc(energy, y, ch, Q, Q, {5, 1, 0}, ts);
  for (const auto& p : c.points) {
    const double pfa = std::exp(-p.threshold);
    const double pd = std::pow(pfa, 1.0 / (1.0 + snr));
    CHECK(std::abs(p.pfa - pfa) <= binom_halfwidth(pfa, Q, 3.29));
    CHECK(std::abs(p.pd - pd) <= binom_halfwidth(pd, Q, 3.29));
  }
}

TEST_CASE("square-law statistic") {
  SUBCASE("aligned vector in white noise") {
    EnvModel e = scalar_env(1.0);
    e.K = 4;
    Waveform y(4);
    y << 0.5, cdouble(0, 0.5), -0.5, 0.5;
    CHECK(square_law_statistic(y, e)(y) == doctest::Approx(1.0));
  }

  SUBCASE("monotone transforms leave the ROC unchanged") {
    EnvModel e = scalar_env(from_db(12.5));
    e.K = 8;
    e.sigma_n2 = 2.0;
    const RadarChannel ch(e);
    const Waveform y = chirp_init(8, 2.5e9, 2e5);
    const auto T = square_law_statistic(y, e);
    auto raw = statistic_detector([&y](const Waveform& z) { return std::norm(y.dot(z)); });
    auto logT = statistic_detector([&T](const Waveform& z) { return std::log(T(z)); });
    const StreamId id{7, 1, 0};
    const RocCurve a = estimate_roc(statistic_detector(T), y, ch, 3000, 2000, id);
    const RocCurve b = estimate_roc(raw, y, ch, 3000, 2000, id);
    const RocCurve c = estimate_roc(logT, y, ch, 3000, 2000, id);
    REQUIRE(a.points.size() == b.points.size());
    REQUIRE(a.points.size() == c.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i].pfa == b.points[i].pfa);
      CHECK(a.points[i].pd == b.points[i].pd);
      CHECK(a.points[i].pfa == c.points[i].pfa);
      CHECK(a.points[i].pd == c.points[i].pd);
    }
  }

  SUBCASE("dominates the chance line at the reference setup") {
    const EnvModel env;
    const RadarChannel ch(env);
    const Waveform y = chirp_init(8, 2.5e9, 2e5);
    const std::size_t Q = 10000;
    const RocCurve full = estimate_roc(statistic_detector(square_law_statistic(y, env)), y, ch, Q, Q, {9, 1, 0});
    for (double pfa : {0.5, 0.2, 0.1, 0.05, 0.01}) {
      const RocPoint p = interpolate_at_pfa(full, pfa);
      CHECK(p.pd - p.pfa > 3.0 * std::sqrt(0.25 / Q));
    }
  }

  EnvModel silent = scalar_env(1.0);
  silent.sigma_n2 = 0.0;
  CHECK_THROWS_AS(square_law_statistic(Waveform::Constant(1, 1.0), silent), NotPositiveDefinite);
}

TEST_CASE("Pfa grid and trial averaging") {
  const auto g = log_pfa_grid(1e-3, 10);
  CHECK(g.size() == 31);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == doctest::Approx(1e-3));
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
  CHECK(log_pfa_grid(1.0 / 300, 2).back() == doctest::Approx(1.0 / 300));
  CHECK_THROWS(log_pfa_grid(0.0));

  const EnvModel env;
  const RadarChannel ch(env);
  const Waveform y = chirp_init(8, 2.5e9, 2e5);
  const Detector det = statistic_detector(square_law_statistic(y, env));
  const auto grid = log_pfa_grid(1e-2, 5);
  const RocCurve a = estimate_roc_trials(det, y, ch, 1000, 500, grid, 4, 0x40c, 3, 1);
  const RocCurve b = estimate_roc_trials(det, y, ch, 1000, 500, grid, 4, 0x40c, 3, 4);
  REQUIRE(a.points.size() == grid.size());
  double mean_pd = 0.0;
  for (int t = 0; t < 3; ++t)
    mean_pd += pd_at_pfa(estimate_roc(det, y, ch, 1000, 500, {4, 0x40c, static_cast<std::uint64_t>(t)}), 0.1) / 3;
  CHECK(pd_at_pfa(a, 0.1) == doctest::Approx(mean_pd).epsilon(1e-12));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a.points[i].pfa == grid[i]);
    CHECK(a.points[i].pd == b.points[i].pd);
    if (i) CHECK(a.points[i].pd <= a.points[i - 1].pd);
  }
  CHECK(a.trials == 3);

  std::ostringstream os;
  write_roc_csv(os, a);
  CHECK(os.str().rfind("threshold,pfa,pd\n", 0) == 0);
}

TEST_CASE("learned detector statistics") {
  Rng rng = substream(13, {0});
  const NetParams rx = net_init(receiver_spec(8, 24), rng);
  const Detector det = learned_detector(rx);
  std::vector<Waveform> zs(5, Waveform::Zero(8));
  for (auto& z : zs)
    for (auto& v : z) v = complex_normal(rng);
  const auto s = det(zs);
  for (std::size_t i = 0; i < zs.size(); ++i) CHECK(s[i] == doctest::Approx(rx_forward(rx, zs[i]).p).epsilon(1e-14));
}

TEST_CASE("waveform report") {
  const Waveform chirp = chirp_init(8, 2.5e9, 2e5);
  const auto r = waveform_report(chirp, {{0.3, 0.35, 5.0}});
  CHECK(std::abs(r.par_db) < 1e-12);
  CHECK(r.esd.size() == 1024);
  CHECK(r.interf_db == doctest::Approx(to_db(quad_form(chirp, build_band_matrix({0.3, 0.35, 1.0}, 8)))));

  Waveform e1 = Waveform::Zero(8);
  e1[0] = 1.0;
  CHECK(waveform_report(e1, {{0.0, 0.5, 1.0}}).interf_db == doctest::Approx(-3.0103).epsilon(1e-4));
  CHECK(std::isinf(waveform_report(e1, {}).interf_db));

  std::ostringstream rep, mod;
  write_report_csv(rep, {{"learned", waveform_report(e1, {{0.0, 0.5, 1.0}})}, {"chirp", r}});
  CHECK(rep.str().rfind("name,par_db,interf_db\nlearned,9.0309,-3.0103\nchirp,0.0000,", 0) == 0);
  write_modulus_csv(mod, chirp);
  std::istringstream in(mod.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "k,modulus");
  double energy = 0.0;
  int rows = 0;
  while (std::getline(in, line)) {
    energy += std::pow(std::stod(line.substr(line.find(',') + 1)), 2);
    ++rows;
  }
  CHECK(rows == 8);
  CHECK(energy == doctest::Approx(1.0));
}

TEST_CASE("cosine similarity") {
  Eigen::VectorXd a(3), b(3);
  a << 1, 0, 0;
  b << 1, 1, 0;
  CHECK(cosine_similarity(a, b) == doctest::Approx(std::sqrt(0.5)));
  CHECK(cosine_similarity(a, -a) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(a, Eigen::VectorXd::Zero(3)) == 0.0);
}

TEST_CASE("receiver gradient agreement check") {
  const EnvModel env;
  const Models m = init_models(chirp_init(8, 2.5e9, 2e5), 24, 24, 1);

  SUBCASE("vanishing exploration") {
    Prop1Options o;
    o.Q = 2048;
    o.repetitions = 2;
    o.paired = true;
    const auto r = prop1_test(m.rx, m.tx, env, {1e-12}, o);
    CHECK(r.max_abs_mean_diff <= 1e-6);
    CHECK(r.num_params == m.rx.size());
  }

  SUBCASE("deterministic given the seed") {
    Prop1Options o;
    o.Q = 1024;
    o.repetitions = 2;
    o.seed = 3;
    const auto a = prop1_test(m.rx, m.tx, env, PolicyConfig{}, o);
    o.workers = 3;
    const auto b = prop1_test(m.rx, m.tx, env, PolicyConfig{}, o);
    CHECK(a.max_z == b.max_z);
    CHECK(a.worst_index == b.worst_index);
    CHECK(a.max_abs_mean_diff == b.max_abs_mean_diff);
  }
}

TEST_CASE("transmitter gradient agreement check") {
  const EnvModel env = small_gaussian_env(EnvModel{});
  const Waveform init = chirp_init(2, 2.5e9, 2e5);

  SUBCASE("constant receiver is uninformative") {
    Models m = init_models(init, 24, 24, 1);
    m.rx = NetParams(receiver_spec(2, 24));
    Prop2Options o;
    o.Q = 2048;
    o.shuffles = 4;
    const auto r = prop2_test(m.rx, m.tx, env, PolicyConfig{}, o);
    CHECK(r.uninformative);
    CHECK_FALSE(r.pass);
  }

  SUBCASE("trained receiver agrees, shuffled control does not") {
    const Models m = reference_models(env, init, 24, 2);
    Prop2Options o;
    o.Q = 1 << 15;
    o.seed = 2;
    const auto r = prop2_test(m.rx, m.tx, env, PolicyConfig{}, o);
    MESSAGE("cosine " << r.cosine << ", control " << r.shuffled_cosine);
    CHECK_FALSE(r.uninformative);
    CHECK(r.cosine >= 0.9);
    CHECK(std::abs(r.shuffled_cosine) <= 0.2);
    CHECK(r.pass);
    o.workers = 2;
    const auto again = prop2_test(m.rx, m.tx, env, PolicyConfig{}, o);
    CHECK(again.cosine == r.cosine);
    CHECK(again.shuffled_cosine == r.shuffled_cosine);
  }

  CHECK_THROWS(prop2_test(NetParams(receiver_spec(8, 4)), init_models(chirp_init(8, 2.5e9, 2e5), 4, 4, 1).tx,
                          EnvModel{}, PolicyConfig{}, Prop2Options{}));
}
