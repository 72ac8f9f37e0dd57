#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include "radar_e2e/environment.hpp"

using namespace radar_e2e;

namespace {

// Relative standard deviation of |gamma|^2 for Weibull shape b.
double power_rel_sd(double b) {
  return std::sqrt(std::exp(std::lgamma(1 + 4 / b) - 2 * std::lgamma(1 + 2 / b)) - 1);
}

EnvModel quiet_env(int K) {
  EnvModel e;
  e.K = K;
  e.sigma_n2 = 0.0;
  e.sigma_gamma2 = 0.0;
  return e;
}

}  // namespace

TEST_CASE("weibull scale") {
  CHECK(weibull_scale_from_power(1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(weibull_scale_from_power(1.0, 0.25) == doctest::Approx(std::sqrt(0.25 / (2.0 * 5040.0))).epsilon(1e-12));
  CHECK(weibull_scale_from_power(1.0, 0.25) == doctest::Approx(4.98e-3).epsilon(1e-3));
  CHECK(weibull_magnitude(0.7, 1.3, std::exp(-1.0)) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("clutter coefficient moments") {
  EnvModel env;
  env.sigma_gamma2 = 0.5;
  const int n = 1000000;
  for (double beta : {2.0, 1.0, 0.75, 0.5, 0.25}) {
    CAPTURE(beta);
    Rng rng = substream(21, {static_cast<std::uint64_t>(beta * 100)});
    double pw = 0.0, m2 = 0.0, m4 = 0.0;
    int drawn = 0;
    while (drawn < n) {
      for (const cdouble g : sample_clutter_coeffs(env, beta, rng)) {
        pw += std::norm(g);
        m2 += g.real() * g.real();
        m4 += std::pow(g.real(), 4);
        ++drawn;
      }
    }
    const double rel = pw / drawn / env.sigma_gamma2 - 1.0;
    CHECK(std::abs(rel) <= 4.0 * power_rel_sd(beta) / std::sqrt(drawn));
    if (beta >= 1.0) CHECK(std::abs(rel) <= 0.01);
    if (beta == 2.0) {
      const double kurt = (m4 / drawn) / std::pow(m2 / drawn, 2);
      CHECK(std::abs(kurt - 3.0) <= 0.1);
    }
  }
  Rng one(1);
  CHECK(sample_clutter_coeffs(env, 2.0, one).size() == 2 * 8 - 1);
}

TEST_CASE("clutter synthesis") {
  const Waveform a = Waveform::Constant(3, cdouble(0.5, -1));
  CHECK(synth_clutter(std::vector<cdouble>(5, 0.0), a) == Waveform::Zero(3));
  std::vector<cdouble> only0(5, 0.0);
  only0[2] = 1.0;
  CHECK(synth_clutter(only0, a) == a);

  Waveform a2(2);
  a2 << 1, 2;
  const std::vector<cdouble> g = {1.0, 0.0, cdouble(0, 1)};
  Waveform want(2);
  want << 2, cdouble(0, 1);
  CHECK((synth_clutter(g, a2) - want).norm() < 1e-15);
}

TEST_CASE("noise sampling") {
  const int n = 1000000;
  SUBCASE("white") {
    const ComplexMatrix L = cholesky(build_noise_cov(1.0, 0.0, 4));
    Rng rng = substream(23, {1});
    Eigen::VectorXd var = Eigen::VectorXd::Zero(4);
    for (int i = 0; i < n / 4; ++i) var += sample_noise(L, rng).cwiseAbs2() * (4.0 / n);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(var[k] - 1.0) <= 0.02);
  }
  SUBCASE("correlated") {
    const double s2 = 2.0, rho = 0.7;
    const ComplexMatrix L = cholesky(build_noise_cov(s2, rho, 8));
    Rng rng = substream(23, {2});
    ComplexMatrix C = ComplexMatrix::Zero(8, 8), P = ComplexMatrix::Zero(8, 8);
    for (int i = 0; i < n; ++i) {
      const Waveform w = sample_noise(L, rng);
      C.noalias() += w * w.adjoint();
      P.noalias() += w * w.transpose();
    }
    C /= n;
    P /= n;
    for (int k = 0; k + 1 < 8; ++k) CHECK(std::abs(C(k + 1, k).real() / s2 - rho) <= 0.02 * rho);
    for (int v = 0; v < 8; ++v)
      for (int h = 0; h < 8; ++h) {
        CHECK(std::abs(C(v, h) - s2 * std::pow(rho, std::abs(v - h))) <= 0.02 * s2);
        CHECK(std::abs(P(v, h)) <= 0.02 * s2);
      }
  }
}

TEST_CASE("target amplitude") {
  const double s2 = from_db(12.5);
  CHECK(s2 == doctest::Approx(17.783).epsilon(1e-4));
  Rng rng = substream(25, {1});
  const int n = 1000000;
  std::vector<double> r(n);
  double pw = 0.0;
  for (auto& x : r) {
    const cdouble a = sample_target(s2, rng);
    pw += std::norm(a);
    x = std::abs(a);
  }
  CHECK(std::abs(pw / n / s2 - 1.0) <= 0.01);
  std::sort(r.begin(), r.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double F = 1.0 - std::exp(-r[i] * r[i] / s2);
    ks = std::max({ks, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
  }
  CHECK(ks <= 0.01);
}

TEST_CASE("channel observation") {
  Rng yr = substream(27, {0});
  Waveform a(8);
  for (auto& v : a) v = complex_normal(yr, 1.0 / 8);

  SUBCASE("H0 ignores the target power") {
    EnvModel e1, e2;
    e2.sigma_alpha2 = 2.0 * e1.sigma_alpha2;
    Rng r1 = substream(27, {1}), r2 = substream(27, {1});
    for (int i = 0; i < 20; ++i) CHECK(channel(a, 0, e1, 2.0, r1) == channel(a, 0, e2, 2.0, r2));
    CHECK(r1() == r2());
  }

  SUBCASE("H1 without clutter or noise") {
    const EnvModel e = quiet_env(8);
    Rng r1 = substream(27, {2});
    Rng r2 = r1;
    const cdouble alpha = sample_target(e.sigma_alpha2, r2);
    CHECK((channel(a, 1, e, 2.0, r1) - alpha * a).norm() <= 1e-15 * std::abs(alpha));
  }

  SUBCASE("H0 power budget") {
    const EnvModel e;
    const RadarChannel ch(e);
    Rng rng = substream(27, {3});
    const int n = 100000;
    double pw = 0.0;
    for (int i = 0; i < n; ++i) pw += ch.observe(a, 0, 2.0, rng).squaredNorm() / n;
    double clutter = 0.0;
    for (int g = -(e.K - 1); g <= e.K - 1; ++g) clutter += e.sigma_gamma2 * shift_apply(a, g).squaredNorm();
    CHECK(std::abs(pw / (clutter + e.K * e.sigma_n2) - 1.0) <= 0.02);
  }

  CHECK_THROWS(channel(Waveform::Zero(3), 0, EnvModel{}, 2.0, yr));
}

TEST_CASE("clutter covariance") {
  EnvModel e;
  e.K = 2;
  e.sigma_gamma2 = 1.0;
  Waveform e1 = Waveform::Zero(2);
  e1[0] = 1;
  CHECK((clutter_covariance(e1, e) - ComplexMatrix::Identity(2, 2)).norm() < 1e-15);
  e.sigma_gamma2 = 0.0;
  CHECK(clutter_covariance(e1, e).isZero());

  EnvModel env;
  Rng rng = substream(29, {1});
  Waveform y(8);
  for (auto& v : y) v = complex_normal(rng, 1.0 / 8);
  const ComplexMatrix S = clutter_covariance(y, env);
  double tr = 0.0;
  for (int g = -7; g <= 7; ++g) tr += env.sigma_gamma2 * shift_apply(y, g).squaredNorm();
  CHECK(S.trace().real() == doctest::Approx(tr).epsilon(1e-13));
  const int n = 100000;
  ComplexMatrix mc = ComplexMatrix::Zero(8, 8);
  for (int i = 0; i < n; ++i) {
    const auto g = sample_clutter_coeffs(env, 2.0, rng);
    const Waveform c = synth_clutter(g, y);
    mc.noalias() += c * c.adjoint() / n;
  }
  CHECK(std::abs(mc.trace().real() / tr - 1.0) <= 0.02);
  CHECK((mc - S).cwiseAbs().maxCoeff() <= 0.05 * S.cwiseAbs().maxCoeff());
}

TEST_CASE("datasets") {
  const EnvModel env;
  const Waveform y = Waveform::Constant(8, 1.0 / std::sqrt(8.0));

  SUBCASE("label balance") {
    Rng rng = substream(31, {1});
    const Dataset d = gen_dataset(1 << 13, env, WaveformSource::fixed(y), rng);
    double h1 = 0.0;
    for (const auto& s : d) {
      h1 += s.label;
      CHECK(s.a == y);
    }
    CHECK(std::abs(h1 / d.size() - 0.5) <= 0.02);
  }

  SUBCASE("clutter shape mixture") {
    EnvModel mix = env;
    mix.clutter_shapes = {{0.25, 1}, {0.5, 1}, {0.75, 1}, {1.0, 1}};
    Rng rng = substream(31, {2});
    const Dataset d = gen_dataset(1 << 15, mix, WaveformSource::fixed(y), rng);
    std::map<double, int> counts;
    for (const auto& s : d) ++counts[s.beta];
    CHECK(counts.size() == 4);
    for (const auto& [b, c] : counts) CHECK(std::abs(static_cast<double>(c) / d.size() - 0.25) <= 0.02);
  }

  SUBCASE("blocked generation") {
    const RadarChannel ch(env);
    const auto src = WaveformSource::from_policy(y, PolicyConfig{});
    const StreamId id{5, 1, 0};
    const Dataset a = gen_dataset_blocked(1500, ch, src, id, 1);
    const Dataset b = gen_dataset_blocked(1500, ch, src, id, 3);
    REQUIRE(a.size() == 1500);
    for (std::size_t q = 0; q < a.size(); ++q) {
      CHECK(a[q].z == b[q].z);
      CHECK(a[q].a == b[q].a);
    }
    Rng r = block_rng(id, 1), pr = policy_block_rng(id, 1);
    const Dataset blk = gen_dataset(block_count(1500, 1), ch, src, r, &pr);
    CHECK(blk.size() == 512);
    CHECK(blk[7].z == a[512 + 7].z);

    const Dataset off = gen_dataset_blocked(1500, ch, WaveformSource::fixed(y), id, 2);
    for (std::size_t q = 0; q < a.size(); q += 97) {
      CHECK(off[q].label == a[q].label);
      CHECK(off[q].beta == a[q].beta);
    }
  }
}

TEST_CASE("environment validation") {
  EnvModel e;
  CHECK_NOTHROW(e.validate());
  CHECK(e.total_clutter_power() == doctest::Approx(15 * from_db(-11.7)));
  CHECK(to_db(e.total_clutter_power()) == doctest::Approx(0.0).epsilon(0.06));
  e.rho = 1.0;
  CHECK_THROWS(e.validate());
  e = EnvModel{};
  e.clutter_shapes = {{0.2, 1.0}};
  CHECK_THROWS(e.validate());
  e = EnvModel{};
  e.p_h1 = 0.7;
  CHECK_THROWS(e.validate());
}
