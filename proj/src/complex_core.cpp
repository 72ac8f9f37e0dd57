#include "radar_e2e/complex_core.hpp"

#include <cmath>
#include <numbers>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "radar_e2e/csv_format.hpp"

namespace radar_e2e {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void FrequencyBand::validate() const {
  if (!(f_low >= 0.0 && f_low < 1.0) || !(f_high > 0.0 && f_high <= 1.0) || !(f_low < f_high)) {
    throw std::invalid_argument("frequency band must satisfy 0 <= f_low < f_high <= 1, got [" +
                                std::to_string(f_low) + ", " + std::to_string(f_high) + "]");
  }
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw std::invalid_argument("frequency band weight must be finite and nonnegative");
  }
}

NotPositiveDefinite::NotPositiveDefinite(std::size_t pivot, double value)
    : std::runtime_error("matrix is not positive definite: pivot " + std::to_string(pivot) +
                         " has value " + std::to_string(value)),
      pivot_(pivot) {}

RealPacked pack(const Waveform& c) {
  const auto K = c.size();
  RealPacked out(2 * K);
  out.head(K) = c.real();
  out.tail(K) = c.imag();
  return out;
}

Waveform unpack(const RealPacked& v) {
  if (v.size() % 2 != 0) {
    throw std::invalid_argument("packed vector must have even length");
  }
  const auto K = v.size() / 2;
  Waveform out(K);
  for (Eigen::Index k = 0; k < K; ++k) out[k] = cdouble(v[k], v[K + k]);
  return out;
}

ComplexMatrix build_noise_cov(double sigma_n2, double rho, int K) {
  if (!(sigma_n2 > 0.0)) throw std::invalid_argument("noise power must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) {
    throw std::invalid_argument("one-lag correlation must lie in [0, 1), got " + std::to_string(rho));
  }
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  ComplexMatrix M(K, K);
  for (int v = 0; v < K; ++v)
    for (int h = 0; h < K; ++h) M(v, h) = sigma_n2 * std::pow(rho, std::abs(v - h));
  return M;
}

ComplexMatrix cholesky(const ComplexMatrix& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("cholesky needs a square matrix");
  const auto n = M.rows();
  ComplexMatrix L = ComplexMatrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = M(j, j).real();
    for (Eigen::Index k = 0; k < j; ++k) d -= std::norm(L(j, k));
    if (!(d > 0.0)) throw NotPositiveDefinite(static_cast<std::size_t>(j), d);
    const double ljj = std::sqrt(d);
    L(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      cdouble s = M(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= L(i, k) * std::conj(L(j, k));
      L(i, j) = s / ljj;
    }
  }
  return L;
}

ComplexMatrix build_band_matrix(const FrequencyBand& band, int K) {
  band.validate();
  ComplexMatrix M(K, K);
  const cdouble j(0.0, 1.0);
  for (int v = 0; v < K; ++v) {
    for (int h = 0; h < K; ++h) {
      if (v == h) {
        M(v, h) = band.f_high - band.f_low;
      } else {
        const double d = static_cast<double>(v - h);
        M(v, h) = (std::exp(j * (kTwoPi * band.f_high * d)) - std::exp(j * (kTwoPi * band.f_low * d))) /
                  (j * (kTwoPi * d));
      }
    }
  }
  return M;
}

ComplexMatrix build_interference_cov(const std::vector<FrequencyBand>& bands, int K) {
  if (bands.empty()) throw std::invalid_argument("interference covariance needs at least one band");
  ComplexMatrix omega = ComplexMatrix::Zero(K, K);
  for (const auto& b : bands) omega += b.weight * build_band_matrix(b, K);
  return omega;
}

double quad_form(const Waveform& y, const ComplexMatrix& M) {
  if (M.rows() != y.size() || M.cols() != y.size()) {
    throw std::invalid_argument("quad_form dimension mismatch: vector " + std::to_string(y.size()) +
                                ", matrix " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()));
  }
  return y.dot(M * y).real();
}

std::vector<EsdPoint> esd(const Waveform& y, int n_grid) {
  if (n_grid < 2) throw std::invalid_argument("esd grid needs at least 2 points");
  std::vector<EsdPoint> out;
  out.reserve(static_cast<std::size_t>(n_grid));
  for (int n = 0; n < n_grid; ++n) {
    const double f = static_cast<double>(n) / n_grid;
    cdouble acc(0.0, 0.0);
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      acc += y[k] * std::polar(1.0, -kTwoPi * f * static_cast<double>(k));
    }
    out.push_back({f, std::norm(acc)});
  }
  return out;
}

void write_esd_csv(std::ostream& os, const std::vector<EsdPoint>& points, bool db) {
  os << (db ? "freq,esd_db\n" : "freq,esd\n");
  for (const auto& p : points) {
    os << detail::fmt_full(p.freq) << ',';
    if (db) {
      os << detail::fmt_fixed4(to_db(p.value));
    } else {
      os << detail::fmt_full(p.value);
    }
    os << '\n';
  }
}

void write_waveform_csv(std::ostream& os, const Waveform& y) {
  os << "k,re,im\n";
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    os << k << ',' << detail::fmt_full(y[k].real()) << ',' << detail::fmt_full(y[k].imag()) << '\n';
  }
}

Waveform read_waveform_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("k,re,im", 0) != 0) throw std::runtime_error("waveform CSV: bad header");
  std::vector<cdouble> vals;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream ls(line);
    long k = 0;
    double re = 0.0, im = 0.0;
    char c1 = 0, c2 = 0;
    if (!(ls >> k >> c1 >> re >> c2 >> im) || c1 != ',' || c2 != ',' || k != static_cast<long>(vals.size())) {
      throw std::runtime_error("waveform CSV: malformed row " + std::to_string(vals.size() + 1));
    }
    vals.emplace_back(re, im);
  }
  if (vals.empty()) throw std::runtime_error("waveform CSV: no rows");
  Waveform y(static_cast<Eigen::Index>(vals.size()));
  for (std::size_t k = 0; k < vals.size(); ++k) y[static_cast<Eigen::Index>(k)] = vals[k];
  return y;
}

Waveform shift_apply(const Waveform& y, int g) {
  const auto K = static_cast<int>(y.size());
  if (std::abs(g) >= K) {
    throw std::invalid_argument("shift " + std::to_string(g) + " out of range for K=" + std::to_string(K));
  }
  Waveform out = Waveform::Zero(K);
  for (int v = 0; v < K; ++v) {
    const int src = v - g;
    if (src >= 0 && src < K) out[v] = y[src];
  }
  return out;
}

}  // namespace radar_e2e
