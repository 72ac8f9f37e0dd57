#pragma once

// Complex vector/matrix primitives shared by the channel, the penalties and
// the baselines. Everything is dense, 64-bit, and small (K <= 64).

#include <cmath>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace radar_e2e {

using cdouble = std::complex<double>;

/// Length-K fast-time waveform (also used for received, clutter and noise vectors).
using Waveform = Eigen::VectorXcd;
/// 2K real vector: real parts first, imaginary parts last.
using RealPacked = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

/// A normalized frequency band [f_low, f_high] with an interference weight.
struct FrequencyBand {
  double f_low = 0.0;
  double f_high = 1.0;
  double weight = 1.0;

  void validate() const;
};

/// Thrown by cholesky() when the input is not (numerically) positive definite.
class NotPositiveDefinite : public std::runtime_error {
 public:
  NotPositiveDefinite(std::size_t pivot, double value);
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

RealPacked pack(const Waveform& c);
Waveform unpack(const RealPacked& v);

/// Exponentially correlated noise covariance sigma_n2 * rho^|v-h|.
ComplexMatrix build_noise_cov(double sigma_n2, double rho, int K);

/// Lower-triangular L with L L^H = M.
ComplexMatrix cholesky(const ComplexMatrix& M);

/// Band matrix whose quadratic form is the waveform energy inside the band.
ComplexMatrix build_band_matrix(const FrequencyBand& band, int K);

/// Weighted sum of band matrices.
ComplexMatrix build_interference_cov(const std::vector<FrequencyBand>& bands, int K);

/// y^H M y (real part; the imaginary residue of a Hermitian form is dropped).
double quad_form(const Waveform& y, const ComplexMatrix& M);

struct EsdPoint {
  double freq;
  double value;
};

/// |sum_k y_k exp(-j 2 pi f k)|^2 on the uniform grid f = n / n_grid, n < n_grid.
std::vector<EsdPoint> esd(const Waveform& y, int n_grid = 1024);

/// Writes `freq,esd` (or `freq,esd_db` when db is set).
void write_esd_csv(std::ostream& os, const std::vector<EsdPoint>& points, bool db = false);

/// J_g y: out(v) = y(v - g) inside the window, zero elsewhere.
Waveform shift_apply(const Waveform& y, int g);

/// `k,re,im` with k starting at 0, full precision so a read-back is exact.
void write_waveform_csv(std::ostream& os, const Waveform& y);
/// Throws std::runtime_error on a malformed file.
Waveform read_waveform_csv(std::istream& is);

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace radar_e2e
