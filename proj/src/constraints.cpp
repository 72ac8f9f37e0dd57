#include "radar_e2e/constraints.hpp"

#include <stdexcept>
#include <string>

namespace radar_e2e {

std::string_view to_string(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::none: return "none";
    case PenaltyKind::par: return "par";
    case PenaltyKind::spectrum: return "spectrum";
  }
  return "?";
}

PenaltyKind parse_penalty_kind(std::string_view name) {
  if (name == "none") return PenaltyKind::none;
  if (name == "par") return PenaltyKind::par;
  if (name == "spectrum") return PenaltyKind::spectrum;
  throw std::invalid_argument("unknown penalty kind '" + std::string(name) + "'");
}

void PenaltyConfig::validate() const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("penalty lambda must be nonnegative");
  if (kind == PenaltyKind::spectrum) {
    if (bands.empty()) throw std::invalid_argument("spectrum penalty needs at least one band");
    for (const auto& b : bands) b.validate();
  }
}

Eigen::Index par_argmax(const Waveform& y) {
  Eigen::Index best = 0;
  double best_mod = -1.0;
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double m = std::norm(y[k]);
    if (m > best_mod) {
      best_mod = m;
      best = k;
    }
  }
  return best;
}

double par_value(const Waveform& y) {
  const double energy = y.squaredNorm();
  if (!(energy > 0.0)) throw std::domain_error("PAR of a zero waveform is undefined");
  return static_cast<double>(y.size()) * std::norm(y[par_argmax(y)]) / energy;
}

RealPacked par_grad_wrt_waveform(const Waveform& y) {
  if (!(y.squaredNorm() > 0.0)) throw std::domain_error("PAR gradient of a zero waveform is undefined");
  const auto K = y.size();
  const auto k = par_argmax(y);
  RealPacked g = RealPacked::Zero(2 * K);
  g[k] = 2.0 * static_cast<double>(K) * y[k].real();
  g[K + k] = 2.0 * static_cast<double>(K) * y[k].imag();
  return g;
}

double spectral_value(const Waveform& y, const ComplexMatrix& omega) { return quad_form(y, omega); }

RealPacked spectral_grad_wrt_waveform(const Waveform& y, const ComplexMatrix& omega) {
  if (omega.rows() != y.size() || omega.cols() != y.size()) {
    throw std::invalid_argument("spectral gradient dimension mismatch");
  }
  return 2.0 * pack(omega * y);
}

Penalty::Penalty(PenaltyConfig cfg, int K) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.kind == PenaltyKind::spectrum) omega_ = build_interference_cov(cfg_.bands, K);
}

double Penalty::value(const Waveform& y) const {
  switch (cfg_.kind) {
    case PenaltyKind::none: return 0.0;
    case PenaltyKind::par: return par_value(y);
    case PenaltyKind::spectrum: return spectral_value(y, omega_);
  }
  return 0.0;
}

RealPacked Penalty::grad_wrt_waveform(const Waveform& y) const {
  switch (cfg_.kind) {
    case PenaltyKind::none: return RealPacked::Zero(2 * y.size());
    case PenaltyKind::par: return par_grad_wrt_waveform(y);
    case PenaltyKind::spectrum: return spectral_grad_wrt_waveform(y, omega_);
  }
  return {};
}

NetParams penalty_param_grad(const Transmitter& tx, const TxForward& fwd, const Penalty& pen) {
  if (pen.config().kind == PenaltyKind::none || pen.config().lambda == 0.0) return tx.params.zeros_like();
  NetParams g = tx_backward(tx, fwd, pen.grad_wrt_waveform(fwd.y));
  g *= pen.config().lambda;
  return g;
}

}  // namespace radar_e2e
