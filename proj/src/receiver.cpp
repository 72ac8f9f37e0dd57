#include "radar_e2e/receiver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace radar_e2e {

NetSpec receiver_spec(int K, int hidden) {
  return {{2 * K, hidden, hidden, 1}, {Activation::sigmoid, Activation::sigmoid, Activation::sigmoid}};
}

RxForward rx_forward(const NetParams& rx, const Waveform& z) {
  if (rx.spec().output_dim() != 1) throw std::invalid_argument("receiver must have a single output");
  auto fwd = net_forward(rx, pack(z));
  return {fwd.output[0], std::move(fwd.cache)};
}

Eigen::MatrixXd pack_batch(std::span<const Waveform> zs) {
  if (zs.empty()) return {};
  const auto K = zs.front().size();
  Eigen::MatrixXd out(2 * K, static_cast<Eigen::Index>(zs.size()));
  for (std::size_t n = 0; n < zs.size(); ++n) {
    const auto& z = zs[n];
    if (z.size() != K) throw std::invalid_argument("pack_batch: inconsistent vector lengths");
    const auto c = static_cast<Eigen::Index>(n);
    out.col(c).head(K) = z.real();
    out.col(c).tail(K) = z.imag();
  }
  return out;
}

Eigen::VectorXd rx_predict_batch(const NetParams& rx, const Eigen::MatrixXd& packed) {
  return net_predict_batch(rx, packed).row(0).transpose();
}

double bce_loss(double p, int label) {
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -std::log(pc) : -std::log1p(-pc);
}

double bce_grad(double p, int label) {
  const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
  return label == 1 ? -1.0 / pc : 1.0 / (1.0 - pc);
}

int decide(double p, double threshold) { return p > threshold ? 1 : 0; }

}  // namespace radar_e2e
