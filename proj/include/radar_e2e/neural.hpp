#pragma once

// Fixed-topology multilayer perceptron: affine layers with elementwise
// activations, batched forward pass, reverse-mode gradients and Adam/SGD.
// Batches are column-major: each column of an input matrix is one sample.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "radar_e2e/rng.hpp"

namespace radar_e2e {

enum class Activation { elu, sigmoid, linear };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct NetSpec {
  std::vector<int> layer_dims;          // input dimension first
  std::vector<Activation> activations;  // one per non-input layer

  void validate() const;
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t num_affine() const { return activations.size(); }
  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;
};

class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Weights and biases of one network. Also used for gradients of the same shape.
///
/// Every instance carries an identity and a revision counter; forward caches
/// remember both so backward passes can reject caches from other parameters.
class NetParams {
 public:
  NetParams() = default;
  explicit NetParams(NetSpec spec);  // all zeros
  NetParams(const NetParams& other);
  NetParams& operator=(const NetParams& other);
  NetParams(NetParams&&) noexcept = default;
  NetParams& operator=(NetParams&&) noexcept = default;

  const NetSpec& spec() const { return spec_; }
  std::size_t num_layers() const { return layers_.size(); }
  const DenseLayer& layer(std::size_t l) const { return layers_.at(l); }
  DenseLayer& mutable_layer(std::size_t l);

  /// Total number of scalars.
  std::size_t size() const;
  /// Row-major weights then bias, layer by layer.
  Eigen::VectorXd flatten() const;
  void assign_flat(const Eigen::VectorXd& flat);
  double get(std::size_t flat_index) const;
  void set(std::size_t flat_index, double value);

  NetParams zeros_like() const { return NetParams(spec_); }
  bool all_finite() const;
  double squared_norm() const;

  NetParams& operator+=(const NetParams& rhs);
  NetParams& operator*=(double s);
  /// this += s * x
  void axpy(double s, const NetParams& x);

  std::uint64_t id() const { return id_; }
  std::uint64_t revision() const { return revision_; }
  void touch() { ++revision_; }

 private:
  void check_same_shape(const NetParams& rhs) const;

  NetSpec spec_;
  std::vector<DenseLayer> layers_;
  std::uint64_t id_ = next_id();
  std::uint64_t revision_ = 0;

  static std::uint64_t next_id();
};

/// Pre-activations and activations from one batched forward pass.
struct ForwardCache {
  std::uint64_t params_id = 0;
  std::uint64_t params_revision = 0;
  std::vector<Eigen::MatrixXd> pre;  // per affine layer
  std::vector<Eigen::MatrixXd> act;  // act[0] is the input batch
};

struct ForwardResult {
  Eigen::VectorXd output;
  ForwardCache cache;
};

struct BatchForwardResult {
  Eigen::MatrixXd output;
  ForwardCache cache;
};

struct BackwardResult {
  NetParams grads;
  Eigen::VectorXd input_grad;
};

struct BatchBackwardResult {
  NetParams grads;               // summed over the batch
  Eigen::MatrixXd input_grads;   // one column per sample
};

/// Weights uniform with variance 1/fan_in, biases zero.
NetParams net_init(const NetSpec& spec, Rng& rng);

ForwardResult net_forward(const NetParams& params, const Eigen::VectorXd& input);
BatchForwardResult net_forward_batch(const NetParams& params, const Eigen::MatrixXd& inputs);
/// Forward pass without keeping intermediates.
Eigen::MatrixXd net_predict_batch(const NetParams& params, const Eigen::MatrixXd& inputs);

BackwardResult net_backward(const NetParams& params, const ForwardCache& cache,
                            const Eigen::VectorXd& output_cotangent);
BatchBackwardResult net_backward_batch(const NetParams& params, const ForwardCache& cache,
                                       const Eigen::MatrixXd& output_cotangents);

struct AdamState {
  NetParams m;
  NetParams v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros_for(const NetParams& params);
};

void adam_step(AdamState& state, NetParams& params, const NetParams& grads, double lr);
void sgd_step(NetParams& params, const NetParams& grads, double lr);

enum class CheckpointFormat { text, binary };

void save_checkpoint(std::ostream& os, const NetParams& params, CheckpointFormat format);
/// Reads either format (detected from the leading magic).
NetParams load_checkpoint(std::istream& is);
void save_checkpoint_file(const std::string& path, const NetParams& params,
                          CheckpointFormat format = CheckpointFormat::binary);
NetParams load_checkpoint_file(const std::string& path);

}  // namespace radar_e2e
