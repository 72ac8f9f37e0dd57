#include "radar_e2e/neural.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "radar_e2e/csv_format.hpp"

namespace radar_e2e {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::elu: return "elu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::linear: return "linear";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "elu") return Activation::elu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "linear") return Activation::linear;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

void NetSpec::validate() const {
  if (layer_dims.size() < 2) throw std::invalid_argument("network needs at least two layers");
  if (activations.size() + 1 != layer_dims.size()) {
    throw std::invalid_argument("need one activation per non-input layer");
  }
  for (int d : layer_dims) {
    if (d <= 0) throw std::invalid_argument("layer dimensions must be positive");
  }
}

// ---------------------------------------------------------------------------
// NetParams

std::uint64_t NetParams::next_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

NetParams::NetParams(NetSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  layers_.reserve(spec_.num_affine());
  for (std::size_t l = 0; l < spec_.num_affine(); ++l) {
    const int in = spec_.layer_dims[l];
    const int out = spec_.layer_dims[l + 1];
    layers_.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
}

NetParams::NetParams(const NetParams& other)
    : spec_(other.spec_), layers_(other.layers_), id_(next_id()), revision_(0) {}

NetParams& NetParams::operator=(const NetParams& other) {
  if (this != &other) {
    spec_ = other.spec_;
    layers_ = other.layers_;
    ++revision_;
  }
  return *this;
}

DenseLayer& NetParams::mutable_layer(std::size_t l) {
  ++revision_;
  return layers_.at(l);
}

std::size_t NetParams::size() const {
  std::size_t n = 0;
  for (const auto& L : layers_) n += static_cast<std::size_t>(L.W.size() + L.b.size());
  return n;
}

Eigen::VectorXd NetParams::flatten() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(size()));
  Eigen::Index pos = 0;
  for (const auto& L : layers_) {
    for (Eigen::Index r = 0; r < L.W.rows(); ++r)
      for (Eigen::Index c = 0; c < L.W.cols(); ++c) flat[pos++] = L.W(r, c);
    flat.segment(pos, L.b.size()) = L.b;
    pos += L.b.size();
  }
  return flat;
}

void NetParams::assign_flat(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != size()) {
    throw std::invalid_argument("flat parameter vector has wrong length");
  }
  Eigen::Index pos = 0;
  for (auto& L : layers_) {
    for (Eigen::Index r = 0; r < L.W.rows(); ++r)
      for (Eigen::Index c = 0; c < L.W.cols(); ++c) L.W(r, c) = flat[pos++];
    L.b = flat.segment(pos, L.b.size());
    pos += L.b.size();
  }
  ++revision_;
}

namespace {

// Locates a flat index: (layer, is_bias, row, col).
struct FlatSlot {
  std::size_t layer;
  bool bias;
  Eigen::Index row;
  Eigen::Index col;
};

FlatSlot locate(const std::vector<DenseLayer>& layers, std::size_t idx) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    const auto nw = static_cast<std::size_t>(L.W.size());
    if (idx < nw) {
      return {l, false, static_cast<Eigen::Index>(idx) / L.W.cols(), static_cast<Eigen::Index>(idx) % L.W.cols()};
    }
    idx -= nw;
    const auto nb = static_cast<std::size_t>(L.b.size());
    if (idx < nb) return {l, true, static_cast<Eigen::Index>(idx), 0};
    idx -= nb;
  }
  throw std::out_of_range("flat parameter index out of range");
}

}  // namespace

double NetParams::get(std::size_t flat_index) const {
  const auto s = locate(layers_, flat_index);
  const auto& L = layers_[s.layer];
  return s.bias ? L.b[s.row] : L.W(s.row, s.col);
}

void NetParams::set(std::size_t flat_index, double value) {
  const auto s = locate(layers_, flat_index);
  auto& L = layers_[s.layer];
  if (s.bias) {
    L.b[s.row] = value;
  } else {
    L.W(s.row, s.col) = value;
  }
  ++revision_;
}

bool NetParams::all_finite() const {
  for (const auto& L : layers_) {
    if (!L.W.allFinite() || !L.b.allFinite()) return false;
  }
  return true;
}

double NetParams::squared_norm() const {
  double s = 0.0;
  for (const auto& L : layers_) s += L.W.squaredNorm() + L.b.squaredNorm();
  return s;
}

void NetParams::check_same_shape(const NetParams& rhs) const {
  if (!(spec_.layer_dims == rhs.spec_.layer_dims)) {
    throw std::invalid_argument("parameter shapes differ");
  }
}

NetParams& NetParams::operator+=(const NetParams& rhs) {
  check_same_shape(rhs);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].W += rhs.layers_[l].W;
    layers_[l].b += rhs.layers_[l].b;
  }
  ++revision_;
  return *this;
}

NetParams& NetParams::operator*=(double s) {
  for (auto& L : layers_) {
    L.W *= s;
    L.b *= s;
  }
  ++revision_;
  return *this;
}

void NetParams::axpy(double s, const NetParams& x) {
  check_same_shape(x);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].W += s * x.layers_[l].W;
    layers_[l].b += s * x.layers_[l].b;
  }
  ++revision_;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void apply_activation(Activation a, const Eigen::MatrixXd& pre, Eigen::MatrixXd& out) {
  switch (a) {
    case Activation::elu:
      out = pre.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
      break;
    case Activation::sigmoid:
      out = pre.unaryExpr([](double x) { return sigmoid(x); });
      break;
    case Activation::linear:
      out = pre;
      break;
  }
}

// Multiplies the upstream gradient by the activation derivative in place.
void activation_vjp(Activation a, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& act,
                    Eigen::MatrixXd& delta) {
  switch (a) {
    case Activation::elu:
      delta = delta.cwiseProduct(pre.unaryExpr([](double x) { return x > 0.0 ? 1.0 : std::exp(x); }));
      break;
    case Activation::sigmoid:
      delta = delta.cwiseProduct(act.unaryExpr([](double s) { return s * (1.0 - s); }));
      break;
    case Activation::linear:
      break;
  }
}

void check_input(const NetParams& params, Eigen::Index rows) {
  if (rows != params.spec().input_dim()) {
    throw std::invalid_argument("network input dimension mismatch: expected " +
                                std::to_string(params.spec().input_dim()) + ", got " + std::to_string(rows));
  }
}

}  // namespace

NetParams net_init(const NetSpec& spec, Rng& rng) {
  NetParams params(spec);
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    auto& L = params.mutable_layer(l);
    const double half_width = std::sqrt(3.0 / static_cast<double>(L.W.cols()));
    for (Eigen::Index r = 0; r < L.W.rows(); ++r)
      for (Eigen::Index c = 0; c < L.W.cols(); ++c) L.W(r, c) = half_width * (2.0 * uniform_open(rng) - 1.0);
  }
  return params;
}

BatchForwardResult net_forward_batch(const NetParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, inputs.rows());
  BatchForwardResult res;
  auto& cache = res.cache;
  cache.params_id = params.id();
  cache.params_revision = params.revision();
  const auto n = params.num_layers();
  cache.pre.resize(n);
  cache.act.resize(n + 1);
  cache.act[0] = inputs;
  for (std::size_t l = 0; l < n; ++l) {
    const auto& L = params.layer(l);
    cache.pre[l] = (L.W * cache.act[l]).colwise() + L.b;
    apply_activation(params.spec().activations[l], cache.pre[l], cache.act[l + 1]);
  }
  res.output = cache.act[n];
  return res;
}

ForwardResult net_forward(const NetParams& params, const Eigen::VectorXd& input) {
  auto batch = net_forward_batch(params, input);
  return {batch.output.col(0), std::move(batch.cache)};
}

Eigen::MatrixXd net_predict_batch(const NetParams& params, const Eigen::MatrixXd& inputs) {
  check_input(params, inputs.rows());
  Eigen::MatrixXd cur = inputs;
  Eigen::MatrixXd next;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto& L = params.layer(l);
    Eigen::MatrixXd pre = (L.W * cur).colwise() + L.b;
    apply_activation(params.spec().activations[l], pre, next);
    cur.swap(next);
  }
  return cur;
}

BatchBackwardResult net_backward_batch(const NetParams& params, const ForwardCache& cache,
                                       const Eigen::MatrixXd& output_cotangents) {
  if (cache.params_id != params.id() || cache.params_revision != params.revision()) {
    throw StaleCacheError("forward cache does not belong to the current parameters");
  }
  const auto n = params.num_layers();
  if (cache.pre.size() != n || cache.act.size() != n + 1) {
    throw StaleCacheError("forward cache has the wrong number of layers");
  }
  if (output_cotangents.rows() != params.spec().output_dim() ||
      output_cotangents.cols() != cache.act[0].cols()) {
    throw std::invalid_argument("output cotangent shape mismatch");
  }
  BatchBackwardResult res{params.zeros_like(), {}};
  Eigen::MatrixXd delta = output_cotangents;
  for (std::size_t l = n; l-- > 0;) {
    activation_vjp(params.spec().activations[l], cache.pre[l], cache.act[l + 1], delta);
    auto& G = res.grads.mutable_layer(l);
    G.W.noalias() = delta * cache.act[l].transpose();
    G.b = delta.rowwise().sum();
    delta = params.layer(l).W.transpose() * delta;
  }
  res.input_grads = std::move(delta);
  return res;
}

BackwardResult net_backward(const NetParams& params, const ForwardCache& cache,
                            const Eigen::VectorXd& output_cotangent) {
  if (cache.act.empty() || cache.act[0].cols() != 1) {
    throw StaleCacheError("single-sample backward needs a single-sample cache");
  }
  auto batch = net_backward_batch(params, cache, output_cotangent);
  return {std::move(batch.grads), batch.input_grads.col(0)};
}

// ---------------------------------------------------------------------------
// Optimizers

AdamState AdamState::zeros_for(const NetParams& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(AdamState& state, NetParams& params, const NetParams& grads, double lr) {
  if (state.m.num_layers() != params.num_layers()) state = AdamState::zeros_for(params);
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto& G = grads.layer(l);
    auto& M = state.m.mutable_layer(l);
    auto& V = state.v.mutable_layer(l);
    auto& P = params.mutable_layer(l);
    M.W = state.beta1 * M.W + (1.0 - state.beta1) * G.W;
    M.b = state.beta1 * M.b + (1.0 - state.beta1) * G.b;
    V.W = state.beta2 * V.W + (1.0 - state.beta2) * G.W.cwiseAbs2();
    V.b = state.beta2 * V.b + (1.0 - state.beta2) * G.b.cwiseAbs2();
    P.W.array() -= lr * (M.W.array() / bc1) / ((V.W.array() / bc2).sqrt() + state.eps);
    P.b.array() -= lr * (M.b.array() / bc1) / ((V.b.array() / bc2).sqrt() + state.eps);
  }
}

void sgd_step(NetParams& params, const NetParams& grads, double lr) { params.axpy(-lr, grads); }

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kBinaryMagic[8] = {'R', 'E', '2', 'E', 'N', 'E', 'T', 'B'};
constexpr std::string_view kTextMagic = "RE2ENETT";

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(std::istream& is) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("truncated checkpoint");
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

double get_f64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = is.get();
    if (c == EOF) throw std::runtime_error("truncated checkpoint");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return std::bit_cast<double>(v);
}

NetParams load_binary(std::istream& is) {
  NetSpec spec;
  const auto n_dims = get_u32(is);
  if (n_dims < 2 || n_dims > 64) throw std::runtime_error("corrupt checkpoint header");
  for (std::uint32_t i = 0; i < n_dims; ++i) spec.layer_dims.push_back(static_cast<int>(get_u32(is)));
  for (std::uint32_t i = 0; i + 1 < n_dims; ++i) {
    const int c = is.get();
    if (c < 0 || c > 2) throw std::runtime_error("corrupt checkpoint activation code");
    spec.activations.push_back(static_cast<Activation>(c));
  }
  NetParams params(spec);
  Eigen::VectorXd flat(static_cast<Eigen::Index>(params.size()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) flat[i] = get_f64(is);
  params.assign_flat(flat);
  return params;
}

NetParams load_text(std::istream& is) {
  std::string line;
  NetSpec spec;
  auto expect_line = [&](std::string_view key) {
    if (!std::getline(is, line)) throw std::runtime_error("truncated checkpoint");
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw std::runtime_error("checkpoint: expected '" + std::string(key) + "'");
    return ls.str().substr(k.size());
  };
  {
    std::istringstream ls(expect_line("dims"));
    int d;
    while (ls >> d) spec.layer_dims.push_back(d);
  }
  {
    std::istringstream ls(expect_line("activations"));
    std::string a;
    while (ls >> a) spec.activations.push_back(parse_activation(a));
  }
  NetParams params(spec);
  Eigen::VectorXd flat(static_cast<Eigen::Index>(params.size()));
  for (Eigen::Index i = 0; i < flat.size(); ++i) {
    std::string tok;
    if (!(is >> tok)) throw std::runtime_error("truncated checkpoint values");
    flat[i] = std::stod(tok);
  }
  params.assign_flat(flat);
  return params;
}

}  // namespace

void save_checkpoint(std::ostream& os, const NetParams& params, CheckpointFormat format) {
  const auto& spec = params.spec();
  const Eigen::VectorXd flat = params.flatten();
  if (format == CheckpointFormat::binary) {
    os.write(kBinaryMagic, sizeof kBinaryMagic);
    put_u32(os, static_cast<std::uint32_t>(spec.layer_dims.size()));
    for (int d : spec.layer_dims) put_u32(os, static_cast<std::uint32_t>(d));
    for (auto a : spec.activations) os.put(static_cast<char>(a));
    for (Eigen::Index i = 0; i < flat.size(); ++i) put_f64(os, flat[i]);
    return;
  }
  os << kTextMagic << '\n' << "dims";
  for (int d : spec.layer_dims) os << ' ' << d;
  os << "\nactivations";
  for (auto a : spec.activations) os << ' ' << to_string(a);
  os << '\n';
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < params.num_layers(); ++l) {
    const auto& L = params.layer(l);
    for (Eigen::Index r = 0; r < L.W.rows(); ++r) {
      for (Eigen::Index c = 0; c < L.W.cols(); ++c) os << (c ? " " : "") << detail::fmt_full(flat[pos++]);
      os << '\n';
    }
    for (Eigen::Index r = 0; r < L.b.size(); ++r) os << (r ? " " : "") << detail::fmt_full(flat[pos++]);
    os << '\n';
  }
}

NetParams load_checkpoint(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof magic)) throw std::runtime_error("checkpoint too short");
  if (std::string_view(magic, 8) == std::string_view(kBinaryMagic, 8)) return load_binary(is);
  if (std::string_view(magic, 8) == kTextMagic) {
    std::string rest;
    std::getline(is, rest);
    return load_text(is);
  }
  throw std::runtime_error("not a network checkpoint");
}

void save_checkpoint_file(const std::string& path, const NetParams& params, CheckpointFormat format) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  save_checkpoint(os, params, format);
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

NetParams load_checkpoint_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  return load_checkpoint(is);
}

}  // namespace radar_e2e
