// Copyright 2026 The lanekeep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lanekeep/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

namespace lanekeep::nn {
namespace {

Eigen::MatrixXd activate(Activation act, const Eigen::MatrixXd& z) {
  switch (act) {
    case Activation::kRelu:
      return z.cwiseMax(0.0);
    case Activation::kTanh:
      return z.array().tanh().matrix();
    case Activation::kLinear:
      return z;
  }
  return z;
}

// Derivative expressed through the post-activation value.
Eigen::MatrixXd activation_slope(Activation act, const Eigen::MatrixXd& out) {
  switch (act) {
    case Activation::kRelu:
      return (out.array() > 0.0).cast<double>().matrix();
    case Activation::kTanh:
      return (1.0 - out.array().square()).matrix();
    case Activation::kLinear:
      return Eigen::MatrixXd::Ones(out.rows(), out.cols());
  }
  return Eigen::MatrixXd::Ones(out.rows(), out.cols());
}

constexpr char kMagic[4] = {'L', 'K', 'N', 'N'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::size_t end) : buf_(buf), end_(end) {}
  std::uint8_t u8() {
    if (pos_ >= end_) throw CheckpointError("checkpoint truncated");
    return static_cast<std::uint8_t>(buf_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

Activation activation_from_tag(std::uint8_t tag) {
  if (tag > 2) throw CheckpointError("unknown activation tag");
  return static_cast<Activation>(tag);
}

}  // namespace

Mlp::Mlp(std::vector<int> dims, std::vector<Eigen::MatrixXd> weights,
         std::vector<Eigen::VectorXd> biases, Activation output,
         Activation hidden, int side_dim, int side_layer)
    : dims_(std::move(dims)),
      weights_(std::move(weights)),
      biases_(std::move(biases)),
      output_(output),
      hidden_(hidden),
      side_dim_(side_dim),
      side_layer_(side_layer) {
  validate();
}

void Mlp::validate() const {
  if (dims_.size() < 2) throw InvalidArgument("network needs >= 2 layer dims");
  for (int d : dims_) {
    if (d <= 0) throw InvalidArgument("layer dims must be positive");
  }
  const int layers = static_cast<int>(dims_.size()) - 1;
  if (side_dim_ < 0 || side_layer_ < 0 || side_layer_ >= layers) {
    throw InvalidArgument("side input must attach to an existing layer");
  }
  if (static_cast<int>(weights_.size()) != layers ||
      static_cast<int>(biases_.size()) != layers) {
    throw InvalidArgument("parameter count does not match layer dims");
  }
  for (int l = 0; l < layers; ++l) {
    const int fan_in = dims_[l] + (l == side_layer_ ? side_dim_ : 0);
    if (weights_[l].rows() != dims_[l + 1] || weights_[l].cols() != fan_in ||
        biases_[l].size() != dims_[l + 1]) {
      throw InvalidArgument("layer " + std::to_string(l) + " has wrong shape");
    }
  }
}

Mlp Mlp::init(std::vector<int> dims, std::uint64_t seed, Activation output,
              Activation hidden, int side_dim, int side_layer) {
  if (dims.size() < 2) throw InvalidArgument("network needs >= 2 layer dims");
  std::mt19937_64 rng(seed);
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in =
        dims[l] + (static_cast<int>(l) == side_layer ? side_dim : 0);
    if (fan_in <= 0 || dims[l + 1] <= 0) {
      throw InvalidArgument("layer dims must be positive");
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Eigen::MatrixXd w(dims[l + 1], fan_in);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
    }
    weights.push_back(std::move(w));
    biases.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
  }
  return Mlp(std::move(dims), std::move(weights), std::move(biases), output,
             hidden, side_dim, side_layer);
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += weights_[l].size() + biases_[l].size();
  }
  return n;
}

bool Mlp::operator==(const Mlp& other) const {
  if (dims_ != other.dims_ || output_ != other.output_ ||
      hidden_ != other.hidden_ || side_dim_ != other.side_dim_ ||
      side_layer_ != other.side_layer_) {
    return false;
  }
  return flat_parameters() == other.flat_parameters();
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) {
      flat.push_back(biases_[l](i));
    }
  }
  return flat;
}

void Mlp::set_flat_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw InvalidArgument("flat parameter vector has the wrong length");
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    auto& w = weights_[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = flat[k++];
    }
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) {
      biases_[l](i) = flat[k++];
    }
  }
}

ForwardCache forward_cached(const Mlp& net, const Eigen::MatrixXd& input,
                            const Eigen::MatrixXd& side) {
  if (input.rows() != net.input_dim()) {
    throw InvalidArgument("input has " + std::to_string(input.rows()) +
                          " rows, network expects " +
                          std::to_string(net.input_dim()));
  }
  if (net.side_dim() > 0 &&
      (side.rows() != net.side_dim() || side.cols() != input.cols())) {
    throw InvalidArgument("side input shape does not match the network");
  }
  ForwardCache cache;
  const int layers = net.num_layers();
  cache.layer_inputs.reserve(layers);
  cache.activations.reserve(layers);
  Eigen::MatrixXd x = input;
  for (int l = 0; l < layers; ++l) {
    if (l == net.side_layer() && net.side_dim() > 0) {
      Eigen::MatrixXd joined(x.rows() + side.rows(), x.cols());
      joined << x, side;
      x = std::move(joined);
    }
    Eigen::MatrixXd z = net.weights()[l] * x;
    z.colwise() += net.biases()[l];
    cache.layer_inputs.push_back(std::move(x));
    x = activate(l + 1 == layers ? net.output_activation()
                                 : net.hidden_activation(),
                 z);
    cache.activations.push_back(x);
  }
  return cache;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input,
                             const Eigen::MatrixXd& side) const {
  return forward_cached(*this, input, side).output();
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input,
                             const Eigen::VectorXd& side) const {
  const Eigen::MatrixXd in = input;
  const Eigen::MatrixXd sd = side;
  return forward_cached(*this, in, sd).output().col(0);
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (int l = 0; l < net.num_layers(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(),
                                              net.weights()[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
  }
  return g;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (const auto& w : weights) m = std::max(m, w.cwiseAbs().maxCoeff());
  for (const auto& b : biases) m = std::max(m, b.cwiseAbs().maxCoeff());
  return m;
}

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad) {
  const int layers = net.num_layers();
  if (static_cast<int>(cache.activations.size()) != layers) {
    throw InvalidArgument("forward cache does not belong to this network");
  }
  if (output_grad.rows() != net.output_dim() ||
      output_grad.cols() != cache.output().cols()) {
    throw InvalidArgument("output gradient shape does not match the output");
  }
  Gradients g;
  g.weights.resize(layers);
  g.biases.resize(layers);
  Eigen::MatrixXd delta =
      output_grad.cwiseProduct(activation_slope(net.output_activation(),
                                                cache.activations.back()));
  for (int l = layers - 1; l >= 0; --l) {
    g.weights[l] = delta * cache.layer_inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    Eigen::MatrixXd upstream = net.weights()[l].transpose() * delta;
    if (l == net.side_layer() && net.side_dim() > 0) {
      const Eigen::Index main_rows = upstream.rows() - net.side_dim();
      g.side = upstream.bottomRows(net.side_dim());
      upstream = upstream.topRows(main_rows).eval();
    }
    if (l == 0) {
      g.input = std::move(upstream);
    } else {
      delta = upstream.cwiseProduct(activation_slope(
          net.hidden_activation(), cache.activations[l - 1]));
    }
  }
  return g;
}

Gradients backward(const Mlp& net, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& output_grad,
                   const Eigen::VectorXd& side) {
  const Eigen::MatrixXd in = input;
  const Eigen::MatrixXd sd = side;
  const Eigen::MatrixXd og = output_grad;
  return backward(net, forward_cached(net, in, sd), og);
}

AdamState AdamState::for_net(const Mlp& net, double lr) {
  AdamState s;
  s.lr = lr;
  for (int l = 0; l < net.num_layers(); ++l) {
    const auto& w = net.weights()[l];
    s.m_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    s.v_weights.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));
    s.m_biases.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
    s.v_biases.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
  }
  return s;
}

namespace {

template <typename Param>
void adam_update(Param& p, Param& m, Param& v, const Param& g,
                 const AdamState& s, double sign, double bc1, double bc2) {
  m = s.beta1 * m + (1.0 - s.beta1) * g;
  v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
  p.array() += sign * s.lr * (m.array() / bc1) /
               ((v.array() / bc2).sqrt() + s.eps);
}

}  // namespace

void adam_step(AdamState& state, Mlp& params, const Gradients& grads,
               Direction direction) {
  const int layers = params.num_layers();
  if (static_cast<int>(grads.weights.size()) != layers ||
      static_cast<int>(state.m_weights.size()) != layers) {
    throw InvalidArgument("optimizer state does not match the network");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const double sign = direction == Direction::kAscend ? 1.0 : -1.0;
  for (int l = 0; l < layers; ++l) {
    adam_update(params.weights()[l], state.m_weights[l], state.v_weights[l],
                grads.weights[l], state, sign, bc1, bc2);
    adam_update(params.biases()[l], state.m_biases[l], state.v_biases[l],
                grads.biases[l], state, sign, bc1, bc2);
  }
}

void blend_into(Mlp& target, const Mlp& source, double tau) {
  if (target.dims() != source.dims() ||
      target.side_dim() != source.side_dim()) {
    throw InvalidArgument("cannot blend networks of different shape");
  }
  for (int l = 0; l < target.num_layers(); ++l) {
    target.weights()[l] =
        tau * source.weights()[l] + (1.0 - tau) * target.weights()[l];
    target.biases()[l] =
        tau * source.biases()[l] + (1.0 - tau) * target.biases()[l];
  }
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize(const Mlp& net) {
  ByteWriter w;
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(net.dims().size()));
  for (int d : net.dims()) w.u32(static_cast<std::uint32_t>(d));
  w.u8(static_cast<std::uint8_t>(net.hidden_activation()));
  w.u8(static_cast<std::uint8_t>(net.output_activation()));
  w.u32(static_cast<std::uint32_t>(net.side_dim()));
  w.u32(static_cast<std::uint32_t>(net.side_layer()));
  for (double v : net.flat_parameters()) w.f64(v);
  const std::uint64_t sum = fnv1a64(w.bytes().data(), w.bytes().size());
  w.u64(sum);
  return std::move(w.bytes());
}

Mlp deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof(kMagic) + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a network checkpoint");
  }
  const std::size_t body = bytes.size() - 8;
  ByteReader tail(bytes, bytes.size());
  for (std::size_t i = 0; i < body; ++i) tail.u8();
  if (tail.u64() != fnv1a64(bytes.data(), body)) {
    throw CheckpointError("checkpoint checksum mismatch");
  }
  ByteReader r(bytes, body);
  for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  const std::uint32_t n = r.u32();
  if (n < 2 || n > 64) throw CheckpointError("implausible layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t d = r.u32();
    if (d == 0 || d > (1u << 20)) throw CheckpointError("implausible layer width");
    dims.push_back(static_cast<int>(d));
  }
  const Activation hidden = activation_from_tag(r.u8());
  const Activation output = activation_from_tag(r.u8());
  const auto side_dim = static_cast<int>(r.u32());
  const auto side_layer = static_cast<int>(r.u32());
  Mlp net;
  try {
    net = Mlp::init(dims, 0, output, hidden, side_dim, side_layer);
  } catch (const InvalidArgument& e) {
    throw CheckpointError(std::string("bad architecture: ") + e.what());
  }
  std::vector<double> flat(net.parameter_count());
  for (double& v : flat) v = r.f64();
  if (r.pos() != body) throw CheckpointError("trailing bytes in checkpoint");
  net.set_flat_parameters(flat);
  return net;
}

void save_checkpoint(const Mlp& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path);
  const std::string bytes = serialize(net);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path);
}

Mlp load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize(buf.str());
}

}  // namespace lanekeep::nn
