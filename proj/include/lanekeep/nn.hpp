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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lanekeep/errors.hpp"

namespace lanekeep::nn {

enum class Activation : std::uint8_t { kRelu = 0, kTanh = 1, kLinear = 2 };

/// Fully connected feed-forward network. Layer l maps dims[l] inputs (plus
/// side_dim extra inputs when l == side_layer) to dims[l + 1] outputs.
/// Batches are column-major: one sample per column.
///
/// The side input lets a critic see the state through its first layer and
/// receive the action only at a later layer.
class Mlp {
 public:
  Mlp() = default;

  /// Uniform weights in +-1/sqrt(fan_in), zero biases; deterministic in seed.
  static Mlp init(std::vector<int> dims, std::uint64_t seed,
                  Activation output = Activation::kTanh,
                  Activation hidden = Activation::kRelu, int side_dim = 0,
                  int side_layer = 0);

  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  int side_dim() const { return side_dim_; }
  int side_layer() const { return side_layer_; }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  std::size_t parameter_count() const;

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  /// Layer by layer: weights row-major, then that layer's biases.
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(const std::vector<double>& flat);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input,
                          const Eigen::MatrixXd& side = {}) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input,
                          const Eigen::VectorXd& side = {}) const;

  /// Same architecture and bit-identical parameters.
  bool operator==(const Mlp& other) const;

  // Assembles a network from explicit parameters. Shapes are validated.
  Mlp(std::vector<int> dims, std::vector<Eigen::MatrixXd> weights,
      std::vector<Eigen::VectorXd> biases, Activation output,
      Activation hidden, int side_dim, int side_layer);

 private:
  void validate() const;

  std::vector<int> dims_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  Activation output_ = Activation::kTanh;
  Activation hidden_ = Activation::kRelu;
  int side_dim_ = 0;
  int side_layer_ = 0;
};

/// Intermediates of a batched forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> layer_inputs;  // after side concatenation
  std::vector<Eigen::MatrixXd> activations;   // post-activation per layer
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

ForwardCache forward_cached(const Mlp& net, const Eigen::MatrixXd& input,
                            const Eigen::MatrixXd& side = {});

/// Parameter gradients summed over the batch, plus per-sample gradients with
/// respect to the main and side inputs.
struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::MatrixXd input;
  Eigen::MatrixXd side;

  static Gradients zeros_like(const Mlp& net);
  double max_abs() const;
};

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_grad);
Gradients backward(const Mlp& net, const Eigen::VectorXd& input,
                   const Eigen::VectorXd& output_grad,
                   const Eigen::VectorXd& side = {});

enum class Direction { kAscend, kDescend };

struct AdamState {
  std::vector<Eigen::MatrixXd> m_weights, v_weights;
  std::vector<Eigen::VectorXd> m_biases, v_biases;
  std::int64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_net(const Mlp& net, double lr);
};

/// Bias-corrected Adam update in place. kAscend moves along the gradient.
void adam_step(AdamState& state, Mlp& params, const Gradients& grads,
               Direction direction);

/// target <- tau * source + (1 - tau) * target, elementwise.
void blend_into(Mlp& target, const Mlp& source, double tau);

/// Versioned little-endian binary with a trailing FNV-1a 64 checksum.
std::string serialize(const Mlp& net);
Mlp deserialize(const std::string& bytes);
void save_checkpoint(const Mlp& net, const std::string& path);
Mlp load_checkpoint(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t size);

}  // namespace lanekeep::nn
