#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/tensor.hpp"

namespace fedleak {

enum class LayerKind { Dense, Conv2d, MaxPool, Relu, Flatten, Softmax };

std::string layer_kind_name(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  size_t in = 0, out = 0;                                // dense
  size_t in_ch = 0, out_ch = 0, kernel = 0, stride = 1;  // conv2d
  size_t size = 0;                                       // maxpool window

  static LayerSpec dense(size_t in, size_t out);
  static LayerSpec conv2d(size_t in_ch, size_t out_ch, size_t kernel,
                          size_t stride = 1);
  static LayerSpec maxpool(size_t size);
  static LayerSpec relu();
  static LayerSpec flatten();
  static LayerSpec softmax();
};

enum class LossKind { CrossEntropy, MeanSquaredError };

struct ModelSpec {
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::CrossEntropy;
};

// Shape of a layer's output given its input sample shape (no batch dim).
std::vector<size_t> layer_output_shape(const LayerSpec& layer,
                                       const std::vector<size_t>& in);

// Walks the whole stack; throws when adjacent layers are incompatible or
// cross-entropy is requested without a terminal softmax.
std::vector<size_t> model_output_shape(const ModelSpec& spec,
                                       const std::vector<size_t>& input_shape);
void validate_spec(const ModelSpec& spec,
                   const std::vector<size_t>& input_shape);

enum class ParamRole { Weight, Bias };

struct ParamEntry {
  size_t layer_index = 0;
  ParamRole role = ParamRole::Weight;
  Tensor tensor;
};

// Entry order is a deterministic function of the spec: layer order, weight
// before bias. Layers without parameters contribute nothing.
struct ModelParams {
  std::vector<ParamEntry> entries;
};

using Gradients = ModelParams;

size_t param_count(const ModelSpec& spec);
ModelParams zero_params(const ModelSpec& spec);

// Weights uniform in +-gain*sqrt(1/fan_in), biases zero. The default gain
// of 1 is what client models use; deep relu stacks pass sqrt(6).
ModelParams init_params(const ModelSpec& spec, uint64_t seed,
                        double gain = 1.0);

// batch is [N, ...sample shape]; returns [N, ...output shape].
Tensor forward(const ModelSpec& spec, const ModelParams& params,
               const Tensor& batch);

struct LossGrad {
  double loss = 0.0;
  Gradients grads;
};

// Cross-entropy with integer class targets (mean over the batch).
LossGrad loss_and_grad(const ModelSpec& spec, const ModelParams& params,
                       const Tensor& inputs, const std::vector<int>& targets);
// Cross-entropy against soft target rows [N,L], or mean-squared error
// against a target tensor of the output shape, depending on spec.loss.
LossGrad loss_and_grad(const ModelSpec& spec, const ModelParams& params,
                       const Tensor& inputs, const Tensor& targets);

// Loss without gradients; the finite-difference checker perturbs params
// and only needs this.
double loss_value(const ModelSpec& spec, const ModelParams& params,
                  const Tensor& inputs, const std::vector<int>& targets);
double loss_value(const ModelSpec& spec, const ModelParams& params,
                  const Tensor& inputs, const Tensor& targets);

ModelParams sgd_step(const ModelParams& params, const Gradients& grads,
                     double eta);

std::vector<double> flatten(const ModelParams& params);
ModelParams unflatten(const ModelSpec& spec, const std::vector<double>& flat);

// Reference architectures.
ModelSpec mnist_mlp();
ModelSpec cifar_cnn();
ModelSpec mnist_autoencoder();

}  // namespace fedleak
