#include "fedleak/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "fedleak/rng.hpp"

namespace fedleak {

std::string layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv2d: return "conv2d";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

LayerSpec LayerSpec::dense(size_t in, size_t out) {
  LayerSpec l;
  l.kind = LayerKind::Dense;
  l.in = in;
  l.out = out;
  return l;
}

LayerSpec LayerSpec::conv2d(size_t in_ch, size_t out_ch, size_t kernel,
                            size_t stride) {
  LayerSpec l;
  l.kind = LayerKind::Conv2d;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = kernel;
  l.stride = stride;
  return l;
}

LayerSpec LayerSpec::maxpool(size_t size) {
  LayerSpec l;
  l.kind = LayerKind::MaxPool;
  l.size = size;
  return l;
}

LayerSpec LayerSpec::relu() {
  LayerSpec l;
  l.kind = LayerKind::Relu;
  return l;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec l;
  l.kind = LayerKind::Flatten;
  return l;
}

LayerSpec LayerSpec::softmax() {
  LayerSpec l;
  l.kind = LayerKind::Softmax;
  return l;
}

namespace {

[[noreturn]] void layer_error(size_t index, const LayerSpec& layer,
                              const std::string& what) {
  throw std::invalid_argument("layer " + std::to_string(index) + " (" +
                              layer_kind_name(layer.kind) + "): " + what);
}

}  // namespace

std::vector<size_t> layer_output_shape(const LayerSpec& layer,
                                       const std::vector<size_t>& in) {
  switch (layer.kind) {
    case LayerKind::Dense:
      if (in.size() != 1 || in[0] != layer.in)
        throw std::invalid_argument("dense expects input [" +
                                    std::to_string(layer.in) + "], got " +
                                    shape_str(in));
      return {layer.out};
    case LayerKind::Conv2d: {
      if (in.size() != 3 || in[0] != layer.in_ch)
        throw std::invalid_argument("conv2d expects input [" +
                                    std::to_string(layer.in_ch) +
                                    ",H,W], got " + shape_str(in));
      size_t h = in[1], w = in[2];
      if (h < layer.kernel || w < layer.kernel)
        throw std::invalid_argument("conv2d kernel larger than input " +
                                    shape_str(in));
      if (layer.stride == 0)
        throw std::invalid_argument("conv2d stride must be positive");
      size_t oh = (h - layer.kernel) / layer.stride + 1;
      size_t ow = (w - layer.kernel) / layer.stride + 1;
      return {layer.out_ch, oh, ow};
    }
    case LayerKind::MaxPool: {
      if (in.size() != 3)
        throw std::invalid_argument("maxpool expects input [C,H,W], got " +
                                    shape_str(in));
      if (layer.size == 0 || in[1] % layer.size != 0 || in[2] % layer.size != 0)
        throw std::invalid_argument("maxpool size " +
                                    std::to_string(layer.size) +
                                    " does not divide input " + shape_str(in));
      return {in[0], in[1] / layer.size, in[2] / layer.size};
    }
    case LayerKind::Relu:
      return in;
    case LayerKind::Flatten:
      return {shape_numel(in)};
    case LayerKind::Softmax:
      if (in.size() != 1)
        throw std::invalid_argument("softmax expects a flat input, got " +
                                    shape_str(in));
      return in;
  }
  throw std::invalid_argument("unknown layer kind");
}

std::vector<size_t> model_output_shape(const ModelSpec& spec,
                                       const std::vector<size_t>& input_shape) {
  if (spec.layers.empty()) throw std::invalid_argument("model has no layers");
  std::vector<size_t> shape = input_shape;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      shape = layer_output_shape(spec.layers[i], shape);
    } catch (const std::invalid_argument& e) {
      layer_error(i, spec.layers[i], e.what());
    }
  }
  return shape;
}

void validate_spec(const ModelSpec& spec,
                   const std::vector<size_t>& input_shape) {
  model_output_shape(spec, input_shape);
  if (spec.loss == LossKind::CrossEntropy &&
      spec.layers.back().kind != LayerKind::Softmax)
    throw std::invalid_argument(
        "cross-entropy models must end with a softmax layer");
}

namespace {

void append_layer_entries(const LayerSpec& layer, size_t index,
                          std::vector<ParamEntry>& entries) {
  switch (layer.kind) {
    case LayerKind::Dense:
      entries.push_back({index, ParamRole::Weight,
                         Tensor::zeros({layer.out, layer.in})});
      entries.push_back({index, ParamRole::Bias, Tensor::zeros({layer.out})});
      break;
    case LayerKind::Conv2d:
      entries.push_back(
          {index, ParamRole::Weight,
           Tensor::zeros({layer.out_ch, layer.in_ch, layer.kernel,
                          layer.kernel})});
      entries.push_back({index, ParamRole::Bias, Tensor::zeros({layer.out_ch})});
      break;
    default:
      break;
  }
}

size_t layer_fan_in(const LayerSpec& layer) {
  if (layer.kind == LayerKind::Dense) return layer.in;
  return layer.in_ch * layer.kernel * layer.kernel;
}

}  // namespace

ModelParams zero_params(const ModelSpec& spec) {
  if (spec.layers.empty()) throw std::invalid_argument("model has no layers");
  ModelParams p;
  for (size_t i = 0; i < spec.layers.size(); ++i)
    append_layer_entries(spec.layers[i], i, p.entries);
  return p;
}

size_t param_count(const ModelSpec& spec) {
  size_t n = 0;
  for (const auto& e : zero_params(spec).entries) n += e.tensor.numel();
  return n;
}

ModelParams init_params(const ModelSpec& spec, uint64_t seed, double gain) {
  ModelParams p = zero_params(spec);
  Rng rng = make_rng(seed);
  for (auto& e : p.entries) {
    if (e.role != ParamRole::Weight) continue;
    double limit = gain * std::sqrt(1.0 / double(layer_fan_in(
                              spec.layers[e.layer_index])));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (double& v : e.tensor.values) v = u(rng);
  }
  return p;
}

namespace {

// Per-layer pointers into the ordered entry list.
struct ParamIndex {
  std::vector<const Tensor*> weight, bias;
};

ParamIndex index_params(const ModelSpec& spec, const ModelParams& params) {
  ParamIndex idx;
  idx.weight.assign(spec.layers.size(), nullptr);
  idx.bias.assign(spec.layers.size(), nullptr);
  for (const auto& e : params.entries) {
    if (e.layer_index >= spec.layers.size())
      throw std::invalid_argument("param entry references layer " +
                                  std::to_string(e.layer_index) +
                                  " beyond the spec");
    if (e.role == ParamRole::Weight)
      idx.weight[e.layer_index] = &e.tensor;
    else
      idx.bias[e.layer_index] = &e.tensor;
  }
  return idx;
}

struct MutParamIndex {
  std::vector<Tensor*> weight, bias;
};

MutParamIndex index_params_mut(const ModelSpec& spec, ModelParams& params) {
  MutParamIndex idx;
  idx.weight.assign(spec.layers.size(), nullptr);
  idx.bias.assign(spec.layers.size(), nullptr);
  for (auto& e : params.entries) {
    if (e.role == ParamRole::Weight)
      idx.weight[e.layer_index] = &e.tensor;
    else
      idx.bias[e.layer_index] = &e.tensor;
  }
  return idx;
}

Tensor dense_forward(const LayerSpec& layer, const Tensor& w, const Tensor& b,
                     const Tensor& x) {
  size_t n = x.shape[0], in = layer.in, out = layer.out;
  Tensor y = Tensor::zeros({n, out});
  // W is [out,in]; transpose once so the inner loop runs over contiguous
  // output slots without a floating-point reduction.
  std::vector<double> wt(in * out);
  for (size_t o = 0; o < out; ++o)
    for (size_t i = 0; i < in; ++i) wt[i * out + o] = w.values[o * in + i];
  for (size_t r = 0; r < n; ++r) {
    double* yr = y.values.data() + r * out;
    for (size_t o = 0; o < out; ++o) yr[o] = b.values[o];
    const double* xr = x.values.data() + r * in;
    for (size_t i = 0; i < in; ++i) {
      double xv = xr[i];
      if (xv == 0.0) continue;
      const double* wr = wt.data() + i * out;
      for (size_t o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
  }
  return y;
}

Tensor conv2d_forward(const LayerSpec& layer, const Tensor& w, const Tensor& b,
                      const Tensor& x) {
  size_t n = x.shape[0], ic = x.shape[1], h = x.shape[2], wd = x.shape[3];
  size_t k = layer.kernel, s = layer.stride, oc = layer.out_ch;
  size_t oh = (h - k) / s + 1, ow = (wd - k) / s + 1;
  Tensor y = Tensor::zeros({n, oc, oh, ow});
  for (size_t r = 0; r < n; ++r) {
    for (size_t o = 0; o < oc; ++o) {
      for (size_t yy = 0; yy < oh; ++yy) {
        for (size_t xx = 0; xx < ow; ++xx) {
          double acc = b.values[o];
          for (size_t c = 0; c < ic; ++c) {
            const double* xp =
                x.values.data() + ((r * ic + c) * h + yy * s) * wd + xx * s;
            const double* wp = w.values.data() + ((o * ic + c) * k) * k;
            for (size_t ky = 0; ky < k; ++ky)
              for (size_t kx = 0; kx < k; ++kx)
                acc += xp[ky * wd + kx] * wp[ky * k + kx];
          }
          y.values[((r * oc + o) * oh + yy) * ow + xx] = acc;
        }
      }
    }
  }
  return y;
}

Tensor maxpool_forward(const LayerSpec& layer, const Tensor& x) {
  size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  size_t p = layer.size, oh = h / p, ow = w / p;
  Tensor y = Tensor::zeros({n, c, oh, ow});
  for (size_t r = 0; r < n; ++r)
    for (size_t ch = 0; ch < c; ++ch)
      for (size_t yy = 0; yy < oh; ++yy)
        for (size_t xx = 0; xx < ow; ++xx) {
          double best = -1e300;
          for (size_t py = 0; py < p; ++py)
            for (size_t px = 0; px < p; ++px) {
              double v = x.values[((r * c + ch) * h + yy * p + py) * w +
                                  xx * p + px];
              if (v > best) best = v;
            }
          y.values[((r * c + ch) * oh + yy) * ow + xx] = best;
        }
  return y;
}

Tensor softmax_forward(const Tensor& x) {
  size_t n = x.shape[0], l = x.shape[1];
  Tensor y = Tensor::zeros({n, l});
  for (size_t r = 0; r < n; ++r) {
    const double* xr = x.values.data() + r * l;
    double* yr = y.values.data() + r * l;
    double m = xr[0];
    for (size_t i = 1; i < l; ++i) m = std::max(m, xr[i]);
    double sum = 0.0;
    for (size_t i = 0; i < l; ++i) {
      yr[i] = std::exp(xr[i] - m);
      sum += yr[i];
    }
    for (size_t i = 0; i < l; ++i) yr[i] /= sum;
  }
  return y;
}

// acts[0] is the input batch; acts[i+1] the output of layer i.
std::vector<Tensor> forward_all(const ModelSpec& spec, const ParamIndex& idx,
                                const Tensor& batch, bool check_finite) {
  if (batch.shape.empty() || batch.shape[0] == 0)
    throw std::invalid_argument("empty batch");
  std::vector<size_t> sample_shape(batch.shape.begin() + 1, batch.shape.end());
  model_output_shape(spec, sample_shape);  // shape check up front

  std::vector<Tensor> acts;
  acts.reserve(spec.layers.size() + 1);
  acts.push_back(batch);
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    const Tensor& x = acts.back();
    Tensor y;
    switch (layer.kind) {
      case LayerKind::Dense:
        y = dense_forward(layer, *idx.weight[i], *idx.bias[i], x);
        break;
      case LayerKind::Conv2d:
        y = conv2d_forward(layer, *idx.weight[i], *idx.bias[i], x);
        break;
      case LayerKind::MaxPool:
        y = maxpool_forward(layer, x);
        break;
      case LayerKind::Relu: {
        y = x;
        for (double& v : y.values) v = v > 0.0 ? v : 0.0;
        break;
      }
      case LayerKind::Flatten: {
        y = x;
        size_t n = x.shape[0];
        y.shape = {n, x.numel() / n};
        break;
      }
      case LayerKind::Softmax:
        y = softmax_forward(x);
        break;
    }
    if (check_finite && !all_finite(y.values))
      throw std::runtime_error("non-finite values after layer " +
                               std::to_string(i) + " (" +
                               layer_kind_name(layer.kind) + ")");
    acts.push_back(std::move(y));
  }
  return acts;
}

void check_param_shapes(const ModelSpec& spec, const ModelParams& params) {
  ModelParams ref = zero_params(spec);
  if (params.entries.size() != ref.entries.size())
    throw std::invalid_argument("param entry count mismatch: expected " +
                                std::to_string(ref.entries.size()) + ", got " +
                                std::to_string(params.entries.size()));
  for (size_t i = 0; i < ref.entries.size(); ++i) {
    const auto& a = ref.entries[i];
    const auto& b = params.entries[i];
    if (a.layer_index != b.layer_index || a.role != b.role ||
        a.tensor.shape != b.tensor.shape)
      throw std::invalid_argument("param entry " + std::to_string(i) +
                                  " does not match the spec (expected layer " +
                                  std::to_string(a.layer_index) + " shape " +
                                  shape_str(a.tensor.shape) + ", got shape " +
                                  shape_str(b.tensor.shape) + ")");
  }
}

}  // namespace

Tensor forward(const ModelSpec& spec, const ModelParams& params,
               const Tensor& batch) {
  check_param_shapes(spec, params);
  ParamIndex idx = index_params(spec, params);
  auto acts = forward_all(spec, idx, batch, false);
  return std::move(acts.back());
}

namespace {

void dense_backward(const LayerSpec& layer, const Tensor& w, const Tensor& x,
                    const Tensor& dy, Tensor& dw, Tensor& db, Tensor& dx) {
  size_t n = x.shape[0], in = layer.in, out = layer.out;
  for (size_t r = 0; r < n; ++r) {
    const double* dyr = dy.values.data() + r * out;
    const double* xr = x.values.data() + r * in;
    double* dxr = dx.values.data() + r * in;
    for (size_t o = 0; o < out; ++o) {
      double g = dyr[o];
      if (g == 0.0) continue;
      db.values[o] += g;
      const double* wr = w.values.data() + o * in;
      double* dwr = dw.values.data() + o * in;
      for (size_t i = 0; i < in; ++i) {
        dwr[i] += g * xr[i];
        dxr[i] += g * wr[i];
      }
    }
  }
}

void conv2d_backward(const LayerSpec& layer, const Tensor& w, const Tensor& x,
                     const Tensor& dy, Tensor& dw, Tensor& db, Tensor& dx) {
  size_t n = x.shape[0], ic = x.shape[1], h = x.shape[2], wd = x.shape[3];
  size_t k = layer.kernel, s = layer.stride, oc = layer.out_ch;
  size_t oh = dy.shape[2], ow = dy.shape[3];
  for (size_t r = 0; r < n; ++r)
    for (size_t o = 0; o < oc; ++o)
      for (size_t yy = 0; yy < oh; ++yy)
        for (size_t xx = 0; xx < ow; ++xx) {
          double g = dy.values[((r * oc + o) * oh + yy) * ow + xx];
          if (g == 0.0) continue;
          db.values[o] += g;
          for (size_t c = 0; c < ic; ++c) {
            const double* xp =
                x.values.data() + ((r * ic + c) * h + yy * s) * wd + xx * s;
            double* dxp =
                dx.values.data() + ((r * ic + c) * h + yy * s) * wd + xx * s;
            const double* wp = w.values.data() + ((o * ic + c) * k) * k;
            double* dwp = dw.values.data() + ((o * ic + c) * k) * k;
            for (size_t ky = 0; ky < k; ++ky)
              for (size_t kx = 0; kx < k; ++kx) {
                dwp[ky * k + kx] += g * xp[ky * wd + kx];
                dxp[ky * wd + kx] += g * wp[ky * k + kx];
              }
          }
        }
}

void maxpool_backward(const LayerSpec& layer, const Tensor& x,
                      const Tensor& dy, Tensor& dx) {
  size_t n = x.shape[0], c = x.shape[1], h = x.shape[2], w = x.shape[3];
  size_t p = layer.size, oh = h / p, ow = w / p;
  for (size_t r = 0; r < n; ++r)
    for (size_t ch = 0; ch < c; ++ch)
      for (size_t yy = 0; yy < oh; ++yy)
        for (size_t xx = 0; xx < ow; ++xx) {
          // Route to the first maximum in scan order; ties are deterministic.
          double best = -1e300;
          size_t bi = 0;
          for (size_t py = 0; py < p; ++py)
            for (size_t px = 0; px < p; ++px) {
              size_t i = ((r * c + ch) * h + yy * p + py) * w + xx * p + px;
              if (x.values[i] > best) {
                best = x.values[i];
                bi = i;
              }
            }
          dx.values[bi] += dy.values[((r * c + ch) * oh + yy) * ow + xx];
        }
}

void softmax_backward(const Tensor& y, const Tensor& dy, Tensor& dx) {
  size_t n = y.shape[0], l = y.shape[1];
  for (size_t r = 0; r < n; ++r) {
    const double* yr = y.values.data() + r * l;
    const double* dyr = dy.values.data() + r * l;
    double* dxr = dx.values.data() + r * l;
    double dot = 0.0;
    for (size_t i = 0; i < l; ++i) dot += dyr[i] * yr[i];
    for (size_t i = 0; i < l; ++i) dxr[i] = yr[i] * (dyr[i] - dot);
  }
}

// Log-probabilities of the final softmax computed from its logits via
// shifted log-sum-exp; numerically safe where ln(softmax(z)) is not.
std::vector<double> log_probs_from_logits(const Tensor& logits) {
  size_t n = logits.shape[0], l = logits.shape[1];
  std::vector<double> lp(n * l);
  for (size_t r = 0; r < n; ++r) {
    const double* zr = logits.values.data() + r * l;
    double m = zr[0];
    for (size_t i = 1; i < l; ++i) m = std::max(m, zr[i]);
    double sum = 0.0;
    for (size_t i = 0; i < l; ++i) sum += std::exp(zr[i] - m);
    double lse = m + std::log(sum);
    for (size_t i = 0; i < l; ++i) lp[r * l + i] = zr[i] - lse;
  }
  return lp;
}

struct LossTargets {
  const std::vector<int>* hard = nullptr;  // class indices
  const Tensor* soft = nullptr;            // distributions or MSE targets
};

LossGrad loss_and_grad_impl(const ModelSpec& spec, const ModelParams& params,
                            const Tensor& inputs, const LossTargets& targets,
                            bool want_grads) {
  check_param_shapes(spec, params);
  if (inputs.shape.empty() || inputs.shape[0] == 0)
    throw std::invalid_argument("empty batch");
  ParamIndex idx = index_params(spec, params);
  auto acts = forward_all(spec, idx, inputs, true);
  size_t n_layers = spec.layers.size();
  size_t n = inputs.shape[0];

  LossGrad result;
  if (want_grads) result.grads = zero_params(spec);
  MutParamIndex gidx;
  if (want_grads) gidx = index_params_mut(spec, result.grads);

  Tensor dcur;          // gradient flowing into layer `upto`'s output
  size_t upto = 0;      // backward starts at layer index upto-1
  const bool ce = spec.loss == LossKind::CrossEntropy;

  if (ce) {
    if (spec.layers.back().kind != LayerKind::Softmax)
      throw std::invalid_argument(
          "cross-entropy models must end with a softmax layer");
    // Terminal softmax is fused with the loss: grads start at the logits.
    const Tensor& logits = acts[n_layers - 1];
    size_t l = logits.shape[1];
    auto lp = log_probs_from_logits(logits);
    double loss = 0.0;
    Tensor dz = Tensor::zeros(logits.shape);
    if (targets.hard) {
      const auto& t = *targets.hard;
      if (t.size() != n)
        throw std::invalid_argument("target count does not match batch size");
      for (size_t r = 0; r < n; ++r) {
        if (t[r] < 0 || size_t(t[r]) >= l)
          throw std::invalid_argument("class target out of range");
        loss -= lp[r * l + size_t(t[r])];
        for (size_t i = 0; i < l; ++i)
          dz.values[r * l + i] = std::exp(lp[r * l + i]) / double(n);
        dz.values[r * l + size_t(t[r])] -= 1.0 / double(n);
      }
    } else {
      const Tensor& y = *targets.soft;
      if (y.shape != std::vector<size_t>{n, l})
        throw std::invalid_argument("soft targets must be shaped [" +
                                    std::to_string(n) + "," +
                                    std::to_string(l) + "], got " +
                                    shape_str(y.shape));
      for (size_t r = 0; r < n; ++r) {
        double rowsum = 0.0;
        for (size_t i = 0; i < l; ++i) {
          loss -= y.values[r * l + i] * lp[r * l + i];
          rowsum += y.values[r * l + i];
        }
        for (size_t i = 0; i < l; ++i)
          dz.values[r * l + i] = (std::exp(lp[r * l + i]) * rowsum -
                                  y.values[r * l + i]) /
                                 double(n);
      }
    }
    result.loss = loss / double(n);
    dcur = std::move(dz);
    upto = n_layers - 1;  // skip the softmax layer itself
  } else {
    const Tensor& out = acts[n_layers];
    if (!targets.soft || targets.soft->shape != out.shape)
      throw std::invalid_argument(
          "mean-squared-error targets must match the output shape " +
          shape_str(out.shape));
    const Tensor& t = *targets.soft;
    double loss = 0.0;
    Tensor dz = Tensor::zeros(out.shape);
    double inv = 1.0 / double(out.numel());
    for (size_t i = 0; i < out.numel(); ++i) {
      double d = out.values[i] - t.values[i];
      loss += d * d;
      dz.values[i] = 2.0 * d * inv;
    }
    result.loss = loss * inv;
    dcur = std::move(dz);
    upto = n_layers;
  }

  if (!want_grads) return result;

  for (size_t li = upto; li-- > 0;) {
    const LayerSpec& layer = spec.layers[li];
    const Tensor& x = acts[li];
    const Tensor& y = acts[li + 1];
    Tensor dx;
    switch (layer.kind) {
      case LayerKind::Dense: {
        dx = Tensor::zeros(x.shape);
        dense_backward(layer, *idx.weight[li], x, dcur,
                       *gidx.weight[li], *gidx.bias[li], dx);
        break;
      }
      case LayerKind::Conv2d: {
        dx = Tensor::zeros(x.shape);
        conv2d_backward(layer, *idx.weight[li], x, dcur,
                        *gidx.weight[li], *gidx.bias[li], dx);
        break;
      }
      case LayerKind::MaxPool: {
        dx = Tensor::zeros(x.shape);
        maxpool_backward(layer, x, dcur, dx);
        break;
      }
      case LayerKind::Relu: {
        dx = dcur;
        for (size_t i = 0; i < dx.numel(); ++i)
          if (x.values[i] <= 0.0) dx.values[i] = 0.0;
        break;
      }
      case LayerKind::Flatten: {
        dx = dcur;
        dx.shape = x.shape;
        break;
      }
      case LayerKind::Softmax: {
        dx = Tensor::zeros(x.shape);
        softmax_backward(y, dcur, dx);
        break;
      }
    }
    dcur = std::move(dx);
  }
  return result;
}

}  // namespace

LossGrad loss_and_grad(const ModelSpec& spec, const ModelParams& params,
                       const Tensor& inputs, const std::vector<int>& targets) {
  if (spec.loss != LossKind::CrossEntropy)
    throw std::invalid_argument(
        "class-index targets require a cross-entropy loss");
  LossTargets t;
  t.hard = &targets;
  return loss_and_grad_impl(spec, params, inputs, t, true);
}

LossGrad loss_and_grad(const ModelSpec& spec, const ModelParams& params,
                       const Tensor& inputs, const Tensor& targets) {
  LossTargets t;
  t.soft = &targets;
  return loss_and_grad_impl(spec, params, inputs, t, true);
}

double loss_value(const ModelSpec& spec, const ModelParams& params,
                  const Tensor& inputs, const std::vector<int>& targets) {
  if (spec.loss != LossKind::CrossEntropy)
    throw std::invalid_argument(
        "class-index targets require a cross-entropy loss");
  LossTargets t;
  t.hard = &targets;
  return loss_and_grad_impl(spec, params, inputs, t, false).loss;
}

double loss_value(const ModelSpec& spec, const ModelParams& params,
                  const Tensor& inputs, const Tensor& targets) {
  LossTargets t;
  t.soft = &targets;
  return loss_and_grad_impl(spec, params, inputs, t, false).loss;
}

ModelParams sgd_step(const ModelParams& params, const Gradients& grads,
                     double eta) {
  if (params.entries.size() != grads.entries.size())
    throw std::invalid_argument("gradient entry count mismatch");
  ModelParams out = params;
  for (size_t i = 0; i < out.entries.size(); ++i) {
    auto& p = out.entries[i].tensor;
    const auto& g = grads.entries[i].tensor;
    if (p.shape != g.shape)
      throw std::invalid_argument("gradient shape mismatch at entry " +
                                  std::to_string(i) + ": " +
                                  shape_str(p.shape) + " vs " +
                                  shape_str(g.shape));
    for (size_t j = 0; j < p.numel(); ++j) p.values[j] -= eta * g.values[j];
  }
  return out;
}

std::vector<double> flatten(const ModelParams& params) {
  std::vector<double> flat;
  size_t total = 0;
  for (const auto& e : params.entries) total += e.tensor.numel();
  flat.reserve(total);
  for (const auto& e : params.entries)
    flat.insert(flat.end(), e.tensor.values.begin(), e.tensor.values.end());
  return flat;
}

ModelParams unflatten(const ModelSpec& spec, const std::vector<double>& flat) {
  ModelParams p = zero_params(spec);
  size_t total = 0;
  for (const auto& e : p.entries) total += e.tensor.numel();
  if (flat.size() != total)
    throw std::invalid_argument("flat vector length " +
                                std::to_string(flat.size()) +
                                " does not match parameter count " +
                                std::to_string(total));
  size_t off = 0;
  for (auto& e : p.entries) {
    std::copy(flat.begin() + off, flat.begin() + off + e.tensor.numel(),
              e.tensor.values.begin());
    off += e.tensor.numel();
  }
  return p;
}

ModelSpec mnist_mlp() {
  ModelSpec spec;
  spec.layers = {LayerSpec::flatten(), LayerSpec::dense(784, 32),
                 LayerSpec::relu(), LayerSpec::dense(32, 10),
                 LayerSpec::softmax()};
  spec.loss = LossKind::CrossEntropy;
  return spec;
}

ModelSpec cifar_cnn() {
  ModelSpec spec;
  spec.layers = {LayerSpec::conv2d(3, 8, 5),  LayerSpec::relu(),
                 LayerSpec::maxpool(2),       LayerSpec::conv2d(8, 16, 5),
                 LayerSpec::relu(),           LayerSpec::maxpool(2),
                 LayerSpec::flatten(),        LayerSpec::dense(400, 10),
                 LayerSpec::softmax()};
  spec.loss = LossKind::CrossEntropy;
  return spec;
}

ModelSpec mnist_autoencoder() {
  ModelSpec spec;
  spec.layers = {LayerSpec::flatten(), LayerSpec::dense(784, 64),
                 LayerSpec::relu(), LayerSpec::dense(64, 784)};
  spec.loss = LossKind::MeanSquaredError;
  return spec;
}

}  // namespace fedleak
