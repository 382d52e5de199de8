#include "fedleak/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fedleak/rng.hpp"

namespace fedleak {

namespace {

constexpr double kRelFloor = 1e-5;

double rel_err(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), kRelFloor});
  return std::abs(analytic - numeric) / denom;
}

template <typename Targets>
double max_rel_err_impl(const ModelSpec& spec, ModelParams params,
                        const Tensor& inputs, const Targets& targets,
                        double h) {
  LossGrad lg = loss_and_grad(spec, params, inputs, targets);
  double worst = 0.0;
  for (size_t e = 0; e < params.entries.size(); ++e) {
    Tensor& t = params.entries[e].tensor;
    for (size_t i = 0; i < t.numel(); ++i) {
      double saved = t.values[i];
      t.values[i] = saved + h;
      double lp = loss_value(spec, params, inputs, targets);
      t.values[i] = saved - h;
      double lm = loss_value(spec, params, inputs, targets);
      t.values[i] = saved;
      double numeric = (lp - lm) / (2.0 * h);
      worst = std::max(
          worst, rel_err(lg.grads.entries[e].tensor.values[i], numeric));
    }
  }
  return worst;
}

struct CheckCase {
  std::string name;
  ModelSpec spec;
  std::vector<size_t> batch_shape;  // includes the batch dimension
  bool soft_targets = false;        // distributions instead of class indices
};

std::vector<CheckCase> case_list() {
  std::vector<CheckCase> cases;
  {
    CheckCase c;
    c.name = "dense-softmax-ce";
    c.spec.layers = {LayerSpec::dense(5, 4), LayerSpec::softmax()};
    c.spec.loss = LossKind::CrossEntropy;
    c.batch_shape = {3, 5};
    cases.push_back(c);
  }
  {
    CheckCase c;
    c.name = "dense-relu-dense-softmax-ce";
    c.spec.layers = {LayerSpec::dense(6, 7), LayerSpec::relu(),
                     LayerSpec::dense(7, 3), LayerSpec::softmax()};
    c.spec.loss = LossKind::CrossEntropy;
    c.batch_shape = {4, 6};
    cases.push_back(c);
  }
  {
    CheckCase c;
    c.name = "conv-relu-maxpool-flatten-dense-softmax-ce";
    c.spec.layers = {LayerSpec::conv2d(2, 3, 2), LayerSpec::relu(),
                     LayerSpec::maxpool(2),      LayerSpec::flatten(),
                     LayerSpec::dense(12, 4),    LayerSpec::softmax()};
    c.spec.loss = LossKind::CrossEntropy;
    c.batch_shape = {2, 2, 5, 5};
    cases.push_back(c);
  }
  {
    CheckCase c;
    c.name = "conv-stride2-flatten-dense-softmax-ce";
    c.spec.layers = {LayerSpec::conv2d(1, 2, 3, 2), LayerSpec::flatten(),
                     LayerSpec::dense(18, 3), LayerSpec::softmax()};
    c.spec.loss = LossKind::CrossEntropy;
    c.batch_shape = {2, 1, 7, 7};
    cases.push_back(c);
  }
  {
    CheckCase c;
    c.name = "dense-softmax-soft-ce";
    c.spec.layers = {LayerSpec::dense(5, 6), LayerSpec::softmax()};
    c.spec.loss = LossKind::CrossEntropy;
    c.batch_shape = {3, 5};
    c.soft_targets = true;
    cases.push_back(c);
  }
  {
    CheckCase c;
    c.name = "flatten-dense-relu-dense-mse";
    c.spec.layers = {LayerSpec::flatten(), LayerSpec::dense(8, 5),
                     LayerSpec::relu(), LayerSpec::dense(5, 8)};
    c.spec.loss = LossKind::MeanSquaredError;
    c.batch_shape = {3, 2, 2, 2};
    c.soft_targets = true;
    cases.push_back(c);
  }
  {
    // Standalone softmax backward (not fused with the loss).
    CheckCase c;
    c.name = "dense-softmax-mse";
    c.spec.layers = {LayerSpec::dense(6, 4), LayerSpec::softmax()};
    c.spec.loss = LossKind::MeanSquaredError;
    c.batch_shape = {3, 6};
    c.soft_targets = true;
    cases.push_back(c);
  }
  {
    CheckCase c;
    c.name = "conv-relu-conv-maxpool-flatten-dense-mse";
    c.spec.layers = {LayerSpec::conv2d(1, 2, 3),    LayerSpec::relu(),
                     LayerSpec::conv2d(2, 2, 2),    LayerSpec::maxpool(2),
                     LayerSpec::flatten(),          LayerSpec::dense(8, 4)};
    c.spec.loss = LossKind::MeanSquaredError;
    c.batch_shape = {2, 1, 7, 7};
    c.soft_targets = true;
    cases.push_back(c);
  }
  return cases;
}

}  // namespace

double max_grad_rel_err(const ModelSpec& spec, const ModelParams& params,
                        const Tensor& inputs,
                        const std::vector<int>& targets, double h) {
  return max_rel_err_impl(spec, params, inputs, targets, h);
}

double max_grad_rel_err(const ModelSpec& spec, const ModelParams& params,
                        const Tensor& inputs, const Tensor& targets,
                        double h) {
  return max_rel_err_impl(spec, params, inputs, targets, h);
}

std::vector<GradCheckReport> run_gradient_checks(size_t instances_per_case,
                                                 uint64_t seed) {
  std::vector<GradCheckReport> reports;
  for (const auto& c : case_list()) {
    GradCheckReport rep;
    rep.case_name = c.name;
    std::vector<size_t> sample_shape(c.batch_shape.begin() + 1,
                                     c.batch_shape.end());
    auto out_shape = model_output_shape(c.spec, sample_shape);
    size_t out_dim = shape_numel(out_shape);
    size_t n = c.batch_shape[0];
    for (size_t inst = 0; inst < instances_per_case; ++inst) {
      uint64_t s = mix_seed(seed, kStreamInit, reports.size(), inst);
      ModelParams params = init_params(c.spec, s);
      Rng rng = make_rng(mix_seed(seed, kStreamSynth, reports.size(), inst));
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Tensor inputs = Tensor::zeros(c.batch_shape);
      for (double& v : inputs.values) v = u(rng);

      double err;
      if (c.soft_targets) {
        Tensor targets = Tensor::zeros({n, out_dim});
        if (c.spec.loss == LossKind::CrossEntropy) {
          // Rows must be distributions for the soft cross-entropy path.
          for (size_t r = 0; r < n; ++r) {
            double sum = 0.0;
            for (size_t i = 0; i < out_dim; ++i) {
              double v = std::abs(u(rng)) + 1e-3;
              targets.values[r * out_dim + i] = v;
              sum += v;
            }
            for (size_t i = 0; i < out_dim; ++i)
              targets.values[r * out_dim + i] /= sum;
          }
        } else {
          for (double& v : targets.values) v = u(rng);
        }
        err = max_grad_rel_err(c.spec, params, inputs, targets);
      } else {
        std::uniform_int_distribution<int> cls(0, int(out_dim) - 1);
        std::vector<int> targets(n);
        for (int& t : targets) t = cls(rng);
        err = max_grad_rel_err(c.spec, params, inputs, targets);
      }
      rep.max_rel_err = std::max(rep.max_rel_err, err);
      rep.instances += 1;
    }
    rep.entries_checked = param_count(c.spec);
    reports.push_back(rep);
  }
  return reports;
}

}  // namespace fedleak
